#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "grpolab/policy.hpp"
#include "grpolab/textvec.hpp"

namespace grpolab::grpo {

/// Fixed 32-token vocabulary for the toy pipeline: BOS, EOS, a section
/// separator, and 29 content words. A sampled token stream is rendered into
/// the tagged trace grammar by splitting the content on the first three
/// separators:
///
///   part 1 -> <step1>..</step1>, part 2 -> <step2>..</step2>,
///   part 3 -> <step3>..</step3>, the rest -> <response>..</response>
///
/// Parts the stream never reached are omitted, so under-segmented outputs
/// parse as incomplete traces and pay the format penalty.
class ToyVocab {
public:
    static constexpr policy::TokenId kSep = 2;
    static constexpr policy::TokenId kFirstContent = 3;

    static const ToyVocab& instance();

    int size() const { return static_cast<int>(words_.size()); }
    std::string_view word(policy::TokenId id) const;
    std::optional<policy::TokenId> token(std::string_view word) const;
    bool is_content(policy::TokenId id) const {
        return id >= kFirstContent && id < static_cast<policy::TokenId>(size());
    }
    std::vector<policy::TokenId> content_ids() const;

    /// Tagged trace text for a sampled token stream (see class comment).
    std::string render_trace(const textvec::TokenSeq& tokens) const;

    /// Just the content words joined by spaces; the redundancy embedding
    /// operand, so shared structural tokens do not inflate similarity.
    std::string content_text(const textvec::TokenSeq& tokens) const;

private:
    ToyVocab();
    std::vector<std::string> words_;
};

}  // namespace grpolab::grpo
