#include "grpolab/toy_vocab.hpp"

#include <stdexcept>

namespace grpolab::grpo {

ToyVocab::ToyVocab() {
    words_ = {
        "<bos>", "<eos>", "<sep>",
        // 29 content words
        "listen", "feel",   "calm",   "worry",  "stress", "hope",  "plan",
        "rest",   "talk",   "friend", "family", "work",   "sleep", "breathe",
        "support", "care",  "fear",   "joy",    "sad",    "help",  "time",
        "change", "heart",  "mind",   "safe",   "walk",   "music", "warm",
        "today",
    };
    if (words_.size() != static_cast<std::size_t>(policy::ToyPolicy::kDefaultVocabSize)) {
        throw std::logic_error("ToyVocab: word table must match the default vocab size");
    }
}

const ToyVocab& ToyVocab::instance() {
    static const ToyVocab vocab;
    return vocab;
}

std::string_view ToyVocab::word(policy::TokenId id) const {
    if (id >= words_.size()) throw std::domain_error("ToyVocab: token id out of range");
    return words_[id];
}

std::optional<policy::TokenId> ToyVocab::token(std::string_view w) const {
    for (std::size_t i = 0; i < words_.size(); ++i) {
        if (words_[i] == w) return static_cast<policy::TokenId>(i);
    }
    return std::nullopt;
}

std::vector<policy::TokenId> ToyVocab::content_ids() const {
    std::vector<policy::TokenId> out;
    for (policy::TokenId id = kFirstContent; id < static_cast<policy::TokenId>(size()); ++id) {
        out.push_back(id);
    }
    return out;
}

std::string ToyVocab::render_trace(const textvec::TokenSeq& tokens) const {
    std::vector<std::vector<policy::TokenId>> parts;
    parts.emplace_back();
    for (policy::TokenId id : tokens.ids) {
        if (id == policy::kBos || id == policy::kEos) continue;
        if (id == kSep) {
            if (parts.size() < 4) parts.emplace_back();
            continue;  // separators past the third carry no structure
        }
        parts.back().push_back(id);
    }

    static constexpr const char* kTags[4] = {"step1", "step2", "step3", "response"};
    std::string out;
    for (std::size_t p = 0; p < parts.size(); ++p) {
        if (p > 0) out += ' ';
        out += '<';
        out += kTags[p];
        out += '>';
        for (policy::TokenId id : parts[p]) {
            out += ' ';
            out += word(id);
        }
        out += " </";
        out += kTags[p];
        out += '>';
    }
    return out;
}

std::string ToyVocab::content_text(const textvec::TokenSeq& tokens) const {
    std::string out;
    for (policy::TokenId id : tokens.ids) {
        if (!is_content(id)) continue;
        if (!out.empty()) out += ' ';
        out += word(id);
    }
    return out;
}

}  // namespace grpolab::grpo
