#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "grpolab/corpus.hpp"
#include "grpolab/textvec.hpp"

namespace grpolab::reward {

/// Three-stage structured reasoning plus the final response. complete is true
/// iff all three steps and the response are non-empty.
struct ReasoningTrace {
    std::string step_history_analysis;
    std::string step_emotion_analysis;
    std::string step_strategy_analysis;
    std::string response;
    bool complete = false;

    bool operator==(const ReasoningTrace&) const = default;
};

enum class Preference { OutputBetterOrEqual, ReferenceBetter };

/// Four-way pair-wise annotation label kept for data fidelity; collapses to
/// the binary Preference at reward time.
enum class PreferenceLabel { FirstBetter, SecondBetter, BothGood, NeitherAcceptable };

/// First sentence is the reference, second the model output: the output
/// "matches or outperforms" when it is better or both are good.
Preference collapse_preference(PreferenceLabel label);

struct Judgment {
    std::array<bool, 3> step_verdicts = {false, false, false};
    Preference preference = Preference::ReferenceBetter;
    bool format_ok = false;

    bool operator==(const Judgment&) const = default;
};

struct RewardBreakdown {
    int step_score = 0;        // in [-3, 3]
    int preference_score = 0;  // in {-1, +1}
    int format_score = 0;      // in {-1, +1}
    int total = 0;             // sum of the three

    bool operator==(const RewardBreakdown&) const = default;
};

struct RedundancyStats {
    double s_in = 0.0;
    double s_hi = 0.0;
    double tau = 0.0;
    double avg_len = 0.0;
};

/// Keyword-driven stand-in for the trained judge LLM: per-step required
/// keywords plus a target response keyword, with a dialogue history for the
/// redundancy penalty. seed_token conditions the toy policy; when the on-disk
/// record omits it, loaders leave the default 0 (BOS).
struct Scenario {
    std::string id;
    corpus::Dialogue history;
    std::array<std::string, 3> step_keywords;
    std::string response_keyword;
    std::uint32_t seed_token = 0;
};

/// Lenient tagged-section parse: sections are located by tag name
/// (<step1>..</step1>, <step2>, <step3>, <response>), any order. Missing or
/// empty sections leave the field empty and complete=false; nothing throws,
/// format failures are penalized by scoring instead.
ReasoningTrace parse_trace(std::string_view text);

class JudgmentParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Strict line grammar, one `key: value` per line with case-insensitive keys:
///   step1|step2|step3: true|false
///   preference: output|reference
///   format: true|false
/// Missing, duplicate, or unparseable lines raise JudgmentParseError naming
/// the offending key or line.
Judgment parse_judgment(std::string_view text);

/// +1 per correct step and -1 per incorrect; +1 when the output matches or
/// outperforms the reference, else -1; +1 when the format is complete, else -1.
RewardBreakdown score(const Judgment& judgment);

/// Sum (not mean) of per-token negative log-likelihoods of the gold sequence.
/// Each row of `predicted` must be a distribution over the vocabulary summing
/// to 1 +- 1e-9, one per gold token. A gold token with probability 0 raises
/// std::domain_error rather than returning inf.
double judge_loss(const std::vector<std::vector<double>>& predicted,
                  const std::vector<std::uint32_t>& gold);

/// Mean cosine of output i against its G-1 group peers. Needs G >= 2.
double redundancy_in_group(std::span<const textvec::FeatureVector> outputs, std::size_t i);

/// Mean cosine of the output against each history utterance. Needs a
/// non-empty history.
double redundancy_history(const textvec::FeatureVector& output,
                          std::span<const textvec::FeatureVector> history);

/// Sigmoid length gate: 1 / (1 + exp(-alpha * (L - beta))).
double length_coefficient(double avg_len, double alpha, double beta);

/// r / ((1 + tau*s_in) * (1 + tau*s_hi)). Preserves sign and never grows the
/// magnitude for non-negative tau, s_in, s_hi.
double reweight(double r, double s_in, double s_hi, double tau);

/// Deterministic oracle judge: step t is correct iff step t's text contains
/// scenario keyword t (token-level containment), the output is preferred iff
/// the response contains the target keyword, and format_ok mirrors
/// trace.complete.
Judgment oracle_judge(const ReasoningTrace& trace, const Scenario& scenario);

class ScenarioIoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// JSON-lines scenarios: one object per line with fields `id`, `history`
/// (utterance array), `step_keywords` (3 strings), `response_keyword`, plus
/// an optional `seed_token`.
std::vector<Scenario> load_scenarios(const std::filesystem::path& path);
void save_scenarios(const std::vector<Scenario>& scenarios, const std::filesystem::path& path);

}  // namespace grpolab::reward
