#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "grpolab/rng.hpp"

namespace grpolab::corpus {

enum class Speaker { Seeker, Supporter };

std::string to_string(Speaker s);
Speaker speaker_from_string(const std::string& s);

struct Utterance {
    Speaker speaker = Speaker::Seeker;
    std::string text;
    int round_index = 1;  // 1-based; derived from position, not stored on disk

    bool operator==(const Utterance&) const = default;
};

/// Multi-turn conversation. A round is a seeker/supporter exchange that ends
/// with a supporter reply, so round_count equals the number of supporter
/// utterances.
struct Dialogue {
    std::string id;
    std::vector<Utterance> utterances;

    int round_count() const;
    bool operator==(const Dialogue&) const = default;
};

/// Stamp round_index on each utterance: 1 + number of supporter utterances
/// strictly before it.
void derive_round_indices(Dialogue& dialogue);

/// Throws std::domain_error when an invariant is broken: empty text, bad or
/// inconsistent round indices, or zero rounds.
void validate_dialogue(const Dialogue& dialogue);

/// Gaussian sampling weights over rounds 1..N_r with mu = N_r/2 and
/// sigma = N_r/4.
struct RoundWeights {
    std::vector<double> weights;  // weights[i-1] is the mass on round i
    double mu = 0.0;
    double sigma = 0.0;

    double at(int round) const { return weights.at(static_cast<std::size_t>(round - 1)); }
    int size() const { return static_cast<int>(weights.size()); }
};

RoundWeights gaussian_round_weights(int n_rounds);

/// Draw n_select distinct round indices by sequential weighted sampling
/// without replacement (draw, remove, renormalize), returned ascending.
std::vector<int> sample_rounds(const Dialogue& dialogue, int n_select, Rng& rng);

struct FilterDecision {
    bool keep = true;
    std::string reason;  // set when keep is false

    static FilterDecision Keep() { return {true, {}}; }
    static FilterDecision Drop(std::string why) { return {false, std::move(why)}; }
};

/// Pluggable quality gate. The production paper pipeline used an LLM here;
/// this artifact ships a deterministic heuristic stub.
class FilterJudge {
public:
    virtual ~FilterJudge() = default;
    virtual FilterDecision evaluate(const Dialogue& dialogue) const = 0;
};

/// Drops dialogues with any empty-text utterance, fewer than 2 rounds, or an
/// exact duplicate consecutive utterance pair.
class HeuristicFilterJudge final : public FilterJudge {
public:
    FilterDecision evaluate(const Dialogue& dialogue) const override;
};

class FilterError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Delegates to the judge; judge exceptions surface as FilterError tagged
/// with the dialogue id.
FilterDecision quality_filter(const Dialogue& dialogue, const FilterJudge& judge);

class CorpusIoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// JSON-lines corpus: one object per line with fields `id` and `utterances`
/// (array of {speaker: "seeker"|"supporter", text}). Round indices are
/// derived on load. Malformed records raise CorpusIoError naming the line
/// and field.
std::vector<Dialogue> load_corpus(const std::filesystem::path& path);
void save_corpus(const std::vector<Dialogue>& dialogues, const std::filesystem::path& path);

}  // namespace grpolab::corpus
