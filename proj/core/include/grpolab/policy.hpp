#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "grpolab/corpus.hpp"
#include "grpolab/rng.hpp"
#include "grpolab/textvec.hpp"

namespace grpolab::policy {

using TokenId = std::uint32_t;

inline constexpr TokenId kBos = 0;
inline constexpr TokenId kEos = 1;

/// First-order (bigram) autoregressive softmax policy: theta is a VxV logit
/// matrix, row = previous token, column = next-token logit. Small enough that
/// log-probabilities, entropies, and gradients are exact.
class ToyPolicy {
public:
    static constexpr int kDefaultVocabSize = 32;

    explicit ToyPolicy(int vocab_size = kDefaultVocabSize);

    int vocab_size() const { return vocab_size_; }

    double logit(TokenId prev, TokenId next) const {
        return theta_[index(prev, next)];
    }
    void set_logit(TokenId prev, TokenId next, double value) {
        theta_[index(prev, next)] = value;
    }
    void add_logit(TokenId prev, TokenId next, double delta) {
        theta_[index(prev, next)] += delta;
    }

    std::span<const double> row(TokenId prev) const;

    /// log softmax of a row; the single arithmetic path shared by sampling,
    /// scoring, and gradients so recomputed log-probs match bit for bit.
    std::vector<double> row_log_softmax(TokenId prev) const;
    std::vector<double> row_softmax(TokenId prev) const;

    /// In-place gradient-ascent update: theta += step * grad (VxV row-major).
    void apply_update(std::span<const double> grad, double step);

    std::span<const double> raw() const { return theta_; }
    std::span<double> raw_mutable() { return theta_; }

    bool operator==(const ToyPolicy&) const = default;

private:
    std::size_t index(TokenId prev, TokenId next) const;

    int vocab_size_;
    std::vector<double> theta_;
};

/// One sampled sequence: tokens end with EOS or at max_len, per-step
/// log-probabilities summed in sampling order.
struct SampledSequence {
    textvec::TokenSeq tokens;
    std::vector<double> step_logps;
    double logprob = 0.0;
};

/// One group member during optimization.
struct Rollout {
    textvec::TokenSeq tokens;
    double logprob_old = 0.0;
    double logprob_new = 0.0;
    double reward = 0.0;
    double reward_reweighted = 0.0;
};

/// G rollouts plus their normalized advantages and the conversation context
/// they answered.
struct GroupRollout {
    std::vector<Rollout> rollouts;
    std::vector<double> advantages;
    corpus::Dialogue history_context;
    TokenId seed_token = kBos;
};

/// Ancestral sampling of n_samples sequences from the row-softmax chain
/// starting at seed_token, stopping at EOS or max_len. Each sequence draws
/// from its own sub-stream seeded from rng, so parallel and sequential
/// sampling agree.
std::vector<SampledSequence> sample_group(const ToyPolicy& policy, TokenId seed_token,
                                          int n_samples, int max_len, Rng& rng);

/// Sum of per-step log-softmax values for tokens following seed_token.
/// Recomputation on a sampled rollout reproduces the recorded value exactly.
double logprob(const ToyPolicy& policy, const textvec::TokenSeq& tokens, TokenId seed_token);

/// Shannon entropy (nats) of the next-token distribution after prev_token.
double entropy(const ToyPolicy& policy, TokenId prev_token);

/// Deep immutable copy; later updates to the live policy leave it untouched.
ToyPolicy snapshot(const ToyPolicy& policy);

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Versioned JSON checkpoint {version, vocab_size, theta}; doubles round-trip
/// exactly.
void save_checkpoint(const ToyPolicy& policy, const std::filesystem::path& path);
ToyPolicy load_checkpoint(const std::filesystem::path& path);

}  // namespace grpolab::policy
