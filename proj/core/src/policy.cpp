#include "grpolab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace grpolab::policy {

ToyPolicy::ToyPolicy(int vocab_size) : vocab_size_(vocab_size) {
    if (vocab_size < 2) {
        throw std::domain_error("ToyPolicy: vocab must hold at least BOS and EOS");
    }
    theta_.assign(static_cast<std::size_t>(vocab_size) * static_cast<std::size_t>(vocab_size), 0.0);
}

std::size_t ToyPolicy::index(TokenId prev, TokenId next) const {
    if (prev >= static_cast<TokenId>(vocab_size_) || next >= static_cast<TokenId>(vocab_size_)) {
        throw std::domain_error("ToyPolicy: token id out of range");
    }
    return static_cast<std::size_t>(prev) * static_cast<std::size_t>(vocab_size_) +
           static_cast<std::size_t>(next);
}

std::span<const double> ToyPolicy::row(TokenId prev) const {
    const std::size_t base = index(prev, 0);
    return std::span<const double>(theta_).subspan(base, static_cast<std::size_t>(vocab_size_));
}

std::vector<double> ToyPolicy::row_log_softmax(TokenId prev) const {
    const auto r = row(prev);
    const double m = *std::max_element(r.begin(), r.end());
    double sum = 0.0;
    for (double x : r) sum += std::exp(x - m);
    const double lse = m + std::log(sum);
    std::vector<double> out(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) out[i] = r[i] - lse;
    return out;
}

std::vector<double> ToyPolicy::row_softmax(TokenId prev) const {
    std::vector<double> out = row_log_softmax(prev);
    for (double& x : out) x = std::exp(x);
    return out;
}

void ToyPolicy::apply_update(std::span<const double> grad, double step) {
    if (grad.size() != theta_.size()) {
        throw std::invalid_argument("ToyPolicy::apply_update: gradient size mismatch");
    }
    for (std::size_t i = 0; i < theta_.size(); ++i) theta_[i] += step * grad[i];
}

std::vector<SampledSequence> sample_group(const ToyPolicy& policy, TokenId seed_token,
                                          int n_samples, int max_len, Rng& rng) {
    if (n_samples < 1) throw std::domain_error("sample_group: n_samples must be >= 1");
    if (max_len < 1) throw std::domain_error("sample_group: max_len must be >= 1");
    if (seed_token >= static_cast<TokenId>(policy.vocab_size())) {
        throw std::domain_error("sample_group: seed token out of range");
    }

    // Independent sub-stream per rollout: the i-th sequence is a function of
    // seeds[i] alone, whatever order the sequences are generated in.
    std::vector<std::uint64_t> seeds(static_cast<std::size_t>(n_samples));
    for (auto& s : seeds) s = rng();

    std::vector<SampledSequence> out(static_cast<std::size_t>(n_samples));
    for (std::size_t i = 0; i < out.size(); ++i) {
        Rng sub(seeds[i]);
        SampledSequence& seq = out[i];
        TokenId prev = seed_token;
        for (int step = 0; step < max_len; ++step) {
            const std::vector<double> logp = policy.row_log_softmax(prev);
            std::vector<double> probs(logp.size());
            for (std::size_t v = 0; v < logp.size(); ++v) probs[v] = std::exp(logp[v]);
            const auto tok = static_cast<TokenId>(weighted_index(sub, probs));
            seq.tokens.ids.push_back(tok);
            seq.step_logps.push_back(logp[tok]);
            seq.logprob += logp[tok];
            if (tok == kEos) break;
            prev = tok;
        }
    }
    return out;
}

double logprob(const ToyPolicy& policy, const textvec::TokenSeq& tokens, TokenId seed_token) {
    if (tokens.empty()) throw std::domain_error("logprob: token sequence must be non-empty");
    double sum = 0.0;
    TokenId prev = seed_token;
    for (TokenId tok : tokens.ids) {
        if (tok >= static_cast<TokenId>(policy.vocab_size())) {
            throw std::domain_error("logprob: token id out of range");
        }
        const std::vector<double> logp = policy.row_log_softmax(prev);
        sum += logp[tok];
        prev = tok;
    }
    return sum;
}

double entropy(const ToyPolicy& policy, TokenId prev_token) {
    const std::vector<double> logp = policy.row_log_softmax(prev_token);
    double h = 0.0;
    for (double lp : logp) {
        const double p = std::exp(lp);
        if (p > 0.0) h -= p * lp;
    }
    return h;
}

ToyPolicy snapshot(const ToyPolicy& policy) {
    return policy;
}

void save_checkpoint(const ToyPolicy& policy, const std::filesystem::path& path) {
    nlohmann::json rec;
    rec["version"] = 1;
    rec["vocab_size"] = policy.vocab_size();
    rec["theta"] = std::vector<double>(policy.raw().begin(), policy.raw().end());
    std::ofstream out(path);
    if (!out) throw CheckpointError("cannot open checkpoint for writing: " + path.string());
    out << rec.dump() << '\n';
    if (!out) throw CheckpointError("write failed: " + path.string());
}

ToyPolicy load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw CheckpointError("cannot open checkpoint: " + path.string());
    nlohmann::json rec;
    try {
        in >> rec;
    } catch (const nlohmann::json::parse_error& e) {
        throw CheckpointError("invalid checkpoint JSON: " + std::string(e.what()));
    }
    if (!rec.contains("version") || !rec["version"].is_number_integer()) {
        throw CheckpointError("checkpoint missing 'version'");
    }
    if (rec["version"].get<int>() != 1) {
        throw CheckpointError("unsupported checkpoint version " +
                              std::to_string(rec["version"].get<int>()));
    }
    if (!rec.contains("vocab_size") || !rec.contains("theta")) {
        throw CheckpointError("checkpoint missing 'vocab_size' or 'theta'");
    }
    const int v = rec["vocab_size"].get<int>();
    const auto theta = rec["theta"].get<std::vector<double>>();
    if (theta.size() != static_cast<std::size_t>(v) * static_cast<std::size_t>(v)) {
        throw CheckpointError("checkpoint theta size does not match vocab_size");
    }
    ToyPolicy policy(v);
    std::copy(theta.begin(), theta.end(), policy.raw_mutable().begin());
    return policy;
}

}  // namespace grpolab::policy
