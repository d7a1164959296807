#include "grpolab/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace grpolab::grpo {

namespace {

double population_std(std::span<const double> values, double mean) {
    double acc = 0.0;
    for (double v : values) {
        const double d = v - mean;
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(values.size()));
}

/// Per-rollout ratio and advantage pulled together for the objective and its
/// gradient.
struct RolloutTerm {
    double logprob_new = 0.0;
    double rho = 0.0;
    double advantage = 0.0;
};

std::vector<RolloutTerm> rollout_terms(const policy::ToyPolicy& pol, const GroupRollout& group) {
    if (group.advantages.size() != group.rollouts.size()) {
        throw std::invalid_argument("grpo: advantages not computed for this group");
    }
    std::vector<RolloutTerm> terms(group.rollouts.size());
    for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
        const Rollout& r = group.rollouts[i];
        terms[i].logprob_new = policy::logprob(pol, r.tokens, group.seed_token);
        terms[i].rho = std::exp(terms[i].logprob_new - r.logprob_old);
        terms[i].advantage = group.advantages[i];
    }
    return terms;
}

}  // namespace

void GrpoConfig::validate() const {
    if (group_size < 2) throw ConfigError("group_size must be >= 2");
    if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw ConfigError("clip_eps must lie in (0, 1)");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (!(alpha > 0.0)) throw ConfigError("alpha must be > 0");
    if (!(std_guard > 0.0)) throw ConfigError("std_guard must be > 0");
    if (max_len < 1) throw ConfigError("max_len must be >= 1");
    if (steps < 0) throw ConfigError("steps must be >= 0");
}

GrpoConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    GrpoConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
        }
        auto strip = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        const std::string key = strip(line.substr(0, eq));
        const std::string value = strip(line.substr(eq + 1));
        try {
            if (key == "group_size") {
                cfg.group_size = std::stoi(value);
            } else if (key == "clip_eps") {
                cfg.clip_eps = std::stod(value);
            } else if (key == "learning_rate") {
                cfg.learning_rate = std::stod(value);
            } else if (key == "alpha") {
                cfg.alpha = std::stod(value);
            } else if (key == "beta") {
                cfg.beta = std::stod(value);
            } else if (key == "reweighting") {
                if (value == "true") {
                    cfg.reweighting_enabled = true;
                } else if (value == "false") {
                    cfg.reweighting_enabled = false;
                } else {
                    throw ConfigError("line " + std::to_string(line_no) +
                                      ": reweighting must be true or false");
                }
            } else if (key == "std_guard") {
                cfg.std_guard = std::stod(value);
            } else if (key == "max_len") {
                cfg.max_len = std::stoi(value);
            } else if (key == "steps") {
                cfg.steps = std::stoi(value);
            } else if (key == "seed") {
                cfg.seed = std::stoull(value);
            } else {
                throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key +
                                  "'");
            }
        } catch (const std::invalid_argument&) {
            throw ConfigError("line " + std::to_string(line_no) + ": bad value for '" + key +
                              "': '" + value + "'");
        } catch (const std::out_of_range&) {
            throw ConfigError("line " + std::to_string(line_no) + ": value out of range for '" +
                              key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

void save_config(const GrpoConfig& config, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open config file for writing: " + path.string());
    std::ostringstream ss;
    ss << "group_size=" << config.group_size << '\n'
       << "clip_eps=" << config.clip_eps << '\n'
       << "learning_rate=" << config.learning_rate << '\n'
       << "alpha=" << config.alpha << '\n'
       << "beta=" << config.beta << '\n'
       << "reweighting=" << (config.reweighting_enabled ? "true" : "false") << '\n'
       << "std_guard=" << config.std_guard << '\n'
       << "max_len=" << config.max_len << '\n'
       << "steps=" << config.steps << '\n'
       << "seed=" << config.seed << '\n';
    out << ss.str();
    if (!out) throw ConfigError("write failed: " + path.string());
}

std::vector<double> group_advantages(std::span<const double> rewards, double std_guard) {
    if (rewards.size() < 2) {
        throw std::domain_error("group_advantages: group size must be >= 2");
    }
    if (!(std_guard > 0.0)) {
        throw std::domain_error("group_advantages: std_guard must be positive");
    }
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= static_cast<double>(rewards.size());
    const double sd = population_std(rewards, mean);

    std::vector<double> advantages(rewards.size(), 0.0);
    if (sd < std_guard) return advantages;  // degenerate group: no direction
    for (std::size_t i = 0; i < rewards.size(); ++i) {
        advantages[i] = (rewards[i] - mean) / sd;
    }
    return advantages;
}

double surrogate_objective(const policy::ToyPolicy& policy, const GroupRollout& group,
                           double clip_eps) {
    const std::vector<RolloutTerm> terms = rollout_terms(policy, group);
    double acc = 0.0;
    for (const RolloutTerm& t : terms) {
        const double clipped = std::clamp(t.rho, 1.0 - clip_eps, 1.0 + clip_eps);
        acc += std::min(t.rho * t.advantage, clipped * t.advantage);
    }
    return acc / static_cast<double>(terms.size());
}

std::vector<double> objective_gradient(const policy::ToyPolicy& policy, const GroupRollout& group,
                                       double clip_eps) {
    const auto v = static_cast<std::size_t>(policy.vocab_size());
    std::vector<double> grad(v * v, 0.0);
    const std::vector<RolloutTerm> terms = rollout_terms(policy, group);
    const double inv_g = 1.0 / static_cast<double>(terms.size());

    for (std::size_t i = 0; i < terms.size(); ++i) {
        const RolloutTerm& t = terms[i];
        if (t.advantage == 0.0) continue;
        const double clipped = std::clamp(t.rho, 1.0 - clip_eps, 1.0 + clip_eps);
        const double unclipped_term = t.rho * t.advantage;
        const double clipped_term = clipped * t.advantage;
        // min picks the unclipped branch (the only one with a gradient) when
        // it is no larger; otherwise the constant clipped branch wins.
        if (unclipped_term > clipped_term) continue;

        const double coeff = inv_g * t.rho * t.advantage;
        policy::TokenId prev = group.seed_token;
        for (policy::TokenId tok : group.rollouts[i].tokens.ids) {
            const std::vector<double> probs = policy.row_softmax(prev);
            const std::size_t base = static_cast<std::size_t>(prev) * v;
            for (std::size_t col = 0; col < v; ++col) {
                grad[base + col] -= coeff * probs[col];
            }
            grad[base + tok] += coeff;
            prev = tok;
        }
    }
    return grad;
}

double finite_diff_check(const policy::ToyPolicy& policy, const GroupRollout& group,
                         double clip_eps, double h) {
    if (!(h > 0.0)) throw std::domain_error("finite_diff_check: h must be positive");
    const auto v = static_cast<std::size_t>(policy.vocab_size());
    const std::vector<double> analytic = objective_gradient(policy, group, clip_eps);
    const std::vector<RolloutTerm> terms = rollout_terms(policy, group);

    // Per-rollout d(logprob)/d(theta[p][col]) lets us locate the clip kinks:
    // rho_i(delta) = rho_i * exp(g * delta) crosses 1 +- eps at
    // delta = log(edge / rho_i) / g.
    auto logprob_grad_at = [&](std::size_t i, std::size_t p, std::size_t col) {
        double g = 0.0;
        policy::TokenId prev = group.seed_token;
        for (policy::TokenId tok : group.rollouts[i].tokens.ids) {
            if (static_cast<std::size_t>(prev) == p) {
                const std::vector<double> probs = policy.row_softmax(prev);
                g -= probs[col];
                if (tok == static_cast<policy::TokenId>(col)) g += 1.0;
            }
            prev = tok;
        }
        return g;
    };

    double max_rel = 0.0;
    for (std::size_t p = 0; p < v; ++p) {
        for (std::size_t col = 0; col < v; ++col) {
            bool near_kink = false;
            for (std::size_t i = 0; i < terms.size() && !near_kink; ++i) {
                if (terms[i].advantage == 0.0) continue;
                const double g = logprob_grad_at(i, p, col);
                if (g == 0.0) continue;
                for (const double edge : {1.0 - clip_eps, 1.0 + clip_eps}) {
                    const double delta = std::log(edge / terms[i].rho) / g;
                    if (std::abs(delta) <= 10.0 * h) {
                        near_kink = true;
                        break;
                    }
                }
            }
            if (near_kink) continue;

            policy::ToyPolicy plus = policy;
            plus.add_logit(static_cast<policy::TokenId>(p), static_cast<policy::TokenId>(col), h);
            policy::ToyPolicy minus = policy;
            minus.add_logit(static_cast<policy::TokenId>(p), static_cast<policy::TokenId>(col), -h);
            const double numeric =
                (surrogate_objective(plus, group, clip_eps) -
                 surrogate_objective(minus, group, clip_eps)) /
                (2.0 * h);
            const double rel = std::abs(analytic[p * v + col] - numeric) /
                               std::max(1.0, std::abs(numeric));
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

TrainStepResult train_step(policy::ToyPolicy& policy, const policy::ToyPolicy& old_policy,
                           const reward::Scenario& scenario, const GrpoConfig& config, Rng& rng) {
    config.validate();
    for (const std::string& kw : scenario.step_keywords) {
        if (textvec::tokenize(kw).empty()) {
            throw std::invalid_argument("train_step: scenario '" + scenario.id +
                                        "' has an empty step keyword");
        }
    }
    if (textvec::tokenize(scenario.response_keyword).empty()) {
        throw std::invalid_argument("train_step: scenario '" + scenario.id +
                                    "' has an empty response keyword");
    }

    const ToyVocab& vocab = ToyVocab::instance();
    TrainStepResult result;
    GroupRollout& group = result.group;
    group.history_context = scenario.history;
    group.seed_token = scenario.seed_token;

    const std::vector<policy::SampledSequence> samples =
        policy::sample_group(old_policy, scenario.seed_token, config.group_size, config.max_len,
                             rng);

    std::vector<double> raw_rewards;
    std::vector<textvec::FeatureVector> output_vecs;
    std::vector<textvec::TokenSeq> content_seqs;
    for (const policy::SampledSequence& s : samples) {
        Rollout r;
        r.tokens = s.tokens;
        r.logprob_old = s.logprob;

        const std::string text = vocab.render_trace(r.tokens);
        const reward::ReasoningTrace trace = reward::parse_trace(text);
        const reward::Judgment judgment = reward::oracle_judge(trace, scenario);
        r.reward = static_cast<double>(reward::score(judgment).total);
        raw_rewards.push_back(r.reward);

        const textvec::TokenSeq content = textvec::tokenize(vocab.content_text(r.tokens));
        content_seqs.push_back(content);
        output_vecs.push_back(textvec::embed(content));
        group.rollouts.push_back(std::move(r));
    }

    std::vector<textvec::FeatureVector> history_vecs;
    for (const corpus::Utterance& u : scenario.history.utterances) {
        history_vecs.push_back(textvec::embed(textvec::tokenize(u.text)));
    }

    // Redundancy is recorded as telemetry in both arms; reweighting only
    // applies it when enabled.
    std::vector<double> s_in(group.rollouts.size(), 0.0);
    std::vector<double> s_hi(group.rollouts.size(), 0.0);
    for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
        s_in[i] = reward::redundancy_in_group(output_vecs, i);
        if (!history_vecs.empty()) {
            s_hi[i] = reward::redundancy_history(output_vecs[i], history_vecs);
        }
    }

    std::vector<double> shaped = raw_rewards;
    if (config.reweighting_enabled) {
        double total_len = 0.0;
        for (const Rollout& r : group.rollouts) {
            total_len += static_cast<double>(r.tokens.length());
        }
        const double avg_len = total_len / static_cast<double>(group.rollouts.size());
        const double tau = reward::length_coefficient(avg_len, config.alpha, config.beta);
        for (std::size_t i = 0; i < shaped.size(); ++i) {
            shaped[i] = reward::reweight(raw_rewards[i], s_in[i], s_hi[i], tau);
        }
    }
    for (std::size_t i = 0; i < shaped.size(); ++i) {
        group.rollouts[i].reward_reweighted = shaped[i];
    }

    group.advantages = group_advantages(shaped, config.std_guard);

    for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
        group.rollouts[i].logprob_new =
            policy::logprob(policy, group.rollouts[i].tokens, group.seed_token);
    }

    const std::vector<double> grad = objective_gradient(policy, group, config.clip_eps);
    policy.apply_update(grad, config.learning_rate);

    StepRecord& rec = result.record;
    auto mean_of = [](std::span<const double> xs) {
        double m = 0.0;
        for (double x : xs) m += x;
        return m / static_cast<double>(xs.size());
    };
    rec.mean_reward = mean_of(raw_rewards);
    rec.mean_reweighted = mean_of(shaped);
    rec.mean_s_in = mean_of(s_in);
    rec.mean_s_hi = mean_of(s_hi);

    // Post-update entropy weighted by this group's prev-token visitation:
    // the collapse diagnostic that looks where the policy actually samples.
    std::vector<std::size_t> visits(static_cast<std::size_t>(policy.vocab_size()), 0);
    std::size_t total_visits = 0;
    for (const Rollout& r : group.rollouts) {
        policy::TokenId prev = group.seed_token;
        for (policy::TokenId tok : r.tokens.ids) {
            ++visits[prev];
            ++total_visits;
            prev = tok;
        }
    }
    double h = 0.0;
    for (std::size_t p = 0; p < visits.size(); ++p) {
        if (visits[p] == 0) continue;
        h += static_cast<double>(visits[p]) * policy::entropy(policy, static_cast<policy::TokenId>(p));
    }
    rec.mean_entropy = total_visits > 0 ? h / static_cast<double>(total_visits) : 0.0;
    rec.distinct1 = textvec::distinct_n(content_seqs, 1);
    rec.objective = surrogate_objective(policy, group, config.clip_eps);
    return result;
}

}  // namespace grpolab::grpo
