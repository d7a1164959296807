#include "grpolab/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "grpolab/corpus.hpp"
#include "grpolab/textvec.hpp"
#include "grpolab/toy_vocab.hpp"

namespace grpolab::harness {

namespace {

using grpo::ToyVocab;

std::string pick_words(const std::vector<policy::TokenId>& pool, const ToyVocab& vocab, Rng& rng,
                       int n_words) {
    std::string text;
    for (int w = 0; w < n_words; ++w) {
        if (!text.empty()) text += ' ';
        text += vocab.word(pool[uniform_index(rng, pool.size())]);
    }
    return text;
}

std::vector<policy::TokenId> pick_distinct_content(const ToyVocab& vocab, Rng& rng, int n) {
    std::vector<policy::TokenId> pool = vocab.content_ids();
    std::vector<policy::TokenId> out;
    for (int i = 0; i < n; ++i) {
        const std::size_t idx = uniform_index(rng, pool.size());
        out.push_back(pool[idx]);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(idx));
    }
    return out;
}

double mean_tail(const grpo::TrainStats& stats, double grpo::StepRecord::* field) {
    if (stats.empty()) return 0.0;
    const std::size_t window = std::max<std::size_t>(1, stats.size() / 10);
    double acc = 0.0;
    for (std::size_t i = stats.size() - window; i < stats.size(); ++i) {
        acc += stats[i].*field;
    }
    return acc / static_cast<double>(window);
}

}  // namespace

std::string format_double(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

std::vector<reward::Scenario> generate_scenarios(int n, Rng& rng) {
    if (n < 1) throw std::domain_error("generate_scenarios: n must be >= 1");
    const ToyVocab& vocab = ToyVocab::instance();

    std::vector<reward::Scenario> scenarios;
    scenarios.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        reward::Scenario s;
        {
            std::ostringstream id;
            id << "scenario-" << std::setw(3) << std::setfill('0') << i;
            s.id = id.str();
        }
        // 4 keywords plus a seed token, all distinct: a seed token that
        // equals a keyword would hand out a free verdict.
        const std::vector<policy::TokenId> picks = pick_distinct_content(vocab, rng, 5);
        const std::vector<policy::TokenId> keywords(picks.begin(), picks.begin() + 4);
        for (std::size_t t = 0; t < 3; ++t) s.step_keywords[t] = vocab.word(keywords[t]);
        s.response_keyword = vocab.word(keywords[3]);
        s.seed_token = picks[4];

        // History words avoid the keywords so the history-redundancy penalty
        // is not a tax on getting the answer right.
        std::vector<policy::TokenId> history_pool;
        for (policy::TokenId id : vocab.content_ids()) {
            if (std::find(keywords.begin(), keywords.end(), id) == keywords.end()) {
                history_pool.push_back(id);
            }
        }

        s.history.id = s.id;
        const int rounds = 2 + static_cast<int>(uniform_index(rng, 2));  // 2..3
        std::string prev_text;
        for (int r = 0; r < rounds; ++r) {
            for (const corpus::Speaker speaker :
                 {corpus::Speaker::Seeker, corpus::Speaker::Supporter}) {
                std::string text =
                    pick_words(history_pool, vocab, rng, 2 + static_cast<int>(uniform_index(rng, 3)));
                if (text == prev_text) text += ' ' + pick_words(history_pool, vocab, rng, 1);
                corpus::Utterance u;
                u.speaker = speaker;
                u.text = text;
                s.history.utterances.push_back(std::move(u));
                prev_text = text;
            }
        }
        corpus::derive_round_indices(s.history);
        scenarios.push_back(std::move(s));
    }
    return scenarios;
}

policy::ToyPolicy make_seed_policy() {
    const ToyVocab& vocab = ToyVocab::instance();
    policy::ToyPolicy pol(vocab.size());
    const auto v = static_cast<policy::TokenId>(vocab.size());

    for (policy::TokenId prev = 0; prev < v; ++prev) {
        for (policy::TokenId next = 0; next < v; ++next) {
            double logit = 0.0;
            if (next == policy::kBos) {
                logit = -6.0;  // BOS never reappears
            } else if (prev == policy::kBos || prev == ToyVocab::kSep) {
                // Section openers: start with content, rarely end or re-split.
                logit = vocab.is_content(next) ? 2.0 : -4.0;
            } else if (vocab.is_content(prev)) {
                if (next == ToyVocab::kSep) {
                    logit = 2.3;  // sections run a few words before splitting
                } else if (next == policy::kEos) {
                    logit = -1.0;
                } else {
                    logit = 0.0;  // content stays near-uniform
                }
            }
            pol.set_logit(prev, next, logit);
        }
    }
    return pol;
}

policy::ToyPolicy make_seed_policy(const std::vector<reward::Scenario>& scenarios) {
    const ToyVocab& vocab = ToyVocab::instance();
    policy::ToyPolicy pol = make_seed_policy();

    std::vector<bool> is_keyword(static_cast<std::size_t>(vocab.size()), false);
    for (const reward::Scenario& s : scenarios) {
        for (const std::string& kw : s.step_keywords) {
            if (const auto id = vocab.token(kw)) is_keyword[*id] = true;
        }
        if (const auto id = vocab.token(s.response_keyword)) is_keyword[*id] = true;
    }

    const auto v = static_cast<policy::TokenId>(vocab.size());
    for (policy::TokenId prev = 0; prev < v; ++prev) {
        if (prev == policy::kEos) continue;
        for (policy::TokenId next = ToyVocab::kFirstContent; next < v; ++next) {
            if (is_keyword[next]) pol.add_logit(prev, next, 2.5);
        }
    }
    return pol;
}

RunResult run_training(const grpo::GrpoConfig& config,
                       const std::vector<reward::Scenario>& scenarios) {
    config.validate();
    if (scenarios.empty()) {
        throw std::invalid_argument("run_training: scenario set must be non-empty");
    }

    RunResult result;
    result.config = config;
    result.final_policy = make_seed_policy(scenarios);
    Rng rng(config.seed);

    for (int step = 0; step < config.steps; ++step) {
        const reward::Scenario& scenario =
            scenarios[static_cast<std::size_t>(step) % scenarios.size()];
        const policy::ToyPolicy old_policy = policy::snapshot(result.final_policy);
        grpo::TrainStepResult step_result =
            grpo::train_step(result.final_policy, old_policy, scenario, config, rng);
        step_result.record.step = step;
        result.stats.push_back(step_result.record);
    }
    return result;
}

void write_stats_csv(const grpo::TrainStats& stats, std::ostream& out) {
    out << "step,mean_reward,mean_reweighted,mean_s_in,mean_s_hi,mean_entropy,distinct1,objective\n";
    for (const grpo::StepRecord& r : stats) {
        out << r.step << ',' << format_double(r.mean_reward) << ','
            << format_double(r.mean_reweighted) << ',' << format_double(r.mean_s_in) << ','
            << format_double(r.mean_s_hi) << ',' << format_double(r.mean_entropy) << ','
            << format_double(r.distinct1) << ',' << format_double(r.objective) << '\n';
    }
}

void write_stats_csv(const grpo::TrainStats& stats, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open stats file for writing: " + path.string());
    write_stats_csv(stats, out);
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

ArmSummary summarize_tail(const grpo::TrainStats& stats) {
    ArmSummary s;
    s.final_reward_raw = mean_tail(stats, &grpo::StepRecord::mean_reward);
    s.final_reward_reweighted = mean_tail(stats, &grpo::StepRecord::mean_reweighted);
    s.final_s_in = mean_tail(stats, &grpo::StepRecord::mean_s_in);
    s.final_s_hi = mean_tail(stats, &grpo::StepRecord::mean_s_hi);
    s.final_entropy = mean_tail(stats, &grpo::StepRecord::mean_entropy);
    s.final_distinct1 = mean_tail(stats, &grpo::StepRecord::distinct1);
    return s;
}

grpo::GrpoConfig default_compare_config() {
    grpo::GrpoConfig cfg;
    cfg.learning_rate = 0.6;
    cfg.max_len = 16;
    return cfg;
}

ExperimentReport run_compare(const grpo::GrpoConfig& base_config,
                             const std::vector<reward::Scenario>& scenarios, int n_seeds,
                             int steps) {
    if (n_seeds < 1) throw std::invalid_argument("run_compare: need at least one seed");
    if (steps < 1) throw std::invalid_argument("run_compare: need at least one step");

    ExperimentReport report;
    report.base_config = base_config;
    report.base_config.steps = steps;
    report.steps = steps;

    for (int i = 0; i < n_seeds; ++i) {
        SeedComparison cmp;
        cmp.seed = base_config.seed + static_cast<std::uint64_t>(i);

        grpo::GrpoConfig cfg = base_config;
        cfg.seed = cmp.seed;
        cfg.steps = steps;

        cfg.reweighting_enabled = true;
        RunResult with_rw = run_training(cfg, scenarios);
        cfg.reweighting_enabled = false;
        RunResult without_rw = run_training(cfg, scenarios);

        cmp.stats_with = std::move(with_rw.stats);
        cmp.stats_without = std::move(without_rw.stats);
        cmp.with_reweighting = summarize_tail(cmp.stats_with);
        cmp.without_reweighting = summarize_tail(cmp.stats_without);
        cmp.favorable = cmp.with_reweighting.final_s_in < cmp.without_reweighting.final_s_in &&
                        cmp.with_reweighting.final_entropy > cmp.without_reweighting.final_entropy;
        if (cmp.favorable) ++report.n_favorable;
        report.mean_final_raw_with += cmp.with_reweighting.final_reward_raw;
        report.mean_final_raw_without += cmp.without_reweighting.final_reward_raw;
        report.seeds.push_back(std::move(cmp));
    }

    report.mean_final_raw_with /= static_cast<double>(n_seeds);
    report.mean_final_raw_without /= static_cast<double>(n_seeds);
    report.favorable_required = (4 * n_seeds + 4) / 5;  // ceil(0.8 n)
    report.direction_holds = report.n_favorable >= report.favorable_required;
    report.reward_degradation =
        (report.mean_final_raw_without - report.mean_final_raw_with) /
        std::max(std::abs(report.mean_final_raw_without), 1e-12);
    report.degradation_ok = report.reward_degradation <= 0.2;
    return report;
}

std::string report_to_json(const ExperimentReport& report) {
    nlohmann::json j;
    j["steps"] = report.steps;
    j["config"] = {
        {"group_size", report.base_config.group_size},
        {"clip_eps", report.base_config.clip_eps},
        {"learning_rate", report.base_config.learning_rate},
        {"alpha", report.base_config.alpha},
        {"beta", report.base_config.beta},
        {"std_guard", report.base_config.std_guard},
        {"max_len", report.base_config.max_len},
        {"base_seed", report.base_config.seed},
    };
    auto arm = [](const ArmSummary& a) {
        return nlohmann::json{
            {"final_reward_raw", a.final_reward_raw},
            {"final_reward_reweighted", a.final_reward_reweighted},
            {"final_s_in", a.final_s_in},
            {"final_s_hi", a.final_s_hi},
            {"final_entropy", a.final_entropy},
            {"final_distinct1", a.final_distinct1},
        };
    };
    j["seeds"] = nlohmann::json::array();
    for (const SeedComparison& cmp : report.seeds) {
        j["seeds"].push_back({
            {"seed", cmp.seed},
            {"with_reweighting", arm(cmp.with_reweighting)},
            {"without_reweighting", arm(cmp.without_reweighting)},
            {"favorable", cmp.favorable},
        });
    }
    j["n_favorable"] = report.n_favorable;
    j["favorable_required"] = report.favorable_required;
    j["direction_holds"] = report.direction_holds;
    j["mean_final_raw_with"] = report.mean_final_raw_with;
    j["mean_final_raw_without"] = report.mean_final_raw_without;
    j["reward_degradation"] = report.reward_degradation;
    j["degradation_ok"] = report.degradation_ok;
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// Self-check suites
// ---------------------------------------------------------------------------

namespace {

CheckResult check_round_weights() {
    CheckResult res{"round-weights", true, ""};
    double worst_sum = 0.0;
    for (int n = 1; n <= 100; ++n) {
        const corpus::RoundWeights rw = corpus::gaussian_round_weights(n);
        double sum = 0.0;
        for (double w : rw.weights) {
            sum += w;
            if (!(w > 0.0)) res.passed = false;
        }
        worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
        for (int i = 1; i <= n - 1; ++i) {
            if (std::abs(rw.at(i) - rw.at(n - i)) > 1e-12) res.passed = false;
        }
    }
    if (worst_sum > 1e-12) res.passed = false;
    const corpus::RoundWeights two = corpus::gaussian_round_weights(2);
    if (std::abs(two.at(1) - 0.880797) > 1e-6 || std::abs(two.at(2) - 0.119203) > 1e-6) {
        res.passed = false;
    }
    res.detail = "max |sum-1| = " + format_double(worst_sum);
    return res;
}

CheckResult check_advantages() {
    CheckResult res{"advantage-normalization", true, ""};
    Rng rng(20258);
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
        std::vector<double> rewards(4);
        for (double& r : rewards) r = unit_double(rng) * 10.0 - 5.0;
        const std::vector<double> adv = grpo::group_advantages(rewards, 1e-8);

        double mean = 0.0;
        for (double a : adv) mean += a;
        mean /= 4.0;
        worst = std::max(worst, std::abs(mean));

        double var = 0.0;
        for (double a : adv) var += (a - mean) * (a - mean);
        const double sd = std::sqrt(var / 4.0);
        if (sd > 0.0 && std::abs(sd - 1.0) > 1e-9) res.passed = false;

        const double scale = 0.5 + unit_double(rng) * 3.0;
        const double shift = unit_double(rng) * 20.0 - 10.0;
        std::vector<double> transformed = rewards;
        for (double& r : transformed) r = scale * r + shift;
        const std::vector<double> adv2 = grpo::group_advantages(transformed, 1e-8);
        for (std::size_t i = 0; i < adv.size(); ++i) {
            if (std::abs(adv[i] - adv2[i]) > 1e-12) res.passed = false;
        }
    }
    if (worst > 1e-12) res.passed = false;
    const std::vector<double> flat = {3.0, 3.0, 3.0, 3.0};
    for (double a : grpo::group_advantages(flat, 1e-8)) {
        if (a != 0.0) res.passed = false;
    }
    res.detail = "max |mean| = " + format_double(worst);
    return res;
}

// Straight-line reimplementation of the reweighting math, kept deliberately
// independent of the reward module's code path.
double straightline_reweighted(const std::vector<std::vector<double>>& outputs, std::size_t i,
                               const std::vector<std::vector<double>>& history, double r,
                               double avg_len, double alpha, double beta) {
    auto cos_sim = [](const std::vector<double>& a, const std::vector<double>& b) {
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) {
            dot += a[k] * b[k];
            na += a[k] * a[k];
            nb += b[k] * b[k];
        }
        if (na == 0.0 || nb == 0.0) return 0.0;
        return dot / (std::sqrt(na) * std::sqrt(nb));
    };
    double s_in = 0.0;
    for (std::size_t j = 0; j < outputs.size(); ++j) {
        if (j != i) s_in += cos_sim(outputs[i], outputs[j]);
    }
    s_in /= static_cast<double>(outputs.size() - 1);
    double s_hi = 0.0;
    for (const auto& u : history) s_hi += cos_sim(outputs[i], u);
    s_hi /= static_cast<double>(history.size());
    const double tau = 1.0 / (1.0 + std::exp(-alpha * (avg_len - beta)));
    return r / ((1.0 + tau * s_in) * (1.0 + tau * s_hi));
}

CheckResult check_reweighting_oracle() {
    CheckResult res{"reweighting-oracle", true, ""};
    Rng rng(77151);
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
        constexpr std::size_t dim = 64;
        const std::size_t g = 2 + uniform_index(rng, 5);
        std::vector<std::vector<double>> raw_outputs(g);
        std::vector<textvec::FeatureVector> outputs(g);
        for (std::size_t j = 0; j < g; ++j) {
            raw_outputs[j].resize(dim);
            for (double& x : raw_outputs[j]) {
                x = unit_double(rng) < 0.7 ? 0.0 : std::floor(unit_double(rng) * 5.0);
            }
            outputs[j].counts = raw_outputs[j];
        }
        const std::size_t hist_n = 1 + uniform_index(rng, 6);
        std::vector<std::vector<double>> raw_history(hist_n);
        std::vector<textvec::FeatureVector> history(hist_n);
        for (std::size_t u = 0; u < hist_n; ++u) {
            raw_history[u].resize(dim);
            for (double& x : raw_history[u]) {
                x = unit_double(rng) < 0.7 ? 0.0 : std::floor(unit_double(rng) * 5.0);
            }
            history[u].counts = raw_history[u];
        }
        const std::size_t i = uniform_index(rng, g);
        const double r = unit_double(rng) * 10.0 - 5.0;
        const double avg_len = unit_double(rng) * 30.0;
        const double alpha = 0.1 + unit_double(rng) * 2.0;
        const double beta = unit_double(rng) * 10.0;

        const double s_in = reward::redundancy_in_group(outputs, i);
        const double s_hi = reward::redundancy_history(outputs[i], history);
        const double tau = reward::length_coefficient(avg_len, alpha, beta);
        const double module_value = reward::reweight(r, s_in, s_hi, tau);
        const double oracle_value =
            straightline_reweighted(raw_outputs, i, raw_history, r, avg_len, alpha, beta);

        worst = std::max(worst, std::abs(module_value - oracle_value));
        if (std::abs(module_value - oracle_value) > 1e-12) res.passed = false;
        if (std::abs(module_value) > std::abs(r) + 1e-15) res.passed = false;
        if (r > 0.0 && module_value < 0.0) res.passed = false;
        if (r < 0.0 && module_value > 0.0) res.passed = false;
    }
    res.detail = "max |module - oracle| = " + format_double(worst);
    return res;
}

CheckResult check_gradient(int instances, double tolerance) {
    CheckResult res{"gradient-finite-difference", true, ""};
    Rng rng(90210);
    double worst = 0.0;
    for (int t = 0; t < instances; ++t) {
        constexpr int v = 5;
        policy::ToyPolicy old_policy(v);
        for (policy::TokenId p = 0; p < v; ++p) {
            for (policy::TokenId c = 0; c < v; ++c) {
                old_policy.set_logit(p, c, unit_double(rng) * 2.0 - 1.0);
            }
        }
        grpo::GroupRollout group;
        group.seed_token = static_cast<policy::TokenId>(2 + uniform_index(rng, v - 2));
        const std::vector<policy::SampledSequence> samples =
            policy::sample_group(old_policy, group.seed_token, 4, 6, rng);
        std::vector<double> rewards;
        for (const policy::SampledSequence& s : samples) {
            grpo::Rollout r;
            r.tokens = s.tokens;
            r.logprob_old = s.logprob;
            group.rollouts.push_back(std::move(r));
            rewards.push_back(std::floor(unit_double(rng) * 11.0) - 5.0);
        }
        group.advantages = grpo::group_advantages(rewards, 1e-8);

        policy::ToyPolicy current = old_policy;
        for (policy::TokenId p = 0; p < v; ++p) {
            for (policy::TokenId c = 0; c < v; ++c) {
                current.add_logit(p, c, unit_double(rng) * 0.4 - 0.2);
            }
        }
        const double err = grpo::finite_diff_check(current, group, 0.2, 1e-5);
        worst = std::max(worst, err);
        if (err >= tolerance) res.passed = false;
    }
    res.detail = "max relative error = " + format_double(worst) + " over " +
                 std::to_string(instances) + " instances";
    return res;
}

CheckResult check_scoring() {
    CheckResult res{"scoring-enumeration", true, ""};
    for (int mask = 0; mask < 32; ++mask) {
        reward::Judgment j;
        j.step_verdicts = {(mask & 1) != 0, (mask & 2) != 0, (mask & 4) != 0};
        j.preference = (mask & 8) != 0 ? reward::Preference::OutputBetterOrEqual
                                       : reward::Preference::ReferenceBetter;
        j.format_ok = (mask & 16) != 0;
        const reward::RewardBreakdown b = reward::score(j);
        if (b.total != b.step_score + b.preference_score + b.format_score) res.passed = false;
        const int expected = ((mask & 1) ? 1 : -1) + ((mask & 2) ? 1 : -1) + ((mask & 4) ? 1 : -1) +
                             ((mask & 8) ? 1 : -1) + ((mask & 16) ? 1 : -1);
        if (b.total != expected) res.passed = false;
        if (b.total < -5 || b.total > 5 || b.total % 2 == 0) res.passed = false;
    }
    try {
        const reward::Judgment j = reward::parse_judgment(
            "step1: true\nstep2: true\nstep3: true\npreference: output\nformat: true\n");
        if (reward::score(j).total != 5) res.passed = false;
    } catch (const std::exception&) {
        res.passed = false;
    }
    res.detail = "32 judgment combinations";
    return res;
}

}  // namespace

std::vector<CheckResult> self_check() {
    std::vector<CheckResult> results;
    results.push_back(check_round_weights());
    results.push_back(check_advantages());
    results.push_back(check_reweighting_oracle());
    results.push_back(check_gradient(20, 1e-4));
    results.push_back(check_scoring());
    return results;
}

bool all_passed(const std::vector<CheckResult>& results) {
    return std::all_of(results.begin(), results.end(),
                       [](const CheckResult& r) { return r.passed; });
}

}  // namespace grpolab::harness
