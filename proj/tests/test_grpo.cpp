#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "grpolab/grpo.hpp"
#include "grpolab/harness.hpp"

using namespace grpolab;
using namespace grpolab::grpo;

namespace {

/// Group with hand-set logprob_old values; tokens sampled from the given
/// policy so the token chains are valid.
GroupRollout sampled_group(const policy::ToyPolicy& pol, policy::TokenId seed, int g, int max_len,
                           Rng& rng) {
    GroupRollout group;
    group.seed_token = seed;
    for (const auto& s : policy::sample_group(pol, seed, g, max_len, rng)) {
        Rollout r;
        r.tokens = s.tokens;
        r.logprob_old = s.logprob;
        group.rollouts.push_back(std::move(r));
    }
    return group;
}

policy::ToyPolicy random_policy(int v, Rng& rng, double scale = 1.0) {
    policy::ToyPolicy p(v);
    for (policy::TokenId a = 0; a < static_cast<policy::TokenId>(v); ++a) {
        for (policy::TokenId b = 0; b < static_cast<policy::TokenId>(v); ++b) {
            p.set_logit(a, b, (unit_double(rng) * 2.0 - 1.0) * scale);
        }
    }
    return p;
}

reward::Scenario tiny_scenario() {
    reward::Scenario s;
    s.id = "t";
    s.history.id = "t";
    s.history.utterances = {{corpus::Speaker::Seeker, "worry about work", 1},
                            {corpus::Speaker::Supporter, "talk it through", 1}};
    corpus::derive_round_indices(s.history);
    s.step_keywords = {"calm", "fear", "listen"};
    s.response_keyword = "breathe";
    s.seed_token = 10;
    return s;
}

}  // namespace

TEST_SUITE("grpo") {

TEST_CASE("group_advantages: uniform group is degenerate") {
    const std::vector<double> r = {1, 1, 1, 1};
    CHECK(group_advantages(r, 1e-8) == std::vector<double>{0, 0, 0, 0});
}

TEST_CASE("group_advantages: {2,0} normalizes to {1,-1}") {
    const std::vector<double> r = {2, 0};
    const std::vector<double> a = group_advantages(r, 1e-8);
    CHECK(a[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(a[1] == doctest::Approx(-1.0).epsilon(1e-15));
}

TEST_CASE("group_advantages: {3,1,1,-1} pins the population-std reading") {
    const std::vector<double> r = {3, 1, 1, -1};
    const std::vector<double> a = group_advantages(r, 1e-8);
    CHECK(a[0] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    CHECK(a[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(a[2] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(a[3] == doctest::Approx(-std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("group_advantages: G < 2 is a domain error") {
    CHECK_THROWS_AS(group_advantages(std::vector<double>{1.0}, 1e-8), std::domain_error);
}

TEST_CASE("group_advantages: mean 0, population std 1, shift/scale invariant") {
    Rng rng(606);
    for (int t = 0; t < 500; ++t) {
        std::vector<double> r(4);
        for (double& x : r) x = unit_double(rng) * 10.0 - 5.0;
        const std::vector<double> a = group_advantages(r, 1e-8);

        double mean = 0.0;
        for (double x : a) mean += x;
        CHECK(std::abs(mean / 4.0) <= 1e-12);

        double var = 0.0;
        for (double x : a) var += x * x;
        CHECK(std::abs(std::sqrt(var / 4.0) - 1.0) <= 1e-9);

        std::vector<double> transformed = r;
        const double c = 0.5 + unit_double(rng) * 4.0;
        const double d = unit_double(rng) * 8.0 - 4.0;
        for (double& x : transformed) x = c * x + d;
        const std::vector<double> a2 = group_advantages(transformed, 1e-8);
        for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(a[i] - a2[i]) <= 1e-12);
    }
}

TEST_CASE("surrogate: at the old policy the objective is the mean advantage") {
    Rng rng(31);
    const policy::ToyPolicy pol = random_policy(6, rng);
    GroupRollout group = sampled_group(pol, 2, 4, 6, rng);
    group.advantages = {0.5, -1.5, 1.0, 0.25};
    const double expected = (0.5 - 1.5 + 1.0 + 0.25) / 4.0;
    CHECK(surrogate_objective(pol, group, 0.2) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("surrogate: zero advantages give zero objective and zero gradient") {
    Rng rng(32);
    const policy::ToyPolicy pol = random_policy(6, rng);
    GroupRollout group = sampled_group(pol, 2, 4, 6, rng);
    group.advantages = {0, 0, 0, 0};
    CHECK(surrogate_objective(pol, group, 0.2) == 0.0);
    for (double g : objective_gradient(pol, group, 0.2)) CHECK(g == 0.0);
}

TEST_CASE("surrogate: clip arithmetic min(2, 1.2) for a ratio of 2") {
    Rng rng(33);
    const policy::ToyPolicy pol = random_policy(4, rng);
    GroupRollout group = sampled_group(pol, 2, 2, 4, rng);
    // Force rho: current logprob minus ln 2 as the recorded old value.
    const double lp0 = policy::logprob(pol, group.rollouts[0].tokens, 2);
    const double lp1 = policy::logprob(pol, group.rollouts[1].tokens, 2);
    group.rollouts[0].logprob_old = lp0 - std::log(2.0);  // rho = 2
    group.rollouts[1].logprob_old = lp1;                  // rho = 1
    group.advantages = {1.0, 0.0};
    // Contribution: min(2*1, 1.2*1)/2 = 0.6.
    CHECK(surrogate_objective(pol, group, 0.2) == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("surrogate: invariant to per-row logit shifts of either policy") {
    Rng rng(34);
    policy::ToyPolicy old_pol = random_policy(6, rng);
    GroupRollout group = sampled_group(old_pol, 3, 4, 6, rng);
    group.advantages = {1.0, -0.5, 0.25, -0.75};
    policy::ToyPolicy cur = random_policy(6, rng, 0.5);
    const double before = surrogate_objective(cur, group, 0.2);

    for (policy::TokenId b = 0; b < 6; ++b) cur.add_logit(3, b, 1.75);
    CHECK(surrogate_objective(cur, group, 0.2) == doctest::Approx(before).epsilon(1e-10));
}

TEST_CASE("surrogate: each term is bounded by max(|rho|, 1+eps)*|A|") {
    Rng rng(35);
    const policy::ToyPolicy old_pol = random_policy(5, rng);
    for (int t = 0; t < 50; ++t) {
        GroupRollout group = sampled_group(old_pol, 2, 2, 5, rng);
        std::vector<double> rewards = {unit_double(rng) * 10 - 5, unit_double(rng) * 10 - 5};
        group.advantages = group_advantages(rewards, 1e-8);
        const policy::ToyPolicy cur = random_policy(5, rng, 0.8);
        double bound = 0.0;
        for (std::size_t i = 0; i < 2; ++i) {
            const double rho = std::exp(policy::logprob(cur, group.rollouts[i].tokens, 2) -
                                        group.rollouts[i].logprob_old);
            bound += std::max(std::abs(rho), 1.2) * std::abs(group.advantages[i]);
        }
        CHECK(std::abs(surrogate_objective(cur, group, 0.2)) <= bound / 2.0 + 1e-12);
    }
}

TEST_CASE("gradient: REINFORCE reduction at theta == theta_old") {
    Rng rng(36);
    const policy::ToyPolicy pol = random_policy(5, rng);
    GroupRollout group = sampled_group(pol, 2, 1, 5, rng);
    group.rollouts.push_back(group.rollouts[0]);  // pad to G=2 with same rollout
    group.advantages = {1.0, 0.0};

    const std::vector<double> grad = objective_gradient(pol, group, 0.2);

    // Hand-built
    //   grad logprob = sum_t (one_hot(tok_t) - softmax(row_prev_t)) / G
    std::vector<double> expected(25, 0.0);
    policy::TokenId prev = 2;
    for (policy::TokenId tok : group.rollouts[0].tokens.ids) {
        const std::vector<double> probs = pol.row_softmax(prev);
        for (std::size_t col = 0; col < 5; ++col) {
            expected[static_cast<std::size_t>(prev) * 5 + col] -= probs[col] / 2.0;
        }
        expected[static_cast<std::size_t>(prev) * 5 + tok] += 1.0 / 2.0;
        prev = tok;
    }
    for (std::size_t i = 0; i < 25; ++i) {
        CHECK(grad[i] == doctest::Approx(expected[i]).epsilon(1e-12));
    }
}

TEST_CASE("gradient: finite differences agree on random instances") {
    Rng rng(37);
    for (int t = 0; t < 5; ++t) {
        const policy::ToyPolicy old_pol = random_policy(5, rng);
        GroupRollout group = sampled_group(old_pol, 2, 4, 6, rng);
        std::vector<double> rewards(4);
        for (double& r : rewards) r = std::floor(unit_double(rng) * 11.0) - 5.0;
        group.advantages = group_advantages(rewards, 1e-8);

        policy::ToyPolicy cur = old_pol;
        for (policy::TokenId a = 0; a < 5; ++a) {
            for (policy::TokenId b = 0; b < 5; ++b) {
                cur.add_logit(a, b, unit_double(rng) * 0.4 - 0.2);
            }
        }
        CHECK(finite_diff_check(cur, group, 0.2, 1e-5) < 1e-4);
    }
}

TEST_CASE("finite_diff_check: zero-advantage group reports zero error") {
    Rng rng(38);
    const policy::ToyPolicy pol = random_policy(5, rng);
    GroupRollout group = sampled_group(pol, 2, 3, 5, rng);
    group.advantages = {0, 0, 0};
    CHECK(finite_diff_check(pol, group, 0.2, 1e-5) == 0.0);
}

TEST_CASE("train_step: disabled reweighting leaves rewards untouched") {
    GrpoConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.reweighting_enabled = false;
    policy::ToyPolicy pol = harness::make_seed_policy();
    const policy::ToyPolicy old_pol = policy::snapshot(pol);
    Rng rng(777);
    const TrainStepResult res = train_step(pol, old_pol, tiny_scenario(), cfg, rng);
    CHECK(res.record.mean_reward == res.record.mean_reweighted);
    for (const Rollout& r : res.group.rollouts) {
        CHECK(r.reward == r.reward_reweighted);
    }
}

TEST_CASE("train_step: identical rollouts have s_in 1 and shrunken rewards") {
    GrpoConfig cfg;
    cfg.learning_rate = 0.1;
    // Collapsed chain: seed -> calm -> sep -> calm ... gives identical outputs.
    policy::ToyPolicy pol(32);
    const auto calm = *ToyVocab::instance().token("calm");
    for (policy::TokenId prev = 0; prev < 32; ++prev) {
        pol.set_logit(prev, prev == calm ? ToyVocab::kSep : calm, 60.0);
    }
    const policy::ToyPolicy old_pol = policy::snapshot(pol);
    Rng rng(888);
    const TrainStepResult res = train_step(pol, old_pol, tiny_scenario(), cfg, rng);
    CHECK(res.record.mean_s_in == doctest::Approx(1.0).epsilon(1e-12));
    for (const Rollout& r : res.group.rollouts) {
        CHECK(std::abs(r.reward_reweighted) < std::abs(r.reward));
    }
    // Degenerate group: identical rewards mean zero advantages, no update.
    CHECK(res.group.advantages == std::vector<double>(4, 0.0));
    CHECK(pol == old_pol);
}

TEST_CASE("train_step: deterministic given the same seed") {
    GrpoConfig cfg;
    cfg.learning_rate = 0.2;
    auto run_once = [&] {
        policy::ToyPolicy pol = harness::make_seed_policy();
        const policy::ToyPolicy old_pol = policy::snapshot(pol);
        Rng rng(4321);
        return train_step(pol, old_pol, tiny_scenario(), cfg, rng);
    };
    const TrainStepResult a = run_once();
    const TrainStepResult b = run_once();
    CHECK(a.record.mean_reward == b.record.mean_reward);
    CHECK(a.record.mean_reweighted == b.record.mean_reweighted);
    CHECK(a.record.mean_entropy == b.record.mean_entropy);
    CHECK(a.record.objective == b.record.objective);
    CHECK(a.record.distinct1 == b.record.distinct1);
}

TEST_CASE("train_step: logprob_old values are frozen at sampling time") {
    GrpoConfig cfg;
    cfg.learning_rate = 0.5;  // big enough that the update visibly moves theta
    policy::ToyPolicy pol = harness::make_seed_policy();
    const policy::ToyPolicy old_pol = policy::snapshot(pol);
    Rng rng(999);
    const TrainStepResult res = train_step(pol, old_pol, tiny_scenario(), cfg, rng);
    for (const Rollout& r : res.group.rollouts) {
        CHECK(r.logprob_old == policy::logprob(old_pol, r.tokens, res.group.seed_token));
        CHECK(r.logprob_old <= 0.0);
    }
}

TEST_CASE("train_step: empty scenario keyword is a configuration error") {
    GrpoConfig cfg;
    policy::ToyPolicy pol = harness::make_seed_policy();
    const policy::ToyPolicy old_pol = policy::snapshot(pol);
    Rng rng(1);
    reward::Scenario bad = tiny_scenario();
    bad.step_keywords[1] = "  ";
    CHECK_THROWS_AS(train_step(pol, old_pol, bad, cfg, rng), std::invalid_argument);
}

TEST_CASE("config: validation catches bad ranges") {
    GrpoConfig cfg;
    cfg.group_size = 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = GrpoConfig{};
    cfg.clip_eps = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = GrpoConfig{};
    cfg.learning_rate = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("config: file round trip and unknown keys") {
    const auto path = std::filesystem::temp_directory_path() / "grpolab_config.cfg";
    GrpoConfig cfg;
    cfg.group_size = 6;
    cfg.clip_eps = 0.15;
    cfg.learning_rate = 0.25;
    cfg.alpha = 0.7;
    cfg.beta = 4.0;
    cfg.reweighting_enabled = false;
    cfg.std_guard = 1e-6;
    cfg.max_len = 18;
    cfg.steps = 250;
    cfg.seed = 123456789;
    save_config(cfg, path);
    const GrpoConfig loaded = load_config(path);
    CHECK(loaded.group_size == cfg.group_size);
    CHECK(loaded.clip_eps == cfg.clip_eps);
    CHECK(loaded.learning_rate == cfg.learning_rate);
    CHECK(loaded.alpha == cfg.alpha);
    CHECK(loaded.beta == cfg.beta);
    CHECK(loaded.reweighting_enabled == cfg.reweighting_enabled);
    CHECK(loaded.std_guard == cfg.std_guard);
    CHECK(loaded.max_len == cfg.max_len);
    CHECK(loaded.steps == cfg.steps);
    CHECK(loaded.seed == cfg.seed);

    {
        std::ofstream out(path);
        out << "group_size=4\nwarp_drive=on\n";
    }
    try {
        load_config(path);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("warp_drive") != std::string::npos);
    }
    std::filesystem::remove(path);
}

TEST_CASE("toy vocab: render splits parts onto the tagged grammar") {
    const ToyVocab& vocab = ToyVocab::instance();
    const auto calm = *vocab.token("calm");
    const auto fear = *vocab.token("fear");
    const auto listen = *vocab.token("listen");
    const auto breathe = *vocab.token("breathe");

    textvec::TokenSeq tokens;
    tokens.ids = {calm, ToyVocab::kSep, fear, ToyVocab::kSep, listen, ToyVocab::kSep, breathe,
                  policy::kEos};
    const std::string text = vocab.render_trace(tokens);
    const reward::ReasoningTrace trace = reward::parse_trace(text);
    CHECK(trace.complete);
    CHECK(trace.step_history_analysis == "calm");
    CHECK(trace.step_emotion_analysis == "fear");
    CHECK(trace.step_strategy_analysis == "listen");
    CHECK(trace.response == "breathe");

    textvec::TokenSeq undersplit;
    undersplit.ids = {calm, ToyVocab::kSep, fear};
    CHECK_FALSE(reward::parse_trace(vocab.render_trace(undersplit)).complete);

    textvec::TokenSeq oversplit;
    oversplit.ids = {calm, ToyVocab::kSep, fear, ToyVocab::kSep, listen, ToyVocab::kSep, breathe,
                     ToyVocab::kSep, calm};
    const reward::ReasoningTrace t2 = reward::parse_trace(vocab.render_trace(oversplit));
    CHECK(t2.complete);
    CHECK(t2.response == "breathe calm");  // extra separators carry no structure
}

}  // TEST_SUITE
