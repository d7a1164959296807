#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "grpolab/grpo.hpp"
#include "grpolab/policy.hpp"
#include "grpolab/reward.hpp"
#include "grpolab/rng.hpp"

namespace grpolab::harness {

/// Deterministic synthetic scenarios: keywords from the toy vocabulary,
/// 2-6 round histories built from vocabulary words, valid under the bundled
/// corpus quality filter.
std::vector<reward::Scenario> generate_scenarios(int n, Rng& rng);

/// Starting policy for training runs: biased toward the section-separator
/// skeleton so sampled outputs usually parse as complete traces, standing in
/// for the supervised warm start an RL fine-tune begins from. Content choices
/// stay near-uniform.
policy::ToyPolicy make_seed_policy();

/// Seed policy additionally warmed toward the scenario keywords, the way a
/// supervised pass over in-domain data would shift the output distribution.
/// Keeps rewards mixed-sign from the first steps instead of uniformly
/// negative.
policy::ToyPolicy make_seed_policy(const std::vector<reward::Scenario>& scenarios);

struct RunResult {
    grpo::GrpoConfig config;
    grpo::TrainStats stats;
    policy::ToyPolicy final_policy{policy::ToyPolicy::kDefaultVocabSize};
};

/// Iterates train_step over the scenario set for config.steps, refreshing the
/// old-policy snapshot each step. steps=0 returns empty stats and an
/// untouched seed policy.
RunResult run_training(const grpo::GrpoConfig& config,
                       const std::vector<reward::Scenario>& scenarios);

/// Exact CSV schema consumed by external plotting:
/// step,mean_reward,mean_reweighted,mean_s_in,mean_s_hi,mean_entropy,distinct1,objective
void write_stats_csv(const grpo::TrainStats& stats, std::ostream& out);
void write_stats_csv(const grpo::TrainStats& stats, const std::filesystem::path& path);

/// Tail-window summary of one run: means over the last 10% of steps (at
/// least one), which is what "final" means in comparisons.
struct ArmSummary {
    double final_reward_raw = 0.0;
    double final_reward_reweighted = 0.0;
    double final_s_in = 0.0;
    double final_s_hi = 0.0;
    double final_entropy = 0.0;
    double final_distinct1 = 0.0;
};

ArmSummary summarize_tail(const grpo::TrainStats& stats);

struct SeedComparison {
    std::uint64_t seed = 0;
    ArmSummary with_reweighting;
    ArmSummary without_reweighting;
    grpo::TrainStats stats_with;
    grpo::TrainStats stats_without;
    bool favorable = false;  // lower final s_in AND higher final entropy with reweighting
};

struct ExperimentReport {
    grpo::GrpoConfig base_config;
    int steps = 0;
    std::vector<SeedComparison> seeds;
    int n_favorable = 0;
    int favorable_required = 0;       // ceil(0.8 * n_seeds), the 4-of-5 rule
    double mean_final_raw_with = 0.0;
    double mean_final_raw_without = 0.0;
    double reward_degradation = 0.0;  // (without - with) / max(|without|, eps)
    bool direction_holds = false;
    bool degradation_ok = false;      // reward_degradation <= 0.2
};

/// Paired reweighting-on/off runs over n_seeds seeds (base_config.seed + i),
/// both arms sharing scenarios and per-seed seeds. Emits the comparison even
/// when the hypothesis fails.
ExperimentReport run_compare(const grpo::GrpoConfig& base_config,
                             const std::vector<reward::Scenario>& scenarios, int n_seeds,
                             int steps);

/// Preset for the collapse-mitigation experiment: a step size hot enough
/// that 500 steps reach convergence on the toy task, and a max_len tight
/// enough that sloppy section placement keeps costing format points. The
/// plain config default (learning_rate 1e-3) barely moves the policy in 500
/// steps and shows nothing either way.
grpo::GrpoConfig default_compare_config();

/// Scenario count the compare preset trains on.
inline constexpr int kCompareScenarioCount = 1;

/// Summary JSON (config, per-seed summaries, aggregates); per-step series
/// live in the CSVs.
std::string report_to_json(const ExperimentReport& report);

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Fast self-verification suites: round-weight identities, advantage
/// normalization, an independent reimplementation of the reweighting math,
/// finite-difference gradient agreement, and scoring enumeration.
std::vector<CheckResult> self_check();
bool all_passed(const std::vector<CheckResult>& results);

/// Shortest round-trip decimal for a double; the CSV and JSON writers use it
/// so identical runs serialize byte-identically.
std::string format_double(double value);

}  // namespace grpolab::harness
