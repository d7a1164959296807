#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "grpolab/policy.hpp"
#include "grpolab/reward.hpp"
#include "grpolab/rng.hpp"
#include "grpolab/toy_vocab.hpp"

namespace grpolab::grpo {

using policy::GroupRollout;
using policy::Rollout;

struct GrpoConfig {
    int group_size = 4;
    double clip_eps = 0.2;
    double learning_rate = 1e-3;
    double alpha = 0.5;  // length-gate steepness
    double beta = 5.0;   // length-gate threshold
    bool reweighting_enabled = true;
    double std_guard = 1e-8;
    int max_len = 24;
    int steps = 500;
    std::uint64_t seed = 42;

    void validate() const;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Flat key=value config file; `#` starts a comment line. Unknown keys are
/// rejected by name.
GrpoConfig load_config(const std::filesystem::path& path);
void save_config(const GrpoConfig& config, const std::filesystem::path& path);

/// One training step's telemetry.
struct StepRecord {
    int step = 0;
    double mean_reward = 0.0;       // raw oracle reward, group mean
    double mean_reweighted = 0.0;   // after Eq.-5 reweighting (== raw when disabled)
    double mean_s_in = 0.0;
    double mean_s_hi = 0.0;
    double mean_entropy = 0.0;      // visitation-weighted row entropy, post-update
    double distinct1 = 0.0;         // over the group's content tokens
    double objective = 0.0;         // clipped surrogate at the post-update policy
};

using TrainStats = std::vector<StepRecord>;

/// Group-normalized advantages: (r - mean) / pop_std. A group whose
/// population std falls below std_guard is degenerate and yields all-zero
/// advantages (no update direction is invented for uniform groups).
std::vector<double> group_advantages(std::span<const double> rewards, double std_guard);

/// Mean over the group of min(rho*A, clip(rho, 1-eps, 1+eps)*A), where rho is
/// the sequence-level ratio exp(logprob(policy) - logprob_old). The old
/// policy enters through the logprob_old recorded on each rollout.
double surrogate_objective(const policy::ToyPolicy& policy, const GroupRollout& group,
                           double clip_eps);

/// Exact analytic gradient of the surrogate w.r.t. theta (VxV, row-major).
/// Where the min selects the clipped constant branch the contribution is
/// zero; at theta == theta_old it reduces to (1/G) sum_i A_i * grad logprob.
std::vector<double> objective_gradient(const policy::ToyPolicy& policy, const GroupRollout& group,
                                       double clip_eps);

/// Max over parameters of |analytic - central difference| / max(1, |numeric|),
/// skipping parameters whose perturbation path passes within 10h of a clip
/// kink (min/clip is non-differentiable there).
double finite_diff_check(const policy::ToyPolicy& policy, const GroupRollout& group,
                         double clip_eps, double h);

struct TrainStepResult {
    StepRecord record;
    GroupRollout group;
};

/// One optimization step: sample G rollouts from old_policy, render and parse
/// each as a reasoning trace, score with the oracle judge, optionally apply
/// redundancy reweighting, normalize advantages, and ascend the surrogate
/// gradient once. Redundancy statistics are recorded either way; the tau path
/// runs only when reweighting is enabled.
TrainStepResult train_step(policy::ToyPolicy& policy, const policy::ToyPolicy& old_policy,
                           const reward::Scenario& scenario, const GrpoConfig& config, Rng& rng);

}  // namespace grpolab::grpo
