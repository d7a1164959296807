// grpolab command-line runner: round sampling demo, persona clustering,
// training runs, the paired reweighting experiment, and self-checks.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "grpolab/corpus.hpp"
#include "grpolab/grpo.hpp"
#include "grpolab/harness.hpp"
#include "grpolab/persona.hpp"
#include "grpolab/policy.hpp"
#include "grpolab/reward.hpp"

namespace {

using namespace grpolab;

grpo::GrpoConfig resolve_config(const std::optional<std::string>& config_path,
                                const std::optional<std::uint64_t>& seed,
                                const std::optional<int>& steps) {
    grpo::GrpoConfig cfg;
    if (config_path) cfg = grpo::load_config(*config_path);
    if (seed) cfg.seed = *seed;
    if (steps) cfg.steps = *steps;
    cfg.validate();
    return cfg;
}

std::vector<reward::Scenario> resolve_scenarios(const std::optional<std::string>& scenario_path,
                                                int generate_n, std::uint64_t seed) {
    if (scenario_path) return reward::load_scenarios(*scenario_path);
    Rng rng(seed ^ 0x5ce7a2105ULL);
    return harness::generate_scenarios(generate_n, rng);
}

int cmd_sample(const std::optional<int>& rounds, const std::optional<std::string>& corpus_path,
               int n_select, std::uint64_t seed) {
    if (!rounds && !corpus_path) {
        std::cerr << "sample: pass --rounds N or --corpus FILE\n";
        return 1;
    }
    if (rounds) {
        const corpus::RoundWeights rw = corpus::gaussian_round_weights(*rounds);
        std::printf("round weights for N_r=%d (mu=%s, sigma=%s)\n", *rounds,
                    harness::format_double(rw.mu).c_str(),
                    harness::format_double(rw.sigma).c_str());
        for (int i = 1; i <= rw.size(); ++i) {
            std::printf("  round %d: %.6f\n", i, rw.at(i));
        }
    }
    if (corpus_path) {
        const std::vector<corpus::Dialogue> dialogues = corpus::load_corpus(*corpus_path);
        const corpus::HeuristicFilterJudge judge;
        Rng rng(seed);
        for (const corpus::Dialogue& d : dialogues) {
            const corpus::FilterDecision decision = corpus::quality_filter(d, judge);
            if (!decision.keep) {
                std::printf("%s: dropped (%s)\n", d.id.c_str(), decision.reason.c_str());
                continue;
            }
            const int k = std::min(n_select, d.round_count());
            const std::vector<int> chosen = corpus::sample_rounds(d, k, rng);
            std::printf("%s: N_r=%d selected", d.id.c_str(), d.round_count());
            for (int r : chosen) std::printf(" %d", r);
            std::printf("\n");
        }
    }
    return 0;
}

int cmd_cluster(const std::string& profiles_path, int k_max, std::uint64_t seed, int max_iters,
                const std::optional<std::string>& out_path) {
    const std::vector<persona::ProfileRecord> records = persona::load_profiles(profiles_path);
    std::vector<persona::DiscProfile> profiles;
    for (const persona::ProfileRecord& r : records) profiles.push_back(r.profile);
    if (profiles.empty()) {
        std::cerr << "cluster: no profiles in " << profiles_path << "\n";
        return 1;
    }

    std::vector<double> sse_by_k;
    std::vector<persona::ClusterModel> models;
    for (int k = 1; k <= k_max; ++k) {
        Rng rng(seed + static_cast<std::uint64_t>(k));
        models.push_back(persona::kmeans(profiles, k, rng, max_iters));
        sse_by_k.push_back(models.back().sse);
        std::printf("k=%d sse=%s\n", k, harness::format_double(models.back().sse).c_str());
    }
    const int chosen = persona::elbow_select(sse_by_k);
    std::printf("chosen k = %d (elbow on SSE)\n", chosen);

    if (out_path) {
        std::ofstream out(*out_path);
        if (!out) {
            std::cerr << "cluster: cannot write " << *out_path << "\n";
            return 1;
        }
        const persona::ClusterModel& model = models[static_cast<std::size_t>(chosen - 1)];
        out << "{\n  \"k\": " << model.k << ",\n  \"sse\": " << harness::format_double(model.sse)
            << ",\n  \"assignments\": [";
        for (std::size_t i = 0; i < model.assignments.size(); ++i) {
            out << (i ? ", " : "") << model.assignments[i];
        }
        out << "]\n}\n";
    }
    return 0;
}

int cmd_train(const std::optional<std::string>& config_path,
              const std::optional<std::string>& scenario_path, int generate_n,
              const std::optional<std::uint64_t>& seed, const std::optional<int>& steps,
              const std::string& out_csv, const std::optional<std::string>& checkpoint_path) {
    const grpo::GrpoConfig cfg = resolve_config(config_path, seed, steps);
    const std::vector<reward::Scenario> scenarios =
        resolve_scenarios(scenario_path, generate_n, cfg.seed);

    const harness::RunResult result = harness::run_training(cfg, scenarios);
    harness::write_stats_csv(result.stats, std::filesystem::path(out_csv));
    if (checkpoint_path) policy::save_checkpoint(result.final_policy, *checkpoint_path);

    const harness::ArmSummary tail = harness::summarize_tail(result.stats);
    std::printf("steps=%d scenarios=%zu seed=%llu reweighting=%s\n", cfg.steps, scenarios.size(),
                static_cast<unsigned long long>(cfg.seed),
                cfg.reweighting_enabled ? "on" : "off");
    std::printf("final (tail mean): reward=%s s_in=%s entropy=%s distinct1=%s\n",
                harness::format_double(tail.final_reward_raw).c_str(),
                harness::format_double(tail.final_s_in).c_str(),
                harness::format_double(tail.final_entropy).c_str(),
                harness::format_double(tail.final_distinct1).c_str());
    std::printf("stats written to %s\n", out_csv.c_str());
    return 0;
}

int cmd_compare(const std::optional<std::string>& config_path,
                const std::optional<std::string>& scenario_path, int generate_n, int n_seeds,
                int steps, const std::optional<std::uint64_t>& seed, const std::string& out_dir) {
    grpo::GrpoConfig cfg = harness::default_compare_config();
    if (config_path) cfg = grpo::load_config(*config_path);
    if (seed) cfg.seed = *seed;
    cfg.validate();
    const std::vector<reward::Scenario> scenarios =
        resolve_scenarios(scenario_path, generate_n, cfg.seed);

    const harness::ExperimentReport report =
        harness::run_compare(cfg, scenarios, n_seeds, steps);

    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);
    for (const harness::SeedComparison& cmp : report.seeds) {
        harness::write_stats_csv(cmp.stats_with,
                                 dir / ("compare_seed" + std::to_string(cmp.seed) + "_rw.csv"));
        harness::write_stats_csv(cmp.stats_without,
                                 dir / ("compare_seed" + std::to_string(cmp.seed) + "_base.csv"));
    }
    {
        std::ofstream out(dir / "compare_summary.json");
        out << harness::report_to_json(report) << '\n';
    }

    std::printf("%-10s %-12s %-12s %-12s %-12s %s\n", "seed", "s_in(rw)", "s_in(base)",
                "H(rw)", "H(base)", "favorable");
    for (const harness::SeedComparison& cmp : report.seeds) {
        std::printf("%-10llu %-12.4f %-12.4f %-12.4f %-12.4f %s\n",
                    static_cast<unsigned long long>(cmp.seed), cmp.with_reweighting.final_s_in,
                    cmp.without_reweighting.final_s_in, cmp.with_reweighting.final_entropy,
                    cmp.without_reweighting.final_entropy, cmp.favorable ? "yes" : "no");
    }
    std::printf("favorable seeds: %d/%zu (need %d) -> %s\n", report.n_favorable,
                report.seeds.size(), report.favorable_required,
                report.direction_holds ? "direction holds" : "direction does NOT hold");
    std::printf("final raw reward: with=%.4f without=%.4f degradation=%.2f%% -> %s\n",
                report.mean_final_raw_with, report.mean_final_raw_without,
                report.reward_degradation * 100.0,
                report.degradation_ok ? "within 20%" : "exceeds 20%");
    std::printf("reports written to %s\n", out_dir.c_str());
    return 0;  // the comparison is a report, not an assertion
}

int cmd_check() {
    const std::vector<harness::CheckResult> results = harness::self_check();
    bool ok = true;
    for (const harness::CheckResult& r : results) {
        std::printf("[%s] %s: %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                    r.detail.c_str());
        ok = ok && r.passed;
    }
    std::printf("%s\n", ok ? "all checks passed" : "CHECK FAILURES PRESENT");
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"toy GRPO lab: Gaussian round sampling, persona clustering, "
                 "redundancy-aware reward reweighting"};
    app.require_subcommand(1);

    // sample
    auto* sample = app.add_subcommand("sample", "print round weights / sample rounds from a corpus");
    std::optional<int> sample_rounds;
    std::optional<std::string> sample_corpus;
    int sample_select = 3;
    std::uint64_t sample_seed = 42;
    sample->add_option("--rounds", sample_rounds, "print the weight table for N_r rounds");
    sample->add_option("--corpus", sample_corpus, "JSONL corpus file to sample from")
        ->check(CLI::ExistingFile);
    sample->add_option("--select", sample_select, "rounds to select per dialogue");
    sample->add_option("--seed", sample_seed, "random seed");

    // cluster
    auto* cluster = app.add_subcommand("cluster", "k-means + elbow over a DISC profile file");
    std::string cluster_profiles;
    int cluster_kmax = 8;
    std::uint64_t cluster_seed = 42;
    int cluster_iters = 100;
    std::optional<std::string> cluster_out;
    cluster->add_option("--profiles", cluster_profiles, "JSONL profile file")
        ->required()
        ->check(CLI::ExistingFile);
    cluster->add_option("--kmax", cluster_kmax, "largest k to evaluate");
    cluster->add_option("--seed", cluster_seed, "random seed");
    cluster->add_option("--max-iters", cluster_iters, "Lloyd iteration cap");
    cluster->add_option("--out", cluster_out, "write chosen model as JSON");

    // train
    auto* train = app.add_subcommand("train", "run GRPO training and write stats CSV");
    std::optional<std::string> train_config;
    std::optional<std::string> train_scenarios;
    int train_gen = 8;
    std::optional<std::uint64_t> train_seed;
    std::optional<int> train_steps;
    std::string train_out = "stats.csv";
    std::optional<std::string> train_ckpt;
    train->add_option("--config", train_config, "flat key=value config file")
        ->check(CLI::ExistingFile);
    train->add_option("--scenarios", train_scenarios, "JSONL scenario file")
        ->check(CLI::ExistingFile);
    train->add_option("--gen-scenarios", train_gen, "synthesize N scenarios when no file given");
    train->add_option("--seed", train_seed, "override config seed");
    train->add_option("--steps", train_steps, "override config steps");
    train->add_option("--out", train_out, "stats CSV path");
    train->add_option("--checkpoint", train_ckpt, "write final policy checkpoint JSON");

    // compare
    auto* compare = app.add_subcommand("compare", "paired reweighting on/off experiment");
    std::optional<std::string> compare_config;
    std::optional<std::string> compare_scenarios;
    int compare_gen = harness::kCompareScenarioCount;
    int compare_seeds = 5;
    int compare_steps = 500;
    std::optional<std::uint64_t> compare_seed;
    std::string compare_out = "compare_out";
    compare->add_option("--config", compare_config, "flat key=value config file")
        ->check(CLI::ExistingFile);
    compare->add_option("--scenarios", compare_scenarios, "JSONL scenario file")
        ->check(CLI::ExistingFile);
    compare->add_option("--gen-scenarios", compare_gen, "synthesize N scenarios when no file given");
    compare->add_option("--seeds", compare_seeds, "number of paired seeds");
    compare->add_option("--steps", compare_steps, "training steps per run");
    compare->add_option("--seed", compare_seed, "override base seed");
    compare->add_option("--out", compare_out, "output directory");

    // check
    app.add_subcommand("check", "run the built-in verification suites");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sample->parsed()) {
            return cmd_sample(sample_rounds, sample_corpus, sample_select, sample_seed);
        }
        if (cluster->parsed()) {
            return cmd_cluster(cluster_profiles, cluster_kmax, cluster_seed, cluster_iters,
                               cluster_out);
        }
        if (train->parsed()) {
            return cmd_train(train_config, train_scenarios, train_gen, train_seed, train_steps,
                             train_out, train_ckpt);
        }
        if (compare->parsed()) {
            return cmd_compare(compare_config, compare_scenarios, compare_gen, compare_seeds,
                               compare_steps, compare_seed, compare_out);
        }
        return cmd_check();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
