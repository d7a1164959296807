#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "grpolab/corpus.hpp"

using namespace grpolab;
using namespace grpolab::corpus;

namespace {

Dialogue make_dialogue(const std::string& id, int rounds) {
    Dialogue d;
    d.id = id;
    for (int r = 1; r <= rounds; ++r) {
        d.utterances.push_back({Speaker::Seeker, "seeker says " + std::to_string(r), r});
        d.utterances.push_back({Speaker::Supporter, "supporter says " + std::to_string(r), r});
    }
    return d;
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_SUITE("corpus") {

TEST_CASE("gaussian weights: single round carries all mass") {
    const RoundWeights rw = gaussian_round_weights(1);
    REQUIRE(rw.size() == 1);
    CHECK(rw.at(1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("gaussian weights: two rounds match the hand evaluation") {
    const RoundWeights rw = gaussian_round_weights(2);
    CHECK(std::abs(rw.at(1) - 0.880797) < 1e-6);
    CHECK(std::abs(rw.at(2) - 0.119203) < 1e-6);
}

TEST_CASE("gaussian weights: indices equidistant from mu weigh the same") {
    const RoundWeights rw = gaussian_round_weights(4);
    CHECK(rw.at(1) == doctest::Approx(rw.at(3)).epsilon(1e-15));
}

TEST_CASE("gaussian weights: normalization, positivity, symmetry, argmax over N_r 1..100") {
    for (int n = 1; n <= 100; ++n) {
        const RoundWeights rw = gaussian_round_weights(n);
        double sum = 0.0;
        for (double w : rw.weights) {
            CHECK(w > 0.0);
            sum += w;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);
        for (int i = 1; i <= n - 1; ++i) {
            CHECK(std::abs(rw.at(i) - rw.at(n - i)) <= 1e-12);
        }
        int argmax = 1;
        for (int i = 2; i <= n; ++i) {
            if (rw.at(i) > rw.at(argmax)) argmax = i;
        }
        const int lo = static_cast<int>(std::floor(rw.mu));
        const int hi = static_cast<int>(std::ceil(rw.mu));
        CHECK((argmax == lo || argmax == hi || argmax == std::max(1, lo)));
    }
}

TEST_CASE("gaussian weights: zero rounds is a domain error") {
    CHECK_THROWS_AS(gaussian_round_weights(0), std::domain_error);
}

TEST_CASE("sample_rounds: exhaustive selection returns every round in order") {
    const Dialogue d = make_dialogue("d", 3);
    Rng rng(7);
    const std::vector<int> got = sample_rounds(d, 3, rng);
    CHECK(got == std::vector<int>{1, 2, 3});
}

TEST_CASE("sample_rounds: fixed seed reproduces the draw") {
    const Dialogue d = make_dialogue("d", 5);
    Rng a(123);
    Rng b(123);
    CHECK(sample_rounds(d, 2, a) == sample_rounds(d, 2, b));
}

TEST_CASE("sample_rounds: selecting more rounds than exist is a domain error") {
    const Dialogue d = make_dialogue("d", 3);
    Rng rng(7);
    CHECK_THROWS_AS(sample_rounds(d, 4, rng), std::domain_error);
}

TEST_CASE("sample_rounds: output is sorted unique indices in range") {
    const Dialogue d = make_dialogue("d", 8);
    Rng rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        const std::vector<int> got = sample_rounds(d, 4, rng);
        REQUIRE(got.size() == 4);
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i] >= 1);
            CHECK(got[i] <= 8);
            if (i > 0) CHECK(got[i] > got[i - 1]);
        }
    }
}

TEST_CASE("sample_rounds: single-draw frequencies track the weights within 0.01") {
    const Dialogue d = make_dialogue("d", 10);
    const RoundWeights rw = gaussian_round_weights(10);
    Rng rng(2026);
    constexpr int kTrials = 100000;
    std::vector<int> counts(10, 0);
    for (int t = 0; t < kTrials; ++t) {
        const std::vector<int> got = sample_rounds(d, 1, rng);
        ++counts[static_cast<std::size_t>(got[0] - 1)];
    }
    for (int i = 1; i <= 10; ++i) {
        const double freq = static_cast<double>(counts[static_cast<std::size_t>(i - 1)]) / kTrials;
        CHECK(std::abs(freq - rw.at(i)) < 0.01);
    }
}

TEST_CASE("sample_rounds: chi-square goodness of fit at significance 0.001") {
    const Dialogue d = make_dialogue("d", 10);
    const RoundWeights rw = gaussian_round_weights(10);
    Rng rng(31415);
    constexpr int kTrials = 100000;
    std::vector<int> counts(10, 0);
    for (int t = 0; t < kTrials; ++t) {
        ++counts[static_cast<std::size_t>(sample_rounds(d, 1, rng)[0] - 1)];
    }
    double chi2 = 0.0;
    for (int i = 1; i <= 10; ++i) {
        const double expected = rw.at(i) * kTrials;
        const double diff = counts[static_cast<std::size_t>(i - 1)] - expected;
        chi2 += diff * diff / expected;
    }
    // Upper critical value for df=9 at alpha=0.001.
    CHECK(chi2 < 27.877);
}

TEST_CASE("quality filter: duplicate consecutive utterances are dropped") {
    Dialogue d = make_dialogue("dup", 2);
    d.utterances[2].text = d.utterances[1].text;
    const HeuristicFilterJudge judge;
    const FilterDecision decision = quality_filter(d, judge);
    CHECK_FALSE(decision.keep);
    CHECK(decision.reason == "duplicate consecutive utterances");
}

TEST_CASE("quality filter: a valid 3-round dialogue is kept") {
    const HeuristicFilterJudge judge;
    CHECK(quality_filter(make_dialogue("ok", 3), judge).keep);
}

TEST_CASE("quality filter: one round is too short") {
    const HeuristicFilterJudge judge;
    const FilterDecision decision = quality_filter(make_dialogue("short", 1), judge);
    CHECK_FALSE(decision.keep);
    CHECK(decision.reason == "too short");
}

TEST_CASE("quality filter: empty utterance text is dropped") {
    Dialogue d = make_dialogue("empty", 2);
    d.utterances[1].text = "   ";
    const HeuristicFilterJudge judge;
    CHECK(quality_filter(d, judge).reason == "empty utterance");
}

TEST_CASE("quality filter: judge failure surfaces the dialogue id") {
    class ThrowingJudge final : public FilterJudge {
    public:
        FilterDecision evaluate(const Dialogue&) const override {
            throw std::runtime_error("backend down");
        }
    };
    const ThrowingJudge judge;
    try {
        quality_filter(make_dialogue("doomed", 2), judge);
        FAIL("expected FilterError");
    } catch (const FilterError& e) {
        CHECK(std::string(e.what()).find("doomed") != std::string::npos);
    }
}

TEST_CASE("filter is pure: same dialogue, same verdict") {
    const HeuristicFilterJudge judge;
    const Dialogue d = make_dialogue("p", 3);
    const FilterDecision a = quality_filter(d, judge);
    const FilterDecision b = quality_filter(d, judge);
    CHECK(a.keep == b.keep);
    CHECK(a.reason == b.reason);
}

TEST_CASE("corpus io: empty file loads as empty sequence") {
    const auto path = temp_file("grpolab_empty_corpus.jsonl");
    std::ofstream(path).close();
    CHECK(load_corpus(path).empty());
    std::filesystem::remove(path);
}

TEST_CASE("corpus io: save then load round-trips exactly") {
    const auto path = temp_file("grpolab_roundtrip.jsonl");
    const std::vector<Dialogue> dialogues = {make_dialogue("alpha", 2), make_dialogue("beta", 4)};
    save_corpus(dialogues, path);
    const std::vector<Dialogue> loaded = load_corpus(path);
    CHECK(loaded == dialogues);
    std::filesystem::remove(path);
}

TEST_CASE("corpus io: missing speaker field names the line and field") {
    const auto path = temp_file("grpolab_bad_corpus.jsonl");
    {
        std::ofstream out(path);
        out << R"({"id":"ok","utterances":[{"speaker":"seeker","text":"hi"},{"speaker":"supporter","text":"hello"}]})"
            << '\n';
        out << R"({"id":"bad","utterances":[{"text":"orphaned"}]})" << '\n';
    }
    try {
        load_corpus(path);
        FAIL("expected CorpusIoError");
    } catch (const CorpusIoError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("line 2") != std::string::npos);
        CHECK(msg.find("speaker") != std::string::npos);
    }
    std::filesystem::remove(path);
}

TEST_CASE("corpus io: invalid JSON names the line") {
    const auto path = temp_file("grpolab_bad_json.jsonl");
    {
        std::ofstream out(path);
        out << "not json at all\n";
    }
    try {
        load_corpus(path);
        FAIL("expected CorpusIoError");
    } catch (const CorpusIoError& e) {
        CHECK(std::string(e.what()).find("line 1") != std::string::npos);
    }
    std::filesystem::remove(path);
}

TEST_CASE("round indices derive from supporter positions") {
    Dialogue d;
    d.id = "derive";
    d.utterances = {
        {Speaker::Seeker, "a", 0},    {Speaker::Seeker, "b", 0},  {Speaker::Supporter, "c", 0},
        {Speaker::Seeker, "d", 0},    {Speaker::Supporter, "e", 0},
    };
    derive_round_indices(d);
    CHECK(d.utterances[0].round_index == 1);
    CHECK(d.utterances[1].round_index == 1);
    CHECK(d.utterances[2].round_index == 1);
    CHECK(d.utterances[3].round_index == 2);
    CHECK(d.utterances[4].round_index == 2);
    CHECK(d.round_count() == 2);
    CHECK_NOTHROW(validate_dialogue(d));
}

TEST_CASE("validate rejects zero-round and inconsistent dialogues") {
    Dialogue no_rounds;
    no_rounds.id = "n";
    no_rounds.utterances = {{Speaker::Seeker, "only seeker", 1}};
    CHECK_THROWS_AS(validate_dialogue(no_rounds), std::domain_error);

    Dialogue bad_index = make_dialogue("b", 2);
    bad_index.utterances[3].round_index = 7;
    CHECK_THROWS_AS(validate_dialogue(bad_index), std::domain_error);
}

}  // TEST_SUITE
