#include "grpolab/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace grpolab::corpus {

namespace {

using nlohmann::json;

bool is_blank(const std::string& text) {
    return std::all_of(text.begin(), text.end(),
                       [](unsigned char c) { return std::isspace(c) != 0; });
}

}  // namespace

std::string to_string(Speaker s) {
    return s == Speaker::Seeker ? "seeker" : "supporter";
}

Speaker speaker_from_string(const std::string& s) {
    if (s == "seeker") return Speaker::Seeker;
    if (s == "supporter") return Speaker::Supporter;
    throw CorpusIoError("unknown speaker value: '" + s + "'");
}

int Dialogue::round_count() const {
    return static_cast<int>(std::count_if(
        utterances.begin(), utterances.end(),
        [](const Utterance& u) { return u.speaker == Speaker::Supporter; }));
}

void derive_round_indices(Dialogue& dialogue) {
    int supporters_seen = 0;
    for (Utterance& u : dialogue.utterances) {
        u.round_index = supporters_seen + 1;
        if (u.speaker == Speaker::Supporter) ++supporters_seen;
    }
}

void validate_dialogue(const Dialogue& dialogue) {
    if (dialogue.round_count() < 1) {
        throw std::domain_error("dialogue '" + dialogue.id + "': round_count must be positive");
    }
    int supporters_seen = 0;
    int last_supporter_round = 0;
    for (std::size_t i = 0; i < dialogue.utterances.size(); ++i) {
        const Utterance& u = dialogue.utterances[i];
        if (is_blank(u.text)) {
            throw std::domain_error("dialogue '" + dialogue.id + "': utterance " +
                                    std::to_string(i) + " has empty text");
        }
        if (u.round_index < 1) {
            throw std::domain_error("dialogue '" + dialogue.id + "': utterance " +
                                    std::to_string(i) + " has round_index < 1");
        }
        if (u.round_index != supporters_seen + 1) {
            throw std::domain_error("dialogue '" + dialogue.id + "': utterance " +
                                    std::to_string(i) + " has inconsistent round_index");
        }
        if (u.speaker == Speaker::Supporter) {
            if (u.round_index <= last_supporter_round) {
                throw std::domain_error("dialogue '" + dialogue.id +
                                        "': supporter round indices not strictly increasing");
            }
            last_supporter_round = u.round_index;
            ++supporters_seen;
        }
    }
}

RoundWeights gaussian_round_weights(int n_rounds) {
    if (n_rounds < 1) {
        throw std::domain_error("gaussian_round_weights: n_rounds must be >= 1 (sigma would be 0)");
    }
    RoundWeights rw;
    rw.mu = static_cast<double>(n_rounds) / 2.0;
    rw.sigma = static_cast<double>(n_rounds) / 4.0;
    rw.weights.resize(static_cast<std::size_t>(n_rounds));
    const double denom = 2.0 * rw.sigma * rw.sigma;
    double total = 0.0;
    for (int i = 1; i <= n_rounds; ++i) {
        const double d = static_cast<double>(i) - rw.mu;
        const double w = std::exp(-(d * d) / denom);
        rw.weights[static_cast<std::size_t>(i - 1)] = w;
        total += w;
    }
    for (double& w : rw.weights) w /= total;
    return rw;
}

std::vector<int> sample_rounds(const Dialogue& dialogue, int n_select, Rng& rng) {
    const int n_rounds = dialogue.round_count();
    if (n_select < 1) throw std::domain_error("sample_rounds: n_select must be >= 1");
    if (n_select > n_rounds) {
        throw std::domain_error("sample_rounds: n_select " + std::to_string(n_select) +
                                " exceeds round count " + std::to_string(n_rounds));
    }
    RoundWeights rw = gaussian_round_weights(n_rounds);
    std::vector<int> remaining(static_cast<std::size_t>(n_rounds));
    for (int i = 0; i < n_rounds; ++i) remaining[static_cast<std::size_t>(i)] = i + 1;
    std::vector<double> weights = rw.weights;

    std::vector<int> chosen;
    chosen.reserve(static_cast<std::size_t>(n_select));
    for (int k = 0; k < n_select; ++k) {
        const std::size_t idx = weighted_index(rng, weights);
        chosen.push_back(remaining[idx]);
        remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(idx));
        weights.erase(weights.begin() + static_cast<std::ptrdiff_t>(idx));
        // weighted_index normalizes internally, so no explicit renormalize pass.
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

FilterDecision HeuristicFilterJudge::evaluate(const Dialogue& dialogue) const {
    for (const Utterance& u : dialogue.utterances) {
        if (is_blank(u.text)) return FilterDecision::Drop("empty utterance");
    }
    if (dialogue.round_count() < 2) return FilterDecision::Drop("too short");
    for (std::size_t i = 1; i < dialogue.utterances.size(); ++i) {
        if (dialogue.utterances[i].text == dialogue.utterances[i - 1].text) {
            return FilterDecision::Drop("duplicate consecutive utterances");
        }
    }
    return FilterDecision::Keep();
}

FilterDecision quality_filter(const Dialogue& dialogue, const FilterJudge& judge) {
    try {
        return judge.evaluate(dialogue);
    } catch (const std::exception& e) {
        throw FilterError("filter judge failed on dialogue '" + dialogue.id + "': " + e.what());
    }
}

std::vector<Dialogue> load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw CorpusIoError("cannot open corpus file: " + path.string());

    std::vector<Dialogue> dialogues;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || is_blank(line)) continue;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::parse_error& e) {
            throw CorpusIoError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
        }
        const auto fail = [&](const std::string& field, const std::string& what) -> CorpusIoError {
            return CorpusIoError("line " + std::to_string(line_no) + ": field '" + field +
                                 "' " + what);
        };
        if (!record.contains("id")) throw fail("id", "missing");
        if (!record["id"].is_string()) throw fail("id", "must be a string");
        if (!record.contains("utterances")) throw fail("utterances", "missing");
        if (!record["utterances"].is_array()) throw fail("utterances", "must be an array");

        Dialogue d;
        d.id = record["id"].get<std::string>();
        for (const json& ju : record["utterances"]) {
            if (!ju.is_object()) throw fail("utterances", "entries must be objects");
            if (!ju.contains("speaker")) throw fail("speaker", "missing");
            if (!ju["speaker"].is_string()) throw fail("speaker", "must be a string");
            if (!ju.contains("text")) throw fail("text", "missing");
            if (!ju["text"].is_string()) throw fail("text", "must be a string");
            Utterance u;
            try {
                u.speaker = speaker_from_string(ju["speaker"].get<std::string>());
            } catch (const CorpusIoError& e) {
                throw fail("speaker", e.what());
            }
            u.text = ju["text"].get<std::string>();
            d.utterances.push_back(std::move(u));
        }
        derive_round_indices(d);
        dialogues.push_back(std::move(d));
    }
    return dialogues;
}

void save_corpus(const std::vector<Dialogue>& dialogues, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw CorpusIoError("cannot open corpus file for writing: " + path.string());
    for (const Dialogue& d : dialogues) {
        json record;
        record["id"] = d.id;
        record["utterances"] = json::array();
        for (const Utterance& u : d.utterances) {
            record["utterances"].push_back({{"speaker", to_string(u.speaker)}, {"text", u.text}});
        }
        out << record.dump() << '\n';
    }
    if (!out) throw CorpusIoError("write failed: " + path.string());
}

}  // namespace grpolab::corpus
