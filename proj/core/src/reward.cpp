#include "grpolab/reward.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace grpolab::reward {

namespace {

using nlohmann::json;

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

/// Inner text of <tag>..</tag>, trimmed; empty string when absent.
std::string extract_section(std::string_view text, std::string_view tag) {
    const std::string open = "<" + std::string(tag) + ">";
    const std::string close = "</" + std::string(tag) + ">";
    const std::size_t o = text.find(open);
    if (o == std::string_view::npos) return {};
    const std::size_t body = o + open.size();
    const std::size_t c = text.find(close, body);
    if (c == std::string_view::npos) return {};
    return trim(text.substr(body, c - body));
}

bool parse_bool_value(const std::string& value, bool& out) {
    const std::string v = lower(trim(value));
    if (v == "true") {
        out = true;
        return true;
    }
    if (v == "false") {
        out = false;
        return true;
    }
    return false;
}

bool contains_token(std::string_view text, std::string_view keyword) {
    const textvec::TokenSeq hay = textvec::tokenize(text);
    const textvec::TokenSeq needle = textvec::tokenize(keyword);
    if (needle.empty()) {
        throw std::invalid_argument("oracle_judge: scenario keyword is empty after tokenization");
    }
    return std::search(hay.ids.begin(), hay.ids.end(), needle.ids.begin(), needle.ids.end()) !=
           hay.ids.end();
}

}  // namespace

Preference collapse_preference(PreferenceLabel label) {
    switch (label) {
        case PreferenceLabel::SecondBetter:
        case PreferenceLabel::BothGood:
            return Preference::OutputBetterOrEqual;
        case PreferenceLabel::FirstBetter:
        case PreferenceLabel::NeitherAcceptable:
            return Preference::ReferenceBetter;
    }
    throw std::invalid_argument("collapse_preference: invalid label");
}

ReasoningTrace parse_trace(std::string_view text) {
    ReasoningTrace trace;
    trace.step_history_analysis = extract_section(text, "step1");
    trace.step_emotion_analysis = extract_section(text, "step2");
    trace.step_strategy_analysis = extract_section(text, "step3");
    trace.response = extract_section(text, "response");
    trace.complete = !trace.step_history_analysis.empty() && !trace.step_emotion_analysis.empty() &&
                     !trace.step_strategy_analysis.empty() && !trace.response.empty();
    return trace;
}

Judgment parse_judgment(std::string_view text) {
    Judgment judgment;
    bool seen[5] = {false, false, false, false, false};
    static constexpr const char* kKeys[5] = {"step1", "step2", "step3", "preference", "format"};

    std::size_t pos = 0;
    int line_no = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        const std::string line = trim(text.substr(pos, eol - pos));
        pos = eol + 1;
        ++line_no;
        if (line.empty()) continue;

        const std::size_t colon = line.find(':');
        if (colon == std::string::npos) {
            throw JudgmentParseError("line " + std::to_string(line_no) +
                                     ": expected 'key: value', got '" + line + "'");
        }
        const std::string key = lower(trim(line.substr(0, colon)));
        const std::string value = trim(line.substr(colon + 1));

        int key_idx = -1;
        for (int i = 0; i < 5; ++i) {
            if (key == kKeys[i]) {
                key_idx = i;
                break;
            }
        }
        if (key_idx < 0) {
            throw JudgmentParseError("line " + std::to_string(line_no) + ": unknown key '" + key +
                                     "'");
        }
        if (seen[key_idx]) {
            throw JudgmentParseError("line " + std::to_string(line_no) + ": duplicate '" + key +
                                     "' line");
        }
        seen[key_idx] = true;

        if (key_idx <= 2) {
            bool verdict = false;
            if (!parse_bool_value(value, verdict)) {
                throw JudgmentParseError("line " + std::to_string(line_no) + ": '" + key +
                                         "' value must be true or false, got '" + value + "'");
            }
            judgment.step_verdicts[static_cast<std::size_t>(key_idx)] = verdict;
        } else if (key_idx == 3) {
            const std::string v = lower(value);
            if (v == "output") {
                judgment.preference = Preference::OutputBetterOrEqual;
            } else if (v == "reference") {
                judgment.preference = Preference::ReferenceBetter;
            } else {
                throw JudgmentParseError("line " + std::to_string(line_no) +
                                         ": 'preference' value must be output or reference, got '" +
                                         value + "'");
            }
        } else {
            bool ok = false;
            if (!parse_bool_value(value, ok)) {
                throw JudgmentParseError("line " + std::to_string(line_no) +
                                         ": 'format' value must be true or false, got '" + value +
                                         "'");
            }
            judgment.format_ok = ok;
        }
    }

    for (int i = 0; i < 5; ++i) {
        if (!seen[i]) {
            throw JudgmentParseError(std::string(kKeys[i]) + " absent");
        }
    }
    return judgment;
}

RewardBreakdown score(const Judgment& judgment) {
    RewardBreakdown b;
    for (bool v : judgment.step_verdicts) b.step_score += v ? 1 : -1;
    b.preference_score = judgment.preference == Preference::OutputBetterOrEqual ? 1 : -1;
    b.format_score = judgment.format_ok ? 1 : -1;
    b.total = b.step_score + b.preference_score + b.format_score;
    return b;
}

double judge_loss(const std::vector<std::vector<double>>& predicted,
                  const std::vector<std::uint32_t>& gold) {
    if (predicted.size() != gold.size()) {
        throw std::invalid_argument("judge_loss: need one distribution per gold token (" +
                                    std::to_string(predicted.size()) + " vs " +
                                    std::to_string(gold.size()) + ")");
    }
    double loss = 0.0;
    for (std::size_t j = 0; j < gold.size(); ++j) {
        const std::vector<double>& dist = predicted[j];
        double sum = 0.0;
        for (double p : dist) sum += p;
        if (std::abs(sum - 1.0) > 1e-9) {
            throw std::invalid_argument("judge_loss: distribution " + std::to_string(j) +
                                        " sums to " + std::to_string(sum) + ", not 1");
        }
        if (gold[j] >= dist.size()) {
            throw std::invalid_argument("judge_loss: gold token " + std::to_string(gold[j]) +
                                        " out of vocabulary at position " + std::to_string(j));
        }
        const double p = dist[gold[j]];
        if (p <= 0.0) {
            throw std::domain_error("judge_loss: gold token at position " + std::to_string(j) +
                                    " has probability 0 (infinite loss)");
        }
        loss -= std::log(p);
    }
    return loss;
}

double redundancy_in_group(std::span<const textvec::FeatureVector> outputs, std::size_t i) {
    if (outputs.size() < 2) {
        throw std::domain_error("redundancy_in_group: group size must be >= 2");
    }
    if (i >= outputs.size()) {
        throw std::domain_error("redundancy_in_group: index out of range");
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < outputs.size(); ++j) {
        if (j == i) continue;
        sum += textvec::cosine(outputs[i], outputs[j]);
    }
    return sum / static_cast<double>(outputs.size() - 1);
}

double redundancy_history(const textvec::FeatureVector& output,
                          std::span<const textvec::FeatureVector> history) {
    if (history.empty()) {
        throw std::domain_error("redundancy_history: history must be non-empty");
    }
    double sum = 0.0;
    for (const textvec::FeatureVector& u : history) {
        sum += textvec::cosine(output, u);
    }
    return sum / static_cast<double>(history.size());
}

double length_coefficient(double avg_len, double alpha, double beta) {
    if (!(alpha > 0.0)) {
        throw std::domain_error("length_coefficient: alpha must be > 0");
    }
    return 1.0 / (1.0 + std::exp(-alpha * (avg_len - beta)));
}

double reweight(double r, double s_in, double s_hi, double tau) {
    if (s_in < 0.0 || s_hi < 0.0) {
        throw std::domain_error("reweight: redundancy scores must be non-negative");
    }
    if (tau < 0.0) {
        throw std::domain_error("reweight: tau must be non-negative");
    }
    return r / ((1.0 + tau * s_in) * (1.0 + tau * s_hi));
}

Judgment oracle_judge(const ReasoningTrace& trace, const Scenario& scenario) {
    Judgment j;
    const std::string* steps[3] = {&trace.step_history_analysis, &trace.step_emotion_analysis,
                                   &trace.step_strategy_analysis};
    for (std::size_t t = 0; t < 3; ++t) {
        j.step_verdicts[t] = contains_token(*steps[t], scenario.step_keywords[t]);
    }
    j.preference = contains_token(trace.response, scenario.response_keyword)
                       ? Preference::OutputBetterOrEqual
                       : Preference::ReferenceBetter;
    j.format_ok = trace.complete;
    return j;
}

std::vector<Scenario> load_scenarios(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioIoError("cannot open scenario file: " + path.string());
    std::vector<Scenario> scenarios;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ScenarioIoError("line " + std::to_string(line_no) + ": invalid JSON: " +
                                  e.what());
        }
        const auto fail = [&](const std::string& field, const std::string& what) {
            return ScenarioIoError("line " + std::to_string(line_no) + ": field '" + field + "' " +
                                   what);
        };
        Scenario s;
        if (!rec.contains("id") || !rec["id"].is_string()) throw fail("id", "missing or not a string");
        s.id = rec["id"].get<std::string>();
        if (!rec.contains("history") || !rec["history"].is_array()) {
            throw fail("history", "missing or not an array");
        }
        s.history.id = s.id;
        for (const json& ju : rec["history"]) {
            if (!ju.is_object() || !ju.contains("speaker") || !ju.contains("text") ||
                !ju["speaker"].is_string() || !ju["text"].is_string()) {
                throw fail("history", "entries must be {speaker, text} objects");
            }
            corpus::Utterance u;
            try {
                u.speaker = corpus::speaker_from_string(ju["speaker"].get<std::string>());
            } catch (const std::exception& e) {
                throw fail("history", e.what());
            }
            u.text = ju["text"].get<std::string>();
            s.history.utterances.push_back(std::move(u));
        }
        corpus::derive_round_indices(s.history);
        if (!rec.contains("step_keywords") || !rec["step_keywords"].is_array() ||
            rec["step_keywords"].size() != 3) {
            throw fail("step_keywords", "must be an array of 3 strings");
        }
        for (std::size_t t = 0; t < 3; ++t) {
            if (!rec["step_keywords"][t].is_string()) {
                throw fail("step_keywords", "must be an array of 3 strings");
            }
            s.step_keywords[t] = rec["step_keywords"][t].get<std::string>();
        }
        if (!rec.contains("response_keyword") || !rec["response_keyword"].is_string()) {
            throw fail("response_keyword", "missing or not a string");
        }
        s.response_keyword = rec["response_keyword"].get<std::string>();
        if (rec.contains("seed_token")) {
            if (!rec["seed_token"].is_number_unsigned()) {
                throw fail("seed_token", "must be a non-negative integer");
            }
            s.seed_token = rec["seed_token"].get<std::uint32_t>();
        }
        scenarios.push_back(std::move(s));
    }
    return scenarios;
}

void save_scenarios(const std::vector<Scenario>& scenarios, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ScenarioIoError("cannot open scenario file for writing: " + path.string());
    for (const Scenario& s : scenarios) {
        json rec;
        rec["id"] = s.id;
        rec["history"] = json::array();
        for (const corpus::Utterance& u : s.history.utterances) {
            rec["history"].push_back({{"speaker", corpus::to_string(u.speaker)}, {"text", u.text}});
        }
        rec["step_keywords"] = {s.step_keywords[0], s.step_keywords[1], s.step_keywords[2]};
        rec["response_keyword"] = s.response_keyword;
        rec["seed_token"] = s.seed_token;
        out << rec.dump() << '\n';
    }
    if (!out) throw ScenarioIoError("write failed: " + path.string());
}

}  // namespace grpolab::reward
