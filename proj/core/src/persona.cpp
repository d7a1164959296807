#include "grpolab/persona.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include <json.hpp>

namespace grpolab::persona {

namespace {

using nlohmann::json;

double sq_dist(const std::array<double, 4>& a, const std::array<double, 4>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

int nearest_centroid(const std::array<double, 4>& p,
                     const std::vector<std::array<double, 4>>& centroids) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        const double d = sq_dist(p, centroids[c]);
        if (d < best_d) {  // strict: ties keep the lowest cluster index
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    return best;
}

double total_sse(const std::vector<std::array<double, 4>>& points,
                 const std::vector<std::array<double, 4>>& centroids,
                 const std::vector<int>& assignments) {
    double s = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        s += sq_dist(points[i], centroids[static_cast<std::size_t>(assignments[i])]);
    }
    return s;
}

std::vector<std::array<double, 4>> seed_kmeanspp(const std::vector<std::array<double, 4>>& points,
                                                 int k, Rng& rng) {
    std::vector<std::array<double, 4>> centroids;
    centroids.reserve(static_cast<std::size_t>(k));
    centroids.push_back(points[uniform_index(rng, points.size())]);
    std::vector<double> d2(points.size());
    while (static_cast<int>(centroids.size()) < k) {
        for (std::size_t i = 0; i < points.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centroids) best = std::min(best, sq_dist(points[i], c));
            d2[i] = best;
        }
        centroids.push_back(points[weighted_index(rng, d2)]);
    }
    return centroids;
}

}  // namespace

void validate_profile(const DiscProfile& p) {
    for (double v : p.as_array()) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw std::domain_error("DiscProfile: components must lie in [0,1]");
        }
    }
}

ClusterModel kmeans(const std::vector<DiscProfile>& profiles, int k, Rng& rng, int max_iters) {
    if (profiles.empty()) throw std::domain_error("kmeans: empty input");
    if (k < 1) throw std::domain_error("kmeans: k must be >= 1");
    if (max_iters < 1) throw std::domain_error("kmeans: max_iters must be >= 1");

    std::vector<std::array<double, 4>> points;
    points.reserve(profiles.size());
    for (const DiscProfile& p : profiles) points.push_back(p.as_array());

    std::set<std::array<double, 4>> distinct(points.begin(), points.end());
    if (static_cast<std::size_t>(k) > distinct.size()) {
        throw std::domain_error("kmeans: k exceeds number of distinct profiles");
    }

    ClusterModel model;
    model.k = k;
    model.centroids = seed_kmeanspp(points, k, rng);
    model.assignments.assign(points.size(), 0);

    for (int iter = 0; iter < max_iters; ++iter) {
        std::vector<int> next(points.size());
        for (std::size_t i = 0; i < points.size(); ++i) {
            next[i] = nearest_centroid(points[i], model.centroids);
        }

        // Reseed any emptied cluster with the farthest point of the largest one.
        for (int c = 0; c < k; ++c) {
            if (std::count(next.begin(), next.end(), c) > 0) continue;
            std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
            for (int a : next) ++counts[static_cast<std::size_t>(a)];
            const int largest = static_cast<int>(
                std::max_element(counts.begin(), counts.end()) - counts.begin());
            std::size_t farthest = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < points.size(); ++i) {
                if (next[i] != largest) continue;
                const double d =
                    sq_dist(points[i], model.centroids[static_cast<std::size_t>(largest)]);
                if (d > far_d) {
                    far_d = d;
                    farthest = i;
                }
            }
            model.centroids[static_cast<std::size_t>(c)] = points[farthest];
            next[farthest] = c;
        }

        // Recompute centroids as cluster means, in fixed cluster order.
        std::vector<std::array<double, 4>> sums(static_cast<std::size_t>(k), {0, 0, 0, 0});
        std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
        for (std::size_t i = 0; i < points.size(); ++i) {
            const auto c = static_cast<std::size_t>(next[i]);
            for (std::size_t j = 0; j < 4; ++j) sums[c][j] += points[i][j];
            ++counts[c];
        }
        for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c) {
            for (std::size_t j = 0; j < 4; ++j) {
                sums[c][j] /= static_cast<double>(counts[c]);
            }
        }

        const bool fixpoint = (next == model.assignments) && iter > 0;
        model.assignments = next;
        model.centroids = sums;
        model.sse_per_iter.push_back(total_sse(points, model.centroids, model.assignments));
        if (fixpoint) break;
    }

    // Final pass so every assignment maps to its nearest centroid.
    for (std::size_t i = 0; i < points.size(); ++i) {
        model.assignments[i] = nearest_centroid(points[i], model.centroids);
    }
    model.sse = total_sse(points, model.centroids, model.assignments);
    return model;
}

int elbow_select(const std::vector<double>& sse_by_k) {
    const int k_max = static_cast<int>(sse_by_k.size());
    if (k_max < 3) throw std::domain_error("elbow_select: need sse for k_max >= 3");
    for (int i = 1; i < k_max; ++i) {
        if (sse_by_k[static_cast<std::size_t>(i)] >
            sse_by_k[static_cast<std::size_t>(i - 1)]) {
            throw std::domain_error("elbow_select: sse must be non-increasing in k (broken at k=" +
                                    std::to_string(i + 1) + ")");
        }
    }
    int best_k = 2;
    double best_d2 = -std::numeric_limits<double>::infinity();
    for (int k = 2; k <= k_max - 1; ++k) {
        const double d2 = sse_by_k[static_cast<std::size_t>(k - 2)] -
                          2.0 * sse_by_k[static_cast<std::size_t>(k - 1)] +
                          sse_by_k[static_cast<std::size_t>(k)];
        if (d2 > best_d2) {  // strict: ties keep the smallest k
            best_d2 = d2;
            best_k = k;
        }
    }
    return best_k;
}

DiscProfile sample_same_cluster(const DiscProfile& profile, const ClusterModel& model,
                                const std::vector<DiscProfile>& profiles, Rng& rng) {
    if (model.assignments.size() != profiles.size()) {
        throw std::domain_error("sample_same_cluster: model does not match profiles");
    }
    auto it = std::find(profiles.begin(), profiles.end(), profile);
    if (it == profiles.end()) {
        throw std::domain_error("sample_same_cluster: profile not found");
    }
    const auto self = static_cast<std::size_t>(it - profiles.begin());
    const int cluster = model.assignments[self];

    std::vector<std::size_t> peers;
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        if (i != self && model.assignments[i] == cluster) peers.push_back(i);
    }
    if (peers.empty()) return profile;
    return profiles[peers[uniform_index(rng, peers.size())]];
}

corpus::Dialogue IdentityRewriter::rewrite(const corpus::Dialogue& dialogue,
                                           const DiscProfile&) const {
    return dialogue;
}

corpus::Dialogue StyleMarkerRewriter::rewrite(const corpus::Dialogue& dialogue,
                                              const DiscProfile& persona) const {
    static constexpr const char* kMarkers[4] = {
        "Frankly,",       // dominance
        "Oh,",            // influence
        "Take heart,",    // steadiness
        "To be precise,"  // compliance
    };
    const auto traits = persona.as_array();
    std::size_t dominant = 0;
    for (std::size_t i = 1; i < 4; ++i) {
        if (traits[i] > traits[dominant]) dominant = i;
    }
    corpus::Dialogue out = dialogue;
    for (corpus::Utterance& u : out.utterances) {
        u.text = std::string(kMarkers[dominant]) + " " + u.text;
    }
    return out;
}

corpus::Dialogue rewrite_dialogue(const corpus::Dialogue& dialogue, const DiscProfile& persona,
                                  const Rewriter& rewriter) {
    corpus::Dialogue out;
    try {
        out = rewriter.rewrite(dialogue, persona);
    } catch (const std::exception& e) {
        throw RewriteError("rewriter failed on dialogue '" + dialogue.id + "': " + e.what());
    }
    if (out.round_count() != dialogue.round_count()) {
        throw RewriteError("rewriter broke round structure of dialogue '" + dialogue.id +
                           "': round count " + std::to_string(dialogue.round_count()) + " -> " +
                           std::to_string(out.round_count()));
    }
    return out;
}

std::vector<ProfileRecord> load_profiles(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ProfileIoError("cannot open profiles file: " + path.string());
    std::vector<ProfileRecord> records;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ProfileIoError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
        }
        ProfileRecord r;
        const char* fields[4] = {"d", "i", "s", "c"};
        double* slots[4] = {&r.profile.dominance, &r.profile.influence, &r.profile.steadiness,
                            &r.profile.compliance};
        for (int f = 0; f < 4; ++f) {
            if (!rec.contains(fields[f]) || !rec[fields[f]].is_number()) {
                throw ProfileIoError("line " + std::to_string(line_no) + ": field '" +
                                     fields[f] + "' missing or not a number");
            }
            *slots[f] = rec[fields[f]].get<double>();
        }
        try {
            validate_profile(r.profile);
        } catch (const std::domain_error& e) {
            throw ProfileIoError("line " + std::to_string(line_no) + ": " + e.what());
        }
        if (rec.contains("dialogue_id")) {
            if (!rec["dialogue_id"].is_string()) {
                throw ProfileIoError("line " + std::to_string(line_no) +
                                     ": field 'dialogue_id' must be a string");
            }
            r.dialogue_id = rec["dialogue_id"].get<std::string>();
        }
        records.push_back(std::move(r));
    }
    return records;
}

void save_profiles(const std::vector<ProfileRecord>& records, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ProfileIoError("cannot open profiles file for writing: " + path.string());
    for (const ProfileRecord& r : records) {
        json rec;
        rec["d"] = r.profile.dominance;
        rec["i"] = r.profile.influence;
        rec["s"] = r.profile.steadiness;
        rec["c"] = r.profile.compliance;
        if (!r.dialogue_id.empty()) rec["dialogue_id"] = r.dialogue_id;
        out << rec.dump() << '\n';
    }
    if (!out) throw ProfileIoError("write failed: " + path.string());
}

}  // namespace grpolab::persona
