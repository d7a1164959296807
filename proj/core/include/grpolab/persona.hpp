#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "grpolab/corpus.hpp"
#include "grpolab/rng.hpp"

namespace grpolab::persona {

/// 4-dimensional DISC behavior profile, each trait in [0, 1].
struct DiscProfile {
    double dominance = 0.0;
    double influence = 0.0;
    double steadiness = 0.0;
    double compliance = 0.0;

    std::array<double, 4> as_array() const { return {dominance, influence, steadiness, compliance}; }
    bool operator==(const DiscProfile&) const = default;
};

void validate_profile(const DiscProfile& p);

struct ProfileRecord {
    DiscProfile profile;
    std::string dialogue_id;  // optional link back to a corpus dialogue

    bool operator==(const ProfileRecord&) const = default;
};

struct ClusterModel {
    int k = 0;
    std::vector<std::array<double, 4>> centroids;
    std::vector<int> assignments;      // profile index -> cluster index
    double sse = 0.0;                  // sum of squared distances to assigned centroids
    std::vector<double> sse_per_iter;  // Lloyd-iteration trace, non-increasing
};

/// Lloyd's algorithm with k-means++ seeding. Ties in nearest-centroid go to
/// the lowest cluster index; an emptied cluster is reseeded with the farthest
/// point of the largest cluster. Terminates on assignment fixpoint or
/// max_iters.
ClusterModel kmeans(const std::vector<DiscProfile>& profiles, int k, Rng& rng, int max_iters = 100);

/// Choose k in 2..k_max-1 maximizing the discrete second difference
/// sse(k-1) - 2*sse(k) + sse(k+1); ties go to the smallest k. sse_by_k[i] is
/// the SSE for k = i+1 and must be non-increasing.
int elbow_select(const std::vector<double>& sse_by_k);

/// Uniform draw among the other members of profile's cluster; the profile
/// itself when it is the sole member.
DiscProfile sample_same_cluster(const DiscProfile& profile, const ClusterModel& model,
                                const std::vector<DiscProfile>& profiles, Rng& rng);

class RewriteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Pluggable persona-conditioned dialogue rewriter. The paper pipeline used
/// an LLM; the bundled stub applies persona-keyed lexical templating.
class Rewriter {
public:
    virtual ~Rewriter() = default;
    virtual corpus::Dialogue rewrite(const corpus::Dialogue& dialogue,
                                     const DiscProfile& persona) const = 0;
};

class IdentityRewriter final : public Rewriter {
public:
    corpus::Dialogue rewrite(const corpus::Dialogue& dialogue,
                             const DiscProfile& persona) const override;
};

/// Prefixes each utterance with a style marker keyed to the persona's
/// dominant trait. Preserves utterance count, speaker sequence, and round
/// structure.
class StyleMarkerRewriter final : public Rewriter {
public:
    corpus::Dialogue rewrite(const corpus::Dialogue& dialogue,
                             const DiscProfile& persona) const override;
};

/// Runs the rewriter and enforces the structural postcondition: the rewritten
/// dialogue must keep the input's round_count. Rewriter failures surface as
/// RewriteError tagged with the dialogue id.
corpus::Dialogue rewrite_dialogue(const corpus::Dialogue& dialogue, const DiscProfile& persona,
                                  const Rewriter& rewriter);

class ProfileIoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// JSON-lines profiles: one object per line with fields `d`, `i`, `s`, `c`
/// in [0,1] and optional `dialogue_id`.
std::vector<ProfileRecord> load_profiles(const std::filesystem::path& path);
void save_profiles(const std::vector<ProfileRecord>& records, const std::filesystem::path& path);

}  // namespace grpolab::persona
