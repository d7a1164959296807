#include "grpolab/textvec.hpp"

#include <cctype>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace grpolab::textvec {

namespace {

bool is_strippable(unsigned char c) {
    return std::ispunct(c) != 0;
}

}  // namespace

std::uint32_t token_hash(std::string_view token) {
    // FNV-1a, 32-bit.
    std::uint32_t h = 2166136261u;
    for (unsigned char c : token) {
        h ^= static_cast<std::uint32_t>(c);
        h *= 16777619u;
    }
    return h;
}

std::size_t hash_bucket(std::string_view token, std::size_t dim) {
    if (dim == 0) throw std::domain_error("hash_bucket: dimension must be positive");
    return token_hash(token) % dim;
}

TokenSeq tokenize(std::string_view text) {
    TokenSeq out;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t start = i;
        while (i < n && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (start == i) break;
        std::size_t lo = start;
        std::size_t hi = i;
        while (lo < hi && is_strippable(static_cast<unsigned char>(text[lo]))) ++lo;
        while (hi > lo && is_strippable(static_cast<unsigned char>(text[hi - 1]))) --hi;
        if (lo == hi) continue;
        std::string token;
        token.reserve(hi - lo);
        for (std::size_t k = lo; k < hi; ++k) {
            token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[k]))));
        }
        out.ids.push_back(token_hash(token));
    }
    return out;
}

FeatureVector embed(const TokenSeq& seq, std::size_t dim) {
    if (dim == 0) throw std::domain_error("embed: dimension must be positive");
    FeatureVector v;
    v.counts.assign(dim, 0.0);
    for (std::uint32_t id : seq.ids) {
        v.counts[id % dim] += 1.0;
    }
    return v;
}

double cosine(const FeatureVector& a, const FeatureVector& b) {
    if (a.dimension() != b.dimension()) {
        throw std::invalid_argument("cosine: dimension mismatch");
    }
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.counts.size(); ++i) {
        dot += a.counts[i] * b.counts[i];
        na += a.counts[i] * a.counts[i];
        nb += b.counts[i] * b.counts[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

double distinct_n(std::span<const TokenSeq> seqs, std::size_t n) {
    if (n == 0) throw std::domain_error("distinct_n: n must be positive");
    std::unordered_set<std::uint64_t> seen;
    std::size_t total = 0;
    for (const TokenSeq& seq : seqs) {
        if (seq.ids.size() < n) continue;
        for (std::size_t i = 0; i + n <= seq.ids.size(); ++i) {
            // Order-sensitive rolling combine of the n-gram's ids.
            std::uint64_t key = 1469598103934665603ull;
            for (std::size_t j = 0; j < n; ++j) {
                key ^= seq.ids[i + j];
                key *= 1099511628211ull;
            }
            seen.insert(key);
            ++total;
        }
    }
    if (total == 0) return 0.0;
    return static_cast<double>(seen.size()) / static_cast<double>(total);
}

}  // namespace grpolab::textvec
