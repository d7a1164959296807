#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace grpolab::textvec {

/// Ordered sequence of token ids. Ids are opaque: the tokenizer emits stable
/// 32-bit string hashes, the toy policy emits vocabulary indices; both work
/// anywhere a TokenSeq is accepted.
struct TokenSeq {
    std::vector<std::uint32_t> ids;

    std::size_t length() const { return ids.size(); }
    bool empty() const { return ids.empty(); }
    bool operator==(const TokenSeq&) const = default;
};

/// Hashed bag-of-words counts over a fixed number of buckets.
struct FeatureVector {
    static constexpr std::size_t kDefaultDim = 1024;

    std::vector<double> counts;

    std::size_t dimension() const { return counts.size(); }
    bool operator==(const FeatureVector&) const = default;
};

/// FNV-1a hash of a token's bytes. Stable across runs and platforms; the
/// bucket assignment golden test pins it.
std::uint32_t token_hash(std::string_view token);

/// Bucket a token lands in for a given feature dimension.
std::size_t hash_bucket(std::string_view token, std::size_t dim = FeatureVector::kDefaultDim);

/// Lowercase, split on whitespace, strip leading/trailing punctuation from
/// each piece, drop pieces that end up empty. Token ids are token_hash values.
TokenSeq tokenize(std::string_view text);

/// Accumulate bucket counts for a token sequence. Empty sequence gives the
/// zero vector.
FeatureVector embed(const TokenSeq& seq, std::size_t dim = FeatureVector::kDefaultDim);

/// Cosine similarity clamped to the count-vector case: non-negative inputs
/// give a value in [0, 1]. Either operand having zero norm yields 0, so empty
/// text never scores as similar (or as suspiciously diverse).
double cosine(const FeatureVector& a, const FeatureVector& b);

/// Unique n-grams / total n-grams across all sequences; 0 when no n-gram
/// exists. Diagnostic for repetitive generation.
double distinct_n(std::span<const TokenSeq> seqs, std::size_t n);

}  // namespace grpolab::textvec
