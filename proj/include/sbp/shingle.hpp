#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sbp/common.hpp"
#include "sbp/corpus.hpp"

namespace sbp::shingle {

inline constexpr std::size_t kDefaultWidth = 13;
inline constexpr std::size_t kDefaultPermutations = 128;

/// Lowercases, deletes punctuation, drops all-digit tokens and joins the
/// remaining tokens with single spaces.
std::string normalize_surface(std::string_view text);

/// normalize_surface followed by the tokenizer (reference tokenizer if null).
std::vector<TokenId> normalize_for_shingling(std::string_view text,
                                             const corpus::Tokenizer* tokenizer = nullptr);

/// Sorted, duplicate-free hashes of every contiguous `width`-token window.
struct ShingleSet {
    DocId doc_id = 0;
    std::size_t width = kDefaultWidth;
    std::vector<std::uint64_t> hashes;

    std::size_t size() const { return hashes.size(); }
    bool empty() const { return hashes.empty(); }
};

std::uint64_t window_hash(std::span<const TokenId> window);

ShingleSet shingles(std::span<const TokenId> tokens, std::size_t width = kDefaultWidth,
                    DocId doc_id = 0);

class IncomparableError : public Error {
public:
    using Error::Error;
};

/// |a ∩ b| / |a ∪ b|, and 0 when both are empty. Throws on width mismatch.
double jaccard(const ShingleSet& a, const ShingleSet& b);

/// True when the two sets share at least one shingle.
bool intersects(const ShingleSet& a, const ShingleSet& b);

struct MinHashSignature {
    DocId doc_id = 0;
    std::uint64_t seed = 0;
    std::size_t width = kDefaultWidth;
    bool empty_set = true;
    std::vector<std::uint64_t> minima;
};

MinHashSignature minhash(const ShingleSet& set, std::size_t k = kDefaultPermutations,
                         std::uint64_t seed = 0);

/// Fraction of agreeing minima. Signatures of empty sets estimate 0.
double estimate_jaccard(const MinHashSignature& a, const MinHashSignature& b);

/// Header: u64 k, u64 seed, u64 count; then per record u64 doc_id and k u64 minima.
void write_signatures(std::ostream& out, std::span<const MinHashSignature> signatures);
std::vector<MinHashSignature> read_signatures(std::istream& in);

}  // namespace sbp::shingle
