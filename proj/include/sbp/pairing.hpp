#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sbp/ann_index.hpp"
#include "sbp/corpus.hpp"
#include "sbp/shingle.hpp"

namespace sbp::pairing {

inline constexpr double kDefaultAlpha = 0.75;
inline constexpr std::size_t kDefaultContextCap = 8192;

/// Ordered (seed d1, target d2) pair with its inner-product similarity.
struct PairRecord {
    DocId seed_id = 0;
    DocId target_id = 0;
    double similarity = 0.0;
    bool operator==(const PairRecord&) const = default;
};

struct ThresholdOptions {
    double alpha = kDefaultAlpha;
    /// Keep both (a,b) and (b,a) when each appears in the other's list. When
    /// false, one record per unordered pair survives (smaller seed id first).
    bool both_orderings = true;
};

/// One record per (query, neighbor) with score strictly above alpha, sorted by
/// (seed_id, target_id). Throws ConfigError for alpha outside [-1, 1].
std::vector<PairRecord> pair_by_threshold(std::span<const ann::QueryNeighbors> neighbors,
                                          const ThresholdOptions& options = {});

/// Drops every pair whose normalized documents share a `width`-token shingle.
/// Input order is preserved. Throws sbp::Error naming any id missing from the corpus.
std::vector<PairRecord> dedup_pairs(std::span<const PairRecord> pairs,
                                    const corpus::CorpusHandle& corpus,
                                    std::size_t width = shingle::kDefaultWidth, unsigned threads = 0);

struct PairDataset {
    std::vector<PairRecord> pairs;
    double alpha = kDefaultAlpha;
    std::size_t width = shingle::kDefaultWidth;
    std::size_t context_cap = kDefaultContextCap;
    std::uint64_t seed = 0;
    std::size_t dropped_over_cap = 0;
};

struct EmitOptions {
    double alpha = kDefaultAlpha;
    std::size_t width = shingle::kDefaultWidth;
    std::size_t context_cap = kDefaultContextCap;
    std::uint64_t seed = 0;
};

/// Applies the context cap (token_count(d1) + token_count(d2) <= cap) and a
/// seeded shuffle that depends only on the pair set, not its input order.
PairDataset emit_pair_dataset(std::vector<PairRecord> pairs, const corpus::CorpusHandle& corpus,
                              const EmitOptions& options = {});

/// JSON lines of {"seed_id", "target_id", "similarity"}.
void write_pairs_jsonl(const std::filesystem::path& path, std::span<const PairRecord> pairs);
std::vector<PairRecord> read_pairs_jsonl(const std::filesystem::path& path);

/// Retained-pair similarity histogram: bin_lower,bin_upper,count.
std::string similarity_histogram_csv(std::span<const PairRecord> pairs, double lower = kDefaultAlpha,
                                     double bin_width = 0.01);

}  // namespace sbp::pairing
