#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "sbp/common.hpp"

namespace sbp::ann {

inline constexpr std::size_t kDefaultDim = 1024;
inline constexpr std::size_t kDefaultTopK = 200;

struct Neighbor {
    DocId id = 0;
    double score = 0.0;
    bool operator==(const Neighbor&) const = default;
};
using NeighborList = std::vector<Neighbor>;

/// Global ranking rule: descending score, ties by ascending id.
inline bool ranks_before(const Neighbor& a, const Neighbor& b) {
    return a.score > b.score || (a.score == b.score && a.id < b.id);
}

// ---------------------------------------------------------------------------
// 8-bit quantization: q = round_half_up((x + 1) / 2 * 255), decoded to the bin
// center q / 255 * 2 - 1. Reconstruction error is at most 1/255 per component.

class QuantizationRangeError : public Error {
public:
    using Error::Error;
};

std::uint8_t quantize_component(float x);
float dequantize_component(std::uint8_t code);
std::vector<std::uint8_t> quantize(std::span<const float> vector);
std::vector<float> dequantize(std::span<const std::uint8_t> codes);

/// Full-precision inner product, accumulated in double.
double inner_product(std::span<const float> a, std::span<const float> b);

/// Scales to unit Euclidean norm. A zero vector becomes e_0.
void normalize(std::span<float> v);

struct EmbeddingRecord {
    DocId doc_id = 0;
    std::vector<float> vector;
    std::vector<std::uint8_t> codes;

    /// Normalizes `vector` and derives its codes.
    static EmbeddingRecord make(DocId id, std::vector<float> vector);
};

/// Row-major block of unit-norm embeddings with their document ids.
class EmbeddingSet {
public:
    EmbeddingSet() = default;
    /// Rows are normalized on construction.
    EmbeddingSet(std::size_t dim, std::vector<DocId> ids, std::vector<float> values);
    /// Takes rows that are already unit norm as-is, so stored vectors keep their exact bits.
    static EmbeddingSet from_normalized(std::size_t dim, std::vector<DocId> ids, std::vector<float> values);

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return ids_.size(); }
    bool empty() const { return ids_.empty(); }
    const std::vector<DocId>& ids() const { return ids_; }
    std::span<const float> row(std::size_t i) const {
        return {values_.data() + i * dim_, dim_};
    }
    const std::vector<float>& values() const { return values_; }

    EmbeddingSet subset(std::span<const std::size_t> rows) const;

private:
    std::size_t dim_ = 0;
    std::vector<DocId> ids_;
    std::vector<float> values_;
};

// ---------------------------------------------------------------------------
// Partition tree

struct PartitionOptions {
    std::size_t leaves = 0;  // 0 selects ceil(sqrt(N))
    std::uint64_t seed = 0;
    std::size_t max_iterations = 12;
    unsigned threads = 0;
};

struct PartitionTree {
    std::size_t dim = 0;
    std::vector<float> centroids;                     // leaf_count x dim, unit rows
    std::vector<std::vector<std::uint32_t>> postings;  // row indices per leaf

    std::size_t leaf_count() const { return postings.size(); }
    std::span<const float> centroid(std::size_t leaf) const {
        return {centroids.data() + leaf * dim, dim};
    }
};

std::size_t default_leaf_count(std::size_t n);
std::size_t default_probe_count(std::size_t leaves);

/// Seeded spherical k-means (k-means++ initialization, fixed iteration cap).
PartitionTree build_partition(const EmbeddingSet& vectors, const PartitionOptions& options = {});

// ---------------------------------------------------------------------------
// Search

struct SearchOptions {
    std::size_t k = kDefaultTopK;
    std::size_t probe_leaves = 0;  // 0 selects ceil(sqrt(L))
    bool rescore = true;
    std::optional<DocId> exclude_id;  // self-match to drop
};

/// Searcher over one value shard: partition tree plus quantized code blocks.
/// Immutable after construction and safe for concurrent queries.
class Searcher {
public:
    Searcher(EmbeddingSet values, const PartitionOptions& options);
    Searcher(EmbeddingSet values, PartitionTree tree);

    /// Candidates come from the probed leaves ranked by quantized scores. With
    /// rescoring, candidates are re-ranked on full precision until the
    /// quantization error bound proves no remaining candidate can enter the top k.
    NeighborList search(std::span<const float> query, const SearchOptions& options) const;

    const EmbeddingSet& values() const { return values_; }
    const PartitionTree& tree() const { return tree_; }
    const std::vector<std::uint8_t>& codes() const { return codes_; }
    std::size_t default_probe() const { return default_probe_count(tree_.leaf_count()); }

private:
    EmbeddingSet values_;
    PartitionTree tree_;
    std::vector<std::uint8_t> codes_;  // row-major, N x dim
};

/// Exact oracle: full-precision scores over every vector.
NeighborList brute_force_topk(const EmbeddingSet& vectors, std::span<const float> query,
                              std::size_t k, std::optional<DocId> exclude_id = std::nullopt);

/// Top k of the union of per-searcher lists under the global ranking rule.
/// Entries with the same id keep their best score.
NeighborList merge_topk(std::span<const NeighborList> lists, std::size_t k);

class ShardAssignmentError : public Error {
public:
    using Error::Error;
};

struct ShardingOptions {
    std::size_t value_shards = 1;
    std::size_t key_shards = 1;
    std::size_t salts = 1;
    /// Explicit (key shard, salted copy) pairs; empty means key shard j -> copy j % salts.
    std::vector<std::pair<std::size_t, std::size_t>> assignment;
    PartitionOptions partition;
};

/// Value vectors are split into contiguous shards, each with its own tree of
/// ceil(sqrt(shard size)) leaves. Each salted copy holds every value-shard
/// searcher; each key shard is served by exactly one salted copy.
class ShardedSearcher {
public:
    static ShardedSearcher build(const EmbeddingSet& values, const ShardingOptions& options);
    static ShardedSearcher from_shards(std::vector<std::shared_ptr<const Searcher>> shards,
                                       const ShardingOptions& options);

    /// Searches every query; query i belongs to key shard floor(i * key_shards / n).
    /// When exclude_self is set, each query skips its own id.
    std::vector<NeighborList> search_batch(const EmbeddingSet& queries, const SearchOptions& options,
                                           bool exclude_self = true, unsigned threads = 0) const;

    NeighborList search(std::span<const float> query, const SearchOptions& options,
                        std::size_t key_shard = 0) const;

    std::size_t key_shard_of(std::size_t query_index, std::size_t query_count) const;
    std::size_t salt_of(std::size_t key_shard) const { return key_to_salt_.at(key_shard); }
    std::size_t value_shard_count() const { return shards_.size(); }
    std::size_t key_shard_count() const { return key_to_salt_.size(); }
    std::size_t salt_count() const { return copies_.size(); }
    const std::vector<std::shared_ptr<const Searcher>>& shards() const { return shards_; }

private:
    std::vector<std::shared_ptr<const Searcher>> shards_;
    std::vector<std::vector<std::shared_ptr<const Searcher>>> copies_;  // [salt][value shard]
    std::vector<std::size_t> key_to_salt_;
};

/// Checks that every key shard is assigned to exactly one existing salted copy.
std::vector<std::size_t> resolve_assignment(const ShardingOptions& options);

// ---------------------------------------------------------------------------
// Persistence

/// Directory layout: manifest.json plus, per value shard s, centroids_s.bin,
/// postings_s.bin, codes_s.bin and vectors_s.bin.
void save_index(const std::filesystem::path& dir, const ShardedSearcher& searcher,
                const ShardingOptions& options);
std::pair<ShardedSearcher, ShardingOptions> load_index(const std::filesystem::path& dir);

/// Binary matrix: u64 N, u64 d, then N*d little-endian f32, row-major.
void write_matrix(const std::filesystem::path& path, const EmbeddingSet& set);
/// Reads a binary matrix; ids come from the sidecar `<path>.ids.json` when present,
/// otherwise rows are numbered 0..N-1.
EmbeddingSet read_matrix(const std::filesystem::path& path);
void write_ids_sidecar(const std::filesystem::path& matrix_path, const std::vector<DocId>& ids);
/// JSON lines of {"id", "vector"}.
EmbeddingSet read_embeddings_jsonl(const std::filesystem::path& path);
/// Dispatches on extension: .jsonl is JSON lines, anything else a binary matrix.
EmbeddingSet read_embeddings(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Toy embedder (tests and fixtures only): hashed bag of tokens projected onto
// random sign vectors, then normalized.

std::vector<float> toy_embed(std::span<const TokenId> tokens, std::size_t dim,
                             std::uint64_t seed = 0);

}  // namespace sbp::ann

namespace sbp::ann {

/// Neighbor list of one indexed document (index-search output).
struct QueryNeighbors {
    DocId doc_id = 0;
    NeighborList neighbors;
};

/// JSON lines of {"id", "neighbors": [[id, score], ...]}.
void write_neighbors_jsonl(const std::filesystem::path& path, std::span<const QueryNeighbors> lists);
std::vector<QueryNeighbors> read_neighbors_jsonl(const std::filesystem::path& path);

}  // namespace sbp::ann
