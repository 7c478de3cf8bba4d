#include "sbp/ann_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <unordered_set>

#include "sbp/hash.hpp"
#include "sbp/parallel.hpp"
#include "sbp/rng.hpp"

namespace sbp::ann {

// ---------------------------------------------------------------------------
// Quantization

namespace {
constexpr double kRangeTolerance = 1e-6;
constexpr double kHalfScale = 127.5;  // 255 / 2
}  // namespace

std::uint8_t quantize_component(float x) {
    const double v = static_cast<double>(x);
    if (!(v >= -1.0 - kRangeTolerance && v <= 1.0 + kRangeTolerance)) {
        throw QuantizationRangeError("component " + std::to_string(v) + " outside [-1, 1]");
    }
    const double scaled = std::floor((v + 1.0) * kHalfScale + 0.5);
    return static_cast<std::uint8_t>(std::clamp(scaled, 0.0, 255.0));
}

float dequantize_component(std::uint8_t code) {
    return static_cast<float>(static_cast<double>(code) / kHalfScale - 1.0);
}

std::vector<std::uint8_t> quantize(std::span<const float> vector) {
    std::vector<std::uint8_t> codes(vector.size());
    for (std::size_t i = 0; i < vector.size(); ++i) codes[i] = quantize_component(vector[i]);
    return codes;
}

std::vector<float> dequantize(std::span<const std::uint8_t> codes) {
    std::vector<float> out(codes.size());
    for (std::size_t i = 0; i < codes.size(); ++i) out[i] = dequantize_component(codes[i]);
    return out;
}

double inner_product(std::span<const float> a, std::span<const float> b) {
    // Left-to-right accumulation keeps scores bit-reproducible for any caller.
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
    return s;
}

void normalize(std::span<float> v) {
    double sq = 0.0;
    for (float x : v) sq += static_cast<double>(x) * x;
    if (sq <= 0.0) {
        if (!v.empty()) v[0] = 1.0f;
        return;
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (float& x : v) x = static_cast<float>(x * inv);
}

EmbeddingRecord EmbeddingRecord::make(DocId id, std::vector<float> vector) {
    normalize(vector);
    EmbeddingRecord rec;
    rec.doc_id = id;
    rec.codes = quantize(vector);
    rec.vector = std::move(vector);
    return rec;
}

EmbeddingSet::EmbeddingSet(std::size_t dim, std::vector<DocId> ids, std::vector<float> values)
    : dim_(dim), ids_(std::move(ids)), values_(std::move(values)) {
    if (dim_ == 0) throw ConfigError("dim", "embedding dimension must be positive");
    if (values_.size() != ids_.size() * dim_) {
        throw Error("embedding matrix size does not match ids x dim");
    }
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        normalize(std::span<float>(values_.data() + i * dim_, dim_));
    }
}

EmbeddingSet EmbeddingSet::from_normalized(std::size_t dim, std::vector<DocId> ids, std::vector<float> values) {
    if (dim == 0) throw ConfigError("dim", "embedding dimension must be positive");
    if (values.size() != ids.size() * dim) throw Error("embedding matrix size does not match ids x dim");
    EmbeddingSet set;
    set.dim_ = dim;
    set.ids_ = std::move(ids);
    set.values_ = std::move(values);
    return set;
}

EmbeddingSet EmbeddingSet::subset(std::span<const std::size_t> rows) const {
    std::vector<DocId> ids;
    std::vector<float> values;
    ids.reserve(rows.size());
    values.reserve(rows.size() * dim_);
    for (std::size_t r : rows) {
        ids.push_back(ids_.at(r));
        const auto v = row(r);
        values.insert(values.end(), v.begin(), v.end());
    }
    return from_normalized(dim_, std::move(ids), std::move(values));
}

// ---------------------------------------------------------------------------
// Partition tree

std::size_t default_leaf_count(std::size_t n) {
    auto leaves = static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));
    while (leaves * leaves < n) ++leaves;
    while (leaves > 1 && (leaves - 1) * (leaves - 1) >= n) --leaves;
    return std::max<std::size_t>(leaves, 1);
}

std::size_t default_probe_count(std::size_t leaves) { return default_leaf_count(leaves); }

namespace {

std::size_t nearest_leaf(std::span<const float> x, const std::vector<float>& centroids,
                         std::size_t leaves, std::size_t dim) {
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < leaves; ++c) {
        const double s = inner_product(x, {centroids.data() + c * dim, dim});
        if (s > best_score) {
            best_score = s;
            best = c;
        }
    }
    return best;
}

std::vector<float> seed_centroids(const EmbeddingSet& vectors, std::size_t leaves, Rng& rng) {
    const std::size_t n = vectors.size();
    const std::size_t dim = vectors.dim();
    std::vector<float> centroids;
    centroids.reserve(leaves * dim);
    std::vector<bool> chosen(n, false);
    auto add = [&](std::size_t row) {
        chosen[row] = true;
        const auto v = vectors.row(row);
        centroids.insert(centroids.end(), v.begin(), v.end());
    };
    add(rng.below(n));
    std::vector<double> distance(n, std::numeric_limits<double>::infinity());
    while (centroids.size() < leaves * dim) {
        const std::span<const float> last(centroids.data() + centroids.size() - dim, dim);
        for (std::size_t i = 0; i < n; ++i) {
            const double d = std::max(0.0, 1.0 - inner_product(vectors.row(i), last));
            distance[i] = chosen[i] ? 0.0 : std::min(distance[i], d);
        }
        double total = 0.0;
        for (double d : distance) total += d;
        if (total > 0.0) {
            add(rng.categorical(distance));
        } else {
            // All remaining points coincide with a centroid; take the first unchosen row.
            std::size_t next = 0;
            while (chosen[next]) ++next;
            add(next);
        }
    }
    return centroids;
}

}  // namespace

PartitionTree build_partition(const EmbeddingSet& vectors, const PartitionOptions& options) {
    const std::size_t n = vectors.size();
    if (n == 0) throw Error("cannot partition an empty vector set");
    const std::size_t leaves = options.leaves == 0 ? default_leaf_count(n) : options.leaves;
    if (leaves > n) throw ConfigError("leaves", "leaf count exceeds the number of vectors");
    const std::size_t dim = vectors.dim();

    Rng rng(options.seed);
    PartitionTree tree;
    tree.dim = dim;
    tree.centroids = seed_centroids(vectors, leaves, rng);

    std::vector<std::size_t> assignment(n, 0);
    auto assign = [&]() {
        bool changed = false;
        std::vector<std::size_t> next(n);
        parallel_for(n, options.threads, [&](std::size_t i) {
            next[i] = nearest_leaf(vectors.row(i), tree.centroids, leaves, dim);
        });
        for (std::size_t i = 0; i < n; ++i) {
            if (next[i] != assignment[i]) changed = true;
        }
        assignment.swap(next);
        return changed;
    };

    assign();
    for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
        std::vector<double> sums(leaves * dim, 0.0);
        std::vector<std::size_t> counts(leaves, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto v = vectors.row(i);
            double* s = sums.data() + assignment[i] * dim;
            for (std::size_t j = 0; j < dim; ++j) s[j] += v[j];
            ++counts[assignment[i]];
        }
        for (std::size_t c = 0; c < leaves; ++c) {
            if (counts[c] == 0) continue;  // empty cell keeps its previous centroid
            double sq = 0.0;
            for (std::size_t j = 0; j < dim; ++j) sq += sums[c * dim + j] * sums[c * dim + j];
            if (sq <= 0.0) continue;
            const double inv = 1.0 / std::sqrt(sq);
            for (std::size_t j = 0; j < dim; ++j) {
                tree.centroids[c * dim + j] = static_cast<float>(sums[c * dim + j] * inv);
            }
        }
        if (!assign()) break;
    }

    tree.postings.assign(leaves, {});
    for (std::size_t i = 0; i < n; ++i) {
        tree.postings[assignment[i]].push_back(static_cast<std::uint32_t>(i));
    }
    return tree;
}

// ---------------------------------------------------------------------------
// Searcher

Searcher::Searcher(EmbeddingSet values, const PartitionOptions& options)
    : Searcher(values, build_partition(values, options)) {}

Searcher::Searcher(EmbeddingSet values, PartitionTree tree)
    : values_(std::move(values)), tree_(std::move(tree)) {
    if (tree_.dim != values_.dim()) throw Error("partition tree dimension mismatch");
    codes_.resize(values_.size() * values_.dim());
    for (std::size_t i = 0; i < values_.size(); ++i) {
        const auto v = values_.row(i);
        for (std::size_t j = 0; j < v.size(); ++j) {
            codes_[i * values_.dim() + j] = quantize_component(v[j]);
        }
    }
}

namespace {

struct Candidate {
    float approx;
    std::uint32_t row;
};

float quantized_dot(std::span<const float> query, const std::uint8_t* codes) {
    float acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    const std::size_t n = query.size();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        for (std::size_t u = 0; u < 8; ++u) acc[u] += query[i + u] * static_cast<float>(codes[i + u]);
    }
    float tail = 0.0f;
    for (; i < n; ++i) tail += query[i] * static_cast<float>(codes[i]);
    return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

struct WorstFirst {
    bool operator()(const Neighbor& a, const Neighbor& b) const { return ranks_before(a, b); }
};

}  // namespace

NeighborList Searcher::search(std::span<const float> query, const SearchOptions& options) const {
    NeighborList result;
    if (values_.empty() || options.k == 0) return result;
    if (query.size() != values_.dim()) throw Error("query dimension mismatch");
    const std::size_t dim = values_.dim();
    const std::size_t leaves = tree_.leaf_count();

    // Rank leaves by centroid score and keep the probe budget.
    std::size_t probe = options.probe_leaves == 0 ? default_probe() : options.probe_leaves;
    probe = std::min(probe, leaves);
    std::vector<std::pair<double, std::size_t>> leaf_scores(leaves);
    for (std::size_t c = 0; c < leaves; ++c) {
        leaf_scores[c] = {inner_product(query, tree_.centroid(c)), c};
    }
    std::partial_sort(leaf_scores.begin(), leaf_scores.begin() + static_cast<std::ptrdiff_t>(probe),
                      leaf_scores.end(), [](const auto& a, const auto& b) {
                          return a.first > b.first || (a.first == b.first && a.second < b.second);
                      });

    // Asymmetric quantized scoring: <q, x_hat> = (sum q_i code_i) / 127.5 - sum q_i.
    double query_sum = 0.0;
    double query_l1 = 0.0;
    for (float q : query) {
        query_sum += q;
        query_l1 += std::fabs(q);
    }
    std::vector<Candidate> cands;
    for (std::size_t p = 0; p < probe; ++p) {
        for (std::uint32_t row : tree_.postings[leaf_scores[p].second]) {
            if (options.exclude_id && values_.ids()[row] == *options.exclude_id) continue;
            const float dot = quantized_dot(query, codes_.data() + static_cast<std::size_t>(row) * dim);
            cands.push_back({static_cast<float>(dot / kHalfScale - query_sum), row});
        }
    }
    const std::size_t k = std::min(options.k, cands.size());
    auto approx_order = [&](const Candidate& a, const Candidate& b) {
        if (a.approx != b.approx) return a.approx > b.approx;
        return values_.ids()[a.row] < values_.ids()[b.row];
    };

    if (!options.rescore) {
        std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(k), cands.end(),
                          approx_order);
        result.reserve(k);
        for (std::size_t i = 0; i < k; ++i) {
            result.push_back({values_.ids()[cands[i].row], static_cast<double>(cands[i].approx)});
        }
        return result;
    }

    // |<q,x> - <q,x_hat>| <= ||q||_1 / 255, widened for float accumulation error.
    const double bound = query_l1 * (1.0 / 255.0) * (1.0 + 1e-3) +
                         query_l1 * static_cast<double>(dim) * 3e-7 + 1e-6;
    std::priority_queue<Neighbor, std::vector<Neighbor>, WorstFirst> best;
    const std::size_t chunk = std::max<std::size_t>(2 * k, 64);
    std::size_t next = 0;
    bool done = false;
    while (!done && next < cands.size()) {
        const std::size_t end = std::min(cands.size(), next + chunk);
        std::partial_sort(cands.begin() + static_cast<std::ptrdiff_t>(next),
                          cands.begin() + static_cast<std::ptrdiff_t>(end), cands.end(), approx_order);
        for (std::size_t i = next; i < end; ++i) {
            if (best.size() == k && static_cast<double>(cands[i].approx) + bound < best.top().score) {
                done = true;
                break;
            }
            const Neighbor n{values_.ids()[cands[i].row], inner_product(query, values_.row(cands[i].row))};
            if (best.size() < k) {
                best.push(n);
            } else if (ranks_before(n, best.top())) {
                best.pop();
                best.push(n);
            }
        }
        next = end;
    }
    result.resize(best.size());
    for (std::size_t i = result.size(); i > 0; --i) {
        result[i - 1] = best.top();
        best.pop();
    }
    return result;
}

NeighborList brute_force_topk(const EmbeddingSet& vectors, std::span<const float> query,
                              std::size_t k, std::optional<DocId> exclude_id) {
    NeighborList all;
    all.reserve(vectors.size());
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        if (exclude_id && vectors.ids()[i] == *exclude_id) continue;
        all.push_back({vectors.ids()[i], inner_product(query, vectors.row(i))});
    }
    const std::size_t take = std::min(k, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take), all.end(),
                      ranks_before);
    all.resize(take);
    return all;
}

NeighborList merge_topk(std::span<const NeighborList> lists, std::size_t k) {
    NeighborList merged;
    for (const auto& l : lists) merged.insert(merged.end(), l.begin(), l.end());
    std::sort(merged.begin(), merged.end(), ranks_before);
    NeighborList out;
    std::unordered_set<DocId> seen;
    for (const auto& n : merged) {
        if (out.size() == k) break;
        if (seen.insert(n.id).second) out.push_back(n);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sharding

std::vector<std::size_t> resolve_assignment(const ShardingOptions& options) {
    if (options.key_shards == 0) throw ConfigError("key_shards", "must be positive");
    if (options.salts == 0) throw ConfigError("salts", "must be positive");
    std::vector<std::size_t> key_to_salt(options.key_shards);
    if (options.assignment.empty()) {
        for (std::size_t j = 0; j < options.key_shards; ++j) key_to_salt[j] = j % options.salts;
        return key_to_salt;
    }
    std::vector<int> covered(options.key_shards, 0);
    for (const auto& [key, salt] : options.assignment) {
        if (key >= options.key_shards) {
            throw ShardAssignmentError("assignment names unknown key shard " + std::to_string(key));
        }
        if (salt >= options.salts) {
            throw ShardAssignmentError("assignment names unknown salted copy " + std::to_string(salt));
        }
        if (++covered[key] > 1) {
            throw ShardAssignmentError("key shard " + std::to_string(key) + " is assigned more than once");
        }
        key_to_salt[key] = salt;
    }
    for (std::size_t j = 0; j < options.key_shards; ++j) {
        if (covered[j] == 0) {
            throw ShardAssignmentError("key shard " + std::to_string(j) + " is not assigned");
        }
    }
    return key_to_salt;
}

ShardedSearcher ShardedSearcher::build(const EmbeddingSet& values, const ShardingOptions& options) {
    if (options.value_shards == 0) throw ConfigError("value_shards", "must be positive");
    if (options.value_shards > values.size()) {
        throw ConfigError("value_shards", "more value shards than vectors");
    }
    std::vector<std::shared_ptr<const Searcher>> shards;
    const std::size_t n = values.size();
    for (std::size_t s = 0; s < options.value_shards; ++s) {
        const std::size_t begin = s * n / options.value_shards;
        const std::size_t end = (s + 1) * n / options.value_shards;
        std::vector<std::size_t> rows(end - begin);
        for (std::size_t r = begin; r < end; ++r) rows[r - begin] = r;
        PartitionOptions part = options.partition;
        part.seed = options.partition.seed + s;
        shards.push_back(std::make_shared<const Searcher>(values.subset(rows), part));
    }
    return from_shards(std::move(shards), options);
}

ShardedSearcher ShardedSearcher::from_shards(std::vector<std::shared_ptr<const Searcher>> shards,
                                             const ShardingOptions& options) {
    ShardedSearcher out;
    out.key_to_salt_ = resolve_assignment(options);
    out.shards_ = std::move(shards);
    out.copies_.assign(options.salts, out.shards_);
    return out;
}

std::size_t ShardedSearcher::key_shard_of(std::size_t query_index, std::size_t query_count) const {
    if (query_count == 0) return 0;
    return query_index * key_to_salt_.size() / query_count;
}

NeighborList ShardedSearcher::search(std::span<const float> query, const SearchOptions& options,
                                     std::size_t key_shard) const {
    const auto& copy = copies_.at(salt_of(key_shard));
    std::vector<NeighborList> partial;
    partial.reserve(copy.size());
    for (const auto& shard : copy) partial.push_back(shard->search(query, options));
    return merge_topk(partial, options.k);
}

std::vector<NeighborList> ShardedSearcher::search_batch(const EmbeddingSet& queries,
                                                        const SearchOptions& options,
                                                        bool exclude_self, unsigned threads) const {
    std::vector<NeighborList> results(queries.size());
    parallel_for(queries.size(), threads, [&](std::size_t i) {
        SearchOptions per_query = options;
        if (exclude_self) per_query.exclude_id = queries.ids()[i];
        results[i] = search(queries.row(i), per_query, key_shard_of(i, queries.size()));
    });
    return results;
}

// ---------------------------------------------------------------------------
// Toy embedder

std::vector<float> toy_embed(std::span<const TokenId> tokens, std::size_t dim, std::uint64_t seed) {
    std::vector<float> v(dim, 0.0f);
    const std::size_t blocks = (dim + 63) / 64;
    for (TokenId t : tokens) {
        const std::uint64_t key = hash_combine(seed, t);
        for (std::size_t b = 0; b < blocks; ++b) {
            const std::uint64_t bits = splitmix64(hash_combine(key, b));
            const std::size_t limit = std::min<std::size_t>(64, dim - b * 64);
            for (std::size_t j = 0; j < limit; ++j) {
                v[b * 64 + j] += ((bits >> j) & 1) ? 1.0f : -1.0f;
            }
        }
    }
    normalize(v);
    return v;
}

}  // namespace sbp::ann
