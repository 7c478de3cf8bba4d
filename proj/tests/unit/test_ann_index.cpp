#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "sbp/ann_index.hpp"
#include "sbp/rng.hpp"
#include "temp_dir.hpp"

using namespace sbp;
using namespace sbp::ann;

namespace {

EmbeddingSet random_set(std::size_t n, std::size_t dim, std::uint64_t seed, DocId first_id = 0) {
    Rng rng(seed);
    std::vector<float> values(n * dim);
    for (auto& v : values) v = static_cast<float>(rng.normal());
    std::vector<DocId> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = first_id + i;
    return EmbeddingSet(dim, std::move(ids), std::move(values));
}

/// Independent ranking: score every row in double and sort with the ranking rule.
NeighborList reference_topk(const EmbeddingSet& set, std::span<const float> q, std::size_t k,
                            std::optional<DocId> exclude = std::nullopt) {
    NeighborList all;
    for (std::size_t i = 0; i < set.size(); ++i) {
        if (exclude && set.ids()[i] == *exclude) continue;
        double s = 0.0;
        for (std::size_t j = 0; j < set.dim(); ++j) s += static_cast<double>(set.row(i)[j]) * q[j];
        all.push_back({set.ids()[i], s});
    }
    std::sort(all.begin(), all.end(), ranks_before);
    if (all.size() > k) all.resize(k);
    return all;
}

double recall(const NeighborList& got, const NeighborList& truth) {
    std::set<DocId> t;
    for (const auto& n : truth) t.insert(n.id);
    std::size_t hit = 0;
    for (const auto& n : got) hit += t.count(n.id);
    return truth.empty() ? 1.0 : static_cast<double>(hit) / static_cast<double>(truth.size());
}

}  // namespace

TEST_CASE("quantization endpoints and midpoint") {
    CHECK(quantize_component(-1.0f) == 0);
    CHECK(quantize_component(1.0f) == 255);
    CHECK(quantize_component(0.0f) == 128);
    CHECK_THROWS_AS(quantize_component(1.5f), QuantizationRangeError);
}

TEST_CASE("quantization error is bounded per component") {
    const auto set = random_set(200, 64, 1);
    for (std::size_t i = 0; i < set.size(); ++i) {
        const auto row = set.row(i);
        const auto back = dequantize(quantize(row));
        for (std::size_t j = 0; j < row.size(); ++j) {
            const double affine = std::floor((static_cast<double>(row[j]) + 1.0) / 2.0 * 255.0 + 0.5) / 255.0 * 2.0 - 1.0;
            CHECK(std::abs(back[j] - affine) < 1e-6);
            CHECK(std::abs(back[j] - row[j]) <= 1.0 / 255.0 + 1e-7);
        }
    }
}

TEST_CASE("quantized inner product stays within the loose bound") {
    const auto set = random_set(50, 32, 2);
    const double bound = 32.0 * (1.0 / 255.0) * 2.0;
    for (std::size_t i = 0; i + 1 < set.size(); ++i) {
        const auto qa = dequantize(quantize(set.row(i)));
        CHECK(std::abs(inner_product(qa, set.row(i + 1)) - inner_product(set.row(i), set.row(i + 1))) <= bound);
    }
}

TEST_CASE("normalize and zero vectors") {
    std::vector<float> v{3.0f, 4.0f};
    normalize(v);
    CHECK(v[0] == doctest::Approx(0.6));
    std::vector<float> z{0.0f, 0.0f, 0.0f};
    normalize(z);
    CHECK(z == std::vector<float>{1.0f, 0.0f, 0.0f});
}

TEST_CASE("partition tree shapes") {
    const auto one = random_set(1, 8, 3);
    const auto t1 = build_partition(one);
    REQUIRE(t1.leaf_count() == 1);
    CHECK(t1.postings[0] == std::vector<std::uint32_t>{0});

    const auto hundred = random_set(100, 8, 4);
    const auto t100 = build_partition(hundred);
    CHECK(t100.leaf_count() == 10);
    std::vector<int> seen(100, 0);
    for (const auto& p : t100.postings) {
        for (auto r : p) seen[r] += 1;
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
}

TEST_CASE("two separated clusters are split perfectly") {
    Rng rng(6);
    const std::size_t dim = 16;
    std::vector<float> values;
    std::vector<DocId> ids;
    for (std::size_t i = 0; i < 200; ++i) {
        const float sign = i < 100 ? 1.0f : -1.0f;
        for (std::size_t j = 0; j < dim; ++j) {
            values.push_back((j == 0 ? 10.0f * sign : 0.0f) + static_cast<float>(rng.normal()));
        }
        ids.push_back(i);
    }
    const EmbeddingSet set(dim, ids, values);
    PartitionOptions opt;
    opt.leaves = 2;
    const auto tree = build_partition(set, opt);
    for (const auto& p : tree.postings) {
        REQUIRE(!p.empty());
        const bool first = p.front() < 100;
        for (auto r : p) CHECK((r < 100) == first);
    }
}

TEST_CASE("single searcher geometry") {
    std::vector<float> basis(16 * 16, 0.0f);
    std::vector<DocId> ids;
    for (std::size_t i = 0; i < 16; ++i) {
        basis[i * 16 + i] = 1.0f;
        ids.push_back(100 + i);
    }
    const EmbeddingSet set(16, ids, basis);
    const Searcher searcher(set, PartitionOptions{});
    SearchOptions opt;
    opt.k = 3;
    opt.probe_leaves = 100;
    const auto hits = searcher.search(set.row(1), opt);
    REQUIRE(!hits.empty());
    CHECK(hits.front().id == 101);
    CHECK(hits.front().score == doctest::Approx(1.0));
    opt.exclude_id = 101;
    CHECK(searcher.search(set.row(1), opt).front().id != 101);

    CHECK(brute_force_topk(set, set.row(0), 1).front().id == 100);
    opt.k = 50;
    opt.exclude_id.reset();
    CHECK(searcher.search(set.row(0), opt).size() == 16);
}

TEST_CASE("brute force with k = N is a sorted permutation") {
    const auto set = random_set(40, 8, 7);
    const auto all = brute_force_topk(set, set.row(3), 40);
    REQUIRE(all.size() == 40);
    std::set<DocId> ids;
    for (const auto& n : all) ids.insert(n.id);
    CHECK(ids.size() == 40);
    CHECK(std::is_sorted(all.begin(), all.end(), ranks_before));
    CHECK(all == reference_topk(set, set.row(3), 40));
}

TEST_CASE("exhaustive probing equals brute force") {
    const auto set = random_set(2000, 32, 11);
    const Searcher searcher(set, PartitionOptions{});
    SearchOptions opt;
    opt.k = 50;
    opt.probe_leaves = searcher.tree().leaf_count();
    for (std::size_t i = 0; i < set.size(); i += 37) {
        opt.exclude_id = set.ids()[i];
        CHECK(searcher.search(set.row(i), opt) == brute_force_topk(set, set.row(i), 50, set.ids()[i]));
    }
}

TEST_CASE("recall does not decrease with more probes") {
    const auto set = random_set(1500, 16, 12);
    const Searcher searcher(set, PartitionOptions{});
    const std::size_t leaves = searcher.tree().leaf_count();
    double previous = 0.0;
    for (std::size_t probe : {std::size_t{1}, std::size_t{3}, std::size_t{8}, leaves}) {
        SearchOptions opt;
        opt.k = 20;
        opt.probe_leaves = probe;
        double total = 0.0;
        for (std::size_t i = 0; i < 200; ++i) {
            total += recall(searcher.search(set.row(i), opt), brute_force_topk(set, set.row(i), 20));
        }
        const double r = total / 200;
        CHECK(r >= previous);
        previous = r;
    }
    CHECK(previous == 1.0);
}

TEST_CASE("sharding: degenerate layout equals the single searcher") {
    const auto set = random_set(500, 16, 13);
    ShardingOptions sh;
    const auto sharded = ShardedSearcher::build(set, sh);
    const Searcher single(set, sh.partition);
    SearchOptions opt;
    opt.k = 10;
    for (std::size_t i = 0; i < 50; ++i) CHECK(sharded.search(set.row(i), opt) == single.search(set.row(i), opt));
}

TEST_CASE("sharding: key shards over salted copies equal brute force") {
    const auto set = random_set(1200, 16, 14);
    ShardingOptions sh;
    sh.value_shards = 3;
    sh.key_shards = 4;
    sh.salts = 2;
    const auto index = ShardedSearcher::build(set, sh);
    CHECK(index.salt_count() == 2);
    CHECK(index.salt_of(3) == 1);
    SearchOptions opt;
    opt.k = 25;
    opt.probe_leaves = std::numeric_limits<std::size_t>::max();
    const auto results = index.search_batch(set, opt, true, 2);
    for (std::size_t i = 0; i < set.size(); ++i) {
        CHECK(results[i] == reference_topk(set, set.row(i), 25, set.ids()[i]));
    }
    // Thread count does not change results.
    CHECK(index.search_batch(set, opt, true, 1) == results);
}

TEST_CASE("merge of disjoint shards with k = 1 returns the global max") {
    const std::vector<NeighborList> lists{{{1, 0.3}}, {{2, 0.9}}, {{3, 0.5}}};
    const auto merged = merge_topk(lists, 1);
    REQUIRE(merged.size() == 1);
    CHECK(merged.front().id == 2);
    const std::vector<NeighborList> dup{{{7, 0.4}, {1, 0.2}}, {{7, 0.6}}};
    CHECK(merge_topk(dup, 5) == NeighborList{{7, 0.6}, {1, 0.2}});
}

TEST_CASE("shard assignment validation") {
    ShardingOptions sh;
    sh.key_shards = 2;
    sh.salts = 2;
    sh.assignment = {{0, 0}, {1, 5}};
    CHECK_THROWS_AS(resolve_assignment(sh), ShardAssignmentError);
    sh.assignment = {{0, 1}, {0, 0}};
    CHECK_THROWS_AS(resolve_assignment(sh), ShardAssignmentError);
    sh.assignment = {{0, 1}, {1, 0}};
    CHECK(resolve_assignment(sh) == std::vector<std::size_t>{1, 0});
}

TEST_CASE("index persistence round trip gives identical results") {
    testing::TempDir dir;
    const auto set = random_set(300, 16, 15, 1000);
    ShardingOptions sh;
    sh.value_shards = 2;
    const auto index = ShardedSearcher::build(set, sh);
    save_index(dir.path(), index, sh);
    const auto [loaded, loaded_opt] = load_index(dir.path());
    CHECK(loaded_opt.value_shards == 2);
    SearchOptions opt;
    opt.k = 10;
    for (std::size_t i = 0; i < 30; ++i) CHECK(loaded.search(set.row(i), opt) == index.search(set.row(i), opt));
}

TEST_CASE("embedding files round trip") {
    testing::TempDir dir;
    const auto set = random_set(20, 8, 16, 50);
    write_matrix(dir / "m.bin", set);
    write_ids_sidecar(dir / "m.bin", set.ids());
    const auto back = read_embeddings(dir / "m.bin");
    CHECK(back.ids() == set.ids());
    CHECK(back.values() == set.values());
    CHECK_THROWS_AS(read_embeddings(dir / "absent.bin"), MissingInputError);
}

TEST_CASE("toy embeddings are deterministic and unit norm") {
    const std::vector<TokenId> tokens{1, 2, 3, 2};
    const auto a = toy_embed(tokens, 64, 3);
    CHECK(a == toy_embed(tokens, 64, 3));
    CHECK(inner_product(a, a) == doctest::Approx(1.0));
}
