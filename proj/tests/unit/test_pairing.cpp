#include <doctest.h>

#include <algorithm>
#include <set>

#include "sbp/ann_index.hpp"
#include "sbp/pairing.hpp"
#include "sbp/rng.hpp"
#include "temp_dir.hpp"

using namespace sbp;
using namespace sbp::pairing;

namespace {

std::string run(const std::string& stem, std::size_t n) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + stem + std::to_string(i);
    return s;
}

corpus::CorpusHandle make_corpus(const std::vector<std::pair<DocId, std::string>>& docs) {
    std::vector<corpus::RawRecord> records;
    for (const auto& [id, text] : docs) records.push_back({id, text});
    return corpus::ingest(records);
}

/// Hash-free oracle: do the normalized token sequences share any w-window?
bool share_window(const std::string& a, const std::string& b, std::size_t w) {
    const auto ta = shingle::normalize_for_shingling(a);
    const auto tb = shingle::normalize_for_shingling(b);
    if (ta.size() < w || tb.size() < w) return false;
    std::set<std::vector<TokenId>> windows;
    for (std::size_t i = 0; i + w <= ta.size(); ++i) windows.emplace(ta.begin() + i, ta.begin() + i + w);
    for (std::size_t i = 0; i + w <= tb.size(); ++i) {
        if (windows.count(std::vector<TokenId>(tb.begin() + i, tb.begin() + i + w))) return true;
    }
    return false;
}

}  // namespace

TEST_CASE("threshold keeps neighbors strictly above alpha") {
    const std::vector<ann::QueryNeighbors> lists{{1, {{2, 0.80}, {3, 0.70}}}};
    const auto pairs = pair_by_threshold(lists, {0.75, true});
    CHECK(pairs == std::vector<PairRecord>{{1, 2, 0.80}});
    const std::vector<ann::QueryNeighbors> edge{{1, {{2, 0.75}}}};
    CHECK(pair_by_threshold(edge, {0.75, true}).empty());
    CHECK_THROWS_AS(pair_by_threshold(lists, {1.5, true}), ConfigError);
}

TEST_CASE("identical vectors pair with similarity one") {
    std::vector<float> v{1.0f, 2.0f, 3.0f};
    std::vector<float> values = v;
    values.insert(values.end(), v.begin(), v.end());
    const ann::EmbeddingSet set(3, {5, 6}, values);
    const std::vector<ann::QueryNeighbors> lists{{5, ann::brute_force_topk(set, set.row(0), 5, 5)}};
    const auto pairs = pair_by_threshold(lists);
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].similarity == doctest::Approx(1.0));
}

TEST_CASE("orderings and self matches") {
    const std::vector<ann::QueryNeighbors> lists{{1, {{1, 1.0}, {2, 0.9}}}, {2, {{1, 0.9}}}};
    CHECK(pair_by_threshold(lists, {0.5, true}).size() == 2);
    const auto one = pair_by_threshold(lists, {0.5, false});
    REQUIRE(one.size() == 1);
    CHECK(one[0].seed_id == 1);
}

TEST_CASE("exhaustive neighbor lists reproduce the all-pairs filter") {
    Rng rng(4);
    const std::size_t n = 1000, dim = 8;
    std::vector<float> values(n * dim);
    for (auto& v : values) v = static_cast<float>(rng.normal());
    std::vector<DocId> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = i;
    const ann::EmbeddingSet set(dim, ids, values);
    const auto index = ann::ShardedSearcher::build(set, {});
    ann::SearchOptions opt;
    opt.k = n;
    opt.probe_leaves = std::numeric_limits<std::size_t>::max();
    const auto results = index.search_batch(set, opt);
    std::vector<ann::QueryNeighbors> lists;
    for (std::size_t i = 0; i < n; ++i) lists.push_back({ids[i], results[i]});
    const double alpha = 0.8;
    const auto got = pair_by_threshold(lists, {alpha, true});

    std::vector<PairRecord> expected;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            double s = 0.0;
            for (std::size_t d = 0; d < dim; ++d) s += static_cast<double>(set.row(i)[d]) * set.row(j)[d];
            if (s > alpha) expected.push_back({i, j, s});
        }
    }
    REQUIRE(got.size() == expected.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].seed_id == expected[i].seed_id);
        CHECK(got[i].target_id == expected[i].target_id);
        CHECK(got[i].similarity == doctest::Approx(expected[i].similarity).epsilon(1e-12));
        CHECK(got[i].similarity > alpha);
    }
    // Re-filtering the retained set is a no-op.
    std::vector<ann::QueryNeighbors> again;
    for (const auto& p : got) again.push_back({p.seed_id, {{p.target_id, p.similarity}}});
    CHECK(pair_by_threshold(again, {alpha, true}) == got);
}

TEST_CASE("shingle dedup boundary") {
    const std::string shared13 = run("s", 13);
    const std::string shared12 = run("s", 12);
    const auto c = make_corpus({{1, "alpha beta " + shared13 + " gamma"},
                                {2, "delta " + shared13 + " epsilon zeta"},
                                {3, "alpha beta " + shared12 + " gamma"},
                                {4, "delta " + shared12 + " epsilon zeta"}});
    const std::vector<PairRecord> pairs{{1, 2, 0.9}, {3, 4, 0.9}};
    CHECK(dedup_pairs(pairs, c) == std::vector<PairRecord>{{3, 4, 0.9}});
}

TEST_CASE("a punctuated verbatim copy is discarded") {
    const std::string base = run("word", 30);
    std::string punctuated;
    for (const auto& piece : corpus::HashTokenizer::split(base)) punctuated += std::string(piece) + ", ";
    const auto c = make_corpus({{1, base}, {2, punctuated}});
    REQUIRE(share_window(base, punctuated, 13));
    CHECK(dedup_pairs(std::vector<PairRecord>{{1, 2, 0.99}}, c).empty());
}

TEST_CASE("dedup is sound and complete against the window oracle") {
    Rng rng(12);
    std::vector<std::pair<DocId, std::string>> docs;
    for (DocId id = 0; id < 120; ++id) {
        std::string text;
        const std::size_t len = 10 + rng.below(190);
        for (std::size_t i = 0; i < len; ++i) text += "v" + std::to_string(rng.below(2)) + (rng.uniform() < 0.1 ? ". " : " ");
        docs.emplace_back(id, text);
    }
    const auto c = make_corpus(docs);
    std::vector<PairRecord> pairs;
    for (DocId a = 0; a < 120; a += 3) {
        for (DocId b = 1; b < 120; b += 7) {
            if (a != b) pairs.push_back({a, b, 0.9});
        }
    }
    const auto kept = dedup_pairs(pairs, c, 13, 2);
    std::vector<PairRecord> expected;
    for (const auto& p : pairs) {
        if (!share_window(docs[p.seed_id].second, docs[p.target_id].second, 13)) expected.push_back(p);
    }
    CHECK(kept == expected);
    CHECK(kept.size() < pairs.size());
    CHECK_THROWS_AS(dedup_pairs(std::vector<PairRecord>{{1, 999, 0.9}}, c), Error);
}

TEST_CASE("context cap boundary and determinism") {
    const auto c = make_corpus({{1, run("a", 4096)}, {2, run("b", 4096)}, {3, run("c", 4095)}});
    auto ds = emit_pair_dataset({{1, 2, 0.9}}, c);
    CHECK(ds.pairs == std::vector<PairRecord>{{1, 2, 0.9}});
    CHECK(ds.dropped_over_cap == 0);
    EmitOptions tight;
    tight.context_cap = 8191;
    ds = emit_pair_dataset({{1, 2, 0.9}, {1, 3, 0.9}}, c, tight);
    CHECK(ds.pairs == std::vector<PairRecord>{{1, 3, 0.9}});
    CHECK(ds.dropped_over_cap == 1);
    CHECK(emit_pair_dataset({}, c).pairs.empty());

    std::vector<PairRecord> many;
    for (DocId a = 1; a <= 3; ++a) {
        for (DocId b = 1; b <= 3; ++b) many.push_back({a, b, 0.8});
    }
    EmitOptions opt;
    opt.context_cap = 100000;
    opt.seed = 5;
    const auto first = emit_pair_dataset(many, c, opt).pairs;
    std::reverse(many.begin(), many.end());
    CHECK(emit_pair_dataset(many, c, opt).pairs == first);
}

TEST_CASE("pair files and histogram") {
    testing::TempDir dir;
    const std::vector<PairRecord> pairs{{1, 2, 0.755}, {2, 1, 0.755}, {3, 4, 0.99}};
    write_pairs_jsonl(dir / "p.jsonl", pairs);
    CHECK(read_pairs_jsonl(dir / "p.jsonl") == pairs);
    const std::string csv = similarity_histogram_csv(pairs, 0.75, 0.05);
    CHECK(csv.rfind("bin_lower,bin_upper,count\n0.7500,0.8000,2\n", 0) == 0);
    CHECK(csv.find("0.9500,1.0000,1") != std::string::npos);
}
