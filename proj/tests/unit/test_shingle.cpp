#include <doctest.h>

#include <set>
#include <sstream>

#include "sbp/rng.hpp"
#include "sbp/shingle.hpp"

using namespace sbp;
using namespace sbp::shingle;

namespace {

std::vector<TokenId> iota_tokens(std::size_t n, TokenId start = 0) {
    std::vector<TokenId> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = start + static_cast<TokenId>(i);
    return t;
}

ShingleSet set_of(std::vector<std::uint64_t> h) {
    ShingleSet s;
    s.hashes = std::move(h);
    return s;
}

double exact_jaccard(const std::set<std::uint64_t>& a, const std::set<std::uint64_t>& b) {
    std::size_t inter = 0;
    for (auto x : a) inter += b.count(x);
    const std::size_t uni = a.size() + b.size() - inter;
    return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

}  // namespace

TEST_CASE("normalization lowercases, drops punctuation and numbers") {
    CHECK(normalize_surface("Hello, World 42!") == "hello world");
    CHECK(normalize_for_shingling("Hello, World 42!") == corpus::tokenize("hello world"));
    CHECK(normalize_for_shingling("").empty());
    const std::string once = normalize_surface("A-b. C;  d\n\nE 7x 77");
    CHECK(normalize_surface(once) == once);
}

TEST_CASE("shingle counts") {
    CHECK(shingles(iota_tokens(13)).size() == 1);
    CHECK(shingles(iota_tokens(14)).size() == 2);
    CHECK(shingles(iota_tokens(12)).empty());
    for (std::size_t n = 13; n < 60; ++n) CHECK(shingles(iota_tokens(n)).size() == n - 13 + 1);
}

TEST_CASE("jaccard examples") {
    const auto a = set_of({1, 2, 3});
    CHECK(jaccard(a, a) == 1.0);
    CHECK(jaccard(set_of({1, 2, 3}), set_of({2, 3, 4})) == doctest::Approx(0.5));
    CHECK(jaccard(set_of({1, 2}), set_of({3, 4})) == 0.0);
    CHECK(jaccard(set_of({}), set_of({})) == 0.0);
    ShingleSet other = a;
    other.width = 5;
    CHECK_THROWS_AS(jaccard(a, other), IncomparableError);
}

TEST_CASE("jaccard properties on random sets") {
    Rng rng(9);
    for (int trial = 0; trial < 500; ++trial) {
        std::set<std::uint64_t> sa, sb;
        for (std::size_t i = rng.below(30); i > 0; --i) sa.insert(rng.below(40));
        for (std::size_t i = rng.below(30); i > 0; --i) sb.insert(rng.below(40));
        const auto a = set_of({sa.begin(), sa.end()});
        const auto b = set_of({sb.begin(), sb.end()});
        const double j = jaccard(a, b);
        CHECK(j == jaccard(b, a));
        CHECK(j >= 0.0);
        CHECK(j <= 1.0);
        CHECK((j == 1.0) == (sa == sb && !sa.empty()));
        CHECK(j == doctest::Approx(exact_jaccard(sa, sb)));
        CHECK(intersects(a, b) == (j > 0.0));
    }
}

TEST_CASE("minhash examples") {
    const auto a = shingles(iota_tokens(100));
    CHECK(estimate_jaccard(minhash(a), minhash(a)) == 1.0);
    const auto b = shingles(iota_tokens(100, 1000));
    CHECK(estimate_jaccard(minhash(b), minhash(a)) < 0.05);
    CHECK(estimate_jaccard(minhash(set_of({})), minhash(set_of({}))) == 0.0);
}

TEST_CASE("minhash estimates track exact jaccard at k=128") {
    // Sets of 1..300 draws from universes of random size.
    Rng rng(21);
    int within = 0;
    for (int t = 0; t < 1000; ++t) {
        std::set<std::uint64_t> sa, sb;
        const std::uint64_t range = 1 + rng.below(3000);
        const std::size_t na = 1 + rng.below(300), nb = 1 + rng.below(300);
        for (std::size_t i = 0; i < na; ++i) sa.insert(splitmix64(rng.below(range)));
        for (std::size_t i = 0; i < nb; ++i) sb.insert(splitmix64(rng.below(range)));
        const double est = estimate_jaccard(minhash(set_of({sa.begin(), sa.end()}), 128, 4),
                                            minhash(set_of({sb.begin(), sb.end()}), 128, 4));
        within += std::abs(est - exact_jaccard(sa, sb)) <= 0.1;
    }
    CHECK(within >= 990);
}

TEST_CASE("minhash misses match the binomial rate near jaccard 0.5") {
    // Each estimate is Binomial(128, J) / 128, so the expected share of
    // estimates within 0.1 is computable per pair.
    auto binomial_within = [](double j) {
        double p = 0.0;
        for (int a = 0; a <= 128; ++a) {
            if (std::abs(a / 128.0 - j) > 0.1) continue;
            p += std::exp(std::lgamma(129.0) - std::lgamma(a + 1.0) - std::lgamma(129.0 - a) + a * std::log(j) +
                          (128 - a) * std::log1p(-j));
        }
        return p;
    };
    Rng rng(22);
    double within = 0.0, expected = 0.0, variance = 0.0;
    for (int t = 0; t < 1000; ++t) {
        std::set<std::uint64_t> sa, sb;
        const std::size_t n = 20 + rng.below(200);
        const std::uint64_t range = n + rng.below(2 * n);
        for (std::size_t i = 0; i < n; ++i) sa.insert(splitmix64(rng.below(range)));
        for (std::size_t i = 0; i < n; ++i) sb.insert(splitmix64(rng.below(range)));
        const double exact = exact_jaccard(sa, sb);
        const double est = estimate_jaccard(minhash(set_of({sa.begin(), sa.end()}), 128, 4),
                                            minhash(set_of({sb.begin(), sb.end()}), 128, 4));
        within += std::abs(est - exact) <= 0.1;
        const double p = exact > 0.0 && exact < 1.0 ? binomial_within(exact) : 1.0;
        expected += p;
        variance += p * (1.0 - p);
    }
    CHECK(std::abs(within - expected) <= 4.0 * std::sqrt(variance) + 1.0);
}

TEST_CASE("minhash error shrinks as k grows") {
    Rng rng(8);
    auto mean_error = [&](std::size_t k) {
        double total = 0.0;
        for (int t = 0; t < 200; ++t) {
            std::set<std::uint64_t> sa, sb;
            for (int i = 0; i < 100; ++i) sa.insert(splitmix64(rng.below(150)));
            for (int i = 0; i < 100; ++i) sb.insert(splitmix64(rng.below(150)));
            const auto a = set_of({sa.begin(), sa.end()});
            const auto b = set_of({sb.begin(), sb.end()});
            total += std::abs(estimate_jaccard(minhash(a, k, t), minhash(b, k, t)) - exact_jaccard(sa, sb));
        }
        return total / 200;
    };
    CHECK(mean_error(512) < mean_error(16));
}

TEST_CASE("signature file round trip") {
    std::vector<MinHashSignature> sigs{minhash(shingles(iota_tokens(20), 13, 5), 16, 3),
                                       minhash(shingles(iota_tokens(30, 7), 13, 6), 16, 3)};
    std::stringstream buf;
    write_signatures(buf, sigs);
    const auto back = read_signatures(buf);
    REQUIRE(back.size() == 2);
    CHECK(back[0].doc_id == 5);
    CHECK(back[1].minima == sigs[1].minima);
}
