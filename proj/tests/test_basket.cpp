#include "doctest.h"

#include "oracles.hpp"

#include "recpipe/basket.hpp"

#include <algorithm>
#include <cmath>

using namespace recpipe;
using namespace recpipe::basket;
using numkit::Matrix;

namespace {

// A=(1,0) B=(0.8,0.6) C=(0,1) D=(-1,0)
EmbeddingSpace fixture() {
    Matrix m(4, 2);
    m(0, 0) = 1.0;
    m(1, 0) = 0.8;
    m(1, 1) = 0.6;
    m(2, 1) = 1.0;
    m(3, 0) = -1.0;
    return EmbeddingSpace(std::move(m), {"A", "B", "C", "D"});
}

concepts::ConceptModel fixture_concepts() {
    concepts::ConceptModel c;
    c.k = 2;
    c.centroids = Matrix(2, 2);
    c.assignment = {0, 0, 1, 1};
    return c;
}

std::vector<Neighbor> brute_top_k(const Matrix& m, Index q, std::size_t k) {
    std::vector<Neighbor> all;
    for (Index i = 0; i < m.rows(); ++i) {
        if (i == q || numkit::l2_norm(m.row(i)) == 0.0) {
            continue;
        }
        all.push_back({i, std::clamp(testing::naive_cosine(m.row(q), m.row(i)), -1.0, 1.0)});
    }
    std::sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
        return a.similarity != b.similarity ? a.similarity > b.similarity : a.product < b.product;
    });
    all.resize(std::min(k, all.size()));
    return all;
}

std::vector<Index> ids(const std::vector<Neighbor>& ns) {
    std::vector<Index> out;
    for (const auto& n : ns) {
        out.push_back(n.product);
    }
    return out;
}

}  // namespace

TEST_CASE("cosine similarity") {
    const std::vector<double> v{0.3, -2.0, 1.0};
    CHECK(cosine_similarity(v, v) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(cosine_similarity(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == 0.0);
    CHECK(cosine_similarity(std::vector<double>{1, 0}, std::vector<double>{1, 1}) ==
          doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
    CHECK_THROWS(cosine_similarity(std::vector<double>{0, 0}, std::vector<double>{1, 1}));
    CHECK_THROWS(cosine_similarity(std::vector<double>{1}, std::vector<double>{1, 1}));
}

TEST_CASE("cosine is scale invariant and bounded") {
    numkit::Rng rng(4);
    Matrix m(50, 6);
    numkit::fill_uniform(m, 1.0, rng);
    std::uniform_real_distribution<double> scale(1e-3, 1e3);
    for (std::size_t i = 0; i + 1 < m.rows(); ++i) {
        const double a = scale(rng);
        std::vector<double> scaled(m.row(i).begin(), m.row(i).end());
        for (double& x : scaled) {
            x *= a;
        }
        const double c = cosine_similarity(m.row(i), m.row(i + 1));
        CHECK(std::abs(cosine_similarity(scaled, m.row(i + 1)) - c) <= 1e-12);
        CHECK(c <= 1.0);
        CHECK(c >= -1.0);
    }
}

TEST_CASE("top_k hand fixture") {
    auto s = fixture();
    const auto r = top_k_similar(s, 0, 2);
    REQUIRE(r.size() == 2);
    CHECK(r[0].product == 1);
    CHECK(r[0].similarity == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(r[1].product == 2);
    CHECK(r[1].similarity == 0.0);

    const auto all = top_k_similar(s, 0, 10);
    CHECK(ids(all) == std::vector<Index>{1, 2, 3});
    CHECK_THROWS(top_k_similar(s, 0, 0));
    CHECK_THROWS(top_k_similar(s, 4, 1));
}

TEST_CASE("identical vectors tie-break by id") {
    Matrix m(4, 2);
    m(0, 0) = 1.0;
    m(1, 0) = m(1, 1) = 1.0;
    m(2, 0) = m(2, 1) = 1.0;
    m(3, 0) = m(3, 1) = 1.0;
    EmbeddingSpace s(m);
    CHECK(ids(top_k_similar(s, 0, 3)) == std::vector<Index>{1, 2, 3});
    CHECK(ids(top_k_similar(s, 2, 2)) == std::vector<Index>{1, 3});
}

TEST_CASE("top_k matches a brute-force scan") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        numkit::Rng rng(seed);
        Matrix m(40, 5);
        numkit::fill_uniform(m, 1.0, rng);
        // plant exact duplicates and a zero row
        for (std::size_t d = 0; d < 5; ++d) {
            m(7, d) = m(3, d);
            m(11, d) = 0.0;
        }
        EmbeddingSpace s(m);
        for (Index q = 0; q < 40; ++q) {
            if (q == 11) {
                continue;
            }
            for (std::size_t k : {1u, 5u, 39u}) {
                CHECK(top_k_similar(s, q, k) == brute_top_k(m, q, k));
            }
        }
    }
}

TEST_CASE("market basket literal and over-fetch on the hand fixture") {
    auto s = fixture();
    auto c = fixture_concepts();
    CHECK(ids(market_basket(s, c, 0, 2, false)) == std::vector<Index>{2});
    CHECK(ids(market_basket(s, c, 0, 2, true)) == std::vector<Index>{2, 3});
    // everything in the top-1 shares A's concept
    CHECK(market_basket(s, c, 0, 1, false).empty());
    CHECK(ids(market_basket(s, c, 0, 1, true)) == std::vector<Index>{2});
}

TEST_CASE("market basket properties") {
    numkit::Rng rng(21);
    Matrix m(30, 4);
    numkit::fill_uniform(m, 1.0, rng);
    EmbeddingSpace s(m);
    auto c = concepts::kmeans_fit(m, {4, 1, 100, false});
    for (Index q = 0; q < 30; ++q) {
        for (std::size_t k : {1u, 3u, 8u}) {
            for (bool over : {false, true}) {
                const auto mb = market_basket(s, c, q, k, over);
                CHECK(mb.size() <= k);
                for (const auto& n : mb) {
                    CHECK(n.product != q);
                    CHECK(c.assignment[n.product] != c.assignment[q]);
                }
            }
        }
    }
    concepts::ConceptModel wrong = c;
    wrong.assignment.pop_back();
    CHECK_THROWS(market_basket(s, wrong, 0, 2));
    CHECK_THROWS(market_basket(s, c, 30, 2));
}

TEST_CASE("combine_embeddings") {
    auto s = fixture();
    const std::vector<Index> one{1};
    auto r = combine_embeddings(s, one);
    CHECK(r == std::vector<double>{0.8, 0.6});

    Matrix m(3, 2);
    m(0, 0) = 2.0;
    m(0, 1) = -1.0;
    m(1, 0) = 2.0;
    m(1, 1) = -1.0;
    EmbeddingSpace twin(m);
    const std::vector<Index> both{0, 1};
    CHECK(combine_embeddings(twin, both) == std::vector<double>{2.0, -1.0});
    CHECK(combine_embeddings(twin, both, Combine::sum) == std::vector<double>{4.0, -2.0});
    CHECK_THROWS(combine_embeddings(twin, std::vector<Index>{}));
    CHECK_THROWS(combine_embeddings(twin, std::vector<Index>{5}));
}

TEST_CASE("substitutes exclude their inputs") {
    auto s = fixture();
    const std::vector<Index> pair{0, 2};
    const auto r = substitutes(s, pair, 3);
    REQUIRE(r.size() == 2);
    CHECK(r[0].product == 1);
    CHECK(r[1].product == 3);
}

TEST_CASE("embedding space lookups") {
    auto s = fixture();
    CHECK(s.find("C") == 2u);
    CHECK_FALSE(s.find("Z").has_value());
    CHECK(s.token(3) == "D");
    CHECK(s.norm(1) == doctest::Approx(1.0).epsilon(1e-15));
    EmbeddingSpace anon(Matrix(2, 2));
    CHECK(anon.token(1) == "1");
    CHECK(anon.is_zero(0));
    CHECK_THROWS(EmbeddingSpace(Matrix(2, 2), {"x"}));
}
