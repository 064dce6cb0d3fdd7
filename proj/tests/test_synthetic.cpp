#include "doctest.h"

#include "recpipe/error.hpp"
#include "recpipe/synthetic.hpp"

#include <set>

using namespace recpipe;
using namespace recpipe::corpus;

TEST_CASE("within_group_prob 1 keeps every basket inside one group") {
    SyntheticSpec s;
    s.n_groups = 2;
    s.products_per_group = 3;
    s.within_group_prob = 1.0;
    s.n_baskets = 500;
    s.n_users = 10;
    auto c = generate_synthetic(s);
    CHECK(c.baskets.size() == 500);
    CHECK(c.product_group.size() == 6);
    for (const auto& b : c.baskets) {
        std::set<int> groups;
        for (const auto& item : b.items) {
            groups.insert(c.product_group.at(item));
        }
        CHECK(groups.size() == 1);
    }
}

TEST_CASE("within_group_prob 0 gives about half within-group pairs with two groups") {
    SyntheticSpec s;
    s.n_groups = 2;
    s.products_per_group = 10;
    s.within_group_prob = 0.0;
    s.n_baskets = 20000;
    s.seed = 3;
    auto c = generate_synthetic(s);
    std::size_t same = 0;
    std::size_t total = 0;
    for (const auto& b : c.baskets) {
        for (std::size_t i = 0; i < b.items.size(); ++i) {
            for (std::size_t j = i + 1; j < b.items.size(); ++j) {
                same += c.product_group.at(b.items[i]) == c.product_group.at(b.items[j]);
                ++total;
            }
        }
    }
    const double frac = static_cast<double>(same) / static_cast<double>(total);
    CHECK(frac == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("generation is deterministic for a fixed seed") {
    SyntheticSpec s;
    s.n_baskets = 300;
    auto a = generate_synthetic(s);
    auto b = generate_synthetic(s);
    CHECK(a.baskets == b.baskets);
    CHECK(a.user_multiplier == b.user_multiplier);
    s.seed = 43;
    CHECK_FALSE(generate_synthetic(s).baskets == a.baskets);
}

TEST_CASE("basket lengths, tokens and users follow the generator settings") {
    SyntheticSpec s;
    s.n_baskets = 1000;
    s.min_basket_len = 3;
    s.max_basket_len = 4;
    s.anonymous_prob = 0.5;
    auto c = generate_synthetic(s);
    std::size_t anonymous = 0;
    for (const auto& b : c.baskets) {
        CHECK(b.items.size() >= 3);
        CHECK(b.items.size() <= 4);
        anonymous += !b.user_id.has_value();
        for (const auto& item : b.items) {
            CHECK(item.front() == 'P');
        }
    }
    CHECK(anonymous > 400);
    CHECK(anonymous < 600);
    CHECK(c.user_group.size() == 200);
    for (const auto& [u, m] : c.user_multiplier) {
        CHECK(m >= 0.0);
        CHECK(m <= 2.0);
    }
}

TEST_CASE("user affinity steers the seed group") {
    SyntheticSpec s;
    s.user_group_affinity = 1.0;
    s.within_group_prob = 1.0;
    s.n_baskets = 500;
    auto c = generate_synthetic(s);
    for (const auto& b : c.baskets) {
        CHECK(c.product_group.at(b.items[0]) == c.user_group.at(*b.user_id));
    }
}

TEST_CASE("invalid specs are rejected") {
    SyntheticSpec s;
    s.within_group_prob = 1.5;
    CHECK_THROWS_AS(generate_synthetic(s), UserError);
    s = {};
    s.min_basket_len = 1;
    CHECK_THROWS_AS(generate_synthetic(s), UserError);
    s = {};
    s.max_basket_len = 1;
    CHECK_THROWS_AS(generate_synthetic(s), UserError);
    s = {};
    s.spend_base = {1.0};
    CHECK_THROWS_AS(generate_synthetic(s), UserError);
}

TEST_CASE("synthetic spend is group price times user multiplier") {
    SyntheticSpec s;
    s.n_baskets = 400;
    s.anonymous_prob = 0.2;
    auto c = generate_synthetic(s);
    auto spend = synthetic_spend(c);
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& r : spend) {
        CHECK(seen.insert({r.user, r.product}).second);
        const double expect = c.group_price.at(c.product_group.at(r.product)) * (1.0 + c.user_multiplier.at(r.user));
        CHECK(r.amount == doctest::Approx(expect).epsilon(1e-15));
    }
    std::set<std::pair<std::string, std::string>> bought;
    for (const auto& b : c.baskets) {
        if (b.user_id) {
            for (const auto& item : b.items) {
                bought.insert({*b.user_id, item});
            }
        }
    }
    CHECK(seen == bought);
}
