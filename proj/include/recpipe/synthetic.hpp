#pragma once

#include "recpipe/corpus.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace recpipe::corpus {

/// Parameters of the planted-group transaction generator.
struct SyntheticSpec {
    int n_groups = 5;
    int products_per_group = 20;
    int n_users = 200;
    int n_baskets = 10000;
    int min_basket_len = 2;
    int max_basket_len = 6;
    double within_group_prob = 0.9;
    double user_group_affinity = 0.9;
    // Fraction of baskets emitted without a user id.
    double anonymous_prob = 0.0;
    // Mean unit price per group; empty means 10 * (g + 1).
    std::vector<double> spend_base;
    // Each user's spend multiplier is drawn from Uniform(0, user_multiplier_max).
    double user_multiplier_max = 2.0;
    std::uint64_t seed = 42;

    void validate() const;
};

struct SyntheticCorpus {
    std::vector<Basket> baskets;
    std::map<std::string, int> product_group;
    std::map<std::string, int> user_group;
    std::map<std::string, double> user_multiplier;
    std::vector<double> group_price;
};

/// Deterministic for a fixed spec. Product tokens are "P<index>", users "U<index>".
SyntheticCorpus generate_synthetic(const SyntheticSpec& spec);

/// Spend of one user on one product over the generated period.
struct SpendRecord {
    std::string user;
    std::string product;
    double amount = 0.0;
};

/// One record per purchased (user, product) pair, in first-purchase order:
/// amount = group price * (1 + user multiplier).
std::vector<SpendRecord> synthetic_spend(const SyntheticCorpus& corpus);

}  // namespace recpipe::corpus
