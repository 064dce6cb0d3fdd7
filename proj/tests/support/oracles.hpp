#pragma once

// Independent reference computations used by the unit and acceptance suites.
// Nothing here calls into the implementation paths it is used to check.

#include "recpipe/corpus.hpp"
#include "recpipe/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace recpipe::testing {

/// Dense P x P co-occurrence by the plain double loop over every basket and
/// every ordered position pair a < b.
inline std::vector<std::vector<double>> brute_cooccurrence(const std::vector<corpus::EncodedBasket>& baskets,
                                                           std::size_t p) {
    std::vector<std::vector<double>> x(p, std::vector<double>(p, 0.0));
    for (const auto& b : baskets) {
        const auto& it = b.items;
        for (std::size_t a = 0; a < it.size(); ++a) {
            for (std::size_t c = a + 1; c < it.size(); ++c) {
                if (it[a] == it[c]) {
                    continue;
                }
                const auto lo = std::min(it[a], it[c]);
                const auto hi = std::max(it[a], it[c]);
                x[lo][hi] += 1.0 / static_cast<double>(c - a);
            }
        }
    }
    return x;
}

/// Textbook cosine: separate loops, no shared helpers.
inline double naive_cosine(std::span<const double> a, std::span<const double> b) {
    double ab = 0.0;
    double aa = 0.0;
    double bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    return ab / (std::sqrt(aa) * std::sqrt(bb));
}

struct GroupCosines {
    double within = 0.0;
    double between = 0.0;
};

/// Mean cosine over all unordered pairs of distinct rows, split by whether the
/// two rows share a planted group.
inline GroupCosines group_cosines(const numkit::Matrix& m, const std::vector<int>& group) {
    double within = 0.0;
    double between = 0.0;
    std::size_t nw = 0;
    std::size_t nb = 0;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = i + 1; j < m.rows(); ++j) {
            const double c = naive_cosine(m.row(i), m.row(j));
            if (group[i] == group[j]) {
                within += c;
                ++nw;
            } else {
                between += c;
                ++nb;
            }
        }
    }
    return {nw ? within / static_cast<double>(nw) : 0.0, nb ? between / static_cast<double>(nb) : 0.0};
}

/// Best one-to-one matching of cluster ids to group ids, by exhaustive
/// permutation search (k <= 8). Returns the fraction of points matched.
inline double best_match_agreement(const std::vector<int>& cluster, const std::vector<int>& group, int k) {
    std::vector<std::vector<int>> counts(static_cast<std::size_t>(k), std::vector<int>(static_cast<std::size_t>(k), 0));
    for (std::size_t i = 0; i < cluster.size(); ++i) {
        ++counts[static_cast<std::size_t>(cluster[i])][static_cast<std::size_t>(group[i])];
    }
    std::vector<int> perm(static_cast<std::size_t>(k));
    std::iota(perm.begin(), perm.end(), 0);
    int best = 0;
    do {
        int hit = 0;
        for (int c = 0; c < k; ++c) {
            hit += counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(perm[static_cast<std::size_t>(c)])];
        }
        best = std::max(best, hit);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return static_cast<double>(best) / static_cast<double>(cluster.size());
}

/// Flattens a list of tensors into one parameter vector and writes it back.
struct ParamPack {
    std::vector<std::span<double>> views;

    std::vector<double> gather() const {
        std::vector<double> out;
        for (auto v : views) {
            out.insert(out.end(), v.begin(), v.end());
        }
        return out;
    }

    void scatter(std::span<const double> flat) const {
        std::size_t at = 0;
        for (auto v : views) {
            std::copy(flat.begin() + static_cast<std::ptrdiff_t>(at),
                      flat.begin() + static_cast<std::ptrdiff_t>(at + v.size()), v.begin());
            at += v.size();
        }
    }
};

/// Random encoded baskets over `p` products, lengths in [2, max_len].
inline std::vector<corpus::EncodedBasket> random_baskets(std::size_t n, std::size_t p, std::size_t max_len,
                                                         std::uint64_t seed, std::size_t users = 0) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> len(2, max_len);
    std::uniform_int_distribution<corpus::Index> item(0, static_cast<corpus::Index>(p - 1));
    std::vector<corpus::EncodedBasket> out;
    for (std::size_t i = 0; i < n; ++i) {
        corpus::EncodedBasket b;
        if (users > 0) {
            b.user = static_cast<corpus::Index>(rng() % users);
        }
        const auto l = len(rng);
        for (std::size_t k = 0; k < l; ++k) {
            b.items.push_back(item(rng));
        }
        out.push_back(std::move(b));
    }
    return out;
}

}  // namespace recpipe::testing
