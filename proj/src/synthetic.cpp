#include "recpipe/synthetic.hpp"

#include "recpipe/error.hpp"
#include "recpipe/numkit.hpp"

#include <unordered_map>

namespace recpipe::corpus {

namespace {

std::string token(char prefix, int index, int width) {
    std::string digits_str = std::to_string(index);
    if (static_cast<int>(digits_str.size()) < width) {
        digits_str.insert(0, static_cast<std::size_t>(width) - digits_str.size(), '0');
    }
    return prefix + digits_str;
}

int digits(int n) {
    int d = 1;
    while (n >= 10) {
        n /= 10;
        ++d;
    }
    return d;
}

bool is_probability(double p) {
    return p >= 0.0 && p <= 1.0;
}

}  // namespace

void SyntheticSpec::validate() const {
    if (n_groups < 1 || products_per_group < 1) {
        throw UserError("synthetic: need at least one group with at least one product");
    }
    if (n_baskets < 0 || n_users < 0) {
        throw UserError("synthetic: counts must be non-negative");
    }
    if (min_basket_len < 2 || max_basket_len < min_basket_len) {
        throw UserError("synthetic: basket length range must satisfy 2 <= min <= max");
    }
    if (!is_probability(within_group_prob) || !is_probability(user_group_affinity) ||
        !is_probability(anonymous_prob)) {
        throw UserError("synthetic: probabilities must lie in [0, 1]");
    }
    if (!spend_base.empty() && static_cast<int>(spend_base.size()) != n_groups) {
        throw UserError("synthetic: spend_base needs one price per group");
    }
    if (user_multiplier_max < 0.0) {
        throw UserError("synthetic: user_multiplier_max must be non-negative");
    }
}

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    numkit::Rng rng(spec.seed);
    SyntheticCorpus out;

    const int n_products = spec.n_groups * spec.products_per_group;
    const int pw = digits(n_products - 1);
    const int uw = digits(std::max(spec.n_users - 1, 0));
    const int tw = digits(std::max(spec.n_baskets - 1, 0));

    std::vector<std::string> products;
    for (int p = 0; p < n_products; ++p) {
        products.push_back(token('P', p, pw));
        out.product_group[products.back()] = p / spec.products_per_group;
    }
    for (int g = 0; g < spec.n_groups; ++g) {
        out.group_price.push_back(spec.spend_base.empty() ? 10.0 * (g + 1) : spec.spend_base[g]);
    }

    std::uniform_int_distribution<int> pick_group(0, spec.n_groups - 1);
    std::uniform_int_distribution<int> pick_in_group(0, spec.products_per_group - 1);
    std::uniform_int_distribution<int> pick_any(0, n_products - 1);
    std::uniform_int_distribution<int> pick_len(spec.min_basket_len, spec.max_basket_len);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_real_distribution<double> multiplier(0.0, spec.user_multiplier_max);

    std::vector<std::string> users;
    std::vector<int> affine;
    for (int u = 0; u < spec.n_users; ++u) {
        users.push_back(token('U', u, uw));
        affine.push_back(pick_group(rng));
        out.user_group[users.back()] = affine.back();
        out.user_multiplier[users.back()] = multiplier(rng);
    }
    std::uniform_int_distribution<int> pick_user(0, std::max(spec.n_users - 1, 0));

    out.baskets.reserve(static_cast<std::size_t>(spec.n_baskets));
    for (int t = 0; t < spec.n_baskets; ++t) {
        Basket b;
        b.transaction_id = token('T', t, tw);
        int group = pick_group(rng);
        if (spec.n_users > 0) {
            const int u = pick_user(rng);
            if (coin(rng) < spec.user_group_affinity) {
                group = affine[u];
            }
            if (!(coin(rng) < spec.anonymous_prob)) {
                b.user_id = users[u];
            }
        }
        const int len = pick_len(rng);
        b.items.push_back(products[group * spec.products_per_group + pick_in_group(rng)]);
        for (int slot = 1; slot < len; ++slot) {
            if (coin(rng) < spec.within_group_prob) {
                b.items.push_back(products[group * spec.products_per_group + pick_in_group(rng)]);
            } else {
                b.items.push_back(products[pick_any(rng)]);
            }
        }
        out.baskets.push_back(std::move(b));
    }
    return out;
}

std::vector<SpendRecord> synthetic_spend(const SyntheticCorpus& corpus) {
    std::vector<SpendRecord> rows;
    std::unordered_map<std::string, std::size_t> index;
    for (const auto& b : corpus.baskets) {
        if (!b.user_id) {
            continue;
        }
        const double mult = corpus.user_multiplier.at(*b.user_id);
        for (const auto& item : b.items) {
            if (index.emplace(*b.user_id + '\x1f' + item, rows.size()).second) {
                const double price = corpus.group_price.at(corpus.product_group.at(item));
                rows.push_back({*b.user_id, item, price * (1.0 + mult)});
            }
        }
    }
    return rows;
}

}  // namespace recpipe::corpus
