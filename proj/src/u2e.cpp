#include "recpipe/u2e.hpp"

#include "cbow_core.hpp"
#include "recpipe/error.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace recpipe::u2e {

void U2EConfig::validate() const {
    if (product_dim < 1 || user_dim < 1) {
        throw std::invalid_argument("u2e: embedding widths must be >= 1");
    }
    if (context_size < 1) {
        throw std::invalid_argument("u2e: context_size must be >= 1");
    }
    if (epochs < 1) {
        throw std::invalid_argument("u2e: epochs must be >= 1");
    }
    if (!(learning_rate > 0.0) || !(initial_accumulator > 0.0)) {
        throw std::invalid_argument("u2e: learning_rate and initial_accumulator must be positive");
    }
}

U2EModel init(std::size_t product_count, std::size_t user_count, const U2EConfig& config) {
    config.validate();
    if (product_count < 2) {
        throw std::invalid_argument("u2e: need at least two products");
    }
    const auto dp = static_cast<std::size_t>(config.product_dim);
    const auto du = static_cast<std::size_t>(config.user_dim);
    const auto c = static_cast<std::size_t>(config.context_size);
    U2EModel model;
    model.config = config;
    numkit::Rng rng(config.seed);
    model.product_embeddings = Matrix(product_count, dp);
    numkit::fill_uniform(model.product_embeddings, 0.5 / config.product_dim, rng);
    model.user_embeddings = Matrix(user_count, du);
    numkit::fill_uniform(model.user_embeddings, 0.5 / config.user_dim, rng);
    model.output_weights = Matrix(product_count, du + c * dp);
    model.output_bias.assign(product_count, 0.0);
    model.user_updates.assign(user_count, 0);
    model.user_transactions.assign(user_count, 0);
    return model;
}

std::vector<Example> training_examples(const corpus::EncodedBasket& basket, int context_size) {
    if (context_size < 1) {
        throw std::invalid_argument("u2e: context_size must be >= 1");
    }
    auto contexts = detail::nearest_contexts(basket.items, static_cast<std::size_t>(context_size));
    std::vector<Example> out;
    out.reserve(basket.items.size());
    for (std::size_t t = 0; t < basket.items.size(); ++t) {
        out.push_back({basket.user, basket.items[t], std::move(contexts[t])});
    }
    return out;
}

namespace {

void check_example(const U2EModel& model, const Example& ex) {
    if (*ex.user >= model.user_count()) {
        throw std::out_of_range("u2e: user id out of range");
    }
    if (ex.target >= model.product_count()) {
        throw std::out_of_range("u2e: target id out of range");
    }
    if (ex.context.size() != static_cast<std::size_t>(model.config.context_size)) {
        throw std::invalid_argument("u2e: example context has the wrong number of slots");
    }
    for (auto id : ex.context) {
        if (id != detail::kMaskedSlot && id >= model.product_count()) {
            throw std::out_of_range("u2e: context id out of range");
        }
    }
}

// Layout: [user vector | slot 0 | slot 1 | ...].
void fill_hidden(const U2EModel& model, const Example& ex, std::vector<double>& hidden) {
    const auto du = model.user_embeddings.cols();
    const auto dp = model.product_embeddings.cols();
    hidden.assign(model.hidden_width(), 0.0);
    const auto user = model.user_embeddings.row(*ex.user);
    std::copy(user.begin(), user.end(), hidden.begin());
    for (std::size_t s = 0; s < ex.context.size(); ++s) {
        if (ex.context[s] == detail::kMaskedSlot) {
            continue;
        }
        const auto row = model.product_embeddings.row(ex.context[s]);
        std::copy(row.begin(), row.end(), hidden.begin() + static_cast<std::ptrdiff_t>(du + s * dp));
    }
}

}  // namespace

std::vector<double> predict(const U2EModel& model, const Example& example) {
    if (!example.user) {
        throw std::invalid_argument("u2e: example has no user");
    }
    check_example(model, example);
    std::vector<double> hidden;
    fill_hidden(model, example, hidden);
    std::vector<double> logits(model.product_count());
    for (std::size_t k = 0; k < logits.size(); ++k) {
        logits[k] = numkit::dot(model.output_weights.row(k), hidden) + model.output_bias[k];
    }
    numkit::softmax_inplace(logits);
    return logits;
}

double forward_loss(const U2EModel& model, std::span<const Example> batch, Gradients& grads) {
    const auto p = model.product_count();
    const auto width = model.hidden_width();
    const auto du = model.user_embeddings.cols();
    const auto dp = model.product_embeddings.cols();
    if (grads.output_weights.rows() != p || grads.output_weights.cols() != width) {
        grads.output_weights = Matrix(p, width);
    } else {
        grads.output_weights.fill(0.0);
    }
    grads.output_bias.assign(p, 0.0);
    grads.user_rows.clear();
    grads.product_rows.clear();
    grads.skipped = 0;

    std::size_t effective = 0;
    for (const auto& ex : batch) {
        if (ex.user) {
            ++effective;
        } else {
            ++grads.skipped;
        }
    }
    if (effective == 0) {
        throw std::invalid_argument("u2e: batch has no examples with a known user");
    }

    const double scale = 1.0 / static_cast<double>(effective);
    std::vector<double> hidden;
    std::vector<double> grad_hidden(width);
    std::vector<double> probs;
    double total = 0.0;
    for (const auto& ex : batch) {
        if (!ex.user) {
            continue;
        }
        check_example(model, ex);
        fill_hidden(model, ex, hidden);
        std::fill(grad_hidden.begin(), grad_hidden.end(), 0.0);
        total += detail::softmax_layer(model.output_weights, model.output_bias, hidden, ex.target, scale,
                                       grads.output_weights, grads.output_bias, grad_hidden, probs);
        const std::span<const double> gh(grad_hidden);
        numkit::axpy(1.0, gh.subspan(0, du), detail::row_slot(grads.user_rows, *ex.user, du));
        for (std::size_t s = 0; s < ex.context.size(); ++s) {
            if (ex.context[s] == detail::kMaskedSlot) {
                continue;
            }
            numkit::axpy(1.0, gh.subspan(du + s * dp, dp), detail::row_slot(grads.product_rows, ex.context[s], dp));
        }
    }
    return total * scale;
}

std::pair<double, Gradients> forward_loss(const U2EModel& model, std::span<const Example> batch) {
    Gradients grads;
    const double loss = forward_loss(model, batch, grads);
    return {loss, std::move(grads)};
}

U2EModel train(const std::vector<corpus::EncodedBasket>& baskets,
               std::size_t product_count,
               std::size_t user_count,
               const U2EConfig& config,
               const EpochCallback& on_epoch) {
    config.validate();
    U2EModel model = init(product_count, user_count, config);

    std::vector<Example> examples;
    for (const auto& b : baskets) {
        if (b.items.size() < 2) {
            continue;
        }
        if (!b.user) {
            ++model.anonymous_skipped;
            continue;
        }
        if (*b.user >= user_count) {
            throw std::out_of_range("u2e: basket user id out of range");
        }
        ++model.user_transactions[*b.user];
        auto ex = training_examples(b, config.context_size);
        examples.insert(examples.end(), std::make_move_iterator(ex.begin()), std::make_move_iterator(ex.end()));
    }
    if (examples.empty()) {
        throw UserError("u2e: no trainable baskets with an identified user");
    }

    const auto du = model.user_embeddings.cols();
    const auto dp = model.product_embeddings.cols();
    const double lr = config.learning_rate;
    const double acc0 = config.initial_accumulator;
    numkit::AdagradState user_state(model.user_embeddings.size(), lr, acc0);
    numkit::AdagradState product_state(model.product_embeddings.size(), lr, acc0);
    numkit::AdagradState output_state(model.output_weights.size(), lr, acc0);
    numkit::AdagradState bias_state(model.output_bias.size(), lr, acc0);

    numkit::Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    Gradients grads;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double total = 0.0;
        for (auto idx : order) {
            const auto& ex = examples[idx];
            total += forward_loss(model, std::span<const Example>(&ex, 1), grads);
            ++model.user_updates[*ex.user];
            numkit::adagrad_step(output_state, model.output_weights.data(), grads.output_weights.data());
            numkit::adagrad_step(bias_state, model.output_bias, grads.output_bias);
            for (const auto& [row, g] : grads.user_rows) {
                user_state.step(model.user_embeddings.row(row), g, row * du);
            }
            for (const auto& [row, g] : grads.product_rows) {
                product_state.step(model.product_embeddings.row(row), g, row * dp);
            }
        }
        const double mean = total / static_cast<double>(examples.size());
        model.epoch_loss.push_back(mean);
        if (on_epoch) {
            on_epoch(epoch, mean);
        }
    }
    return model;
}

U2EModel train(const std::vector<corpus::EncodedBasket>& baskets,
               const corpus::Vocabulary& vocab,
               const U2EConfig& config,
               const EpochCallback& on_epoch) {
    auto model = train(baskets, vocab.product_count(), vocab.user_count(), config, on_epoch);
    model.vocab_fingerprint = vocab.fingerprint();
    return model;
}

std::set<Index> optimized_users(const U2EModel& model, std::uint64_t min_transactions) {
    std::set<Index> out;
    for (std::size_t u = 0; u < model.user_transactions.size(); ++u) {
        if (model.user_transactions[u] >= min_transactions) {
            out.insert(static_cast<Index>(u));
        }
    }
    return out;
}

std::span<const double> user_embedding(const U2EModel& model, Index user) {
    if (user >= model.user_count()) {
        throw std::out_of_range("u2e: user id " + std::to_string(user) + " out of range");
    }
    return model.user_embeddings.row(user);
}

}  // namespace recpipe::u2e
