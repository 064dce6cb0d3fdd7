#include "recpipe/p2e.hpp"

#include "cbow_core.hpp"
#include "recpipe/error.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace recpipe::p2e {

static_assert(kMasked == detail::kMaskedSlot);

void P2EConfig::validate() const {
    if (dim < 1) {
        throw std::invalid_argument("p2e: dim must be >= 1");
    }
    if (context_size < 1) {
        throw std::invalid_argument("p2e: context_size must be >= 1");
    }
    if (epochs < 1) {
        throw std::invalid_argument("p2e: epochs must be >= 1");
    }
    if (!(learning_rate > 0.0) || !(initial_accumulator > 0.0)) {
        throw std::invalid_argument("p2e: learning_rate and initial_accumulator must be positive");
    }
}

P2EModel init(std::size_t product_count, const P2EConfig& config) {
    config.validate();
    if (product_count < 2) {
        throw std::invalid_argument("p2e: need at least two products, got " + std::to_string(product_count));
    }
    const auto d = static_cast<std::size_t>(config.dim);
    const auto c = static_cast<std::size_t>(config.context_size);
    P2EModel model;
    model.config = config;
    model.input_embeddings = Matrix(product_count, d);
    numkit::Rng rng(config.seed);
    numkit::fill_uniform(model.input_embeddings, 0.5 / config.dim, rng);
    model.output_weights = Matrix(product_count, c * d);
    model.output_bias.assign(product_count, 0.0);
    return model;
}

P2EModel init(const corpus::Vocabulary& vocab, const P2EConfig& config) {
    auto model = init(vocab.product_count(), config);
    model.vocab_fingerprint = vocab.fingerprint();
    return model;
}

std::vector<Example> training_examples(std::span<const Index> basket, int context_size) {
    if (context_size < 1) {
        throw std::invalid_argument("p2e: context_size must be >= 1");
    }
    auto contexts = detail::nearest_contexts(basket, static_cast<std::size_t>(context_size));
    std::vector<Example> out;
    out.reserve(basket.size());
    for (std::size_t t = 0; t < basket.size(); ++t) {
        out.push_back({basket[t], std::move(contexts[t])});
    }
    return out;
}

namespace {

void check_example(const P2EModel& model, const Example& ex) {
    const auto p = model.product_count();
    if (ex.target >= p) {
        throw std::out_of_range("p2e: target id out of range");
    }
    if (ex.context.size() != static_cast<std::size_t>(model.config.context_size)) {
        throw std::invalid_argument("p2e: example context has the wrong number of slots");
    }
    for (auto id : ex.context) {
        if (id != kMasked && id >= p) {
            throw std::out_of_range("p2e: context id out of range");
        }
    }
}

void fill_hidden(const P2EModel& model, const Example& ex, std::vector<double>& hidden) {
    const auto d = model.input_embeddings.cols();
    hidden.assign(model.hidden_width(), 0.0);
    for (std::size_t s = 0; s < ex.context.size(); ++s) {
        if (ex.context[s] == kMasked) {
            continue;
        }
        const auto row = model.input_embeddings.row(ex.context[s]);
        std::copy(row.begin(), row.end(), hidden.begin() + static_cast<std::ptrdiff_t>(s * d));
    }
}

}  // namespace

std::vector<double> hidden_of(const P2EModel& model, const Example& example) {
    check_example(model, example);
    std::vector<double> hidden;
    fill_hidden(model, example, hidden);
    return hidden;
}

std::vector<double> predict(const P2EModel& model, const Example& example) {
    const auto hidden = hidden_of(model, example);
    std::vector<double> logits(model.product_count());
    for (std::size_t k = 0; k < logits.size(); ++k) {
        logits[k] = numkit::dot(model.output_weights.row(k), hidden) + model.output_bias[k];
    }
    numkit::softmax_inplace(logits);
    return logits;
}

double forward_loss(const P2EModel& model, std::span<const Example> batch, Gradients& grads) {
    if (batch.empty()) {
        throw std::invalid_argument("p2e: empty batch");
    }
    const auto p = model.product_count();
    const auto d = model.input_embeddings.cols();
    const auto width = model.hidden_width();
    if (grads.output_weights.rows() != p || grads.output_weights.cols() != width) {
        grads.output_weights = Matrix(p, width);
    } else {
        grads.output_weights.fill(0.0);
    }
    grads.output_bias.assign(p, 0.0);
    grads.input_rows.clear();

    const double scale = 1.0 / static_cast<double>(batch.size());
    std::vector<double> hidden;
    std::vector<double> grad_hidden(width);
    std::vector<double> probs;
    double total = 0.0;
    for (const auto& ex : batch) {
        check_example(model, ex);
        fill_hidden(model, ex, hidden);
        std::fill(grad_hidden.begin(), grad_hidden.end(), 0.0);
        total += detail::softmax_layer(model.output_weights, model.output_bias, hidden, ex.target, scale,
                                       grads.output_weights, grads.output_bias, grad_hidden, probs);
        for (std::size_t s = 0; s < ex.context.size(); ++s) {
            if (ex.context[s] == kMasked) {
                continue;
            }
            auto slot = detail::row_slot(grads.input_rows, ex.context[s], d);
            numkit::axpy(1.0, std::span<const double>(grad_hidden).subspan(s * d, d), slot);
        }
    }
    return total * scale;
}

std::pair<double, Gradients> forward_loss(const P2EModel& model, std::span<const Example> batch) {
    Gradients grads;
    const double loss = forward_loss(model, batch, grads);
    return {loss, std::move(grads)};
}

P2EModel train(const std::vector<corpus::EncodedBasket>& baskets,
               std::size_t product_count,
               const P2EConfig& config,
               const EpochCallback& on_epoch) {
    config.validate();
    std::vector<Example> examples;
    for (const auto& b : baskets) {
        if (b.items.size() < 2) {
            continue;
        }
        auto ex = training_examples(b.items, config.context_size);
        examples.insert(examples.end(), std::make_move_iterator(ex.begin()), std::make_move_iterator(ex.end()));
    }
    if (examples.empty()) {
        throw UserError("p2e: no trainable baskets");
    }

    P2EModel model = init(product_count, config);
    const auto d = model.input_embeddings.cols();
    numkit::AdagradState input_state(model.input_embeddings.size(), config.learning_rate, config.initial_accumulator);
    numkit::AdagradState output_state(model.output_weights.size(), config.learning_rate, config.initial_accumulator);
    numkit::AdagradState bias_state(model.output_bias.size(), config.learning_rate, config.initial_accumulator);

    // Shuffling uses its own stream so initialisation matches init() exactly.
    numkit::Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    Gradients grads;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double total = 0.0;
        for (auto idx : order) {
            total += forward_loss(model, std::span<const Example>(&examples[idx], 1), grads);
            numkit::adagrad_step(output_state, model.output_weights.data(), grads.output_weights.data());
            numkit::adagrad_step(bias_state, model.output_bias, grads.output_bias);
            for (const auto& [row, g] : grads.input_rows) {
                input_state.step(model.input_embeddings.row(row), g, row * d);
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

P2EModel train(const std::vector<corpus::EncodedBasket>& baskets,
               const corpus::Vocabulary& vocab,
               const P2EConfig& config,
               const EpochCallback& on_epoch) {
    auto model = train(baskets, vocab.product_count(), config, on_epoch);
    model.vocab_fingerprint = vocab.fingerprint();
    return model;
}

std::span<const double> embedding_of(const P2EModel& model, Index product) {
    if (product >= model.product_count()) {
        throw std::out_of_range("p2e: product id " + std::to_string(product) + " out of range");
    }
    return model.input_embeddings.row(product);
}

}  // namespace recpipe::p2e
