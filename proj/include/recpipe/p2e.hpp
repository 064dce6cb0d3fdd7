#pragma once

#include "recpipe/corpus.hpp"
#include "recpipe/numkit.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <utility>
#include <vector>

namespace recpipe::p2e {

using corpus::Index;
using numkit::Matrix;

inline constexpr Index kMasked = std::numeric_limits<Index>::max();

struct P2EConfig {
    int dim = 128;
    int context_size = 4;
    int epochs = 50;
    double learning_rate = 1.0;
    double initial_accumulator = 0.1;
    std::uint64_t seed = 1;

    void validate() const;
};

/// CBOW model: concatenated context projection feeding a full softmax.
struct P2EModel {
    Matrix input_embeddings;      // P x D, the delivered product vectors
    Matrix output_weights;        // P x (c * D)
    std::vector<double> output_bias;
    P2EConfig config;
    std::uint64_t vocab_fingerprint = 0;
    std::vector<double> epoch_loss;

    std::size_t product_count() const { return input_embeddings.rows(); }
    std::size_t hidden_width() const { return output_weights.cols(); }
};

/// One target with its c context slots; unused slots hold kMasked.
struct Example {
    Index target = 0;
    std::vector<Index> context;

    friend bool operator==(const Example&, const Example&) = default;
};

struct Gradients {
    // Sparse: one entry per distinct unmasked context product.
    std::vector<std::pair<Index, std::vector<double>>> input_rows;
    Matrix output_weights;
    std::vector<double> output_bias;
};

using EpochCallback = std::function<void(int epoch, double mean_loss)>;

P2EModel init(std::size_t product_count, const P2EConfig& config);
P2EModel init(const corpus::Vocabulary& vocab, const P2EConfig& config);

std::vector<Example> training_examples(std::span<const Index> basket, int context_size);

/// Concatenated context embeddings (masked slots are zeros).
std::vector<double> hidden_of(const P2EModel& model, const Example& example);

/// Softmax over all P products for one example.
std::vector<double> predict(const P2EModel& model, const Example& example);

/// Mean negative log-likelihood over the batch; `grads` is overwritten.
double forward_loss(const P2EModel& model, std::span<const Example> batch, Gradients& grads);
std::pair<double, Gradients> forward_loss(const P2EModel& model, std::span<const Example> batch);

/// Per-example Adagrad over seeded shuffles of every training example.
P2EModel train(const std::vector<corpus::EncodedBasket>& baskets,
               std::size_t product_count,
               const P2EConfig& config,
               const EpochCallback& on_epoch = {});
P2EModel train(const std::vector<corpus::EncodedBasket>& baskets,
               const corpus::Vocabulary& vocab,
               const P2EConfig& config,
               const EpochCallback& on_epoch = {});

std::span<const double> embedding_of(const P2EModel& model, Index product);

}  // namespace recpipe::p2e
