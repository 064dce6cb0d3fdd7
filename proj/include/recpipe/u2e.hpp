#pragma once

#include "recpipe/corpus.hpp"
#include "recpipe/numkit.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <utility>
#include <vector>

namespace recpipe::u2e {

using corpus::Index;
using numkit::Matrix;

inline constexpr Index kMasked = std::numeric_limits<Index>::max();

struct U2EConfig {
    int product_dim = 128;
    int user_dim = 32;
    int context_size = 4;
    int epochs = 50;
    double learning_rate = 1.0;
    double initial_accumulator = 0.1;
    std::uint64_t seed = 1;

    void validate() const;
};

/// CBOW with a per-basket user vector prepended to the product context.
struct U2EModel {
    Matrix product_embeddings;    // P x D_p
    Matrix user_embeddings;       // U x D_u
    Matrix output_weights;        // P x (D_u + c * D_p)
    std::vector<double> output_bias;
    // Training examples seen per user, summed over all epochs.
    std::vector<std::uint64_t> user_updates;
    // Identified baskets per user in the training corpus.
    std::vector<std::uint64_t> user_transactions;
    std::uint64_t anonymous_skipped = 0;
    U2EConfig config;
    std::uint64_t vocab_fingerprint = 0;
    std::vector<double> epoch_loss;

    std::size_t product_count() const { return product_embeddings.rows(); }
    std::size_t user_count() const { return user_embeddings.rows(); }
    std::size_t hidden_width() const { return output_weights.cols(); }
};

struct Example {
    std::optional<Index> user;
    Index target = 0;
    std::vector<Index> context;  // kMasked in unused slots
};

struct Gradients {
    std::vector<std::pair<Index, std::vector<double>>> user_rows;
    std::vector<std::pair<Index, std::vector<double>>> product_rows;
    Matrix output_weights;
    std::vector<double> output_bias;
    std::size_t skipped = 0;  // anonymous examples left out of the batch
};

using EpochCallback = std::function<void(int epoch, double mean_loss)>;

U2EModel init(std::size_t product_count, std::size_t user_count, const U2EConfig& config);

std::vector<Example> training_examples(const corpus::EncodedBasket& basket, int context_size);

std::vector<double> predict(const U2EModel& model, const Example& example);

/// Mean NLL over the identified examples in the batch. Anonymous examples are
/// skipped and counted in grads.skipped; a batch with none left throws.
double forward_loss(const U2EModel& model, std::span<const Example> batch, Gradients& grads);
std::pair<double, Gradients> forward_loss(const U2EModel& model, std::span<const Example> batch);

U2EModel train(const std::vector<corpus::EncodedBasket>& baskets,
               std::size_t product_count,
               std::size_t user_count,
               const U2EConfig& config,
               const EpochCallback& on_epoch = {});
U2EModel train(const std::vector<corpus::EncodedBasket>& baskets,
               const corpus::Vocabulary& vocab,
               const U2EConfig& config,
               const EpochCallback& on_epoch = {});

/// Users with at least `min_transactions` training baskets.
std::set<Index> optimized_users(const U2EModel& model, std::uint64_t min_transactions = 5);

std::span<const double> user_embedding(const U2EModel& model, Index user);

}  // namespace recpipe::u2e
