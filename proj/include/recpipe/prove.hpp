#pragma once

#include "recpipe/corpus.hpp"
#include "recpipe/numkit.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace recpipe::prove {

using corpus::Index;
using numkit::Matrix;

/// Sparse symmetric co-occurrence scores. Only i < j is stored; the diagonal
/// is never populated.
class CooccurrenceTable {
public:
    struct Entry {
        Index i;
        Index j;
        double value;

        friend bool operator==(const Entry&, const Entry&) = default;
    };

    CooccurrenceTable() = default;
    explicit CooccurrenceTable(std::size_t product_count) : product_count_(product_count) {}

    std::size_t product_count() const { return product_count_; }
    std::size_t nnz() const { return cells_.size(); }
    bool empty() const { return cells_.empty(); }

    void add(Index i, Index j, double x);
    /// Zero for pairs never observed (and for i == j).
    double get(Index i, Index j) const;
    /// Stored cells ordered by (i, j).
    std::vector<Entry> entries() const;
    void merge(const CooccurrenceTable& other);

private:
    static std::uint64_t key(Index i, Index j) { return (std::uint64_t{i} << 32) | j; }

    std::size_t product_count_ = 0;
    std::unordered_map<std::uint64_t, double> cells_;
};

/// For every pair of positions a < b with different products,
/// X(items[a], items[b]) += 1 / (b - a). With threads > 1 baskets are split
/// into contiguous shards whose tables are merged in shard order.
CooccurrenceTable build_cooccurrence(const std::vector<corpus::EncodedBasket>& baskets,
                                     std::size_t product_count,
                                     int threads = 1);

/// (x / x_max)^alpha below x_max, 1 above.
double weight_f(double x, double x_max = 100.0, double alpha = 0.75);

struct ProVeConfig {
    int dim = 128;
    int epochs = 50;
    double learning_rate = 1.0;
    double initial_accumulator = 0.1;
    double x_max = 100.0;
    double alpha = 0.75;
    std::uint64_t seed = 1;

    void validate() const;
};

struct ProVeModel {
    Matrix w;          // P x D
    Matrix w_context;  // P x D
    std::vector<double> bias;
    std::vector<double> bias_context;
    ProVeConfig config;
    std::uint64_t vocab_fingerprint = 0;
    std::vector<double> epoch_loss;

    std::size_t product_count() const { return w.rows(); }
};

struct Gradients {
    Matrix w;
    Matrix w_context;
    std::vector<double> bias;
    std::vector<double> bias_context;
};

using EpochCallback = std::function<void(int epoch, double objective)>;

ProVeModel init(std::size_t product_count, const ProVeConfig& config);

/// Weighted least-squares objective summed over both orientations of every
/// stored pair.
double objective(const ProVeModel& model, const CooccurrenceTable& table);
std::pair<double, Gradients> prove_loss(const ProVeModel& model, const CooccurrenceTable& table);

/// Per-pair Adagrad over seeded shuffles of the stored cells. The objective
/// after each epoch is recorded in epoch_loss.
ProVeModel train_prove(const CooccurrenceTable& table, const ProVeConfig& config,
                       const EpochCallback& on_epoch = {});

/// W + W~.
Matrix final_embeddings(const ProVeModel& model);

// Text format: header "P nnz", then "i j X_ij" per stored cell with i < j.
void save_table(std::ostream& out, const CooccurrenceTable& table);
CooccurrenceTable load_table(std::istream& in);

}  // namespace recpipe::prove
