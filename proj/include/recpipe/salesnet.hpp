#pragma once

#include "recpipe/corpus.hpp"
#include "recpipe/numkit.hpp"
#include "recpipe/synthetic.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace recpipe::salesnet {

using corpus::Index;
using numkit::Matrix;

/// Total spend of one user on one product over the aggregation period.
struct SalesRow {
    Index user = 0;
    Index product = 0;
    double amount = 0.0;

    friend bool operator==(const SalesRow&, const SalesRow&) = default;
};

struct SalesDataset {
    std::vector<SalesRow> rows;

    /// One row per (user, product) and non-negative amounts.
    void validate() const;
    std::uint64_t fingerprint() const;
};

/// Sums rows sharing a (user, product) pair; first-seen order is kept.
SalesDataset aggregate(std::span<const SalesRow> rows);

/// Maps tokens through the vocabulary. Records with unknown tokens are dropped
/// (counted in *dropped) unless strict.
SalesDataset from_records(std::span<const corpus::SpendRecord> records, const corpus::Vocabulary& vocab,
                          bool strict = false, std::size_t* dropped = nullptr);

// CSV with header "user_id,product,amount".
std::vector<corpus::SpendRecord> read_spend_csv(std::istream& in);
std::vector<corpus::SpendRecord> read_spend_csv(const std::string& path);
void write_spend_csv(std::ostream& out, std::span<const corpus::SpendRecord> records);

/// Which embedding tables keep training during sales regression.
struct ExperimentMode {
    int id = 1;
    bool continue_user = false;
    bool continue_prod = false;

    static ExperimentMode from_id(int id);
    static std::array<ExperimentMode, 4> all();

    friend bool operator==(const ExperimentMode&, const ExperimentMode&) = default;
};

struct SalesConfig {
    int user_dim = 32;
    int prod_dim = 128;
    int hidden1 = 160;
    int hidden2 = 80;
    int epochs = 35;
    int batch_size = 512;
    double learning_rate = 0.0025;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 1;
    // Regress log1p(amount) instead of the raw amount.
    bool log_target = false;
    double holdout_fraction = 0.1;

    void validate() const;
};

struct DenseLayer {
    Matrix weights;  // out x in
    std::vector<double> bias;
};

/// emb_user (U x 32) | emb_prod (P x 128) -> concat 160 -> ReLU 160 -> ReLU 80 -> linear 1.
struct SalesModel {
    Matrix user_table;
    Matrix prod_table;
    DenseLayer fc1;
    DenseLayer fc2;
    DenseLayer readout;
    bool freeze_user = true;
    bool freeze_prod = true;
    int mode_id = 1;
    SalesConfig config;
    std::vector<double> epoch_loss;
};

struct Gradients {
    Matrix user_table;  // all zeros when frozen
    Matrix prod_table;
    DenseLayer fc1;
    DenseLayer fc2;
    DenseLayer readout;
};

using EpochCallback = std::function<void(int epoch, double train_mse)>;

/// Copies the tables and He-uniform initialises the dense layers (biases zero).
SalesModel init(const Matrix& init_user, const Matrix& init_prod, ExperimentMode mode, const SalesConfig& config);

/// Raw network output (in log1p space when config.log_target).
double forward(const SalesModel& model, Index user, Index product);
/// Output mapped back to currency units.
double predict_amount(const SalesModel& model, Index user, Index product);

/// Mean squared error over the batch against the (possibly transformed) target.
/// Frozen tables receive exact zero gradients.
std::pair<double, Gradients> mse_loss(const SalesModel& model, std::span<const SalesRow> batch);

SalesModel train_sales(const SalesDataset& dataset, const Matrix& init_user, const Matrix& init_prod,
                       ExperimentMode mode, const SalesConfig& config, const EpochCallback& on_epoch = {});

double r2_score(std::span<const double> predictions, std::span<const double> targets);

/// R^2 of predict_amount against the raw amounts.
double evaluate_r2(const SalesModel& model, std::span<const SalesRow> rows);

/// Seeded row-level split; the second set holds round(fraction * n) rows.
std::pair<SalesDataset, SalesDataset> split(const SalesDataset& dataset, double holdout_fraction,
                                            std::uint64_t seed);

struct ExperimentResult {
    ExperimentMode mode;
    double r2 = 0.0;
    double final_train_mse = 0.0;
    SalesModel model;
};

/// Trains all four freeze modes from identical tables, seeds and split.
std::vector<ExperimentResult> run_experiments(const SalesDataset& dataset, const Matrix& init_user,
                                              const Matrix& init_prod, const SalesConfig& config);

// "mode,continue_user,continue_prod,r2"
void write_report_csv(std::ostream& out, std::span<const ExperimentResult> results);
void write_report_text(std::ostream& out, std::span<const ExperimentResult> results);

}  // namespace recpipe::salesnet
