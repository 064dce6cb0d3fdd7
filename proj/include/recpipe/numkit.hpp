#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace recpipe::numkit {

using Rng = std::mt19937_64;

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    void fill(double v);
    bool all_finite() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);
// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

/// Fills with Uniform(-half_width, +half_width) draws in row-major order.
void fill_uniform(Matrix& m, double half_width, Rng& rng);

/// Max-shifted softmax. Throws std::invalid_argument on non-finite logits.
std::vector<double> softmax(std::span<const double> logits);
/// In-place variant; returns log-sum-exp of the input logits.
double softmax_inplace(std::span<double> logits);

struct AdagradState {
    double learning_rate = 1.0;
    double initial_accumulator = 0.1;
    std::vector<double> accumulator;

    AdagradState() = default;
    AdagradState(std::size_t n, double lr = 1.0, double acc0 = 0.1);

    /// Updates the slice of parameters starting at `offset` in the flat
    /// parameter layout this state was sized for.
    void step(std::span<double> params, std::span<const double> grads, std::size_t offset = 0);
};

void adagrad_step(AdagradState& state, std::span<double> params, std::span<const double> grads);

struct AdamState {
    double learning_rate = 0.0025;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::int64_t t = 0;
    std::vector<double> m;
    std::vector<double> v;

    AdamState() = default;
    AdamState(std::size_t n, double lr = 0.0025, double b1 = 0.9, double b2 = 0.999, double eps = 1e-8);
};

/// One bias-corrected Adam step; increments t.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

/// Central-difference check. Returns max over coordinates of
/// |a - n| / max(floor, |a|, |n|).
double check_gradient(const std::function<double(std::span<const double>)>& f,
                      std::span<const double> analytic,
                      std::span<const double> point,
                      double eps = 1e-5,
                      double floor = 1.0);

// Binary layout: u64 rows, u64 cols, rows*cols f64, all little-endian.
void write_binary(std::ostream& out, const Matrix& m);
Matrix read_binary(std::istream& in);
void save_binary(const std::string& path, const Matrix& m);
Matrix load_binary(const std::string& path);

/// One row per line, space separated, 17 significant digits.
void write_text(std::ostream& out, const Matrix& m);

std::string format_double(double v);

/// FNV-1a, used to fingerprint vocabularies and datasets in checkpoint metadata.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace recpipe::numkit
