#include "recpipe/numkit.hpp"

#include "recpipe/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace recpipe::numkit {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

void Matrix::fill(double v) {
    std::fill(data_.begin(), data_.end(), v);
}

bool Matrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double dot(std::span<const double> a, std::span<const double> b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sum += a[i] * b[i];
    }
    return sum;
}

double l2_norm(std::span<const double> a) {
    return std::sqrt(dot(a, a));
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] += alpha * x[i];
    }
}

void fill_uniform(Matrix& m, double half_width, Rng& rng) {
    std::uniform_real_distribution<double> dist(-half_width, half_width);
    for (auto& v : m.data()) {
        v = dist(rng);
    }
}

double softmax_inplace(std::span<double> logits) {
    if (logits.empty()) {
        throw std::invalid_argument("softmax: empty logits");
    }
    double max = -std::numeric_limits<double>::infinity();
    for (double z : logits) {
        if (!std::isfinite(z)) {
            throw std::invalid_argument("softmax: non-finite logit");
        }
        max = std::max(max, z);
    }
    double total = 0.0;
    for (auto& z : logits) {
        z = std::exp(z - max);
        total += z;
    }
    for (auto& z : logits) {
        z /= total;
    }
    return max + std::log(total);
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> out(logits.begin(), logits.end());
    softmax_inplace(out);
    return out;
}

AdagradState::AdagradState(std::size_t n, double lr, double acc0)
    : learning_rate(lr), initial_accumulator(acc0), accumulator(n, acc0) {}

void AdagradState::step(std::span<double> params, std::span<const double> grads, std::size_t offset) {
    if (params.size() != grads.size()) {
        throw std::invalid_argument("adagrad: parameter/gradient length mismatch");
    }
    if (offset + params.size() > accumulator.size()) {
        throw std::invalid_argument("adagrad: slice exceeds accumulator");
    }
    double* acc = accumulator.data() + offset;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        if (g == 0.0) {
            continue;
        }
        acc[i] += g * g;
        params[i] -= learning_rate * g / std::sqrt(acc[i]);
    }
}

void adagrad_step(AdagradState& state, std::span<double> params, std::span<const double> grads) {
    if (params.size() != state.accumulator.size()) {
        throw std::invalid_argument("adagrad: state sized for a different parameter count");
    }
    state.step(params, grads, 0);
}

AdamState::AdamState(std::size_t n, double lr, double b1, double b2, double eps)
    : learning_rate(lr), beta1(b1), beta2(b2), epsilon(eps), m(n, 0.0), v(n, 0.0) {}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads) {
    if (params.size() != grads.size() || params.size() != state.m.size()) {
        throw std::invalid_argument("adam: parameter/gradient/state length mismatch");
    }
    ++state.t;
    const double t = static_cast<double>(state.t);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        params[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
}

double check_gradient(const std::function<double(std::span<const double>)>& f,
                      std::span<const double> analytic,
                      std::span<const double> point,
                      double eps,
                      double floor) {
    if (analytic.size() != point.size()) {
        throw std::invalid_argument("check_gradient: gradient/point length mismatch");
    }
    std::vector<double> x(point.begin(), point.end());
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + eps;
        const double up = f(x);
        x[i] = saved - eps;
        const double down = f(x);
        x[i] = saved;
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw std::invalid_argument("check_gradient: non-finite function value");
        }
        const double numeric = (up - down) / (2.0 * eps);
        const double a = analytic[i];
        const double scale = std::max({floor, std::abs(a), std::abs(numeric)});
        worst = std::max(worst, std::abs(a - numeric) / scale);
    }
    return worst;
}

namespace {

template <typename T>
T to_little(T v) {
    if constexpr (std::endian::native == std::endian::little) {
        return v;
    } else {
        unsigned char bytes[sizeof(T)];
        std::memcpy(bytes, &v, sizeof(T));
        std::reverse(bytes, bytes + sizeof(T));
        std::memcpy(&v, bytes, sizeof(T));
        return v;
    }
}

template <typename T>
void put(std::ostream& out, T v) {
    v = to_little(v);
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) {
        throw IoError("matrix: truncated binary stream");
    }
    return to_little(v);
}

}  // namespace

void write_binary(std::ostream& out, const Matrix& m) {
    put<std::uint64_t>(out, m.rows());
    put<std::uint64_t>(out, m.cols());
    for (double v : m.data()) {
        put<double>(out, v);
    }
}

Matrix read_binary(std::istream& in) {
    const auto rows = get<std::uint64_t>(in);
    const auto cols = get<std::uint64_t>(in);
    if (cols != 0 && rows > (std::uint64_t{1} << 40) / cols) {
        throw IoError("matrix: implausible dimensions in header");
    }
    Matrix m(rows, cols);
    for (auto& v : m.data()) {
        v = get<double>(in);
    }
    return m;
}

void save_binary(const std::string& path, const Matrix& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open " + path + " for writing");
    }
    write_binary(out, m);
}

Matrix load_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path);
    }
    return read_binary(in);
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_text(std::ostream& out, const Matrix& m) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const auto row = m.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) {
                out << ' ';
            }
            out << format_double(row[c]);
        }
        out << '\n';
    }
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace recpipe::numkit
