#include "recpipe/prove.hpp"

#include "recpipe/error.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace recpipe::prove {

void CooccurrenceTable::add(Index i, Index j, double x) {
    if (i == j) {
        throw std::invalid_argument("cooccurrence: diagonal pairs are not stored");
    }
    if (i >= product_count_ || j >= product_count_) {
        throw std::out_of_range("cooccurrence: product id out of range");
    }
    if (i > j) {
        std::swap(i, j);
    }
    cells_[key(i, j)] += x;
}

double CooccurrenceTable::get(Index i, Index j) const {
    if (i == j) {
        return 0.0;
    }
    if (i > j) {
        std::swap(i, j);
    }
    auto it = cells_.find(key(i, j));
    return it == cells_.end() ? 0.0 : it->second;
}

std::vector<CooccurrenceTable::Entry> CooccurrenceTable::entries() const {
    std::vector<std::pair<std::uint64_t, double>> sorted(cells_.begin(), cells_.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<Entry> out;
    out.reserve(sorted.size());
    for (const auto& [k, v] : sorted) {
        out.push_back({static_cast<Index>(k >> 32), static_cast<Index>(k & 0xffffffffu), v});
    }
    return out;
}

void CooccurrenceTable::merge(const CooccurrenceTable& other) {
    if (other.product_count_ != product_count_) {
        throw std::invalid_argument("cooccurrence: merging tables of different vocabularies");
    }
    for (const auto& e : other.entries()) {
        cells_[key(e.i, e.j)] += e.value;
    }
}

namespace {

void accumulate(const std::vector<corpus::EncodedBasket>& baskets, std::size_t begin, std::size_t end,
                CooccurrenceTable& table) {
    for (std::size_t n = begin; n < end; ++n) {
        const auto& items = baskets[n].items;
        for (std::size_t a = 0; a < items.size(); ++a) {
            for (std::size_t b = a + 1; b < items.size(); ++b) {
                if (items[a] == items[b]) {
                    continue;
                }
                table.add(items[a], items[b], 1.0 / static_cast<double>(b - a));
            }
        }
    }
}

}  // namespace

CooccurrenceTable build_cooccurrence(const std::vector<corpus::EncodedBasket>& baskets,
                                     std::size_t product_count,
                                     int threads) {
    CooccurrenceTable table(product_count);
    const auto shards = static_cast<std::size_t>(std::max(1, threads));
    if (shards == 1 || baskets.size() < 2 * shards) {
        accumulate(baskets, 0, baskets.size(), table);
        return table;
    }
    std::vector<CooccurrenceTable> partial(shards, CooccurrenceTable(product_count));
    std::vector<std::thread> workers;
    const std::size_t per = (baskets.size() + shards - 1) / shards;
    for (std::size_t s = 0; s < shards; ++s) {
        const std::size_t begin = std::min(baskets.size(), s * per);
        const std::size_t end = std::min(baskets.size(), begin + per);
        workers.emplace_back([&, s, begin, end] { accumulate(baskets, begin, end, partial[s]); });
    }
    for (auto& w : workers) {
        w.join();
    }
    for (const auto& p : partial) {
        table.merge(p);
    }
    return table;
}

double weight_f(double x, double x_max, double alpha) {
    if (!(x > 0.0)) {
        throw std::invalid_argument("weight_f: x must be positive");
    }
    return x < x_max ? std::pow(x / x_max, alpha) : 1.0;
}

void ProVeConfig::validate() const {
    if (dim < 1) {
        throw std::invalid_argument("prove: dim must be >= 1");
    }
    if (epochs < 1) {
        throw std::invalid_argument("prove: epochs must be >= 1");
    }
    if (!(learning_rate > 0.0) || !(initial_accumulator > 0.0)) {
        throw std::invalid_argument("prove: learning_rate and initial_accumulator must be positive");
    }
    if (!(x_max > 0.0) || !(alpha > 0.0)) {
        throw std::invalid_argument("prove: x_max and alpha must be positive");
    }
}

ProVeModel init(std::size_t product_count, const ProVeConfig& config) {
    config.validate();
    if (product_count < 2) {
        throw std::invalid_argument("prove: need at least two products");
    }
    const auto d = static_cast<std::size_t>(config.dim);
    ProVeModel model;
    model.config = config;
    numkit::Rng rng(config.seed);
    model.w = Matrix(product_count, d);
    model.w_context = Matrix(product_count, d);
    numkit::fill_uniform(model.w, 0.5 / config.dim, rng);
    numkit::fill_uniform(model.w_context, 0.5 / config.dim, rng);
    model.bias.assign(product_count, 0.0);
    model.bias_context.assign(product_count, 0.0);
    return model;
}

namespace {

void check_table(const ProVeModel& model, const CooccurrenceTable& table) {
    if (table.empty()) {
        throw std::invalid_argument("prove: empty co-occurrence table");
    }
    if (table.product_count() != model.product_count()) {
        throw std::invalid_argument("prove: table and model disagree on vocabulary size");
    }
}

// Residual of one orientation: w_i . w~_j + b_i + b~_j - ln x.
double residual(const ProVeModel& m, Index i, Index j, double log_x) {
    return numkit::dot(m.w.row(i), m.w_context.row(j)) + m.bias[i] + m.bias_context[j] - log_x;
}

}  // namespace

double objective(const ProVeModel& model, const CooccurrenceTable& table) {
    check_table(model, table);
    const auto& cfg = model.config;
    double total = 0.0;
    for (const auto& e : table.entries()) {
        const double f = weight_f(e.value, cfg.x_max, cfg.alpha);
        const double log_x = std::log(e.value);
        const double r1 = residual(model, e.i, e.j, log_x);
        const double r2 = residual(model, e.j, e.i, log_x);
        total += f * (r1 * r1 + r2 * r2);
    }
    return total;
}

std::pair<double, Gradients> prove_loss(const ProVeModel& model, const CooccurrenceTable& table) {
    check_table(model, table);
    const auto& cfg = model.config;
    const auto p = model.product_count();
    const auto d = model.w.cols();
    Gradients g{Matrix(p, d), Matrix(p, d), std::vector<double>(p, 0.0), std::vector<double>(p, 0.0)};
    double total = 0.0;
    for (const auto& e : table.entries()) {
        const double f = weight_f(e.value, cfg.x_max, cfg.alpha);
        const double log_x = std::log(e.value);
        for (const auto& [i, j] : {std::pair{e.i, e.j}, std::pair{e.j, e.i}}) {
            const double r = residual(model, i, j, log_x);
            total += f * r * r;
            const double coeff = 2.0 * f * r;
            numkit::axpy(coeff, model.w_context.row(j), g.w.row(i));
            numkit::axpy(coeff, model.w.row(i), g.w_context.row(j));
            g.bias[i] += coeff;
            g.bias_context[j] += coeff;
        }
    }
    return {total, std::move(g)};
}

ProVeModel train_prove(const CooccurrenceTable& table, const ProVeConfig& config, const EpochCallback& on_epoch) {
    ProVeModel model = init(table.product_count(), config);
    check_table(model, table);
    const auto d = model.w.cols();
    const double lr = config.learning_rate;
    const double acc0 = config.initial_accumulator;
    numkit::AdagradState w_state(model.w.size(), lr, acc0);
    numkit::AdagradState wc_state(model.w_context.size(), lr, acc0);
    numkit::AdagradState b_state(model.bias.size(), lr, acc0);
    numkit::AdagradState bc_state(model.bias_context.size(), lr, acc0);

    const auto cells = table.entries();
    std::vector<double> weights(cells.size());
    std::vector<double> logs(cells.size());
    for (std::size_t n = 0; n < cells.size(); ++n) {
        weights[n] = weight_f(cells[n].value, config.x_max, config.alpha);
        logs[n] = std::log(cells[n].value);
    }

    numkit::Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(cells.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> grad_w(d);
    std::vector<double> grad_wc(d);
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (auto n : order) {
            const auto& e = cells[n];
            for (const auto& [i, j] : {std::pair{e.i, e.j}, std::pair{e.j, e.i}}) {
                const double coeff = 2.0 * weights[n] * residual(model, i, j, logs[n]);
                const auto wi = model.w.row(i);
                const auto wj = model.w_context.row(j);
                for (std::size_t k = 0; k < d; ++k) {
                    grad_w[k] = coeff * wj[k];
                    grad_wc[k] = coeff * wi[k];
                }
                w_state.step(wi, grad_w, i * d);
                wc_state.step(wj, grad_wc, j * d);
                b_state.step(std::span<double>(&model.bias[i], 1), std::span<const double>(&coeff, 1), i);
                bc_state.step(std::span<double>(&model.bias_context[j], 1), std::span<const double>(&coeff, 1), j);
            }
        }
        const double j_epoch = objective(model, table);
        model.epoch_loss.push_back(j_epoch);
        if (on_epoch) {
            on_epoch(epoch, j_epoch);
        }
    }
    return model;
}

Matrix final_embeddings(const ProVeModel& model) {
    Matrix out = model.w;
    numkit::axpy(1.0, model.w_context.data(), out.data());
    return out;
}

void save_table(std::ostream& out, const CooccurrenceTable& table) {
    out << table.product_count() << ' ' << table.nnz() << '\n';
    for (const auto& e : table.entries()) {
        out << e.i << ' ' << e.j << ' ' << numkit::format_double(e.value) << '\n';
    }
}

CooccurrenceTable load_table(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError(1, "missing 'P nnz' header");
    }
    std::istringstream header(line);
    std::size_t p = 0;
    std::size_t nnz = 0;
    if (!(header >> p >> nnz)) {
        throw ParseError(1, "expected 'P nnz' header");
    }
    CooccurrenceTable table(p);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        std::istringstream fields(line);
        Index i = 0;
        Index j = 0;
        double x = 0.0;
        if (!(fields >> i >> j >> x) || i >= j || j >= p || !(x > 0.0)) {
            throw ParseError(lineno, "expected 'i j X' with i < j < P and X > 0");
        }
        table.add(i, j, x);
    }
    if (table.nnz() != nnz) {
        throw ParseError(lineno, "header promised " + std::to_string(nnz) + " cells");
    }
    return table;
}

}  // namespace recpipe::prove
