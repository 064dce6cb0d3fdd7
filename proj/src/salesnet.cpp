#include "recpipe/salesnet.hpp"

#include "recpipe/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace recpipe::salesnet {

namespace {

std::uint64_t pair_key(Index u, Index p) {
    return (std::uint64_t{u} << 32) | p;
}

}  // namespace

void SalesDataset::validate() const {
    std::unordered_map<std::uint64_t, bool> seen;
    for (const auto& r : rows) {
        if (!(r.amount >= 0.0) || !std::isfinite(r.amount)) {
            throw UserError("sales dataset: amounts must be finite and non-negative");
        }
        if (!seen.emplace(pair_key(r.user, r.product), true).second) {
            throw UserError("sales dataset: duplicate (user, product) row");
        }
    }
}

std::uint64_t SalesDataset::fingerprint() const {
    std::uint64_t h = numkit::fnv1a("sales");
    for (const auto& r : rows) {
        const std::string line = std::to_string(r.user) + ' ' + std::to_string(r.product) + ' ' +
                                 numkit::format_double(r.amount) + '\n';
        h = numkit::fnv1a(line, h);
    }
    return h;
}

SalesDataset aggregate(std::span<const SalesRow> rows) {
    SalesDataset out;
    std::unordered_map<std::uint64_t, std::size_t> index;
    for (const auto& r : rows) {
        auto [it, fresh] = index.emplace(pair_key(r.user, r.product), out.rows.size());
        if (fresh) {
            out.rows.push_back({r.user, r.product, 0.0});
        }
        out.rows[it->second].amount += r.amount;
    }
    return out;
}

SalesDataset from_records(std::span<const corpus::SpendRecord> records, const corpus::Vocabulary& vocab,
                          bool strict, std::size_t* dropped) {
    std::vector<SalesRow> rows;
    std::size_t missing = 0;
    for (const auto& rec : records) {
        const auto u = vocab.user_index(rec.user);
        const auto p = vocab.product_index(rec.product);
        if (!u || !p) {
            if (strict) {
                throw UserError("sales: unknown " + std::string(!u ? "user '" + rec.user : "product '" + rec.product) +
                                "'");
            }
            ++missing;
            continue;
        }
        rows.push_back({*u, *p, rec.amount});
    }
    if (dropped) {
        *dropped = missing;
    }
    auto out = aggregate(rows);
    out.validate();
    return out;
}

std::vector<corpus::SpendRecord> read_spend_csv(std::istream& in) {
    std::vector<corpus::SpendRecord> out;
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) {
        return out;
    }
    ++lineno;
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    if (line != "user_id,product,amount") {
        throw ParseError(lineno, "expected header user_id,product,amount");
    }
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const auto c1 = line.find(',');
        const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
        if (c2 == std::string::npos || line.find(',', c2 + 1) != std::string::npos) {
            throw ParseError(lineno, "expected 3 fields");
        }
        corpus::SpendRecord rec{line.substr(0, c1), line.substr(c1 + 1, c2 - c1 - 1), 0.0};
        try {
            std::size_t used = 0;
            const std::string amount = line.substr(c2 + 1);
            rec.amount = std::stod(amount, &used);
            if (used != amount.size()) {
                throw std::invalid_argument("amount");
            }
        } catch (const std::exception&) {
            throw ParseError(lineno, "amount is not a number");
        }
        if (rec.user.empty() || rec.product.empty()) {
            throw ParseError(lineno, "empty user_id or product");
        }
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<corpus::SpendRecord> read_spend_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open sales file " + path);
    }
    return read_spend_csv(in);
}

void write_spend_csv(std::ostream& out, std::span<const corpus::SpendRecord> records) {
    out << "user_id,product,amount\n";
    for (const auto& r : records) {
        out << r.user << ',' << r.product << ',' << numkit::format_double(r.amount) << '\n';
    }
}

ExperimentMode ExperimentMode::from_id(int id) {
    switch (id) {
        case 1: return {1, false, false};
        case 2: return {2, false, true};
        case 3: return {3, true, false};
        case 4: return {4, true, true};
        default: throw UserError("experiment mode must be 1..4, got " + std::to_string(id));
    }
}

std::array<ExperimentMode, 4> ExperimentMode::all() {
    return {from_id(1), from_id(2), from_id(3), from_id(4)};
}

void SalesConfig::validate() const {
    if (user_dim < 1 || prod_dim < 1 || hidden1 < 1 || hidden2 < 1) {
        throw std::invalid_argument("salesnet: layer widths must be >= 1");
    }
    if (epochs < 1 || batch_size < 1) {
        throw std::invalid_argument("salesnet: epochs and batch_size must be >= 1");
    }
    if (!(learning_rate > 0.0) || !(epsilon > 0.0) || beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
        throw std::invalid_argument("salesnet: invalid Adam hyperparameters");
    }
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
        throw std::invalid_argument("salesnet: holdout_fraction must lie in (0, 1)");
    }
}

namespace {

DenseLayer he_uniform(std::size_t out, std::size_t in, numkit::Rng& rng) {
    DenseLayer layer{Matrix(out, in), std::vector<double>(out, 0.0)};
    numkit::fill_uniform(layer.weights, std::sqrt(6.0 / static_cast<double>(in)), rng);
    return layer;
}

DenseLayer zeros_like(const DenseLayer& l) {
    return {Matrix(l.weights.rows(), l.weights.cols()), std::vector<double>(l.bias.size(), 0.0)};
}

struct Activations {
    std::vector<double> input;
    std::vector<double> pre1;
    std::vector<double> h1;
    std::vector<double> pre2;
    std::vector<double> h2;
    double output = 0.0;
};

void dense_forward(const DenseLayer& layer, std::span<const double> x, std::vector<double>& pre) {
    pre.resize(layer.bias.size());
    for (std::size_t o = 0; o < pre.size(); ++o) {
        pre[o] = numkit::dot(layer.weights.row(o), x) + layer.bias[o];
    }
}

void relu(const std::vector<double>& pre, std::vector<double>& out) {
    out.resize(pre.size());
    for (std::size_t i = 0; i < pre.size(); ++i) {
        out[i] = pre[i] > 0.0 ? pre[i] : 0.0;
    }
}

void check_ids(const SalesModel& model, Index user, Index product) {
    if (user >= model.user_table.rows()) {
        throw std::out_of_range("salesnet: user id " + std::to_string(user) + " out of range");
    }
    if (product >= model.prod_table.rows()) {
        throw std::out_of_range("salesnet: product id " + std::to_string(product) + " out of range");
    }
}

void run_forward(const SalesModel& model, Index user, Index product, Activations& a) {
    check_ids(model, user, product);
    const auto u = model.user_table.row(user);
    const auto p = model.prod_table.row(product);
    a.input.assign(u.begin(), u.end());
    a.input.insert(a.input.end(), p.begin(), p.end());
    dense_forward(model.fc1, a.input, a.pre1);
    relu(a.pre1, a.h1);
    dense_forward(model.fc2, a.h1, a.pre2);
    relu(a.pre2, a.h2);
    a.output = numkit::dot(model.readout.weights.row(0), a.h2) + model.readout.bias[0];
}

double transform_target(const SalesModel& model, double amount) {
    return model.config.log_target ? std::log1p(amount) : amount;
}

}  // namespace

SalesModel init(const Matrix& init_user, const Matrix& init_prod, ExperimentMode mode, const SalesConfig& config) {
    config.validate();
    if (init_user.cols() != static_cast<std::size_t>(config.user_dim)) {
        throw UserError("salesnet: user table width " + std::to_string(init_user.cols()) + " != configured " +
                        std::to_string(config.user_dim));
    }
    if (init_prod.cols() != static_cast<std::size_t>(config.prod_dim)) {
        throw UserError("salesnet: product table width " + std::to_string(init_prod.cols()) + " != configured " +
                        std::to_string(config.prod_dim));
    }
    SalesModel model;
    model.config = config;
    model.user_table = init_user;
    model.prod_table = init_prod;
    model.freeze_user = !mode.continue_user;
    model.freeze_prod = !mode.continue_prod;
    model.mode_id = mode.id;
    numkit::Rng rng(config.seed);
    const auto in = static_cast<std::size_t>(config.user_dim + config.prod_dim);
    model.fc1 = he_uniform(static_cast<std::size_t>(config.hidden1), in, rng);
    model.fc2 = he_uniform(static_cast<std::size_t>(config.hidden2), static_cast<std::size_t>(config.hidden1), rng);
    model.readout = he_uniform(1, static_cast<std::size_t>(config.hidden2), rng);
    return model;
}

double forward(const SalesModel& model, Index user, Index product) {
    Activations a;
    run_forward(model, user, product, a);
    return a.output;
}

double predict_amount(const SalesModel& model, Index user, Index product) {
    const double y = forward(model, user, product);
    return model.config.log_target ? std::expm1(y) : y;
}

std::pair<double, Gradients> mse_loss(const SalesModel& model, std::span<const SalesRow> batch) {
    if (batch.empty()) {
        throw std::invalid_argument("salesnet: empty batch");
    }
    Gradients g{Matrix(model.user_table.rows(), model.user_table.cols()),
                Matrix(model.prod_table.rows(), model.prod_table.cols()),
                zeros_like(model.fc1), zeros_like(model.fc2), zeros_like(model.readout)};
    const double scale = 1.0 / static_cast<double>(batch.size());
    const auto du = model.user_table.cols();
    Activations a;
    std::vector<double> d2(model.fc2.bias.size());
    std::vector<double> d1(model.fc1.bias.size());
    std::vector<double> dx(a.input.size());
    double total = 0.0;
    for (const auto& row : batch) {
        run_forward(model, row.user, row.product, a);
        const double err = a.output - transform_target(model, row.amount);
        total += err * err;
        const double dy = 2.0 * err * scale;

        g.readout.bias[0] += dy;
        numkit::axpy(dy, a.h2, g.readout.weights.row(0));

        const auto w3 = model.readout.weights.row(0);
        for (std::size_t o = 0; o < d2.size(); ++o) {
            d2[o] = a.pre2[o] > 0.0 ? dy * w3[o] : 0.0;
        }
        std::fill(d1.begin(), d1.end(), 0.0);
        for (std::size_t o = 0; o < d2.size(); ++o) {
            if (d2[o] == 0.0) {
                continue;
            }
            g.fc2.bias[o] += d2[o];
            numkit::axpy(d2[o], a.h1, g.fc2.weights.row(o));
            numkit::axpy(d2[o], model.fc2.weights.row(o), d1);
        }
        for (std::size_t o = 0; o < d1.size(); ++o) {
            d1[o] = a.pre1[o] > 0.0 ? d1[o] : 0.0;
        }
        dx.assign(a.input.size(), 0.0);
        for (std::size_t o = 0; o < d1.size(); ++o) {
            if (d1[o] == 0.0) {
                continue;
            }
            g.fc1.bias[o] += d1[o];
            numkit::axpy(d1[o], a.input, g.fc1.weights.row(o));
            numkit::axpy(d1[o], model.fc1.weights.row(o), dx);
        }
        const std::span<const double> gx(dx);
        if (!model.freeze_user) {
            numkit::axpy(1.0, gx.subspan(0, du), g.user_table.row(row.user));
        }
        if (!model.freeze_prod) {
            numkit::axpy(1.0, gx.subspan(du), g.prod_table.row(row.product));
        }
    }
    return {total * scale, std::move(g)};
}

SalesModel train_sales(const SalesDataset& dataset, const Matrix& init_user, const Matrix& init_prod,
                       ExperimentMode mode, const SalesConfig& config, const EpochCallback& on_epoch) {
    if (dataset.rows.empty()) {
        throw UserError("salesnet: empty training set");
    }
    SalesModel model = init(init_user, init_prod, mode, config);
    for (const auto& r : dataset.rows) {
        if (r.user >= init_user.rows() || r.product >= init_prod.rows()) {
            throw UserError("salesnet: dataset references ids beyond the embedding tables");
        }
    }

    auto adam_for = [&](std::size_t n) {
        return numkit::AdamState(n, config.learning_rate, config.beta1, config.beta2, config.epsilon);
    };
    auto s_user = adam_for(model.user_table.size());
    auto s_prod = adam_for(model.prod_table.size());
    auto s_w1 = adam_for(model.fc1.weights.size());
    auto s_b1 = adam_for(model.fc1.bias.size());
    auto s_w2 = adam_for(model.fc2.weights.size());
    auto s_b2 = adam_for(model.fc2.bias.size());
    auto s_w3 = adam_for(model.readout.weights.size());
    auto s_b3 = adam_for(model.readout.bias.size());

    numkit::Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<SalesRow> rows = dataset.rows;
    const auto batch = static_cast<std::size_t>(config.batch_size);
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(rows.begin(), rows.end(), rng);
        double total = 0.0;
        for (std::size_t start = 0; start < rows.size(); start += batch) {
            const std::size_t n = std::min(batch, rows.size() - start);
            auto [loss, g] = mse_loss(model, std::span<const SalesRow>(rows).subspan(start, n));
            total += loss * static_cast<double>(n);
            numkit::adam_step(s_w1, model.fc1.weights.data(), g.fc1.weights.data());
            numkit::adam_step(s_b1, model.fc1.bias, g.fc1.bias);
            numkit::adam_step(s_w2, model.fc2.weights.data(), g.fc2.weights.data());
            numkit::adam_step(s_b2, model.fc2.bias, g.fc2.bias);
            numkit::adam_step(s_w3, model.readout.weights.data(), g.readout.weights.data());
            numkit::adam_step(s_b3, model.readout.bias, g.readout.bias);
            if (!model.freeze_user) {
                numkit::adam_step(s_user, model.user_table.data(), g.user_table.data());
            }
            if (!model.freeze_prod) {
                numkit::adam_step(s_prod, model.prod_table.data(), g.prod_table.data());
            }
        }
        const double mse = total / static_cast<double>(rows.size());
        model.epoch_loss.push_back(mse);
        if (on_epoch) {
            on_epoch(epoch, mse);
        }
    }
    return model;
}

double r2_score(std::span<const double> predictions, std::span<const double> targets) {
    if (predictions.size() != targets.size()) {
        throw std::invalid_argument("r2_score: length mismatch");
    }
    if (targets.size() < 2) {
        throw std::invalid_argument("r2_score: need at least two targets");
    }
    const double mean = std::accumulate(targets.begin(), targets.end(), 0.0) / static_cast<double>(targets.size());
    double ss_res = 0.0;
    double ss_tot = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        ss_res += (targets[i] - predictions[i]) * (targets[i] - predictions[i]);
        ss_tot += (targets[i] - mean) * (targets[i] - mean);
    }
    if (ss_tot == 0.0) {
        throw std::invalid_argument("r2_score: targets are constant, R^2 undefined");
    }
    return 1.0 - ss_res / ss_tot;
}

double evaluate_r2(const SalesModel& model, std::span<const SalesRow> rows) {
    std::vector<double> pred;
    std::vector<double> target;
    pred.reserve(rows.size());
    target.reserve(rows.size());
    for (const auto& r : rows) {
        pred.push_back(predict_amount(model, r.user, r.product));
        target.push_back(r.amount);
    }
    return r2_score(pred, target);
}

std::pair<SalesDataset, SalesDataset> split(const SalesDataset& dataset, double holdout_fraction, std::uint64_t seed) {
    std::vector<std::size_t> order(dataset.rows.size());
    std::iota(order.begin(), order.end(), 0);
    numkit::Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::llround(holdout_fraction * static_cast<double>(order.size())));
    std::vector<bool> is_test(order.size(), false);
    for (std::size_t i = 0; i < n_test; ++i) {
        is_test[order[i]] = true;
    }
    std::pair<SalesDataset, SalesDataset> out;
    for (std::size_t i = 0; i < dataset.rows.size(); ++i) {
        (is_test[i] ? out.second : out.first).rows.push_back(dataset.rows[i]);
    }
    return out;
}

std::vector<ExperimentResult> run_experiments(const SalesDataset& dataset, const Matrix& init_user,
                                              const Matrix& init_prod, const SalesConfig& config) {
    config.validate();
    dataset.validate();
    const auto [train, test] = split(dataset, config.holdout_fraction, config.seed);
    if (test.rows.size() < 2) {
        throw UserError("salesnet: held-out split has fewer than two rows");
    }
    std::vector<ExperimentResult> out;
    for (const auto mode : ExperimentMode::all()) {
        auto model = train_sales(train, init_user, init_prod, mode, config);
        const double r2 = evaluate_r2(model, test.rows);
        const double last = model.epoch_loss.back();
        out.push_back({mode, r2, last, std::move(model)});
    }
    return out;
}

void write_report_csv(std::ostream& out, std::span<const ExperimentResult> results) {
    out << "mode,continue_user,continue_prod,r2\n";
    for (const auto& r : results) {
        out << r.mode.id << ',' << (r.mode.continue_user ? "true" : "false") << ','
            << (r.mode.continue_prod ? "true" : "false") << ',' << numkit::format_double(r.r2) << '\n';
    }
}

void write_report_text(std::ostream& out, std::span<const ExperimentResult> results) {
    out << "Experiment  Continue user emb.  Continue prod emb.  R2 score\n";
    for (const auto& r : results) {
        char line[128];
        std::snprintf(line, sizeof line, "%-10d  %-18s  %-18s  %6.2f%%\n", r.mode.id,
                      r.mode.continue_user ? "yes" : "no", r.mode.continue_prod ? "yes" : "no", 100.0 * r.r2);
        out << line;
    }
}

}  // namespace recpipe::salesnet
