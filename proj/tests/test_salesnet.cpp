#include "doctest.h"

#include "gradcheck.hpp"

#include "recpipe/error.hpp"
#include "recpipe/salesnet.hpp"

#include <cmath>
#include <set>
#include <sstream>

using namespace recpipe;
using namespace recpipe::salesnet;
using numkit::Matrix;

namespace {

SalesConfig tiny_config() {
    SalesConfig cfg;
    cfg.user_dim = 3;
    cfg.prod_dim = 5;
    cfg.hidden1 = 6;
    cfg.hidden2 = 4;
    cfg.epochs = 10;
    cfg.batch_size = 8;
    cfg.learning_rate = 0.01;
    return cfg;
}

Matrix random_table(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    numkit::Rng rng(seed);
    Matrix m(rows, cols);
    numkit::fill_uniform(m, 1.0, rng);
    return m;
}

// Spend driven by a hidden per-user factor and a per-product price.
SalesDataset toy_dataset(std::size_t users, std::size_t products) {
    SalesDataset d;
    for (Index u = 0; u < users; ++u) {
        for (Index p = 0; p < products; ++p) {
            if ((u + p) % 3 == 0) {
                continue;
            }
            d.rows.push_back({u, p, (1.0 + p % 4) * (1.0 + 0.3 * u)});
        }
    }
    return d;
}

std::vector<double> dense(const DenseLayer& l, const std::vector<double>& x, bool relu) {
    std::vector<double> out(l.bias.size());
    for (std::size_t o = 0; o < out.size(); ++o) {
        double s = l.bias[o];
        for (std::size_t i = 0; i < x.size(); ++i) {
            s += l.weights(o, i) * x[i];
        }
        out[o] = relu ? std::max(0.0, s) : s;
    }
    return out;
}

double oracle_forward(const SalesModel& m, Index u, Index p) {
    std::vector<double> x(m.user_table.row(u).begin(), m.user_table.row(u).end());
    x.insert(x.end(), m.prod_table.row(p).begin(), m.prod_table.row(p).end());
    return dense(m.readout, dense(m.fc2, dense(m.fc1, x, true), true), false)[0];
}

}  // namespace

TEST_CASE("experiment modes enumerate the freeze grid") {
    const auto all = ExperimentMode::all();
    std::set<std::pair<bool, bool>> combos;
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(all[i].id == static_cast<int>(i) + 1);
        combos.insert({all[i].continue_user, all[i].continue_prod});
    }
    CHECK(combos.size() == 4);
    CHECK(ExperimentMode::from_id(1) == ExperimentMode{1, false, false});
    CHECK(ExperimentMode::from_id(2) == ExperimentMode{2, false, true});
    CHECK(ExperimentMode::from_id(3) == ExperimentMode{3, true, false});
    CHECK(ExperimentMode::from_id(4) == ExperimentMode{4, true, true});
    CHECK_THROWS_AS(ExperimentMode::from_id(5), UserError);
    CHECK_THROWS_AS(ExperimentMode::from_id(0), UserError);
}

TEST_CASE("default layout has the documented shapes") {
    SalesConfig cfg;
    auto m = init(Matrix(3, 32), Matrix(4, 128), ExperimentMode::from_id(1), cfg);
    CHECK(m.fc1.weights.rows() == 160);
    CHECK(m.fc1.weights.cols() == 160);
    CHECK(m.fc2.weights.rows() == 80);
    CHECK(m.fc2.weights.cols() == 160);
    CHECK(m.readout.weights.rows() == 1);
    CHECK(m.readout.weights.cols() == 80);
    for (double b : m.fc1.bias) {
        CHECK(b == 0.0);
    }
    const double limit = std::sqrt(6.0 / 160.0);
    for (double w : m.fc1.weights.data()) {
        CHECK(std::abs(w) <= limit);
    }
    CHECK_THROWS_AS(init(Matrix(3, 31), Matrix(4, 128), ExperimentMode::from_id(1), cfg), UserError);
    CHECK_THROWS_AS(init(Matrix(3, 32), Matrix(4, 127), ExperimentMode::from_id(1), cfg), UserError);
}

TEST_CASE("zero network outputs the readout bias") {
    auto m = init(random_table(2, 3, 1), random_table(3, 5, 2), ExperimentMode::from_id(1), tiny_config());
    m.fc1.weights.fill(0.0);
    m.fc2.weights.fill(0.0);
    m.readout.weights.fill(0.0);
    m.readout.bias[0] = 1.75;
    CHECK(forward(m, 0, 2) == 1.75);
    CHECK(forward(m, 1, 0) == 1.75);
    CHECK_THROWS_AS(forward(m, 2, 0), std::out_of_range);
    CHECK_THROWS_AS(forward(m, 0, 3), std::out_of_range);
}

TEST_CASE("forward matches a hand-written layer oracle") {
    auto inst = testing::tiny_sales(3, ExperimentMode::from_id(4));
    for (Index u = 0; u < inst.model.user_table.rows(); ++u) {
        for (Index p = 0; p < inst.model.prod_table.rows(); ++p) {
            CHECK(std::abs(forward(inst.model, u, p) - oracle_forward(inst.model, u, p)) <= 1e-12);
        }
    }
}

TEST_CASE("mse_loss analytic values") {
    auto m = init(random_table(2, 3, 1), random_table(3, 5, 2), ExperimentMode::from_id(4), tiny_config());
    m.fc1.weights.fill(0.0);
    m.fc2.weights.fill(0.0);
    m.readout.weights.fill(0.0);
    const std::vector<SalesRow> twos{{0, 0, 2.0}, {1, 2, 2.0}};
    CHECK(mse_loss(m, twos).first == 4.0);
    m.readout.bias[0] = 2.0;
    CHECK(mse_loss(m, twos).first == 0.0);
    CHECK_THROWS(mse_loss(m, std::vector<SalesRow>{}));
}

TEST_CASE("gradient check on tiny networks") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        CAPTURE(seed);
        CHECK(testing::sales_gradient_error(seed) < 1e-4);
    }
}

TEST_CASE("frozen tables receive exact zero gradients") {
    for (int id = 1; id <= 4; ++id) {
        const auto mode = ExperimentMode::from_id(id);
        const auto inst = testing::tiny_sales(9, mode);
        const auto [loss, g] = mse_loss(inst.model, inst.rows);
        auto all_zero = [](const Matrix& m) {
            return std::all_of(m.data().begin(), m.data().end(), [](double v) { return v == 0.0; });
        };
        CHECK(all_zero(g.user_table) == !mode.continue_user);
        CHECK(all_zero(g.prod_table) == !mode.continue_prod);
    }
}

TEST_CASE("frozen tables are bitwise unchanged after training") {
    const auto data = toy_dataset(4, 6);
    const auto u = random_table(4, 3, 7);
    const auto p = random_table(6, 5, 8);
    for (int id = 1; id <= 4; ++id) {
        const auto mode = ExperimentMode::from_id(id);
        const auto m = train_sales(data, u, p, mode, tiny_config());
        CHECK((m.user_table == u) == !mode.continue_user);
        CHECK((m.prod_table == p) == !mode.continue_prod);
        CHECK(m.mode_id == id);
    }
}

TEST_CASE("training is deterministic and lowers the loss") {
    const auto data = toy_dataset(5, 8);
    const auto u = random_table(5, 3, 1);
    const auto p = random_table(8, 5, 2);
    auto cfg = tiny_config();
    cfg.epochs = 40;
    const auto a = train_sales(data, u, p, ExperimentMode::from_id(4), cfg);
    const auto b = train_sales(data, u, p, ExperimentMode::from_id(4), cfg);
    CHECK(a.epoch_loss == b.epoch_loss);
    CHECK(a.fc1.weights == b.fc1.weights);
    CHECK(a.epoch_loss.back() < a.epoch_loss.front());
    for (Index uu = 0; uu < 5; ++uu) {
        for (Index pp = 0; pp < 8; ++pp) {
            CHECK(std::isfinite(predict_amount(a, uu, pp)));
        }
    }
}

TEST_CASE("coverage is checked") {
    SalesDataset d{{{0, 9, 1.0}}};
    CHECK_THROWS_AS(train_sales(d, random_table(2, 3, 1), random_table(3, 5, 1), ExperimentMode::from_id(1),
                                tiny_config()),
                    UserError);
    CHECK_THROWS_AS(train_sales(SalesDataset{}, random_table(2, 3, 1), random_table(3, 5, 1),
                                ExperimentMode::from_id(1), tiny_config()),
                    UserError);
}

TEST_CASE("log target maps back to currency") {
    auto cfg = tiny_config();
    cfg.log_target = true;
    auto m = init(random_table(2, 3, 1), random_table(3, 5, 2), ExperimentMode::from_id(1), cfg);
    CHECK(predict_amount(m, 1, 1) == doctest::Approx(std::expm1(forward(m, 1, 1))).epsilon(1e-15));
}

TEST_CASE("r2_score") {
    const std::vector<double> y{1, 2, 3};
    CHECK(r2_score(y, y) == 1.0);
    CHECK(r2_score(std::vector<double>{2, 2, 2}, y) == 0.0);
    CHECK(r2_score(std::vector<double>{1, 2, 4}, y) == 0.5);
    CHECK_THROWS(r2_score(std::vector<double>{1, 1}, std::vector<double>{3, 3}));
    CHECK_THROWS(r2_score(std::vector<double>{1}, std::vector<double>{3}));
    CHECK_THROWS(r2_score(std::vector<double>{1, 2}, y));
}

TEST_CASE("split is seeded and disjoint") {
    const auto d = toy_dataset(10, 10);
    const auto [train, test] = split(d, 0.1, 5);
    CHECK(test.rows.size() == static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(d.rows.size()))));
    CHECK(train.rows.size() + test.rows.size() == d.rows.size());
    std::set<std::pair<Index, Index>> seen;
    for (const auto& r : train.rows) {
        seen.insert({r.user, r.product});
    }
    for (const auto& r : test.rows) {
        CHECK(seen.insert({r.user, r.product}).second);
    }
    CHECK(split(d, 0.1, 5).second.rows == test.rows);
}

TEST_CASE("run_experiments reports four modes from identical starts") {
    const auto d = toy_dataset(6, 10);
    const auto u = random_table(6, 3, 3);
    const auto p = random_table(10, 5, 4);
    const auto res = run_experiments(d, u, p, tiny_config());
    REQUIRE(res.size() == 4);
    for (int i = 0; i < 4; ++i) {
        CHECK(res[static_cast<std::size_t>(i)].mode.id == i + 1);
        CHECK(std::isfinite(res[static_cast<std::size_t>(i)].r2));
    }
    // mode 1 is exactly a standalone train on the same split
    const auto [train, test] = split(d, 0.1, tiny_config().seed);
    const auto alone = train_sales(train, u, p, ExperimentMode::from_id(1), tiny_config());
    CHECK(alone.readout.weights == res[0].model.readout.weights);

    std::ostringstream csv;
    write_report_csv(csv, res);
    std::istringstream lines(csv.str());
    std::string line;
    std::getline(lines, line);
    CHECK(line == "mode,continue_user,continue_prod,r2");
    int rows = 0;
    while (std::getline(lines, line)) {
        ++rows;
    }
    CHECK(rows == 4);
}

TEST_CASE("dataset helpers") {
    const std::vector<SalesRow> raw{{0, 1, 2.0}, {1, 1, 1.0}, {0, 1, 3.0}};
    const auto agg = aggregate(raw);
    REQUIRE(agg.rows.size() == 2);
    CHECK(agg.rows[0] == SalesRow{0, 1, 5.0});
    agg.validate();
    SalesDataset dup{raw};
    CHECK_THROWS_AS(dup.validate(), UserError);
    SalesDataset neg{{{0, 0, -1.0}}};
    CHECK_THROWS_AS(neg.validate(), UserError);

    corpus::Vocabulary v;
    v.add_product("A", 1);
    v.add_user("u", 1);
    const std::vector<corpus::SpendRecord> recs{{"u", "A", 1.5}, {"u", "Z", 2.0}, {"x", "A", 1.0}};
    std::size_t dropped = 0;
    const auto d = from_records(recs, v, false, &dropped);
    CHECK(d.rows.size() == 1);
    CHECK(dropped == 2);
    CHECK_THROWS_AS(from_records(recs, v, true), UserError);
}

TEST_CASE("spend csv round trip and errors") {
    const std::vector<corpus::SpendRecord> recs{{"u1", "A", 12.5}, {"u2", "B", 0.1 + 0.2}};
    std::stringstream ss;
    write_spend_csv(ss, recs);
    const auto back = read_spend_csv(ss);
    REQUIRE(back.size() == 2);
    CHECK(back[1].amount == recs[1].amount);
    CHECK(back[0].user == "u1");

    std::istringstream bad_header("user,product,amount\n");
    CHECK_THROWS_AS(read_spend_csv(bad_header), ParseError);
    std::istringstream bad_amount("user_id,product,amount\nu,A,abc\n");
    try {
        read_spend_csv(bad_amount);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
}
