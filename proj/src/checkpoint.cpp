#include "recpipe/checkpoint.hpp"

#include "recpipe/error.hpp"

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace recpipe::checkpoint {

namespace fs = std::filesystem;
using json = nlohmann::json;
using numkit::Matrix;

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

namespace {

std::uint64_t parse_hex64(const std::string& s) {
    return std::stoull(s, nullptr, 16);
}

std::string path(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

void prepare(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create checkpoint directory " + dir + ": " + ec.message());
    }
}

void write_meta(const std::string& dir, const json& meta) {
    std::ofstream out(path(dir, "meta.json"));
    if (!out) {
        throw IoError("cannot write " + path(dir, "meta.json"));
    }
    out << meta.dump(2) << '\n';
}

json read_meta(const std::string& dir, const std::string& kind) {
    std::ifstream in(path(dir, "meta.json"));
    if (!in) {
        throw IoError("no checkpoint at " + dir);
    }
    json meta;
    try {
        meta = json::parse(in);
    } catch (const json::parse_error& e) {
        throw IoError("corrupt meta.json in " + dir + ": " + e.what());
    }
    if (meta.value("kind", "") != kind) {
        throw IoError("checkpoint at " + dir + " is not a " + kind + " checkpoint");
    }
    return meta;
}

Matrix column(const std::vector<double>& v) {
    Matrix m(v.size(), 1);
    std::copy(v.begin(), v.end(), m.data().begin());
    return m;
}

std::vector<double> flat(const Matrix& m) {
    return {m.data().begin(), m.data().end()};
}

void save_tensor(const std::string& dir, const std::string& name, const Matrix& m) {
    numkit::save_binary(path(dir, name + ".bin"), m);
}

Matrix load_tensor(const std::string& dir, const std::string& name) {
    return numkit::load_binary(path(dir, name + ".bin"));
}

}  // namespace

void save(const std::string& dir, const p2e::P2EModel& model) {
    prepare(dir);
    const auto& c = model.config;
    write_meta(dir, json{{"kind", "p2e"},
                         {"P", model.product_count()},
                         {"D", c.dim},
                         {"c", c.context_size},
                         {"epochs", c.epochs},
                         {"seed", c.seed},
                         {"learning_rate", c.learning_rate},
                         {"initial_accumulator", c.initial_accumulator},
                         {"vocab_hash", hex64(model.vocab_fingerprint)}});
    save_tensor(dir, "input_embeddings", model.input_embeddings);
    save_tensor(dir, "output_weights", model.output_weights);
    save_tensor(dir, "output_bias", column(model.output_bias));
}

p2e::P2EModel load_p2e(const std::string& dir) {
    const auto meta = read_meta(dir, "p2e");
    p2e::P2EModel m;
    m.config.dim = meta.at("D");
    m.config.context_size = meta.at("c");
    m.config.epochs = meta.at("epochs");
    m.config.seed = meta.at("seed");
    m.config.learning_rate = meta.at("learning_rate");
    m.config.initial_accumulator = meta.at("initial_accumulator");
    m.vocab_fingerprint = parse_hex64(meta.at("vocab_hash"));
    m.input_embeddings = load_tensor(dir, "input_embeddings");
    m.output_weights = load_tensor(dir, "output_weights");
    m.output_bias = flat(load_tensor(dir, "output_bias"));
    return m;
}

void save(const std::string& dir, const u2e::U2EModel& model) {
    prepare(dir);
    const auto& c = model.config;
    write_meta(dir, json{{"kind", "u2e"},
                         {"P", model.product_count()},
                         {"U", model.user_count()},
                         {"D_p", c.product_dim},
                         {"D_u", c.user_dim},
                         {"c", c.context_size},
                         {"epochs", c.epochs},
                         {"seed", c.seed},
                         {"learning_rate", c.learning_rate},
                         {"initial_accumulator", c.initial_accumulator},
                         {"anonymous_skipped", model.anonymous_skipped},
                         {"vocab_hash", hex64(model.vocab_fingerprint)}});
    save_tensor(dir, "product_embeddings", model.product_embeddings);
    save_tensor(dir, "user_embeddings", model.user_embeddings);
    save_tensor(dir, "output_weights", model.output_weights);
    save_tensor(dir, "output_bias", column(model.output_bias));
    std::ofstream counters(path(dir, "user_counters.csv"));
    counters << "user,updates,transactions\n";
    for (std::size_t u = 0; u < model.user_count(); ++u) {
        counters << u << ',' << model.user_updates[u] << ',' << model.user_transactions[u] << '\n';
    }
}

u2e::U2EModel load_u2e(const std::string& dir) {
    const auto meta = read_meta(dir, "u2e");
    u2e::U2EModel m;
    m.config.product_dim = meta.at("D_p");
    m.config.user_dim = meta.at("D_u");
    m.config.context_size = meta.at("c");
    m.config.epochs = meta.at("epochs");
    m.config.seed = meta.at("seed");
    m.config.learning_rate = meta.at("learning_rate");
    m.config.initial_accumulator = meta.at("initial_accumulator");
    m.anonymous_skipped = meta.at("anonymous_skipped");
    m.vocab_fingerprint = parse_hex64(meta.at("vocab_hash"));
    m.product_embeddings = load_tensor(dir, "product_embeddings");
    m.user_embeddings = load_tensor(dir, "user_embeddings");
    m.output_weights = load_tensor(dir, "output_weights");
    m.output_bias = flat(load_tensor(dir, "output_bias"));
    std::ifstream counters(path(dir, "user_counters.csv"));
    std::string line;
    std::getline(counters, line);
    while (std::getline(counters, line)) {
        unsigned long long u = 0;
        unsigned long long updates = 0;
        unsigned long long tx = 0;
        if (std::sscanf(line.c_str(), "%llu,%llu,%llu", &u, &updates, &tx) != 3) {
            throw IoError("corrupt user_counters.csv in " + dir);
        }
        m.user_updates.push_back(updates);
        m.user_transactions.push_back(tx);
    }
    if (m.user_updates.size() != m.user_count()) {
        throw IoError("user_counters.csv does not match the user table in " + dir);
    }
    return m;
}

void save(const std::string& dir, const prove::ProVeModel& model) {
    prepare(dir);
    const auto& c = model.config;
    write_meta(dir, json{{"kind", "prove"},
                         {"P", model.product_count()},
                         {"D", c.dim},
                         {"epochs", c.epochs},
                         {"seed", c.seed},
                         {"learning_rate", c.learning_rate},
                         {"initial_accumulator", c.initial_accumulator},
                         {"x_max", c.x_max},
                         {"alpha", c.alpha},
                         {"vocab_hash", hex64(model.vocab_fingerprint)}});
    save_tensor(dir, "w", model.w);
    save_tensor(dir, "w_context", model.w_context);
    save_tensor(dir, "bias", column(model.bias));
    save_tensor(dir, "bias_context", column(model.bias_context));
}

prove::ProVeModel load_prove(const std::string& dir) {
    const auto meta = read_meta(dir, "prove");
    prove::ProVeModel m;
    m.config.dim = meta.at("D");
    m.config.epochs = meta.at("epochs");
    m.config.seed = meta.at("seed");
    m.config.learning_rate = meta.at("learning_rate");
    m.config.initial_accumulator = meta.at("initial_accumulator");
    m.config.x_max = meta.at("x_max");
    m.config.alpha = meta.at("alpha");
    m.vocab_fingerprint = parse_hex64(meta.at("vocab_hash"));
    m.w = load_tensor(dir, "w");
    m.w_context = load_tensor(dir, "w_context");
    m.bias = flat(load_tensor(dir, "bias"));
    m.bias_context = flat(load_tensor(dir, "bias_context"));
    return m;
}

void save(const std::string& dir, const salesnet::SalesModel& model, std::uint64_t data_hash) {
    prepare(dir);
    const auto& c = model.config;
    write_meta(dir, json{{"kind", "salesnet"},
                         {"mode", model.mode_id},
                         {"freeze_user", model.freeze_user},
                         {"freeze_prod", model.freeze_prod},
                         {"user_dim", c.user_dim},
                         {"prod_dim", c.prod_dim},
                         {"hidden1", c.hidden1},
                         {"hidden2", c.hidden2},
                         {"epochs", c.epochs},
                         {"batch_size", c.batch_size},
                         {"learning_rate", c.learning_rate},
                         {"seed", c.seed},
                         {"log_target", c.log_target},
                         {"data_hash", hex64(data_hash)}});
    save_tensor(dir, "user_table", model.user_table);
    save_tensor(dir, "prod_table", model.prod_table);
    save_tensor(dir, "fc1_weights", model.fc1.weights);
    save_tensor(dir, "fc1_bias", column(model.fc1.bias));
    save_tensor(dir, "fc2_weights", model.fc2.weights);
    save_tensor(dir, "fc2_bias", column(model.fc2.bias));
    save_tensor(dir, "readout_weights", model.readout.weights);
    save_tensor(dir, "readout_bias", column(model.readout.bias));
}

void save(const std::string& dir, const concepts::ConceptModel& model, const std::vector<std::string>& tokens) {
    prepare(dir);
    write_meta(dir, json{{"kind", "concepts"},
                         {"k", model.k},
                         {"seed", model.seed},
                         {"iterations_run", model.iterations_run},
                         {"inertia", model.inertia},
                         {"cosine", model.cosine}});
    save_tensor(dir, "centroids", model.centroids);
    std::ofstream out(path(dir, "assignment.csv"));
    out << "product,cluster\n";
    for (std::size_t i = 0; i < model.assignment.size(); ++i) {
        out << (tokens.empty() ? std::to_string(i) : tokens.at(i)) << ',' << model.assignment[i] << '\n';
    }
}

concepts::ConceptModel load_concepts(const std::string& dir) {
    const auto meta = read_meta(dir, "concepts");
    concepts::ConceptModel m;
    m.k = meta.at("k");
    m.seed = meta.at("seed");
    m.iterations_run = meta.at("iterations_run");
    m.inertia = meta.at("inertia");
    m.cosine = meta.at("cosine");
    m.centroids = load_tensor(dir, "centroids");
    std::ifstream in(path(dir, "assignment.csv"));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        const auto comma = line.rfind(',');
        if (comma == std::string::npos) {
            throw IoError("corrupt assignment.csv in " + dir);
        }
        m.assignment.push_back(std::stoi(line.substr(comma + 1)));
    }
    return m;
}

void write_embeddings(std::ostream& out, const std::vector<std::string>& tokens, const Matrix& m) {
    if (tokens.size() != m.rows()) {
        throw std::invalid_argument("write_embeddings: token count does not match row count");
    }
    out << m.rows() << ' ' << m.cols() << '\n';
    for (std::size_t r = 0; r < m.rows(); ++r) {
        out << tokens[r];
        for (double v : m.row(r)) {
            out << ' ' << numkit::format_double(v);
        }
        out << '\n';
    }
}

void save_embeddings(const std::string& file, const std::vector<std::string>& tokens, const Matrix& m) {
    std::ofstream out(file);
    if (!out) {
        throw IoError("cannot open " + file + " for writing");
    }
    write_embeddings(out, tokens, m);
}

std::pair<std::vector<std::string>, Matrix> read_embeddings(std::istream& in) {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::string line;
    if (!std::getline(in, line) || !(std::istringstream(line) >> rows >> cols)) {
        throw ParseError(1, "expected 'rows cols' header");
    }
    std::vector<std::string> tokens;
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        if (!std::getline(in, line)) {
            throw ParseError(r + 2, "missing embedding row");
        }
        std::istringstream fields(line);
        std::string token;
        fields >> token;
        tokens.push_back(token);
        for (auto& v : m.row(r)) {
            std::string num;
            if (!(fields >> num)) {
                throw ParseError(r + 2, "too few values");
            }
            v = std::strtod(num.c_str(), nullptr);
        }
    }
    return {std::move(tokens), std::move(m)};
}

std::pair<std::vector<std::string>, Matrix> load_embeddings(const std::string& file) {
    std::ifstream in(file);
    if (!in) {
        throw IoError("cannot open " + file);
    }
    return read_embeddings(in);
}

void save_loss_csv(const std::string& file, const std::vector<double>& losses) {
    std::ofstream out(file);
    if (!out) {
        throw IoError("cannot open " + file + " for writing");
    }
    out << "epoch,loss\n";
    for (std::size_t e = 0; e < losses.size(); ++e) {
        out << e + 1 << ',' << numkit::format_double(losses[e]) << '\n';
    }
}

}  // namespace recpipe::checkpoint
