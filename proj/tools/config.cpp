#include "config.hpp"

#include "recpipe/error.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>

namespace recpipe::cli {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return "";
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

long long to_int(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    long long out = 0;
    try {
        out = std::stoll(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != v.size()) {
        throw UserError("config " + key + ": expected an integer, got '" + v + "'");
    }
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != v.size()) {
        throw UserError("config " + key + ": expected a number, got '" + v + "'");
    }
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") {
        return true;
    }
    if (v == "false" || v == "0" || v == "no") {
        return false;
    }
    throw UserError("config " + key + ": expected true or false, got '" + v + "'");
}

int to_int32(const std::string& key, const std::string& v) {
    const long long x = to_int(key, v);
    if (x < INT32_MIN || x > INT32_MAX) {
        throw UserError("config " + key + ": value out of range");
    }
    return static_cast<int>(x);
}

std::uint64_t to_count(const std::string& key, const std::string& v) {
    const long long x = to_int(key, v);
    if (x < 0) {
        throw UserError("config " + key + ": must be non-negative");
    }
    return static_cast<std::uint64_t>(x);
}

void check_source(const std::string& key, const std::string& v) {
    if (v != "p2e" && v != "prove" && v != "u2e") {
        throw UserError("config " + key + ": expected p2e, prove or u2e, got '" + v + "'");
    }
}

}  // namespace

void PipelineConfig::set(const std::string& key, const std::string& v) {
    using Setter = std::function<void(PipelineConfig&, const std::string&, const std::string&)>;
    static const std::map<std::string, Setter> table{
        {"seed", [](PipelineConfig& c, const auto& k, const auto& x) { c.apply_seed(to_count(k, x)); }},
        {"deterministic", [](PipelineConfig& c, const auto& k, const auto& x) { c.deterministic = to_bool(k, x); }},
        {"threads", [](PipelineConfig& c, const auto& k, const auto& x) { c.threads = to_int32(k, x); }},

        {"paths.output", [](PipelineConfig& c, const auto&, const auto& x) { c.output = x; }},
        {"paths.transactions", [](PipelineConfig& c, const auto&, const auto& x) { c.transactions = x; }},
        {"paths.spend", [](PipelineConfig& c, const auto&, const auto& x) { c.spend = x; }},

        {"corpus.format", [](PipelineConfig& c, const auto&, const auto& x) { c.format = x; }},
        {"corpus.min_count", [](PipelineConfig& c, const auto& k, const auto& x) { c.min_count = to_count(k, x); }},
        {"corpus.strict", [](PipelineConfig& c, const auto& k, const auto& x) { c.strict = to_bool(k, x); }},

        {"synth.n_groups", [](PipelineConfig& c, const auto& k, const auto& x) { c.synth.n_groups = to_int32(k, x); }},
        {"synth.products_per_group",
         [](PipelineConfig& c, const auto& k, const auto& x) { c.synth.products_per_group = to_int32(k, x); }},
        {"synth.n_users", [](PipelineConfig& c, const auto& k, const auto& x) { c.synth.n_users = to_int32(k, x); }},
        {"synth.n_baskets", [](PipelineConfig& c, const auto& k, const auto& x) { c.synth.n_baskets = to_int32(k, x); }},
        {"synth.min_basket_len",
         [](PipelineConfig& c, const auto& k, const auto& x) { c.synth.min_basket_len = to_int32(k, x); }},
        {"synth.max_basket_len",
         [](PipelineConfig& c, const auto& k, const auto& x) { c.synth.max_basket_len = to_int32(k, x); }},
        {"synth.within_group_prob",
         [](PipelineConfig& c, const auto& k, const auto& x) { c.synth.within_group_prob = to_double(k, x); }},
        {"synth.user_group_affinity",
         [](PipelineConfig& c, const auto& k, const auto& x) { c.synth.user_group_affinity = to_double(k, x); }},
        {"synth.anonymous_prob",
         [](PipelineConfig& c, const auto& k, const auto& x) { c.synth.anonymous_prob = to_double(k, x); }},
        {"synth.user_multiplier_max",
         [](PipelineConfig& c, const auto& k, const auto& x) { c.synth.user_multiplier_max = to_double(k, x); }},

        {"p2e.dim", [](PipelineConfig& c, const auto& k, const auto& x) { c.p2e.dim = to_int32(k, x); }},
        {"p2e.context_size", [](PipelineConfig& c, const auto& k, const auto& x) { c.p2e.context_size = to_int32(k, x); }},
        {"p2e.epochs", [](PipelineConfig& c, const auto& k, const auto& x) { c.p2e.epochs = to_int32(k, x); }},
        {"p2e.learning_rate",
         [](PipelineConfig& c, const auto& k, const auto& x) { c.p2e.learning_rate = to_double(k, x); }},
        {"p2e.initial_accumulator",
         [](PipelineConfig& c, const auto& k, const auto& x) { c.p2e.initial_accumulator = to_double(k, x); }},

        {"u2e.product_dim", [](PipelineConfig& c, const auto& k, const auto& x) { c.u2e.product_dim = to_int32(k, x); }},
        {"u2e.user_dim", [](PipelineConfig& c, const auto& k, const auto& x) { c.u2e.user_dim = to_int32(k, x); }},
        {"u2e.context_size", [](PipelineConfig& c, const auto& k, const auto& x) { c.u2e.context_size = to_int32(k, x); }},
        {"u2e.epochs", [](PipelineConfig& c, const auto& k, const auto& x) { c.u2e.epochs = to_int32(k, x); }},
        {"u2e.learning_rate",
         [](PipelineConfig& c, const auto& k, const auto& x) { c.u2e.learning_rate = to_double(k, x); }},
        {"u2e.initial_accumulator",
         [](PipelineConfig& c, const auto& k, const auto& x) { c.u2e.initial_accumulator = to_double(k, x); }},
        {"u2e.min_transactions",
         [](PipelineConfig& c, const auto& k, const auto& x) { c.min_transactions = to_count(k, x); }},

        {"prove.dim", [](PipelineConfig& c, const auto& k, const auto& x) { c.prove.dim = to_int32(k, x); }},
        {"prove.epochs", [](PipelineConfig& c, const auto& k, const auto& x) { c.prove.epochs = to_int32(k, x); }},
        {"prove.learning_rate",
         [](PipelineConfig& c, const auto& k, const auto& x) { c.prove.learning_rate = to_double(k, x); }},
        {"prove.initial_accumulator",
         [](PipelineConfig& c, const auto& k, const auto& x) { c.prove.initial_accumulator = to_double(k, x); }},
        {"prove.x_max", [](PipelineConfig& c, const auto& k, const auto& x) { c.prove.x_max = to_double(k, x); }},
        {"prove.alpha", [](PipelineConfig& c, const auto& k, const auto& x) { c.prove.alpha = to_double(k, x); }},

        {"concepts.k", [](PipelineConfig& c, const auto& k, const auto& x) { c.k = to_int32(k, x); }},
        {"concepts.source",
         [](PipelineConfig& c, const auto& k, const auto& x) {
             check_source(k, x);
             c.concept_source = x;
         }},
        {"concepts.cosine", [](PipelineConfig& c, const auto& k, const auto& x) { c.cosine = to_bool(k, x); }},
        {"concepts.max_iters", [](PipelineConfig& c, const auto& k, const auto& x) { c.max_iters = to_int32(k, x); }},

        {"basket.k", [](PipelineConfig& c, const auto& k, const auto& x) { c.basket_k = to_int32(k, x); }},
        {"basket.over_fetch", [](PipelineConfig& c, const auto& k, const auto& x) { c.over_fetch = to_bool(k, x); }},

        {"sales.user_dim", [](PipelineConfig& c, const auto& k, const auto& x) { c.sales.user_dim = to_int32(k, x); }},
        {"sales.prod_dim", [](PipelineConfig& c, const auto& k, const auto& x) { c.sales.prod_dim = to_int32(k, x); }},
        {"sales.hidden1", [](PipelineConfig& c, const auto& k, const auto& x) { c.sales.hidden1 = to_int32(k, x); }},
        {"sales.hidden2", [](PipelineConfig& c, const auto& k, const auto& x) { c.sales.hidden2 = to_int32(k, x); }},
        {"sales.epochs", [](PipelineConfig& c, const auto& k, const auto& x) { c.sales.epochs = to_int32(k, x); }},
        {"sales.batch_size", [](PipelineConfig& c, const auto& k, const auto& x) { c.sales.batch_size = to_int32(k, x); }},
        {"sales.learning_rate",
         [](PipelineConfig& c, const auto& k, const auto& x) { c.sales.learning_rate = to_double(k, x); }},
        {"sales.log_target", [](PipelineConfig& c, const auto& k, const auto& x) { c.sales.log_target = to_bool(k, x); }},
        {"sales.holdout_fraction",
         [](PipelineConfig& c, const auto& k, const auto& x) { c.sales.holdout_fraction = to_double(k, x); }},
        {"sales.prod_source",
         [](PipelineConfig& c, const auto& k, const auto& x) {
             check_source(k, x);
             c.prod_source = x;
         }},
    };
    auto it = table.find(key);
    if (it == table.end()) {
        throw UserError("unknown config key '" + key + "'");
    }
    it->second(*this, key, v);
}

void PipelineConfig::apply_seed(std::uint64_t s) {
    seed = s;
    synth.seed = s;
    p2e.seed = s;
    u2e.seed = s;
    prove.seed = s;
    sales.seed = s;
}

void PipelineConfig::validate() const {
    corpus::parse_format(format);
    if (threads < 1) {
        throw UserError("threads must be >= 1");
    }
    if (min_count < 1) {
        throw UserError("corpus.min_count must be >= 1");
    }
    if (k && *k < 1) {
        throw UserError("concepts.k must be >= 1");
    }
    if (max_iters < 1) {
        throw UserError("concepts.max_iters must be >= 1");
    }
    if (basket_k < 1) {
        throw UserError("basket.k must be >= 1");
    }
    synth.validate();
    p2e.validate();
    u2e.validate();
    prove.validate();
    sales.validate();
}

std::string PipelineConfig::transactions_path() const {
    return transactions.empty() ? (std::filesystem::path(output) / "transactions.jsonl").string() : transactions;
}

std::string PipelineConfig::spend_path() const {
    return spend.empty() ? (std::filesystem::path(output) / "spend.csv").string() : spend;
}

void load_config(std::istream& in, PipelineConfig& cfg) {
    std::string line;
    std::string section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) {
                throw ParseError(lineno, "malformed section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ParseError(lineno, "expected key = value");
        }
        const auto key = trim(line.substr(0, eq));
        auto value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
            value = value.substr(1, value.size() - 2);
        }
        if (key.empty()) {
            throw ParseError(lineno, "empty key");
        }
        try {
            cfg.set(section.empty() ? key : section + "." + key, value);
        } catch (const ParseError&) {
            throw;
        } catch (const UserError& e) {
            throw ParseError(lineno, e.what());
        }
    }
}

void load_config(const std::string& path, PipelineConfig& cfg) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config file " + path);
    }
    load_config(in, cfg);
}

}  // namespace recpipe::cli
