// recpipe: command-line driver for the embedding / basket / sales pipeline.

#include "config.hpp"

#include "recpipe/basket.hpp"
#include "recpipe/checkpoint.hpp"
#include "recpipe/concepts.hpp"
#include "recpipe/corpus.hpp"
#include "recpipe/error.hpp"
#include "recpipe/p2e.hpp"
#include "recpipe/prove.hpp"
#include "recpipe/salesnet.hpp"
#include "recpipe/synthetic.hpp"
#include "recpipe/u2e.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace recpipe;

namespace {

struct Paths {
    fs::path root;
    fs::path corpus() const { return root / "corpus"; }
    std::string products() const { return (corpus() / "products.tsv").string(); }
    std::string users() const { return (corpus() / "users.tsv").string(); }
    std::string baskets() const { return (corpus() / "baskets.txt").string(); }
    std::string stage(const std::string& name) const { return (root / name).string(); }
};

std::ofstream open_out(const fs::path& p) {
    if (p.has_parent_path()) {
        fs::create_directories(p.parent_path());
    }
    std::ofstream out(p, std::ios::binary);
    if (!out) {
        throw IoError("cannot open " + p.string() + " for writing");
    }
    return out;
}

void require_file(const std::string& path, const std::string& hint) {
    if (!fs::exists(path)) {
        throw IoError("missing " + path + " (" + hint + ")");
    }
}

struct Corpus {
    corpus::Vocabulary vocab;
    std::vector<corpus::EncodedBasket> baskets;
};

corpus::Vocabulary load_vocab(const Paths& paths) {
    require_file(paths.products(), "run 'recpipe ingest' first");
    return corpus::load_vocabulary(paths.products(), paths.users());
}

Corpus load_corpus(const Paths& paths) {
    Corpus c{load_vocab(paths), {}};
    require_file(paths.baskets(), "run 'recpipe ingest' first");
    c.baskets = corpus::load_encoded(paths.baskets());
    return c;
}

void check_vocab(std::uint64_t model_hash, const corpus::Vocabulary& vocab, const std::string& what) {
    if (model_hash != vocab.fingerprint()) {
        throw UserError(what + " was trained on a different vocabulary; retrain it after ingest");
    }
}

numkit::Matrix product_vectors(const Paths& paths, const corpus::Vocabulary& vocab, const std::string& source) {
    if (source == "p2e") {
        auto m = checkpoint::load_p2e(paths.stage("p2e"));
        check_vocab(m.vocab_fingerprint, vocab, "p2e model");
        return m.input_embeddings;
    }
    if (source == "prove") {
        auto m = checkpoint::load_prove(paths.stage("prove"));
        check_vocab(m.vocab_fingerprint, vocab, "prove model");
        return prove::final_embeddings(m);
    }
    if (source == "u2e") {
        auto m = checkpoint::load_u2e(paths.stage("u2e"));
        check_vocab(m.vocab_fingerprint, vocab, "u2e model");
        return m.product_embeddings;
    }
    throw UserError("unknown embedding source '" + source + "'");
}

auto epoch_logger(const std::string& stage, int epochs) {
    return [stage, epochs](int epoch, double loss) {
        std::clog << stage << " epoch " << epoch << "/" << epochs << " loss " << numkit::format_double(loss) << '\n';
    };
}

void write_json(const fs::path& p, const json& j) {
    auto out = open_out(p);
    out << j.dump(2) << '\n';
}

// ---- subcommands ----

void cmd_synth(const cli::PipelineConfig& cfg, const std::string& out_dir) {
    const fs::path dir = out_dir.empty() ? fs::path(cfg.output) : fs::path(out_dir);
    const auto syn = corpus::generate_synthetic(cfg.synth);
    {
        auto out = open_out(dir / "transactions.jsonl");
        corpus::write_jsonl(out, syn.baskets);
    }
    {
        auto out = open_out(dir / "oracle_products.csv");
        out << "product,group\n";
        for (const auto& [p, g] : syn.product_group) {
            out << p << ',' << g << '\n';
        }
    }
    {
        auto out = open_out(dir / "oracle_users.csv");
        out << "user,group,multiplier\n";
        for (const auto& [u, g] : syn.user_group) {
            out << u << ',' << g << ',' << numkit::format_double(syn.user_multiplier.at(u)) << '\n';
        }
    }
    const auto spend = corpus::synthetic_spend(syn);
    {
        auto out = open_out(dir / "spend.csv");
        salesnet::write_spend_csv(out, spend);
    }
    std::cout << "baskets " << syn.baskets.size() << "\nproducts " << syn.product_group.size() << "\nusers "
              << syn.user_group.size() << "\nspend_rows " << spend.size() << '\n';
}

void cmd_ingest(const cli::PipelineConfig& cfg, const Paths& paths) {
    const auto input = cfg.transactions_path();
    const auto raw = corpus::parse_transactions(input, corpus::parse_format(cfg.format));
    const auto trainable = corpus::filter_trainable(raw);
    const auto vocab = corpus::build_vocabulary(trainable, cfg.min_count);
    corpus::EncodeStats stats;
    const auto encoded = corpus::encode_baskets(trainable, vocab, cfg.strict, &stats);
    std::size_t identified = 0;
    for (const auto& b : encoded) {
        identified += b.user.has_value();
    }
    fs::create_directories(paths.corpus());
    corpus::save_vocabulary(paths.products(), paths.users(), vocab);
    corpus::save_encoded(paths.baskets(), encoded);
    const json j{{"baskets_read", raw.size()},
                 {"singletons_dropped", raw.size() - trainable.size()},
                 {"oov_items_dropped", stats.dropped_items},
                 {"baskets_dropped_after_oov", stats.dropped_baskets},
                 {"baskets", encoded.size()},
                 {"identified_baskets", identified},
                 {"products", vocab.product_count()},
                 {"users", vocab.user_count()}};
    write_json(paths.corpus() / "stats.json", j);
    for (const auto& [k, v] : j.items()) {
        std::cout << k << ' ' << v << '\n';
    }
}

void cmd_train(const cli::PipelineConfig& cfg, const Paths& paths, const std::string& stage) {
    const auto c = load_corpus(paths);
    const auto dir = fs::path(paths.stage(stage));
    if (stage == "p2e") {
        auto m = p2e::train(c.baskets, c.vocab, cfg.p2e, epoch_logger("p2e", cfg.p2e.epochs));
        checkpoint::save(dir.string(), m);
        checkpoint::save_embeddings((dir / "embeddings.txt").string(), c.vocab.product_tokens(), m.input_embeddings);
        checkpoint::save_loss_csv((dir / "loss.csv").string(), m.epoch_loss);
    } else if (stage == "prove") {
        const int threads = cfg.deterministic ? 1 : cfg.threads;
        const auto table = prove::build_cooccurrence(c.baskets, c.vocab.product_count(), threads);
        {
            auto out = open_out(dir / "cooccurrence.txt");
            prove::save_table(out, table);
        }
        auto m = prove::train_prove(table, cfg.prove, epoch_logger("prove", cfg.prove.epochs));
        m.vocab_fingerprint = c.vocab.fingerprint();
        checkpoint::save(dir.string(), m);
        checkpoint::save_embeddings((dir / "embeddings.txt").string(), c.vocab.product_tokens(),
                                    prove::final_embeddings(m));
        checkpoint::save_loss_csv((dir / "loss.csv").string(), m.epoch_loss);
    } else if (stage == "u2e") {
        auto m = u2e::train(c.baskets, c.vocab, cfg.u2e, epoch_logger("u2e", cfg.u2e.epochs));
        checkpoint::save(dir.string(), m);
        checkpoint::save_embeddings((dir / "embeddings.txt").string(), c.vocab.product_tokens(),
                                    m.product_embeddings);
        checkpoint::save_embeddings((dir / "users.txt").string(), c.vocab.user_tokens(), m.user_embeddings);
        checkpoint::save_loss_csv((dir / "loss.csv").string(), m.epoch_loss);
        const auto passed = u2e::optimized_users(m, cfg.min_transactions);
        const double frac = m.user_count() ? static_cast<double>(passed.size()) / static_cast<double>(m.user_count())
                                           : 0.0;
        auto out = open_out(dir / "optimized_users.txt");
        for (auto u : passed) {
            out << c.vocab.user_token(u) << '\n';
        }
        std::cout << "optimized_users " << passed.size() << " of " << m.user_count() << " ("
                  << numkit::format_double(frac) << ") at min_transactions " << cfg.min_transactions << '\n';
    } else {
        throw UserError("unknown stage '" + stage + "' (expected p2e, prove or u2e)");
    }
    std::cout << "wrote " << dir.string() << '\n';
}

void cmd_cluster(const cli::PipelineConfig& cfg, const Paths& paths) {
    if (!cfg.k) {
        throw UserError("cluster needs --k (or concepts.k in the config)");
    }
    const auto vocab = load_vocab(paths);
    const auto x = product_vectors(paths, vocab, cfg.concept_source);
    const auto model = concepts::kmeans_fit(x, {*cfg.k, cfg.seed, cfg.max_iters, cfg.cosine});
    const auto dir = fs::path(paths.stage("concepts"));
    checkpoint::save(dir.string(), model, vocab.product_tokens());
    auto out = open_out(dir / "source.txt");
    out << cfg.concept_source << '\n';
    std::cout << "k " << model.k << "\ninertia " << numkit::format_double(model.inertia) << "\niterations "
              << model.iterations_run << '\n';
}

std::string concept_source(const Paths& paths) {
    std::ifstream in((fs::path(paths.stage("concepts")) / "source.txt").string());
    if (!in) {
        throw IoError("missing concept model (run 'recpipe cluster' first)");
    }
    std::string s;
    in >> s;
    return s;
}

void cmd_basket(const cli::PipelineConfig& cfg, const Paths& paths, const std::string& product,
                const std::string& out_path) {
    const auto vocab = load_vocab(paths);
    const auto source = concept_source(paths);
    const auto concepts = checkpoint::load_concepts(paths.stage("concepts"));
    basket::EmbeddingSpace space(product_vectors(paths, vocab, source), vocab.product_tokens());
    const auto q = space.find(product);
    if (!q) {
        throw UserError("unknown product '" + product + "'");
    }
    const auto k = static_cast<std::size_t>(cfg.basket_k);
    const auto result = basket::market_basket(space, concepts, *q, k, cfg.over_fetch);
    json items = json::array();
    for (const auto& n : result) {
        items.push_back({{"product", space.token(n.product)},
                         {"similarity", n.similarity},
                         {"concept", concepts.assignment.at(n.product)}});
    }
    const json j{{"query", product}, {"k", k}, {"basket", items}};
    if (out_path.empty()) {
        std::cout << j.dump(2) << '\n';
    } else {
        write_json(out_path, j);
    }
}

void cmd_sales(const cli::PipelineConfig& cfg, const Paths& paths, const std::string& mode) {
    const auto vocab = load_vocab(paths);
    const auto spend_path = cfg.spend_path();
    std::size_t dropped = 0;
    const auto dataset = salesnet::from_records(salesnet::read_spend_csv(spend_path), vocab, cfg.strict, &dropped);
    if (dropped > 0) {
        std::clog << "warning: dropped " << dropped << " spend row(s) with tokens outside the vocabulary\n";
    }
    const auto u2e_model = checkpoint::load_u2e(paths.stage("u2e"));
    check_vocab(u2e_model.vocab_fingerprint, vocab, "u2e model");
    const auto prod = product_vectors(paths, vocab, cfg.prod_source);
    const auto dir = fs::path(paths.stage("sales"));

    std::vector<salesnet::ExperimentResult> results;
    if (mode == "all") {
        results = salesnet::run_experiments(dataset, u2e_model.user_embeddings, prod, cfg.sales);
    } else {
        int id = 0;
        try {
            std::size_t used = 0;
            id = std::stoi(mode, &used);
            if (used != mode.size()) {
                id = 0;
            }
        } catch (const std::exception&) {
            id = 0;
        }
        const auto m = salesnet::ExperimentMode::from_id(id);
        dataset.validate();
        const auto [train, test] = salesnet::split(dataset, cfg.sales.holdout_fraction, cfg.sales.seed);
        auto model = salesnet::train_sales(train, u2e_model.user_embeddings, prod, m, cfg.sales);
        const double r2 = salesnet::evaluate_r2(model, test.rows);
        const double last = model.epoch_loss.back();
        results.push_back({m, r2, last, std::move(model)});
    }
    for (const auto& r : results) {
        const auto sub = dir / ("mode" + std::to_string(r.mode.id));
        checkpoint::save(sub.string(), r.model, dataset.fingerprint());
        checkpoint::save_loss_csv((sub / "loss.csv").string(), r.model.epoch_loss);
    }
    {
        auto out = open_out(dir / "report.csv");
        salesnet::write_report_csv(out, results);
    }
    {
        auto out = open_out(dir / "report.txt");
        salesnet::write_report_text(out, results);
    }
    salesnet::write_report_text(std::cout, results);
}

void cmd_export(const Paths& paths, const std::string& source, const std::string& out_path) {
    const auto vocab = load_vocab(paths);
    if (source == "users") {
        const auto m = checkpoint::load_u2e(paths.stage("u2e"));
        check_vocab(m.vocab_fingerprint, vocab, "u2e model");
        checkpoint::save_embeddings(out_path, vocab.user_tokens(), m.user_embeddings);
    } else if (source == "concepts") {
        const auto m = checkpoint::load_concepts(paths.stage("concepts"));
        auto out = open_out(out_path);
        out << "product,concept\n";
        for (std::size_t i = 0; i < m.assignment.size(); ++i) {
            out << vocab.product_token(static_cast<corpus::Index>(i)) << ',' << m.assignment[i] << '\n';
        }
    } else {
        checkpoint::save_embeddings(out_path, vocab.product_tokens(), product_vectors(paths, vocab, source));
    }
    std::cout << "wrote " << out_path << '\n';
}

int run(int argc, char** argv) {
    CLI::App app{"Product/user embeddings, market baskets and spend prediction from transaction data"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    bool deterministic = false;
    std::optional<int> threads;
    std::string workdir;
    app.add_option("--config", config_path, "Pipeline config file")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "Global seed for every stage");
    app.add_flag("--deterministic", deterministic, "Single-threaded, bit-reproducible run");
    app.add_option("--threads", threads, "Worker threads for co-occurrence counting")->check(CLI::PositiveNumber);
    app.add_option("--workdir", workdir, "Artifact directory (overrides paths.output)");

    auto* synth = app.add_subcommand("synth", "Generate a planted-group synthetic corpus and oracles");
    std::string synth_out;
    std::optional<int> groups, per_group, users, n_baskets;
    std::optional<double> within;
    synth->add_option("--out", synth_out, "Output directory (default: workdir)");
    synth->add_option("--groups", groups, "Number of planted groups");
    synth->add_option("--per-group", per_group, "Products per group");
    synth->add_option("--users", users, "Number of users");
    synth->add_option("--baskets", n_baskets, "Number of baskets");
    synth->add_option("--within", within, "Probability a slot stays in the basket's group");

    auto* ingest = app.add_subcommand("ingest", "Parse transactions, build the vocabulary, encode baskets");
    std::string input, format;
    std::optional<std::uint64_t> min_count;
    bool strict = false;
    ingest->add_option("--input", input, "Transactions file (default: paths.transactions)");
    ingest->add_option("--format", format, "jsonl or csv")->check(CLI::IsMember({"jsonl", "csv"}));
    ingest->add_option("--min-count", min_count, "Minimum product occurrences")->check(CLI::PositiveNumber);
    ingest->add_flag("--strict", strict, "Reject out-of-vocabulary tokens instead of dropping them");

    auto* train = app.add_subcommand("train", "Train an embedding stage");
    std::string stage;
    train->add_option("--stage", stage, "p2e, prove or u2e")->required()->check(CLI::IsMember({"p2e", "prove", "u2e"}));
    std::optional<int> epochs;
    train->add_option("--epochs", epochs, "Override the stage's epoch count")->check(CLI::PositiveNumber);

    auto* cluster = app.add_subcommand("cluster", "Fit k-means concept vectors over product embeddings");
    std::optional<int> k;
    std::string source;
    bool cosine = false;
    cluster->add_option("--k", k, "Number of concepts")->check(CLI::PositiveNumber);
    cluster->add_option("--source", source, "Embeddings to cluster")->check(CLI::IsMember({"p2e", "prove", "u2e"}));
    cluster->add_flag("--cosine", cosine, "Cluster unit-normalised embeddings");

    auto* bask = app.add_subcommand("basket", "Complementary products for one query product");
    std::string product, basket_out;
    std::optional<int> basket_k;
    bool over_fetch = false;
    bask->add_option("product", product, "Query product token")->required();
    bask->add_option("--k", basket_k, "Neighbours to draw")->check(CLI::PositiveNumber);
    bask->add_flag("--over-fetch", over_fetch, "Keep scanning until k products survive");
    bask->add_option("--out", basket_out, "Write the JSON here instead of stdout");

    auto* sales = app.add_subcommand("sales", "Spend regression under the four embedding freeze modes");
    std::string mode = "all";
    std::string spend;
    std::string prod_source;
    sales->add_option("--mode", mode, "1, 2, 3, 4 or all")->check(CLI::IsMember({"1", "2", "3", "4", "all"}));
    sales->add_option("--spend", spend, "Spend CSV (default: paths.spend)");
    sales->add_option("--prod-source", prod_source, "Initial product table")
        ->check(CLI::IsMember({"p2e", "prove", "u2e"}));

    auto* exp = app.add_subcommand("export", "Write a trained table as text");
    std::string export_source, export_out;
    exp->add_option("--source", export_source, "p2e, prove, u2e, users or concepts")
        ->required()
        ->check(CLI::IsMember({"p2e", "prove", "u2e", "users", "concepts"}));
    exp->add_option("--out", export_out, "Output file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    cli::PipelineConfig cfg;
    if (!config_path.empty()) {
        cli::load_config(config_path, cfg);
    }
    if (seed) {
        cfg.apply_seed(*seed);
    }
    if (deterministic) {
        cfg.deterministic = true;
    }
    if (threads) {
        cfg.threads = *threads;
    }
    if (!workdir.empty()) {
        cfg.output = workdir;
    }
    if (groups) cfg.synth.n_groups = *groups;
    if (per_group) cfg.synth.products_per_group = *per_group;
    if (users) cfg.synth.n_users = *users;
    if (n_baskets) cfg.synth.n_baskets = *n_baskets;
    if (within) cfg.synth.within_group_prob = *within;
    if (!input.empty()) cfg.transactions = input;
    if (!format.empty()) cfg.format = format;
    if (min_count) cfg.min_count = *min_count;
    if (strict) cfg.strict = true;
    if (epochs) cfg.p2e.epochs = cfg.u2e.epochs = cfg.prove.epochs = *epochs;
    if (k) cfg.k = *k;
    if (!source.empty()) cfg.concept_source = source;
    if (cosine) cfg.cosine = true;
    if (basket_k) cfg.basket_k = *basket_k;
    if (over_fetch) cfg.over_fetch = true;
    if (!spend.empty()) cfg.spend = spend;
    if (!prod_source.empty()) cfg.prod_source = prod_source;
    cfg.validate();

    const Paths paths{cfg.output};
    if (synth->parsed()) {
        cmd_synth(cfg, synth_out);
    } else if (ingest->parsed()) {
        cmd_ingest(cfg, paths);
    } else if (train->parsed()) {
        cmd_train(cfg, paths, stage);
    } else if (cluster->parsed()) {
        cmd_cluster(cfg, paths);
    } else if (bask->parsed()) {
        cmd_basket(cfg, paths, product, basket_out);
    } else if (sales->parsed()) {
        cmd_sales(cfg, paths, mode);
    } else if (exp->parsed()) {
        cmd_export(paths, export_source, export_out);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const UserError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::out_of_range& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 1;
    }
}
