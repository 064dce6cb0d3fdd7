#pragma once

// Pipeline configuration: a small TOML-style file of [section] headers and
// key = value lines, overridable from the command line.

#include "recpipe/p2e.hpp"
#include "recpipe/prove.hpp"
#include "recpipe/salesnet.hpp"
#include "recpipe/synthetic.hpp"
#include "recpipe/u2e.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace recpipe::cli {

struct PipelineConfig {
    // [paths]
    std::string output = "recpipe-work";
    std::string transactions;  // defaults to <output>/transactions.jsonl
    std::string spend;         // defaults to <output>/spend.csv

    // [corpus]
    std::string format = "jsonl";
    std::uint64_t min_count = 1;
    bool strict = false;

    corpus::SyntheticSpec synth;
    p2e::P2EConfig p2e;
    u2e::U2EConfig u2e;
    std::uint64_t min_transactions = 5;
    prove::ProVeConfig prove;

    // [concepts]
    std::optional<int> k;
    std::string concept_source = "p2e";
    bool cosine = false;
    int max_iters = 100;

    // [basket]
    int basket_k = 5;
    bool over_fetch = false;

    salesnet::SalesConfig sales;
    std::string prod_source = "p2e";

    std::uint64_t seed = 1;
    bool deterministic = false;
    int threads = 1;

    /// Sets one "section.key" entry. Top-level keys have no section prefix.
    void set(const std::string& key, const std::string& value);
    /// Pushes the global seed into every stage.
    void apply_seed(std::uint64_t s);
    void validate() const;

    std::string transactions_path() const;
    std::string spend_path() const;
};

/// Reads a config file; errors name the offending line.
void load_config(std::istream& in, PipelineConfig& cfg);
void load_config(const std::string& path, PipelineConfig& cfg);

}  // namespace recpipe::cli
