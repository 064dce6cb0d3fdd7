#pragma once

// Checkpoints are directories holding one binary matrix file per tensor plus
// a meta.json header.

#include "recpipe/concepts.hpp"
#include "recpipe/numkit.hpp"
#include "recpipe/p2e.hpp"
#include "recpipe/prove.hpp"
#include "recpipe/salesnet.hpp"
#include "recpipe/u2e.hpp"

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace recpipe::checkpoint {

void save(const std::string& dir, const p2e::P2EModel& model);
void save(const std::string& dir, const u2e::U2EModel& model);
void save(const std::string& dir, const prove::ProVeModel& model);
void save(const std::string& dir, const salesnet::SalesModel& model, std::uint64_t data_hash);
void save(const std::string& dir, const concepts::ConceptModel& model, const std::vector<std::string>& tokens);

p2e::P2EModel load_p2e(const std::string& dir);
u2e::U2EModel load_u2e(const std::string& dir);
prove::ProVeModel load_prove(const std::string& dir);
concepts::ConceptModel load_concepts(const std::string& dir);

/// First line "rows cols", then "<token> v1 ... vD" per row.
void write_embeddings(std::ostream& out, const std::vector<std::string>& tokens, const numkit::Matrix& m);
void save_embeddings(const std::string& path, const std::vector<std::string>& tokens, const numkit::Matrix& m);
std::pair<std::vector<std::string>, numkit::Matrix> read_embeddings(std::istream& in);
std::pair<std::vector<std::string>, numkit::Matrix> load_embeddings(const std::string& path);

/// "epoch,loss" rows.
void save_loss_csv(const std::string& path, const std::vector<double>& losses);

std::string hex64(std::uint64_t v);

}  // namespace recpipe::checkpoint
