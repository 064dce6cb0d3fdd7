#include "recpipe/basket.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace recpipe::basket {

EmbeddingSpace::EmbeddingSpace(Matrix vectors, std::vector<std::string> tokens)
    : vectors_(std::move(vectors)), tokens_(std::move(tokens)) {
    if (!tokens_.empty() && tokens_.size() != vectors_.rows()) {
        throw std::invalid_argument("embedding space: token count does not match row count");
    }
    norms_.reserve(vectors_.rows());
    for (std::size_t r = 0; r < vectors_.rows(); ++r) {
        norms_.push_back(numkit::l2_norm(vectors_.row(r)));
    }
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        index_.emplace(tokens_[i], static_cast<Index>(i));
    }
}

std::span<const double> EmbeddingSpace::row(Index id) const {
    if (id >= size()) {
        throw std::out_of_range("embedding space: product id " + std::to_string(id) + " out of range");
    }
    return vectors_.row(id);
}

std::string EmbeddingSpace::token(Index id) const {
    if (id >= size()) {
        throw std::out_of_range("embedding space: product id out of range");
    }
    return tokens_.empty() ? std::to_string(id) : tokens_[id];
}

std::optional<Index> EmbeddingSpace::find(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

namespace {

double clamp_unit(double v) {
    return std::clamp(v, -1.0, 1.0);
}

// Shared by the direct and cached-norm paths so both produce identical bits.
double cosine_from_parts(double dot, double norm_a, double norm_b) {
    return clamp_unit(dot / (norm_a * norm_b));
}

bool ranks_before(const Neighbor& a, const Neighbor& b) {
    return a.similarity != b.similarity ? a.similarity > b.similarity : a.product < b.product;
}

std::vector<Neighbor> ranked(const EmbeddingSpace& space, std::span<const double> query, double query_norm,
                             std::span<const Index> exclude) {
    std::vector<Neighbor> all;
    all.reserve(space.size());
    for (std::size_t r = 0; r < space.size(); ++r) {
        const auto id = static_cast<Index>(r);
        if (space.is_zero(id) || std::find(exclude.begin(), exclude.end(), id) != exclude.end()) {
            continue;
        }
        all.push_back({id, cosine_from_parts(numkit::dot(query, space.row(id)), query_norm, space.norm(id))});
    }
    std::sort(all.begin(), all.end(), ranks_before);
    return all;
}

}  // namespace

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("cosine_similarity: dimension mismatch");
    }
    const double na = numkit::l2_norm(a);
    const double nb = numkit::l2_norm(b);
    if (na == 0.0 || nb == 0.0) {
        throw std::invalid_argument("cosine_similarity: zero-norm vector");
    }
    return cosine_from_parts(numkit::dot(a, b), na, nb);
}

std::vector<Neighbor> nearest_to_vector(const EmbeddingSpace& space, std::span<const double> query,
                                        std::size_t k, std::span<const Index> exclude) {
    if (query.size() != space.dim()) {
        throw std::invalid_argument("nearest_to_vector: dimension mismatch");
    }
    const double qn = numkit::l2_norm(query);
    if (qn == 0.0) {
        throw std::invalid_argument("nearest_to_vector: zero-norm query");
    }
    auto all = ranked(space, query, qn, exclude);
    if (all.size() > k) {
        all.resize(k);
    }
    return all;
}

std::vector<Neighbor> top_k_similar(const EmbeddingSpace& space, Index query, std::size_t k) {
    if (k < 1) {
        throw std::invalid_argument("top_k_similar: k must be >= 1");
    }
    if (space.is_zero(query)) {
        throw std::invalid_argument("top_k_similar: query has a zero-norm embedding");
    }
    const Index self[] = {query};
    auto all = ranked(space, space.row(query), space.norm(query), self);
    if (all.size() > k) {
        all.resize(k);
    }
    return all;
}

std::vector<Neighbor> market_basket(const EmbeddingSpace& space, const concepts::ConceptModel& concepts,
                                    Index query, std::size_t k, bool over_fetch) {
    if (k < 1) {
        throw std::invalid_argument("market_basket: k must be >= 1");
    }
    if (concepts.centroids.cols() != space.dim() || concepts.assignment.size() != space.size()) {
        throw std::invalid_argument("market_basket: concept model was fitted on a different space");
    }
    if (space.is_zero(query)) {
        throw std::invalid_argument("market_basket: query has a zero-norm embedding");
    }
    const int query_concept = concepts.assignment.at(query);
    const Index self[] = {query};
    const auto candidates = ranked(space, space.row(query), space.norm(query), self);
    const std::size_t scan = over_fetch ? candidates.size() : std::min(k, candidates.size());
    std::vector<Neighbor> out;
    for (std::size_t n = 0; n < scan && out.size() < k; ++n) {
        if (concepts.assignment[candidates[n].product] != query_concept) {
            out.push_back(candidates[n]);
        }
    }
    return out;
}

std::vector<double> combine_embeddings(const EmbeddingSpace& space, std::span<const Index> ids, Combine how) {
    if (ids.empty()) {
        throw std::invalid_argument("combine_embeddings: no ids");
    }
    std::vector<double> out(space.dim(), 0.0);
    for (auto id : ids) {
        numkit::axpy(1.0, space.row(id), out);
    }
    if (how == Combine::mean) {
        for (auto& v : out) {
            v /= static_cast<double>(ids.size());
        }
    }
    return out;
}

std::vector<Neighbor> substitutes(const EmbeddingSpace& space, std::span<const Index> ids, std::size_t k,
                                  Combine how) {
    const auto combined = combine_embeddings(space, ids, how);
    return nearest_to_vector(space, combined, k, ids);
}

}  // namespace recpipe::basket
