#pragma once

#include "recpipe/concepts.hpp"
#include "recpipe/corpus.hpp"
#include "recpipe/numkit.hpp"

#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace recpipe::basket {

using corpus::Index;
using numkit::Matrix;

/// Product vectors with cached L2 norms and optional token names.
class EmbeddingSpace {
public:
    explicit EmbeddingSpace(Matrix vectors, std::vector<std::string> tokens = {});

    std::size_t size() const { return vectors_.rows(); }
    std::size_t dim() const { return vectors_.cols(); }
    const Matrix& vectors() const { return vectors_; }
    std::span<const double> row(Index id) const;
    double norm(Index id) const { return norms_.at(id); }
    bool is_zero(Index id) const { return norms_.at(id) == 0.0; }

    /// Token of a product, or its decimal id when the space has no names.
    std::string token(Index id) const;
    std::optional<Index> find(const std::string& token) const;

private:
    Matrix vectors_;
    std::vector<double> norms_;
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, Index> index_;
};

struct Neighbor {
    Index product;
    double similarity;

    friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// a.b / (|a| |b|), clamped to [-1, 1]. Zero-norm input throws.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// The k most similar products other than the query, by descending
/// similarity then ascending id. Zero-norm rows are never returned.
std::vector<Neighbor> top_k_similar(const EmbeddingSpace& space, Index query, std::size_t k);

/// Same ordering against an arbitrary query vector, skipping `exclude`.
std::vector<Neighbor> nearest_to_vector(const EmbeddingSpace& space, std::span<const double> query,
                                        std::size_t k, std::span<const Index> exclude = {});

/// Complementary products for `query`: take the top-k neighbours and drop
/// those sharing the query's concept. With over_fetch the scan continues
/// down the ranking until k survivors are found or the space is exhausted.
std::vector<Neighbor> market_basket(const EmbeddingSpace& space, const concepts::ConceptModel& concepts,
                                    Index query, std::size_t k, bool over_fetch = false);

enum class Combine { mean, sum };

std::vector<double> combine_embeddings(const EmbeddingSpace& space, std::span<const Index> ids,
                                       Combine how = Combine::mean);

/// Products closest to the combination of `ids`, excluding the ids themselves.
std::vector<Neighbor> substitutes(const EmbeddingSpace& space, std::span<const Index> ids, std::size_t k,
                                  Combine how = Combine::mean);

}  // namespace recpipe::basket
