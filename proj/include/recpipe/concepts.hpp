#pragma once

#include "recpipe/numkit.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace recpipe::concepts {

using numkit::Matrix;

struct KMeansOptions {
    int k = 0;
    std::uint64_t seed = 1;
    int max_iters = 100;
    // Cluster unit-normalised rows instead of the raw embeddings.
    bool cosine = false;
};

/// Concept vectors: k-means centroids over product embeddings.
struct ConceptModel {
    Matrix centroids;                 // K x D
    std::vector<int> assignment;      // product id -> cluster id
    double inertia = 0.0;
    std::vector<double> inertia_history;  // after each assignment step
    int k = 0;
    std::uint64_t seed = 0;
    int iterations_run = 0;
    bool cosine = false;
};

/// k-means++ seeding followed by Lloyd iterations until the assignment stops
/// changing or max_iters is reached. Empty clusters take the point farthest
/// from its centroid. Throws when k exceeds the number of distinct rows.
ConceptModel kmeans_fit(const Matrix& embeddings, const KMeansOptions& options);

/// Nearest centroid by Euclidean distance, lowest id on ties. In cosine mode
/// the vector is normalised first.
int assign_concept(const ConceptModel& model, std::span<const double> vector);

}  // namespace recpipe::concepts
