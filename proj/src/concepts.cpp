#include "recpipe/concepts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace recpipe::concepts {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        sum += diff * diff;
    }
    return sum;
}

// Returns (cluster, squared distance); lowest id wins ties.
std::pair<int, double> nearest(const Matrix& centroids, std::span<const double> x) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.rows(); ++c) {
        const double d = squared_distance(centroids.row(c), x);
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    return {best, best_d};
}

Matrix normalised_rows(const Matrix& m) {
    Matrix out = m;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        auto row = out.row(r);
        const double n = numkit::l2_norm(row);
        if (n > 0.0) {
            for (auto& v : row) {
                v /= n;
            }
        }
    }
    return out;
}

Matrix plus_plus_seeds(const Matrix& x, int k, numkit::Rng& rng) {
    const std::size_t n = x.rows();
    Matrix centroids(static_cast<std::size_t>(k), x.cols());
    std::vector<bool> chosen(n, false);
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::size_t pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    for (int c = 0; c < k; ++c) {
        if (c > 0) {
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                total += chosen[i] ? 0.0 : d2[i];
            }
            if (total > 0.0) {
                const double target = unit(rng) * total;
                double run = 0.0;
                pick = n;
                for (std::size_t i = 0; i < n; ++i) {
                    if (chosen[i] || d2[i] == 0.0) {
                        continue;
                    }
                    run += d2[i];
                    pick = i;
                    if (run > target) {
                        break;
                    }
                }
            } else {
                // Remaining points coincide with chosen seeds.
                pick = static_cast<std::size_t>(std::find(chosen.begin(), chosen.end(), false) - chosen.begin());
            }
        }
        chosen[pick] = true;
        std::copy(x.row(pick).begin(), x.row(pick).end(), centroids.row(static_cast<std::size_t>(c)).begin());
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], squared_distance(x.row(i), x.row(pick)));
        }
    }
    return centroids;
}

// Returns whether any assignment changed; fills the inertia.
bool assign_all(const Matrix& x, const Matrix& centroids, std::vector<int>& assignment,
                std::vector<double>& dist, double& inertia) {
    bool changed = false;
    inertia = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto [c, d] = nearest(centroids, x.row(i));
        changed |= assignment[i] != c;
        assignment[i] = c;
        dist[i] = d;
        inertia += d;
    }
    return changed;
}

std::vector<std::size_t> cluster_sizes(const std::vector<int>& assignment, int k) {
    std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
    for (int c : assignment) {
        ++sizes[static_cast<std::size_t>(c)];
    }
    return sizes;
}

// Moves the farthest point of a multi-member cluster into each empty cluster.
// Returns true if any repair happened.
bool repair_empty(const Matrix& x, Matrix& centroids, std::vector<int>& assignment, std::vector<double>& dist,
                  int k) {
    bool repaired = false;
    auto sizes = cluster_sizes(assignment, k);
    for (int c = 0; c < k; ++c) {
        if (sizes[static_cast<std::size_t>(c)] != 0) {
            continue;
        }
        std::size_t far = x.rows();
        double far_d = -1.0;
        for (std::size_t i = 0; i < x.rows(); ++i) {
            if (sizes[static_cast<std::size_t>(assignment[i])] > 1 && dist[i] > far_d) {
                far_d = dist[i];
                far = i;
            }
        }
        if (far == x.rows()) {
            break;
        }
        --sizes[static_cast<std::size_t>(assignment[far])];
        ++sizes[static_cast<std::size_t>(c)];
        assignment[far] = c;
        dist[far] = 0.0;
        std::copy(x.row(far).begin(), x.row(far).end(), centroids.row(static_cast<std::size_t>(c)).begin());
        repaired = true;
    }
    return repaired;
}

std::size_t distinct_rows(const Matrix& x) {
    std::vector<std::vector<double>> rows;
    rows.reserve(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        rows.emplace_back(x.row(i).begin(), x.row(i).end());
    }
    std::sort(rows.begin(), rows.end());
    return static_cast<std::size_t>(std::unique(rows.begin(), rows.end()) - rows.begin());
}

void update_means(const Matrix& x, Matrix& centroids, const std::vector<int>& assignment, int k) {
    const auto sizes = cluster_sizes(assignment, k);
    Matrix sums(centroids.rows(), centroids.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        numkit::axpy(1.0, x.row(i), sums.row(static_cast<std::size_t>(assignment[i])));
    }
    for (std::size_t c = 0; c < centroids.rows(); ++c) {
        if (sizes[c] == 0) {
            continue;
        }
        auto dst = centroids.row(c);
        const auto src = sums.row(c);
        for (std::size_t j = 0; j < dst.size(); ++j) {
            dst[j] = src[j] / static_cast<double>(sizes[c]);
        }
    }
}

}  // namespace

ConceptModel kmeans_fit(const Matrix& embeddings, const KMeansOptions& options) {
    const int k = options.k;
    if (k < 1 || static_cast<std::size_t>(k) > embeddings.rows()) {
        throw std::invalid_argument("kmeans: need 1 <= k <= number of points");
    }
    if (options.max_iters < 1) {
        throw std::invalid_argument("kmeans: max_iters must be >= 1");
    }
    const Matrix x = options.cosine ? normalised_rows(embeddings) : embeddings;
    // With fewer distinct points than k some cluster must stay empty.
    if (distinct_rows(x) < static_cast<std::size_t>(k)) {
        throw std::invalid_argument("kmeans: k exceeds the number of distinct points");
    }
    numkit::Rng rng(options.seed);

    ConceptModel model;
    model.k = k;
    model.seed = options.seed;
    model.cosine = options.cosine;
    model.centroids = plus_plus_seeds(x, k, rng);
    model.assignment.assign(x.rows(), -1);
    std::vector<double> dist(x.rows(), 0.0);

    double inertia = 0.0;
    assign_all(x, model.centroids, model.assignment, dist, inertia);
    model.inertia_history.push_back(inertia);
    int iter = 0;
    while (iter < options.max_iters) {
        ++iter;
        repair_empty(x, model.centroids, model.assignment, dist, k);
        update_means(x, model.centroids, model.assignment, k);
        const bool changed = assign_all(x, model.centroids, model.assignment, dist, inertia);
        model.inertia_history.push_back(inertia);
        if (!changed) {
            break;
        }
    }
    // Out of iterations with a cluster emptied by the last assignment.
    for (int guard = 0; guard < k && repair_empty(x, model.centroids, model.assignment, dist, k); ++guard) {
        assign_all(x, model.centroids, model.assignment, dist, inertia);
    }
    model.inertia = inertia;
    model.iterations_run = iter;
    return model;
}

int assign_concept(const ConceptModel& model, std::span<const double> vector) {
    if (vector.size() != model.centroids.cols()) {
        throw std::invalid_argument("assign_concept: dimension mismatch");
    }
    if (!model.cosine) {
        return nearest(model.centroids, vector).first;
    }
    std::vector<double> unit(vector.begin(), vector.end());
    const double n = numkit::l2_norm(unit);
    if (n > 0.0) {
        for (auto& v : unit) {
            v /= n;
        }
    }
    return nearest(model.centroids, unit).first;
}

}  // namespace recpipe::concepts
