#pragma once

// Full-softmax output layer shared by the P2E and U2E trainers.

#include "recpipe/corpus.hpp"
#include "recpipe/numkit.hpp"

#include <algorithm>
#include <limits>
#include <span>
#include <vector>

namespace recpipe::detail {

inline constexpr corpus::Index kMaskedSlot = std::numeric_limits<corpus::Index>::max();

/// Context of each target: the other basket positions ordered by distance to
/// the target (earlier position wins ties), truncated to `slots`, padded with
/// kMaskedSlot.
inline std::vector<std::vector<corpus::Index>> nearest_contexts(std::span<const corpus::Index> items,
                                                                std::size_t slots) {
    std::vector<std::vector<corpus::Index>> out;
    out.reserve(items.size());
    std::vector<std::size_t> others;
    for (std::size_t t = 0; t < items.size(); ++t) {
        others.clear();
        for (std::size_t p = 0; p < items.size(); ++p) {
            if (p != t) {
                others.push_back(p);
            }
        }
        std::stable_sort(others.begin(), others.end(), [t](std::size_t a, std::size_t b) {
            const auto da = a > t ? a - t : t - a;
            const auto db = b > t ? b - t : t - b;
            return da != db ? da < db : a < b;
        });
        std::vector<corpus::Index> ctx(slots, kMaskedSlot);
        for (std::size_t s = 0; s < slots && s < others.size(); ++s) {
            ctx[s] = items[others[s]];
        }
        out.push_back(std::move(ctx));
    }
    return out;
}

/// logits = W h + b over every output row; returns -log softmax(logits)[target]
/// and accumulates scale * d(loss)/d{W, b, h} into the given buffers.
/// `probs` is scratch and holds the predictive distribution on return.
inline double softmax_layer(const numkit::Matrix& weights,
                            std::span<const double> bias,
                            std::span<const double> hidden,
                            corpus::Index target,
                            double scale,
                            numkit::Matrix& grad_weights,
                            std::span<double> grad_bias,
                            std::span<double> grad_hidden,
                            std::vector<double>& probs) {
    const std::size_t n_out = weights.rows();
    probs.resize(n_out);
    for (std::size_t k = 0; k < n_out; ++k) {
        probs[k] = numkit::dot(weights.row(k), hidden) + bias[k];
    }
    const double target_logit = probs[target];
    const double lse = numkit::softmax_inplace(probs);
    for (std::size_t k = 0; k < n_out; ++k) {
        const double dz = scale * (probs[k] - (k == target ? 1.0 : 0.0));
        grad_bias[k] += dz;
        numkit::axpy(dz, hidden, grad_weights.row(k));
        numkit::axpy(dz, weights.row(k), grad_hidden);
    }
    return lse - target_logit;
}

/// Gradient slot for `row`, created zeroed on first use.
template <typename RowGrads>
std::span<double> row_slot(RowGrads& rows, corpus::Index row, std::size_t width) {
    for (auto& [index, values] : rows) {
        if (index == row) {
            return values;
        }
    }
    rows.emplace_back(row, std::vector<double>(width, 0.0));
    return rows.back().second;
}

}  // namespace recpipe::detail
