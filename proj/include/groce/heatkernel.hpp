#ifndef GROCE_HEATKERNEL_HPP
#define GROCE_HEATKERNEL_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "groce/errors.hpp"
#include "groce/semgraph.hpp"

namespace groce {

enum class DiffusionMethod { iterative, spectral_oracle };

/// Heat-kernel scores exp(-tL) e_anchor over all nodes.
struct DiffusionField {
    NodeId anchor = 0;
    double t = 0.0;
    std::vector<double> scores;
    DiffusionMethod method = DiffusionMethod::iterative;
};

/// Symmetric normalized Laplacian L = I - D^{-1/2} W D^{-1/2} as a matrix-free operator.
/// Isolated nodes are given L_ii = 0, so the heat kernel leaves them fixed.
class NormalizedLaplacian {
public:
    explicit NormalizedLaplacian(const SemanticGraph& g) : graph_(&g), inv_sqrt_degree_(g.node_count(), 0.0) {
        for (std::size_t i = 0; i < g.node_count(); ++i) {
            double d = 0.0;
            for (float w : g.weights(static_cast<NodeId>(i))) d += w;
            inv_sqrt_degree_[i] = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
        }
    }

    std::size_t size() const noexcept { return inv_sqrt_degree_.size(); }
    bool isolated(NodeId i) const { return inv_sqrt_degree_[i] == 0.0; }
    double inv_sqrt_degree(NodeId i) const { return inv_sqrt_degree_[i]; }

    /// y = S x with S = D^{-1/2} W D^{-1/2}; isolated rows give y_i = x_i.
    void apply_adjacency(std::span<const double> x, std::span<double> y) const {
        const auto n = static_cast<std::ptrdiff_t>(size());
#pragma omp parallel for schedule(static) if (n > 4096)
        for (std::ptrdiff_t ii = 0; ii < n; ++ii) {
            const auto i = static_cast<NodeId>(ii);
            if (isolated(i)) {
                y[i] = x[i];
                continue;
            }
            const auto nb = graph_->neighbors(i);
            const auto w = graph_->weights(i);
            double acc = 0.0;
            for (std::size_t k = 0; k < nb.size(); ++k) acc += static_cast<double>(w[k]) * inv_sqrt_degree_[nb[k]] * x[nb[k]];
            y[i] = inv_sqrt_degree_[i] * acc;
        }
    }

    /// y = L x.
    void apply(std::span<const double> x, std::span<double> y) const {
        apply_adjacency(x, y);
        for (std::size_t i = 0; i < size(); ++i) y[i] = x[i] - y[i];
    }

    /// Dense copy of L, for small graphs.
    Eigen::MatrixXd dense() const {
        const auto n = static_cast<Eigen::Index>(size());
        Eigen::MatrixXd l = Eigen::MatrixXd::Identity(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto id = static_cast<NodeId>(i);
            if (isolated(id)) {
                l(i, i) = 0.0;
                continue;
            }
            const auto nb = graph_->neighbors(id);
            const auto w = graph_->weights(id);
            for (std::size_t k = 0; k < nb.size(); ++k) {
                l(i, nb[k]) -= inv_sqrt_degree_[id] * static_cast<double>(w[k]) * inv_sqrt_degree_[nb[k]];
            }
        }
        return l;
    }

private:
    const SemanticGraph* graph_;
    std::vector<double> inv_sqrt_degree_;
};

inline NormalizedLaplacian normalized_laplacian(const SemanticGraph& g) { return NormalizedLaplacian(g); }

inline constexpr std::size_t kMaxTaylorTerms = 10000;
inline constexpr std::size_t kOracleNodeLimit = 2000;
inline constexpr double kDefaultDiffusionTime = 1.0;
inline constexpr double kDefaultDiffusionTol = 1e-6;

namespace detail {

/// Upper bound on the Poisson(tau) tail sum_{j>k} e^{-tau} tau^j / j!, in log space.
inline double log_poisson_tail_bound(double tau, std::size_t k) {
    const double next = static_cast<double>(k + 1);
    const double ratio = tau / (next + 1.0);
    if (ratio >= 1.0) return 0.0;
    return next * std::log(tau) - std::lgamma(next + 1.0) - tau - std::log1p(-ratio);
}

}  // namespace detail

/// Iterative heat kernel. exp(-tL) = e^{-t} exp(tS) is evaluated by truncated Taylor
/// series in S. Long times are split into sub-steps of length at most 4; every
/// term is nonnegative, and since ||S||_2 <= 1 the Poisson tail bounds each step's
/// truncation error in the 2-norm (and hence the max-norm) by tol / steps.
inline DiffusionField diffuse(const SemanticGraph& g, NodeId anchor, double t, double tol = kDefaultDiffusionTol) {
    if (anchor >= g.node_count()) {
        throw ValidationError("anchor " + std::to_string(anchor) + " out of range for " + std::to_string(g.node_count()) +
                              " nodes");
    }
    if (!std::isfinite(t) || t < 0.0) throw ValidationError("diffusion time must be finite and >= 0");
    if (!(tol > 0.0) || !std::isfinite(tol)) throw ValidationError("diffusion tolerance must be > 0");

    DiffusionField field{anchor, t, std::vector<double>(g.node_count(), 0.0), DiffusionMethod::iterative};
    field.scores[anchor] = 1.0;
    if (t == 0.0) return field;

    const NormalizedLaplacian op(g);
    const std::size_t n = g.node_count();
    constexpr double kMaxStep = 4.0;
    constexpr double kSafety = 10.0;
    const auto steps = static_cast<std::size_t>(std::ceil(t / kMaxStep));
    const double tau = t / static_cast<double>(steps);
    const double log_budget = std::log(tol / (kSafety * static_cast<double>(steps)));

    std::size_t terms_per_step = 0;
    while (detail::log_poisson_tail_bound(tau, terms_per_step) > log_budget) {
        if (++terms_per_step > kMaxTaylorTerms) break;
    }
    if (terms_per_step * steps > kMaxTaylorTerms) {
        throw ConvergenceError("heat kernel needs " + std::to_string(terms_per_step * steps) +
                               " Taylor terms, cap is " + std::to_string(kMaxTaylorTerms));
    }

    std::vector<char> isolated(n);
    for (std::size_t i = 0; i < n; ++i) isolated[i] = op.isolated(static_cast<NodeId>(i)) ? 1 : 0;

    std::vector<double> x = field.scores;
    std::vector<double> term(n);
    std::vector<double> next(n);
    std::vector<double> sum(n);
    const double decay = std::exp(-tau);
    for (std::size_t s = 0; s < steps; ++s) {
        for (std::size_t i = 0; i < n; ++i) {
            term[i] = decay * x[i];
            sum[i] = term[i];
        }
        for (std::size_t k = 1; k <= terms_per_step; ++k) {
            op.apply_adjacency(term, next);
            const double scale = tau / static_cast<double>(k);
            for (std::size_t i = 0; i < n; ++i) {
                term[i] = scale * next[i];
                sum[i] += term[i];
            }
        }
        for (std::size_t i = 0; i < n; ++i) x[i] = isolated[i] ? x[i] : sum[i];
    }
    field.scores = std::move(x);
    return field;
}

/// Dense reference: h = U exp(-t Lambda) U^T e_anchor from a full eigendecomposition of L.
inline DiffusionField diffuse_oracle(const SemanticGraph& g, NodeId anchor, double t) {
    if (g.node_count() > kOracleNodeLimit) {
        throw CapacityError("spectral oracle limited to " + std::to_string(kOracleNodeLimit) + " nodes, graph has " +
                            std::to_string(g.node_count()));
    }
    if (anchor >= g.node_count()) throw ValidationError("anchor out of range");
    if (!std::isfinite(t) || t < 0.0) throw ValidationError("diffusion time must be finite and >= 0");
    DiffusionField field{anchor, t, std::vector<double>(g.node_count(), 0.0), DiffusionMethod::spectral_oracle};
    if (t == 0.0) {
        field.scores[anchor] = 1.0;
        return field;
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(normalized_laplacian(g).dense());
    const Eigen::MatrixXd& u = eig.eigenvectors();
    const Eigen::VectorXd decay = (-t * eig.eigenvalues().array()).exp();
    const Eigen::VectorXd h = u * (decay.asDiagonal() * u.row(anchor).transpose());
    for (Eigen::Index i = 0; i < h.size(); ++i) field.scores[static_cast<std::size_t>(i)] = h(i);
    return field;
}

/// Node ids ordered by descending score, ascending id on ties.
inline std::vector<NodeId> rank_by_score(std::span<const double> scores) {
    std::vector<NodeId> order(scores.size());
    std::iota(order.begin(), order.end(), NodeId{0});
    std::stable_sort(order.begin(), order.end(), [&](NodeId a, NodeId b) { return scores[a] > scores[b]; });
    return order;
}

}  // namespace groce

#endif  // GROCE_HEATKERNEL_HPP
