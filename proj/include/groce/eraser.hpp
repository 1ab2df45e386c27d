#ifndef GROCE_ERASER_HPP
#define GROCE_ERASER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "groce/clusterid.hpp"
#include "groce/embedstore.hpp"
#include "groce/errors.hpp"
#include "groce/semgraph.hpp"

namespace groce {

inline constexpr double kInfiniteDistance = std::numeric_limits<double>::infinity();

struct ErasureParams {
    double sigma_p = 1.0;
    std::optional<double> attach_threshold;  // unset: the graph's tau0
    std::uint32_t passes = 1;

    double resolved_attach_threshold(const SemanticGraph& g) const {
        return attach_threshold.value_or(g.params().tau0);
    }

    void validate() const {
        if (!(sigma_p > 0.0) || !std::isfinite(sigma_p)) throw ValidationError("sigma_p must be > 0");
        if (passes < 1) throw ValidationError("passes must be >= 1");
        if (attach_threshold && !(*attach_threshold >= 0.0 && *attach_threshold < 1.0)) {
            throw ValidationError("attach threshold must lie in [0,1)");
        }
    }
};

/// Attention weights of one concept's cluster for every prompt token.
struct ConceptAttention {
    NodeId anchor = 0;
    std::vector<NodeId> members;
    std::vector<double> alpha;  // length x members.size(), row-major
    std::vector<char> skipped;  // per token: no finite distance to any member

    std::span<const double> row(std::size_t token) const {
        return {alpha.data() + token * members.size(), members.size()};
    }
};

struct ErasureResult {
    PromptEmbedding edited;
    std::vector<ConceptAttention> attention;  // one block per plan entry, plan order
    std::vector<double> max_residual;         // per token, over every cluster member in the plan
    std::vector<char> skipped;                // per token: untouched by every concept
};

/// A prompt token hooked onto the graph: vocabulary nodes it attaches to and the
/// length (1 - cosine) of each virtual edge.
struct TokenAttachment {
    std::vector<NodeId> nodes;
    std::vector<double> lengths;
};

inline TokenAttachment attach_token(const EmbeddingTable& table, std::span<const double> cosines, double threshold) {
    TokenAttachment a;
    for (std::size_t j = 0; j < table.count(); ++j) {
        if (cosines[j] > threshold) {
            a.nodes.push_back(static_cast<NodeId>(j));
            a.lengths.push_back(std::max(0.0, 1.0 - cosines[j]));
        }
    }
    return a;
}

/// Cosine of `token` against every vocabulary row. Throws on a zero-norm token.
inline std::vector<double> token_cosines(const EmbeddingTable& table, std::span<const float> token) {
    if (token.size() != table.dim()) {
        throw ValidationError("token dimension " + std::to_string(token.size()) + " does not match table dimension " +
                              std::to_string(table.dim()));
    }
    const double n = norm(token);
    if (!(n > 0.0)) throw ValidationError("zero-norm prompt token");
    std::vector<double> cos(table.count());
    for (std::size_t j = 0; j < table.count(); ++j) cos[j] = dot(token, table.row(j)) / n;
    return cos;
}

/// Dijkstra from the virtual token node; graph edges have length 1 - s_ij.
/// Stops once every target is settled. Unreachable targets report +inf.
inline std::vector<double> shortest_distances(const SemanticGraph& g, const TokenAttachment& source,
                                              std::span<const NodeId> targets) {
    const std::size_t n = g.node_count();
    std::vector<double> dist(n, kInfiniteDistance);
    std::vector<char> settled(n, 0);
    std::vector<char> wanted(n, 0);
    std::size_t outstanding = 0;
    for (NodeId t : targets) {
        if (!wanted[t]) {
            wanted[t] = 1;
            ++outstanding;
        }
    }
    using Entry = std::pair<double, NodeId>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
    for (std::size_t k = 0; k < source.nodes.size(); ++k) {
        const NodeId v = source.nodes[k];
        if (source.lengths[k] < dist[v]) {
            dist[v] = source.lengths[k];
            heap.emplace(dist[v], v);
        }
    }
    while (!heap.empty() && outstanding > 0) {
        const auto [d, u] = heap.top();
        heap.pop();
        if (settled[u]) continue;
        settled[u] = 1;
        if (wanted[u]) --outstanding;
        const auto nb = g.neighbors(u);
        const auto sims = g.similarities(u);
        for (std::size_t k = 0; k < nb.size(); ++k) {
            const double nd = d + std::max(0.0, 1.0 - static_cast<double>(sims[k]));
            if (nd < dist[nb[k]]) {
                dist[nb[k]] = nd;
                heap.emplace(nd, nb[k]);
            }
        }
    }
    std::vector<double> out;
    out.reserve(targets.size());
    for (NodeId t : targets) out.push_back(settled[t] ? dist[t] : kInfiniteDistance);
    return out;
}

/// Graph distance from a prompt token to `target`. The token attaches to every node
/// whose cosine with it exceeds `attach_threshold`.
inline double token_distance(const SemanticGraph& g, std::span<const float> token, NodeId target,
                             double attach_threshold) {
    if (target >= g.node_count()) throw ValidationError("target node out of range");
    const auto cos = token_cosines(g.table(), token);
    const auto source = attach_token(g.table(), cos, attach_threshold);
    const NodeId targets[] = {target};
    return shortest_distances(g, source, targets).front();
}

/// Softmax of -distance / sigma_p. Infinite distances get weight 0; all-infinite gives an all-zero row.
inline std::vector<double> attention_weights(std::span<const double> distances, double sigma_p) {
    std::vector<double> alpha(distances.size(), 0.0);
    double lo = kInfiniteDistance;
    for (double d : distances) lo = std::min(lo, d);
    if (!std::isfinite(lo)) return alpha;
    double total = 0.0;
    for (std::size_t k = 0; k < distances.size(); ++k) {
        if (std::isfinite(distances[k])) {
            alpha[k] = std::exp(-(distances[k] - lo) / sigma_p);
            total += alpha[k];
        }
    }
    for (double& a : alpha) a /= total;
    return alpha;
}

/// p - sum_v alpha_v <p, e_v> e_v, with every inner product taken against the input p.
inline std::vector<double> project_token(std::span<const double> token, const EmbeddingTable& table,
                                         std::span<const NodeId> members, std::span<const double> alpha) {
    std::vector<double> out(token.begin(), token.end());
    std::vector<double> coeff(members.size(), 0.0);
    for (std::size_t k = 0; k < members.size(); ++k) {
        if (alpha[k] == 0.0) continue;
        const auto e = table.row(members[k]);
        double ip = 0.0;
        for (std::size_t c = 0; c < token.size(); ++c) ip += token[c] * static_cast<double>(e[c]);
        coeff[k] = alpha[k] * ip;
    }
    for (std::size_t k = 0; k < members.size(); ++k) {
        if (coeff[k] == 0.0) continue;
        const auto e = table.row(members[k]);
        for (std::size_t c = 0; c < out.size(); ++c) out[c] -= coeff[k] * static_cast<double>(e[c]);
    }
    return out;
}

inline std::vector<float> project_token(std::span<const float> token, const EmbeddingTable& table,
                                        std::span<const NodeId> members, std::span<const double> alpha) {
    const std::vector<double> p(token.begin(), token.end());
    const auto r = project_token(std::span<const double>(p), table, members, alpha);
    return {r.begin(), r.end()};
}

/// Applies each cluster of `plan` in order to every token of `prompt`. For each concept,
/// distances and attention come from the token as it enters that concept; `passes` > 1
/// reapplies the same weighted projection to its own output. Tokens with no finite
/// distance to a cluster are left untouched by it.
inline ErasureResult erase(const PromptEmbedding& prompt, const std::vector<ConceptCluster>& plan,
                           const SemanticGraph& g, const ErasureParams& params) {
    params.validate();
    const EmbeddingTable& table = g.table();
    if (plan.empty()) throw ValidationError("erasure plan is empty");
    if (prompt.dim != table.dim()) {
        throw ValidationError("prompt dimension " + std::to_string(prompt.dim) + " does not match table dimension " +
                              std::to_string(table.dim()));
    }
    const std::size_t len = prompt.length();
    if (len == 0) throw ValidationError("prompt has no tokens");
    for (std::size_t i = 0; i < len; ++i) {
        if (!(norm(prompt.token(i)) > 0.0)) {
            throw ValidationError("zero-norm prompt token at position " + std::to_string(i));
        }
    }
    for (const auto& c : plan) {
        for (NodeId m : c.members) {
            if (m >= g.node_count()) throw ValidationError("cluster member out of range");
        }
    }
    const double threshold = params.resolved_attach_threshold(g);
    const std::size_t dim = table.dim();
    const std::size_t m = table.count();

    using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const RowMatrix vocab = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                                table.data().data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(dim))
                                .cast<double>();
    RowMatrix state(static_cast<Eigen::Index>(len), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < len; ++i) {
        for (std::size_t c = 0; c < dim; ++c) state(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = prompt.token(i)[c];
    }

    ErasureResult result;
    result.skipped.assign(len, 1);
    result.attention.reserve(plan.size());
    for (const auto& cluster : plan) {
        ConceptAttention att;
        att.anchor = cluster.anchor;
        att.members = cluster.members;
        att.alpha.assign(len * cluster.members.size(), 0.0);
        att.skipped.assign(len, 1);
        if (cluster.members.empty()) {
            result.attention.push_back(std::move(att));
            continue;
        }
        const RowMatrix cosines = state * vocab.transpose();
        const auto tokens = static_cast<std::ptrdiff_t>(len);
#pragma omp parallel for schedule(dynamic, 4)
        for (std::ptrdiff_t ii = 0; ii < tokens; ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            const auto row_i = static_cast<Eigen::Index>(i);
            const double n = state.row(row_i).norm();
            if (!(n > 0.0)) continue;  // fully erased by an earlier concept
            std::vector<double> cos(m);
            for (std::size_t j = 0; j < m; ++j) cos[j] = cosines(row_i, static_cast<Eigen::Index>(j)) / n;
            const auto source = attach_token(table, cos, threshold);
            const auto dist = shortest_distances(g, source, cluster.members);
            const auto alpha = attention_weights(dist, params.sigma_p);
            if (std::all_of(alpha.begin(), alpha.end(), [](double a) { return a == 0.0; })) continue;
            att.skipped[i] = 0;
            std::copy(alpha.begin(), alpha.end(), att.alpha.begin() + static_cast<std::ptrdiff_t>(i * alpha.size()));
            std::vector<double> p(dim);
            for (std::size_t c = 0; c < dim; ++c) p[c] = state(row_i, static_cast<Eigen::Index>(c));
            for (std::uint32_t pass = 0; pass < params.passes; ++pass) p = project_token(std::span<const double>(p), table, cluster.members, alpha);
            for (std::size_t c = 0; c < dim; ++c) state(row_i, static_cast<Eigen::Index>(c)) = p[c];
        }
        for (std::size_t i = 0; i < len; ++i) {
            if (!att.skipped[i]) result.skipped[i] = 0;
        }
        result.attention.push_back(std::move(att));
    }

    result.edited.dim = dim;
    result.edited.source_labels = prompt.source_labels;
    result.edited.tokens.resize(len * dim);
    for (std::size_t i = 0; i < len; ++i) {
        for (std::size_t c = 0; c < dim; ++c) {
            result.edited.tokens[i * dim + c] =
                result.skipped[i] ? prompt.token(i)[c]
                                  : static_cast<float>(state(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)));
        }
    }

    // Residuals are measured on the f64 state, before rounding to the stored f32 tokens.
    result.max_residual.assign(len, 0.0);
    std::vector<double> p(dim);
    for (std::size_t i = 0; i < len; ++i) {
        for (std::size_t c = 0; c < dim; ++c) {
            p[c] = result.skipped[i] ? double(prompt.token(i)[c]) : state(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
        }
        double worst = 0.0;
        for (const auto& cluster : plan) {
            for (NodeId v : cluster.members) {
                const auto e = table.row(v);
                double ip = 0.0;
                for (std::size_t c = 0; c < dim; ++c) ip += p[c] * double(e[c]);
                worst = std::max(worst, std::abs(ip));
            }
        }
        result.max_residual[i] = worst;
    }
    return result;
}

}  // namespace groce

#endif  // GROCE_ERASER_HPP
