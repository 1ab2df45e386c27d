#ifndef GROCE_CLUSTERID_HPP
#define GROCE_CLUSTERID_HPP

#include <algorithm>
#include <cstdint>
#include <deque>
#include <exception>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "groce/errors.hpp"
#include "groce/heatkernel.hpp"
#include "groce/semgraph.hpp"

namespace groce {

/// Scores at or below this are treated as unreached.
inline constexpr double kSupportThreshold = 1e-12;

struct ClusterParams {
    std::uint32_t radius = 2;  // hop radius n
    std::uint32_t top_k = 8;   // K
    double t = kDefaultDiffusionTime;
    double tol = kDefaultDiffusionTol;

    void validate() const {
        if (radius < 1) throw ValidationError("cluster radius must be >= 1");
        if (top_k < 1) throw ValidationError("top-K must be >= 1");
        if (!std::isfinite(t) || t < 0.0) throw ValidationError("diffusion time must be finite and >= 0");
        if (!(tol > 0.0)) throw ValidationError("diffusion tolerance must be > 0");
    }
};

struct ConceptCluster {
    NodeId anchor = 0;
    std::vector<NodeId> members;        // descending score, ascending id on ties
    std::vector<double> member_scores;  // h[members[j]]
    std::vector<std::uint32_t> member_hops;
    ClusterParams params;
};

/// A target concept: a vocabulary label, optionally with an embedding used when
/// the label is not in the vocabulary.
struct ConceptSpec {
    std::string label;
    std::optional<std::vector<float>> vector;
};

inline constexpr std::uint32_t kUnreached = std::numeric_limits<std::uint32_t>::max();

/// BFS hop counts from `anchor`, limited to `radius`; unreached nodes hold kUnreached.
inline std::vector<std::uint32_t> hop_distances(const SemanticGraph& g, NodeId anchor, std::uint32_t radius) {
    std::vector<std::uint32_t> hops(g.node_count(), kUnreached);
    if (anchor >= g.node_count()) throw ValidationError("anchor out of range");
    hops[anchor] = 0;
    std::deque<NodeId> queue{anchor};
    while (!queue.empty()) {
        const NodeId u = queue.front();
        queue.pop_front();
        if (hops[u] == radius) continue;
        for (NodeId v : g.neighbors(u)) {
            if (hops[v] == kUnreached) {
                hops[v] = hops[u] + 1;
                queue.push_back(v);
            }
        }
    }
    return hops;
}

/// Nodes within `radius` unweighted hops of `anchor`, including the anchor, ascending.
inline std::vector<NodeId> hop_neighborhood(const SemanticGraph& g, NodeId anchor, std::uint32_t radius) {
    const auto hops = hop_distances(g, anchor, radius);
    std::vector<NodeId> out;
    for (std::size_t i = 0; i < hops.size(); ++i) {
        if (hops[i] != kUnreached) out.push_back(static_cast<NodeId>(i));
    }
    return out;
}

/// Maps a concept onto a node: a vocabulary hit returns its id; an out-of-vocabulary
/// concept with a vector is inserted into the graph (mutating it); otherwise fails.
inline NodeId resolve_anchor(SemanticGraph& g, const ConceptSpec& target) {
    if (target.label.empty() && !target.vector) throw ValidationError("concept needs a label or a vector");
    if (!target.label.empty()) {
        if (auto id = g.table().find(target.label)) return *id;
    }
    if (!target.vector) {
        throw ResolutionError("concept \"" + target.label +
                              "\" is not in the vocabulary; supply its embedding vector to insert it");
    }
    if (target.vector->size() != g.table().dim()) {
        throw ValidationError("concept vector has dimension " + std::to_string(target.vector->size()) + ", table has " +
                              std::to_string(g.table().dim()));
    }
    std::string label = target.label.empty() ? std::string("__concept") : target.label;
    if (g.table().find(label)) {
        for (std::size_t k = 1;; ++k) {
            auto candidate = label + "#" + std::to_string(k);
            if (!g.table().find(candidate)) {
                label = std::move(candidate);
                break;
            }
        }
    }
    return insert_node(g, std::move(label), *target.vector);
}

/// Top-K nodes by diffusion score among those within the hop radius of the anchor.
inline ConceptCluster identify_cluster(const SemanticGraph& g, NodeId anchor, const ClusterParams& params) {
    params.validate();
    const auto field = diffuse(g, anchor, params.t, params.tol);
    const auto hops = hop_distances(g, anchor, params.radius);
    std::vector<NodeId> candidates;
    for (std::size_t i = 0; i < hops.size(); ++i) {
        if (hops[i] != kUnreached && field.scores[i] > kSupportThreshold) candidates.push_back(static_cast<NodeId>(i));
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](NodeId a, NodeId b) { return field.scores[a] > field.scores[b]; });
    if (candidates.size() > params.top_k) candidates.resize(params.top_k);

    ConceptCluster c;
    c.anchor = anchor;
    c.params = params;
    c.members = std::move(candidates);
    for (NodeId m : c.members) {
        c.member_scores.push_back(field.scores[m]);
        c.member_hops.push_back(hops[m]);
    }
    return c;
}

/// Resolves every concept first (so a failure leaves no partial plan), then computes one
/// cluster per concept, in the given order.
inline std::vector<ConceptCluster> erase_plan(SemanticGraph& g, const std::vector<ConceptSpec>& concepts,
                                              const ClusterParams& params) {
    params.validate();
    for (const auto& c : concepts) {
        if (!c.label.empty() && g.table().find(c.label)) continue;
        if (!c.vector) {
            throw ResolutionError("concept \"" + c.label +
                                  "\" is not in the vocabulary; supply its embedding vector to insert it");
        }
        if (c.vector->size() != g.table().dim()) {
            throw ValidationError("concept \"" + c.label + "\" vector dimension does not match the table");
        }
    }
    std::vector<NodeId> anchors;
    anchors.reserve(concepts.size());
    for (const auto& c : concepts) anchors.push_back(resolve_anchor(g, c));
    std::vector<ConceptCluster> plan(anchors.size());
    std::vector<std::exception_ptr> failures(anchors.size());
    const auto count = static_cast<std::ptrdiff_t>(anchors.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        const auto k = static_cast<std::size_t>(i);
        try {
            plan[k] = identify_cluster(g, anchors[k], params);
        } catch (...) {
            failures[k] = std::current_exception();
        }
    }
    for (const auto& f : failures) {
        if (f) std::rethrow_exception(f);
    }
    return plan;
}

}  // namespace groce

#endif  // GROCE_CLUSTERID_HPP
