#ifndef GROCE_REPORT_HPP
#define GROCE_REPORT_HPP

#include <string>

#include "json.hpp"

#include "groce/clusterid.hpp"
#include "groce/eraser.hpp"
#include "groce/heatkernel.hpp"
#include "groce/semgraph.hpp"
#include "groce/synthlab.hpp"

// JSON views of engine results. nlohmann::json objects keep keys sorted, so dumps are
// stable and suitable for golden-file comparison.
namespace groce {

inline nlohmann::json diffusion_to_json(const DiffusionField& field) {
    nlohmann::json out = nlohmann::json::array();
    for (NodeId id : rank_by_score(field.scores)) out.push_back({{"node_id", id}, {"score", field.scores[id]}});
    return out;
}

inline nlohmann::json cluster_to_json(const std::string& concept_name, const ConceptCluster& cluster,
                                      const EmbeddingTable& table) {
    nlohmann::json members = nlohmann::json::array();
    for (std::size_t k = 0; k < cluster.members.size(); ++k) {
        members.push_back({{"label", table.label(cluster.members[k])},
                           {"score", cluster.member_scores[k]},
                           {"hops", cluster.member_hops[k]}});
    }
    return {{"concept", concept_name},
            {"anchor_label", table.label(cluster.anchor)},
            {"members", std::move(members)},
            {"params", {{"n", cluster.params.radius}, {"K", cluster.params.top_k}, {"t", cluster.params.t}}}};
}

inline nlohmann::json residual_to_json(const ErasureResult& result) {
    nlohmann::json out = nlohmann::json::array();
    for (std::size_t i = 0; i < result.max_residual.size(); ++i) {
        out.push_back({{"token_index", i}, {"max_residual", result.max_residual[i]}, {"skipped", result.skipped[i] != 0}});
    }
    return out;
}

inline nlohmann::json degree_stats_to_json(const DegreeStats& s) {
    return {{"mean_degree", s.mean_degree},
            {"max_degree", s.max_degree},
            {"edge_count", s.edge_count},
            {"isolated_count", s.isolated_count}};
}

inline nlohmann::json truth_to_json(const PlantedTable& planted) { return planted.truth; }

inline nlohmann::json bench_to_json(const BenchReport& r) {
    return {{"node_count", r.node_count},
            {"dim", r.dim},
            {"edge_count", r.edge_count},
            {"concepts", r.concepts},
            {"prompt_length", r.prompt_length},
            {"repeats", r.repeats},
            {"output_checksum", r.output_checksum},
            {"timing",
             {{"build_ms", r.build_ms},
              {"per_concept_cluster_ms", r.per_concept_cluster_ms},
              {"per_prompt_erase_ms", r.per_prompt_erase_ms},
              {"cluster_erase_ms", r.cluster_erase_ms},
              {"total_ms", r.total_ms}}},
            {"machine",
             {{"cpu_model", r.cpu_model},
              {"hardware_threads", r.hardware_threads},
              {"worker_threads", r.worker_threads},
              {"compiler", r.compiler}}}};
}

}  // namespace groce

#endif  // GROCE_REPORT_HPP
