// groce: command-line front end for graph building, cluster inspection, prompt erasure,
// synthetic data generation and benchmarking.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"
#include "groce/groce.hpp"

namespace {

enum ExitCode : int { kOk = 0, kUsage = 2, kIntegrity = 3, kCompute = 4, kInternal = 1 };

int exit_code_for(groce::ErrorKind kind) {
    switch (kind) {
        case groce::ErrorKind::integrity:
            return kIntegrity;
        case groce::ErrorKind::convergence:
        case groce::ErrorKind::capacity:
            return kCompute;
        default:
            return kUsage;
    }
}

struct GlobalOptions {
    std::string config_path;
    std::optional<unsigned> threads;
    bool verbose = false;
};

/// Flag values; each one overrides the config file only when given.
struct Overrides {
    std::optional<double> tau0, sigma, lambda, t, sigma_p, attach_threshold;
    std::optional<std::uint32_t> radius, top_k, passes;
    std::optional<std::string> embeddings, graph;

    void add_graph_flags(CLI::App* cmd) {
        cmd->add_option("--tau0", tau0, "base similarity threshold (0,1)");
        cmd->add_option("--sigma", sigma, "edge weight sharpness");
        cmd->add_option("--lambda", lambda, "adaptive threshold gain");
    }
    void add_cluster_flags(CLI::App* cmd) {
        cmd->add_option("--radius,-n", radius, "hop radius n");
        cmd->add_option("--topk,-K", top_k, "cluster size K");
        cmd->add_option("--time,-t", t, "diffusion time t");
    }
    void add_erase_flags(CLI::App* cmd) {
        cmd->add_option("--sigma-p", sigma_p, "attention temperature");
        cmd->add_option("--attach-threshold", attach_threshold, "token attachment similarity (default tau0)");
        cmd->add_option("--passes", passes, "projection repetitions per concept");
    }

    void apply(groce::RunConfig& cfg) const {
        if (tau0) cfg.graph.tau0 = *tau0;
        if (sigma) cfg.graph.sigma = *sigma;
        if (lambda) cfg.graph.lambda = *lambda;
        if (radius) cfg.cluster.radius = *radius;
        if (top_k) cfg.cluster.top_k = *top_k;
        if (t) cfg.cluster.t = *t;
        if (sigma_p) cfg.erasure.sigma_p = *sigma_p;
        if (attach_threshold) cfg.erasure.attach_threshold = *attach_threshold;
        if (passes) cfg.erasure.passes = *passes;
        if (embeddings) cfg.embeddings = *embeddings;
        if (graph) cfg.graph_path = *graph;
    }
};

groce::RunConfig resolve_config(const GlobalOptions& global, const Overrides& flags) {
    groce::RunConfig cfg;
    if (!global.config_path.empty()) groce::apply_config_file(global.config_path, cfg);
    flags.apply(cfg);
    if (global.threads) cfg.thread_count = *global.threads;
    cfg.validate();
#ifdef _OPENMP
    if (cfg.thread_count > 0) omp_set_num_threads(static_cast<int>(cfg.thread_count));
#endif
    if (global.verbose) std::cerr << "# effective configuration\n" << groce::describe_config(cfg);
    return cfg;
}

std::shared_ptr<groce::EmbeddingTable> load_embeddings(const std::string& path, const std::string& format) {
    if (path.empty()) throw groce::ValidationError("no embeddings file given (--embeddings or config 'embeddings')");
    const auto fmt = format == "auto" ? groce::sniff_table_format(path) : groce::parse_table_format(format);
    return std::make_shared<groce::EmbeddingTable>(groce::load_table(path, fmt));
}

groce::SemanticGraph load_bound_graph(const groce::RunConfig& cfg, const std::string& format) {
    if (cfg.graph_path.empty()) throw groce::ValidationError("no graph file given (--graph or config 'graph')");
    auto table = load_embeddings(cfg.embeddings, format);
    return groce::load_graph(cfg.graph_path, std::move(table));
}

std::vector<groce::ConceptSpec> concept_specs(const std::vector<std::string>& names, const std::string& vectors_path,
                                              const std::string& format) {
    std::optional<groce::EmbeddingTable> vectors;
    if (!vectors_path.empty()) vectors = groce::load_table(vectors_path, format == "auto" ? groce::sniff_table_format(vectors_path)
                                                                                          : groce::parse_table_format(format));
    std::vector<groce::ConceptSpec> out;
    for (const auto& name : names) {
        groce::ConceptSpec spec{name, std::nullopt};
        if (vectors) {
            if (auto id = vectors->find(name)) {
                const auto row = vectors->row(*id);
                spec.vector = std::vector<float>(row.begin(), row.end());
            }
        }
        out.push_back(std::move(spec));
    }
    return out;
}

void write_json(const nlohmann::json& j, const std::string& path) {
    const std::string text = j.dump(2) + "\n";
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw groce::IoError("cannot open for writing", path);
    out << text;
    if (!out) throw groce::IoError("write failed", path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Graph-guided concept erasure over embedding tables"};
    app.require_subcommand(1);
    GlobalOptions global;
    app.add_option("--config", global.config_path, "key=value config file");
    app.add_option("--threads", global.threads, "worker threads (0 = auto)");
    app.add_flag("--verbose,-v", global.verbose, "echo the effective configuration");

    Overrides flags;
    std::string table_format = "auto";

    // build-graph
    auto* build = app.add_subcommand("build-graph", "build a semantic graph from an embedding table");
    std::string graph_out;
    build->add_option("--embeddings,-e", flags.embeddings, "embedding table");
    build->add_option("--format", table_format, "table format: auto, text or binary");
    build->add_option("--out,-o", graph_out, "graph file to write")->required();
    flags.add_graph_flags(build);

    // cluster
    auto* cluster = app.add_subcommand("cluster", "identify the concept cluster around a target");
    std::string concept_name;
    std::string concept_vectors;
    std::string cluster_out;
    std::string diffusion_out;
    cluster->add_option("--embeddings,-e", flags.embeddings, "embedding table the graph was built from");
    cluster->add_option("--graph,-g", flags.graph, "graph file");
    cluster->add_option("--format", table_format, "table format: auto, text or binary");
    cluster->add_option("--concept,-c", concept_name, "target concept label")->required();
    cluster->add_option("--concept-vectors,--concept-vector", concept_vectors, "text/binary table holding vectors for unknown concepts");
    cluster->add_option("--out,-o", cluster_out, "cluster report JSON (default stdout)");
    cluster->add_option("--diffusion-out", diffusion_out, "write the full diffusion field as JSON");
    flags.add_cluster_flags(cluster);

    // erase
    auto* erase_cmd = app.add_subcommand("erase", "erase concepts from a prompt embedding");
    std::string prompt_path;
    std::string prompt_out;
    std::string report_out;
    std::vector<std::string> concept_names;
    erase_cmd->add_option("--prompt,-p", prompt_path, "prompt embedding file")->required();
    erase_cmd->add_option("--embeddings,-e", flags.embeddings, "embedding table the graph was built from");
    erase_cmd->add_option("--graph,-g", flags.graph, "graph file");
    erase_cmd->add_option("--format", table_format, "table format: auto, text or binary");
    erase_cmd->add_option("--concept,-c", concept_names, "concepts to erase, applied in order")->required();
    erase_cmd->add_option("--concept-vectors,--concept-vector", concept_vectors, "table holding vectors for unknown concepts");
    erase_cmd->add_option("--out,-o", prompt_out, "edited prompt file")->required();
    erase_cmd->add_option("--report", report_out, "per-token residual report JSON");
    flags.add_cluster_flags(erase_cmd);
    flags.add_erase_flags(erase_cmd);

    // gen-synth
    auto* gen = app.add_subcommand("gen-synth", "generate a planted-cluster embedding table");
    std::string synth_out;
    std::string truth_out;
    std::string synth_prompt_out;
    std::string synth_format = "binary";
    std::size_t synth_clusters = 4;
    std::size_t synth_size = 8;
    double synth_spread = 0.1;
    std::size_t synth_background = 100;
    std::size_t synth_dim = 64;
    std::uint64_t synth_seed = 42;
    std::size_t synth_prompt_len = 77;
    bool non_orthogonal = false;
    gen->add_option("--out,-o", synth_out, "table file to write")->required();
    gen->add_option("--format", synth_format, "text or binary");
    gen->add_option("--truth", truth_out, "ground-truth membership JSON");
    gen->add_option("--prompt-out", synth_prompt_out, "also write a mixed synthetic prompt");
    gen->add_option("--prompt-length", synth_prompt_len, "tokens in the synthetic prompt");
    gen->add_option("--clusters", synth_clusters, "planted clusters");
    gen->add_option("--cluster-size", synth_size, "members per cluster");
    gen->add_option("--spread", synth_spread, "max angular deviation (radians)");
    gen->add_option("--background", synth_background, "uniform random background rows");
    gen->add_option("--dim", synth_dim, "embedding dimension");
    gen->add_option("--seed", synth_seed, "generator seed");
    gen->add_flag("--non-orthogonal", non_orthogonal, "draw centers independently instead of orthonormal");

    // bench
    auto* bench = app.add_subcommand("bench", "time build, cluster and erase on a synthetic table");
    std::string bench_out;
    std::size_t bench_nodes = 10000;
    std::size_t bench_dim = 256;
    groce::BenchOptions bench_opt;
    std::uint64_t bench_seed = 1;
    bench->add_option("--out,-o", bench_out, "timing report JSON (default stdout)");
    bench->add_option("--nodes", bench_nodes, "total vocabulary size M");
    bench->add_option("--dim", bench_dim, "embedding dimension D");
    bench->add_option("--concepts", bench_opt.concepts, "concepts to erase");
    bench->add_option("--repeats", bench_opt.repeats, "timed repetitions (>= 3)");
    bench->add_option("--prompt-length", bench_opt.prompt_length, "prompt tokens");
    bench->add_option("--cluster-size", synth_size, "members per planted cluster");
    bench->add_option("--seed", bench_seed, "generator seed");
    flags.add_graph_flags(bench);
    flags.add_cluster_flags(bench);
    flags.add_erase_flags(bench);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (build->parsed()) {
            const auto cfg = resolve_config(global, flags);
            auto table = load_embeddings(cfg.embeddings, table_format);
            const auto g = groce::build_graph(std::move(table), cfg.graph);
            groce::save_graph(g, graph_out);
            write_json(groce::degree_stats_to_json(groce::degree_stats(g)), "-");
        } else if (cluster->parsed()) {
            const auto cfg = resolve_config(global, flags);
            auto g = load_bound_graph(cfg, table_format);
            const auto specs = concept_specs({concept_name}, concept_vectors, table_format);
            const auto anchor = groce::resolve_anchor(g, specs.front());
            const auto c = groce::identify_cluster(g, anchor, cfg.cluster);
            write_json(groce::cluster_to_json(concept_name, c, g.table()), cluster_out);
            if (!diffusion_out.empty()) {
                write_json(groce::diffusion_to_json(groce::diffuse(g, anchor, cfg.cluster.t, cfg.cluster.tol)),
                           diffusion_out);
            }
        } else if (erase_cmd->parsed()) {
            const auto cfg = resolve_config(global, flags);
            auto g = load_bound_graph(cfg, table_format);
            const auto prompt = groce::load_prompt(prompt_path);
            if (prompt.dim != g.table().dim()) {
                throw groce::ValidationError("prompt dimension " + std::to_string(prompt.dim) +
                                             " does not match table dimension " + std::to_string(g.table().dim()));
            }
            const auto plan = groce::erase_plan(g, concept_specs(concept_names, concept_vectors, table_format), cfg.cluster);
            const auto result = groce::erase(prompt, plan, g, cfg.erasure);
            groce::save_prompt(result.edited, prompt_out);
            if (!report_out.empty()) write_json(groce::residual_to_json(result), report_out);
        } else if (gen->parsed()) {
            const auto format = groce::parse_table_format(synth_format);
            const auto spec = groce::make_planted_spec(synth_clusters, synth_size, synth_spread, synth_background,
                                                       synth_dim, synth_seed, !non_orthogonal);
            const auto planted = groce::generate_table(spec);
            groce::save_table(planted.table, synth_out, format);
            if (!truth_out.empty()) write_json(groce::truth_to_json(planted), truth_out);
            if (!synth_prompt_out.empty()) {
                groce::save_prompt(groce::make_mixed_prompt(spec, synth_prompt_len, synth_seed), synth_prompt_out);
            }
        } else if (bench->parsed()) {
            const auto cfg = resolve_config(global, flags);
            if (bench_opt.repeats < 3) throw groce::ValidationError("bench needs --repeats >= 3");
            const std::size_t planted = std::max<std::size_t>(bench_opt.concepts, 1);
            if (planted * synth_size > bench_nodes) throw groce::ValidationError("--nodes too small for the planted clusters");
            const auto spec = groce::make_planted_spec(planted, synth_size, 0.1, bench_nodes - planted * synth_size,
                                                       bench_dim, bench_seed, true);
            bench_opt.graph = cfg.graph;
            bench_opt.cluster = cfg.cluster;
            bench_opt.erasure = cfg.erasure;
            write_json(groce::bench_to_json(groce::bench_pipeline(spec, bench_opt)), bench_out);
        }
    } catch (const groce::Error& e) {
        std::cerr << "groce: error: " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "groce: internal error: " << e.what() << '\n';
        return kInternal;
    }
    return kOk;
}
