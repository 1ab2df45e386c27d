#ifndef GROCE_SYNTHLAB_HPP
#define GROCE_SYNTHLAB_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <string>
#include <thread>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "groce/clusterid.hpp"
#include "groce/embedstore.hpp"
#include "groce/eraser.hpp"
#include "groce/errors.hpp"
#include "groce/semgraph.hpp"

namespace groce {

/// Counter-based generator (SplitMix64 finalizer over seed and a running counter),
/// so streams are identical on every platform.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) : seed_(mix(seed ^ mix(stream + 0x632be59bd9b4e019ULL))) {}

    std::uint64_t next_u64() { return mix(seed_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
        has_spare_ = true;
        return r * std::cos(2.0 * std::numbers::pi * u2);
    }

    std::vector<double> gaussian_vector(std::size_t dim) {
        std::vector<double> v(dim);
        for (double& x : v) x = normal();
        return v;
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

struct PlantedCluster {
    std::string label_prefix;
    std::size_t size = 0;
    std::vector<double> center;  // unit norm
    double spread = 0.1;         // max angular deviation from the center, radians
};

struct PlantedSpec {
    std::vector<PlantedCluster> clusters;
    std::size_t background = 0;
    std::size_t dim = 0;
    std::uint64_t seed = 0;
    bool orthogonal_centers = true;

    std::size_t total() const {
        std::size_t n = background;
        for (const auto& c : clusters) n += c.size;
        return n;
    }
};

struct PlantedTable {
    EmbeddingTable table;
    std::map<std::string, std::vector<std::string>> truth;  // cluster prefix -> member labels
    std::vector<std::vector<NodeId>> members;               // per cluster, table row ids
};

struct ProxyMetrics {
    double target_similarity_drop = 0.0;
    double offtarget_drift = 0.0;
    std::size_t skipped_tokens = 0;
};

namespace detail {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

inline void normalize(std::vector<double>& v) {
    const double n = std::sqrt(dot(v, v));
    for (double& x : v) x /= n;
}

/// Removes the components of `v` along each (orthonormal) basis vector, twice for stability.
inline void orthogonalize(std::vector<double>& v, const std::vector<std::vector<double>>& basis) {
    for (int round = 0; round < 2; ++round) {
        for (const auto& b : basis) {
            const double c = dot(v, b);
            for (std::size_t k = 0; k < v.size(); ++k) v[k] -= c * b[k];
        }
    }
}

inline std::vector<double> random_unit_orthogonal(CounterRng& rng, std::size_t dim,
                                                  const std::vector<std::vector<double>>& basis) {
    for (;;) {
        auto v = rng.gaussian_vector(dim);
        orthogonalize(v, basis);
        if (std::sqrt(dot(v, v)) > 1e-6) {
            normalize(v);
            return v;
        }
    }
}

}  // namespace detail

/// Planted spec with `count` clusters named c0_, c1_, ...; centers drawn from `seed`
/// and orthonormalized when `orthogonal` is set.
inline PlantedSpec make_planted_spec(std::size_t count, std::size_t size, double spread, std::size_t background,
                                     std::size_t dim, std::uint64_t seed, bool orthogonal = true) {
    if (dim < 2) throw ValidationError("dimension must be at least 2");
    if (orthogonal && count + 1 > dim) {
        throw CapacityError("dimension " + std::to_string(dim) + " cannot hold " + std::to_string(count) +
                            " orthogonal centers plus a rotation direction");
    }
    PlantedSpec spec;
    spec.background = background;
    spec.dim = dim;
    spec.seed = seed;
    spec.orthogonal_centers = orthogonal;
    CounterRng rng(seed, 1);
    std::vector<std::vector<double>> basis;
    for (std::size_t c = 0; c < count; ++c) {
        auto center = orthogonal ? detail::random_unit_orthogonal(rng, dim, basis)
                                 : detail::random_unit_orthogonal(rng, dim, {});
        if (orthogonal) basis.push_back(center);
        spec.clusters.push_back({"c" + std::to_string(c) + "_", size, std::move(center), spread});
    }
    return spec;
}

/// Each planted member is its center rotated by a uniform angle in [0, spread] toward
/// a random unit direction. With orthogonal centers that direction is orthogonal to
/// every center, so members have no component along other clusters' centers.
inline PlantedTable generate_table(const PlantedSpec& spec) {
    if (spec.dim < 2) throw ValidationError("dimension must be at least 2");
    if (spec.total() == 0) throw ValidationError("planted spec produces an empty table");
    std::vector<std::vector<double>> centers;
    for (const auto& c : spec.clusters) {
        if (c.center.size() != spec.dim) throw ValidationError("cluster center dimension mismatch for " + c.label_prefix);
        if (!(c.spread >= 0.0 && c.spread < std::numbers::pi / 4)) {
            throw ValidationError("cluster spread must lie in [0, pi/4) for " + c.label_prefix);
        }
        auto v = c.center;
        detail::normalize(v);
        centers.push_back(std::move(v));
    }
    if (spec.orthogonal_centers) {
        if (centers.size() + 1 > spec.dim) {
            throw CapacityError("dimension " + std::to_string(spec.dim) + " cannot hold " +
                                std::to_string(centers.size()) + " orthogonal centers plus a rotation direction");
        }
        for (std::size_t a = 0; a < centers.size(); ++a) {
            for (std::size_t b = a + 1; b < centers.size(); ++b) {
                if (std::abs(detail::dot(centers[a], centers[b])) > 1e-9) {
                    throw ValidationError("cluster centers are not orthogonal");
                }
            }
        }
    }

    PlantedTable out;
    std::vector<std::string> labels;
    std::vector<float> data;
    labels.reserve(spec.total());
    data.reserve(spec.total() * spec.dim);
    CounterRng rng(spec.seed, 2);
    for (std::size_t c = 0; c < spec.clusters.size(); ++c) {
        const auto& cl = spec.clusters[c];
        const auto& center = centers[c];
        const std::vector<std::vector<double>> avoid =
            spec.orthogonal_centers ? centers : std::vector<std::vector<double>>{center};
        auto& names = out.truth[cl.label_prefix];
        auto& ids = out.members.emplace_back();
        for (std::size_t i = 0; i < cl.size; ++i) {
            const auto dir = detail::random_unit_orthogonal(rng, spec.dim, avoid);
            const double theta = cl.spread * rng.uniform();
            const double cs = std::cos(theta);
            const double sn = std::sin(theta);
            for (std::size_t k = 0; k < spec.dim; ++k) data.push_back(static_cast<float>(cs * center[k] + sn * dir[k]));
            ids.push_back(static_cast<NodeId>(labels.size()));
            labels.push_back(cl.label_prefix + std::to_string(i));
            names.push_back(labels.back());
        }
    }
    for (std::size_t i = 0; i < spec.background; ++i) {
        auto v = rng.gaussian_vector(spec.dim);
        detail::normalize(v);
        for (double x : v) data.push_back(static_cast<float>(x));
        labels.push_back("bg_" + std::to_string(i));
    }
    out.table = EmbeddingTable::from_rows(std::move(labels), std::move(data), spec.dim);
    return out;
}

/// Synthetic prompt of `length` tokens. Each token carries one cluster's center with weight
/// in [0.5, 1], a second cluster with weight in [0, 0.5] on every other token, noise
/// orthogonal to all centers, and an overall magnitude in [0.5, 2].
inline PromptEmbedding make_mixed_prompt(const PlantedSpec& spec, std::size_t length, std::uint64_t seed) {
    if (spec.clusters.empty()) throw ValidationError("mixed prompts need at least one planted cluster");
    std::vector<std::vector<double>> centers;
    for (const auto& c : spec.clusters) centers.push_back(c.center);
    CounterRng rng(seed, 3);
    std::vector<float> data;
    data.reserve(length * spec.dim);
    const std::size_t k = centers.size();
    for (std::size_t i = 0; i < length; ++i) {
        auto noise = detail::random_unit_orthogonal(rng, spec.dim, spec.orthogonal_centers ? centers : std::vector<std::vector<double>>{});
        std::vector<double> v(spec.dim, 0.0);
        const std::size_t primary = i % k;
        const double a = 0.5 + 0.5 * rng.uniform();
        for (std::size_t c = 0; c < spec.dim; ++c) v[c] += a * centers[primary][c] + 0.3 * noise[c];
        if (k > 1 && i % 2 == 1) {
            const std::size_t secondary = (primary + 1 + static_cast<std::size_t>(rng.uniform() * static_cast<double>(k - 1))) % k;
            const double b = 0.5 * rng.uniform();
            for (std::size_t c = 0; c < spec.dim; ++c) v[c] += b * centers[secondary][c];
        }
        const double scale = 0.5 + 1.5 * rng.uniform();
        for (double x : v) data.push_back(static_cast<float>(scale * x));
    }
    return PromptEmbedding::from_rows(std::move(data), spec.dim);
}

/// Embedding-space stand-ins for erasure effectiveness and preservation: relative drop in
/// mean |<token, target center>| and the largest change of |<token, other center>|.
inline ProxyMetrics proxy_metrics(const PromptEmbedding& before, const ErasureResult& after, const PlantedSpec& spec,
                                  std::size_t target_cluster) {
    if (target_cluster >= spec.clusters.size()) {
        throw ValidationError("unknown cluster id " + std::to_string(target_cluster));
    }
    if (before.dim != spec.dim || after.edited.dim != spec.dim || before.length() != after.edited.length()) {
        throw ValidationError("prompt dimensions do not match the planted spec");
    }
    auto project = [](std::span<const float> p, const std::vector<double>& c) {
        double s = 0.0;
        for (std::size_t k = 0; k < c.size(); ++k) s += static_cast<double>(p[k]) * c[k];
        return std::abs(s);
    };
    ProxyMetrics m;
    double before_sum = 0.0;
    double after_sum = 0.0;
    const auto& target = spec.clusters[target_cluster].center;
    for (std::size_t i = 0; i < before.length(); ++i) {
        before_sum += project(before.token(i), target);
        after_sum += project(after.edited.token(i), target);
        for (std::size_t u = 0; u < spec.clusters.size(); ++u) {
            if (u == target_cluster) continue;
            const auto& c = spec.clusters[u].center;
            m.offtarget_drift = std::max(m.offtarget_drift, std::abs(project(after.edited.token(i), c) - project(before.token(i), c)));
        }
    }
    m.target_similarity_drop = before_sum > 0.0 ? std::max(0.0, 1.0 - after_sum / before_sum) : 0.0;
    for (char s : after.skipped) m.skipped_tokens += s ? 1 : 0;
    return m;
}

struct BenchReport {
    std::size_t node_count = 0;
    std::size_t dim = 0;
    std::size_t edge_count = 0;
    std::size_t concepts = 0;
    std::size_t prompt_length = 0;
    std::size_t repeats = 0;
    double build_ms = 0.0;
    double per_concept_cluster_ms = 0.0;
    double per_prompt_erase_ms = 0.0;
    double cluster_erase_ms = 0.0;
    double total_ms = 0.0;
    std::uint64_t output_checksum = 0;  // edited prompt + cluster members; identical across repeats
    std::string cpu_model;
    unsigned hardware_threads = 0;
    int worker_threads = 1;
    std::string compiler;
};

struct BenchOptions {
    std::size_t concepts = 10;
    std::size_t repeats = 3;
    std::size_t prompt_length = 77;
    std::uint64_t prompt_seed = 7;
    GraphParams graph;
    ClusterParams cluster;
    ErasureParams erasure;
};

namespace detail {

inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

inline std::string cpu_model() {
    std::ifstream in("/proc/cpuinfo");
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("model name", 0) == 0) {
            const auto colon = line.find(':');
            if (colon != std::string::npos) return std::string(trim(std::string_view(line).substr(colon + 1)));
        }
    }
    return "unknown";
}

inline double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace detail

/// Times graph construction, then cluster identification for `concepts` targets (anchors are
/// the first member of each planted cluster, cycling) and erasure of one mixed prompt.
/// Reports medians over `repeats` runs.
inline BenchReport bench_pipeline(const PlantedSpec& spec, const BenchOptions& opt) {
    if (opt.repeats < 3) throw ValidationError("bench needs at least 3 repeats, got " + std::to_string(opt.repeats));
    if (opt.concepts > 0 && spec.clusters.empty()) throw ValidationError("bench concepts need planted clusters");
    const auto planted = generate_table(spec);
    const auto table = std::make_shared<EmbeddingTable>(planted.table);
    const PromptEmbedding prompt = opt.concepts > 0 ? make_mixed_prompt(spec, opt.prompt_length, opt.prompt_seed)
                                                    : PromptEmbedding{};

    BenchReport r;
    r.node_count = table->count();
    r.dim = table->dim();
    r.concepts = opt.concepts;
    r.prompt_length = opt.concepts > 0 ? prompt.length() : 0;
    r.repeats = opt.repeats;
    r.cpu_model = detail::cpu_model();
    r.hardware_threads = std::thread::hardware_concurrency();
#ifdef _OPENMP
    r.worker_threads = omp_get_max_threads();
#endif
    r.compiler = __VERSION__;

    std::vector<double> build, cluster, erase_t, total;
    for (std::size_t rep = 0; rep < opt.repeats; ++rep) {
        auto t0 = std::chrono::steady_clock::now();
        SemanticGraph g = build_graph(table, opt.graph);
        const double b = detail::elapsed_ms(t0);
        r.edge_count = g.edge_count();
        double c_ms = 0.0;
        double e_ms = 0.0;
        std::uint64_t checksum = 0;
        if (opt.concepts > 0) {
            std::vector<ConceptSpec> concepts;
            for (std::size_t k = 0; k < opt.concepts; ++k) {
                const auto& ids = planted.members[k % planted.members.size()];
                if (ids.empty()) throw ValidationError("bench concept cluster is empty");
                concepts.push_back({table->label(ids.front()), std::nullopt});
            }
            t0 = std::chrono::steady_clock::now();
            const auto plan = erase_plan(g, concepts, opt.cluster);
            c_ms = detail::elapsed_ms(t0);
            t0 = std::chrono::steady_clock::now();
            const auto result = erase(prompt, plan, g, opt.erasure);
            e_ms = detail::elapsed_ms(t0);
            detail::Fnv1a h;
            for (float x : result.edited.tokens) h.update_value(x);
            for (const auto& c : plan) {
                for (NodeId m : c.members) h.update_value(m);
            }
            checksum = h.digest();
        }
        if (rep > 0 && checksum != r.output_checksum) throw IntegrityError("bench outputs differ between repeats");
        r.output_checksum = checksum;
        build.push_back(b);
        cluster.push_back(c_ms);
        erase_t.push_back(e_ms);
        total.push_back(b + c_ms + e_ms);
    }
    r.build_ms = detail::median(build);
    r.per_concept_cluster_ms = opt.concepts > 0 ? detail::median(cluster) / static_cast<double>(opt.concepts) : 0.0;
    r.per_prompt_erase_ms = detail::median(erase_t);
    std::vector<double> ce;
    for (std::size_t i = 0; i < cluster.size(); ++i) ce.push_back(cluster[i] + erase_t[i]);
    r.cluster_erase_ms = detail::median(ce);
    r.total_ms = detail::median(total);
    return r;
}

}  // namespace groce

#endif  // GROCE_SYNTHLAB_HPP
