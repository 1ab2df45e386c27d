#ifndef GROCE_SEMGRAPH_HPP
#define GROCE_SEMGRAPH_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "groce/binary_io.hpp"
#include "groce/embedstore.hpp"
#include "groce/errors.hpp"

namespace groce {

inline constexpr std::string_view kGraphMagic = "GROCEGRF";

/// Edge-construction parameters: base threshold, weight sharpness and adaptive gain.
struct GraphParams {
    double tau0 = 0.3;
    double sigma = 0.1;
    double lambda = 0.5;

    void validate() const {
        if (!(tau0 > 0.0 && tau0 < 1.0)) throw ValidationError("tau0 must lie in (0,1), got " + std::to_string(tau0));
        if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ValidationError("sigma must be > 0, got " + std::to_string(sigma));
        if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
            throw ValidationError("lambda must be >= 0, got " + std::to_string(lambda));
        }
    }

    friend bool operator==(const GraphParams&, const GraphParams&) = default;
};

/// Base-threshold test on an f32 similarity. Comparing against tau0 rounded to f32 keeps
/// the strict inequality exact at the boundary (a similarity equal to tau0 never links).
inline bool exceeds_base_threshold(float similarity, double tau0) { return similarity > static_cast<float>(tau0); }

/// Soft edge weight exp((s - tau0) / sigma) for a similarity above the base threshold.
/// The f32 result is kept strictly above 1 so that every stored edge reads as W > 1.
inline float edge_weight(float similarity, const GraphParams& p) {
    const double w = std::exp((static_cast<double>(similarity) - p.tau0) / p.sigma);
    return std::max(static_cast<float>(w), std::nextafter(1.0f, 2.0f));
}

struct DegreeStats {
    double mean_degree = 0.0;
    std::size_t max_degree = 0;
    std::size_t edge_count = 0;
    std::size_t isolated_count = 0;
};

/// Undirected similarity graph over an embedding table, stored as CSR with ascending
/// column ids per row. Each undirected edge appears once in each endpoint's row.
class SemanticGraph {
public:
    SemanticGraph() = default;

    std::size_t node_count() const noexcept { return mean_.size(); }
    std::size_t edge_count() const noexcept { return cols_.size() / 2; }
    const GraphParams& params() const noexcept { return params_; }

    const EmbeddingTable& table() const { return *table_; }
    const std::shared_ptr<EmbeddingTable>& table_ptr() const noexcept { return table_; }
    std::uint64_t source_hash() const noexcept { return source_hash_; }

    std::size_t degree(NodeId i) const { return static_cast<std::size_t>(offsets_[i + 1] - offsets_[i]); }
    std::span<const NodeId> neighbors(NodeId i) const { return {cols_.data() + offsets_[i], degree(i)}; }
    std::span<const float> weights(NodeId i) const { return {weights_.data() + offsets_[i], degree(i)}; }
    std::span<const float> similarities(NodeId i) const { return {sims_.data() + offsets_[i], degree(i)}; }

    /// Neighborhood mean similarity and standard deviation from the base-threshold pass.
    double neighborhood_mean(NodeId i) const { return mean_[i]; }
    double neighborhood_stddev(NodeId i) const { return stddev_[i]; }

    /// Adaptive threshold tau0 + lambda * stddev_i.
    double node_threshold(NodeId i) const { return params_.tau0 + params_.lambda * stddev_[i]; }

    /// Weight of edge (i, j), or 0 when absent.
    float weight(NodeId i, NodeId j) const {
        const auto nb = neighbors(i);
        auto it = std::lower_bound(nb.begin(), nb.end(), j);
        if (it == nb.end() || *it != j) return 0.0f;
        return weights_[offsets_[i] + static_cast<std::size_t>(it - nb.begin())];
    }

    const std::vector<std::uint64_t>& offsets() const noexcept { return offsets_; }
    const std::vector<NodeId>& columns() const noexcept { return cols_; }
    const std::vector<float>& weight_array() const noexcept { return weights_; }
    const std::vector<float>& similarity_array() const noexcept { return sims_; }

private:
    friend SemanticGraph build_graph(std::shared_ptr<EmbeddingTable>, const GraphParams&);
    friend NodeId insert_node(SemanticGraph&, std::string, std::span<const float>);
    friend SemanticGraph load_graph(const std::string&, std::shared_ptr<EmbeddingTable>);

    std::shared_ptr<EmbeddingTable> table_;
    GraphParams params_;
    std::uint64_t source_hash_ = 0;
    std::vector<double> mean_;
    std::vector<double> stddev_;
    std::vector<std::uint64_t> offsets_{0};
    std::vector<NodeId> cols_;
    std::vector<float> weights_;
    std::vector<float> sims_;
};

namespace detail {

struct Candidate {
    NodeId i;
    NodeId j;
    float sim;
};

inline constexpr std::size_t kSimilarityTile = 256;

/// All pairs i < j with f32-rounded similarity above tau0, in lexicographic order.
/// Row tiles are multiplied against the remaining table in f64; the M x M matrix is never formed.
inline std::vector<Candidate> threshold_pairs(const EmbeddingTable& table, double tau0) {
    using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const auto m = static_cast<Eigen::Index>(table.count());
    const auto d = static_cast<Eigen::Index>(table.dim());
    const RowMatrix x = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                            table.data().data(), m, d)
                            .cast<double>();
    const auto tile = static_cast<Eigen::Index>(kSimilarityTile);
    const Eigen::Index tiles = (m + tile - 1) / tile;
    std::vector<std::vector<Candidate>> per_tile(static_cast<std::size_t>(tiles));

#pragma omp parallel for schedule(dynamic, 1)
    for (Eigen::Index t = 0; t < tiles; ++t) {
        const Eigen::Index i0 = t * tile;
        const Eigen::Index bi = std::min(tile, m - i0);
        auto& out = per_tile[static_cast<std::size_t>(t)];
        Eigen::MatrixXd block;
        for (Eigen::Index j0 = i0; j0 < m; j0 += 4 * tile) {
            const Eigen::Index bj = std::min(4 * tile, m - j0);
            block.noalias() = x.middleRows(i0, bi) * x.middleRows(j0, bj).transpose();
            for (Eigen::Index a = 0; a < bi; ++a) {
                const Eigen::Index i = i0 + a;
                for (Eigen::Index b = std::max<Eigen::Index>(0, i + 1 - j0); b < bj; ++b) {
                    const auto s = static_cast<float>(block(a, b));
                    if (exceeds_base_threshold(s, tau0)) {
                        out.push_back({static_cast<NodeId>(i), static_cast<NodeId>(j0 + b), s});
                    }
                }
            }
        }
        std::sort(out.begin(), out.end(),
                  [](const Candidate& l, const Candidate& r) { return std::tie(l.i, l.j) < std::tie(r.i, r.j); });
    }

    std::size_t total = 0;
    for (const auto& v : per_tile) total += v.size();
    std::vector<Candidate> all;
    all.reserve(total);
    for (auto& v : per_tile) all.insert(all.end(), v.begin(), v.end());
    return all;
}

/// Population mean and standard deviation of `values`; (0, 0) when empty.
inline std::pair<double, double> mean_stddev(std::span<const float> values) {
    if (values.empty()) return {0.0, 0.0};
    double sum = 0.0;
    for (float v : values) sum += v;
    const double mean = sum / static_cast<double>(values.size());
    double ss = 0.0;
    for (float v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / static_cast<double>(values.size()))};
}

}  // namespace detail

/// Two-pass construction. Pass 1 links every pair whose similarity exceeds tau0 and
/// derives per-node neighborhood statistics; pass 2 keeps an edge only if its
/// similarity exceeds both endpoints' adaptive thresholds.
inline SemanticGraph build_graph(std::shared_ptr<EmbeddingTable> table, const GraphParams& params) {
    params.validate();
    if (!table || table->count() == 0) throw ValidationError("cannot build a graph over an empty table");
    const std::size_t n = table->count();
    const auto pairs = detail::threshold_pairs(*table, params.tau0);

    // Pass-1 adjacency, used only for neighborhood statistics.
    std::vector<std::uint64_t> off(n + 1, 0);
    for (const auto& c : pairs) {
        ++off[c.i + 1];
        ++off[c.j + 1];
    }
    for (std::size_t i = 0; i < n; ++i) off[i + 1] += off[i];
    std::vector<float> pass1(off[n]);
    {
        std::vector<std::uint64_t> cursor(off.begin(), off.end() - 1);
        for (const auto& c : pairs) {
            pass1[cursor[c.i]++] = c.sim;
            pass1[cursor[c.j]++] = c.sim;
        }
    }

    SemanticGraph g;
    g.table_ = std::move(table);
    g.params_ = params;
    g.source_hash_ = g.table_->content_hash();
    g.mean_.resize(n);
    g.stddev_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::tie(g.mean_[i], g.stddev_[i]) =
            detail::mean_stddev(std::span<const float>(pass1.data() + off[i], off[i + 1] - off[i]));
    }

    std::vector<detail::Candidate> kept;
    kept.reserve(pairs.size());
    for (const auto& c : pairs) {
        const double bar = std::max(g.node_threshold(c.i), g.node_threshold(c.j));
        if (static_cast<double>(c.sim) > bar) kept.push_back(c);
    }

    g.offsets_.assign(n + 1, 0);
    for (const auto& c : kept) {
        ++g.offsets_[c.i + 1];
        ++g.offsets_[c.j + 1];
    }
    for (std::size_t i = 0; i < n; ++i) g.offsets_[i + 1] += g.offsets_[i];
    const auto nnz = static_cast<std::size_t>(g.offsets_[n]);
    g.cols_.resize(nnz);
    g.weights_.resize(nnz);
    g.sims_.resize(nnz);
    // Lexicographic pair order fills every row in ascending column order.
    std::vector<std::uint64_t> cursor(g.offsets_.begin(), g.offsets_.end() - 1);
    for (const auto& c : kept) {
        const float w = edge_weight(c.sim, params);
        for (auto [row, col] : {std::pair{c.i, c.j}, std::pair{c.j, c.i}}) {
            const auto at = cursor[row]++;
            g.cols_[at] = col;
            g.weights_[at] = w;
            g.sims_[at] = c.sim;
        }
    }
    return g;
}

inline SemanticGraph build_graph(EmbeddingTable table, const GraphParams& params) {
    return build_graph(std::make_shared<EmbeddingTable>(std::move(table)), params);
}

/// Appends a node for `vector` (normalized) and updates the graph to exactly what a full
/// rebuild on the enlarged table would produce. Only the new node and its base-threshold
/// neighbors see their statistics change, so only edges touching those nodes are re-filtered.
/// Requires exclusive access.
inline NodeId insert_node(SemanticGraph& g, std::string label, std::span<const float> vector) {
    EmbeddingTable& table = *g.table_;
    const std::size_t n = g.node_count();
    const NodeId id = table.append(std::move(label), vector);
    const std::size_t total = n + 1;

    // Base-threshold neighborhood of one node over the enlarged table, ascending ids.
    auto pass1_row = [&](NodeId i) {
        std::vector<std::pair<NodeId, float>> out;
        const auto row = table.row(i);
        for (std::size_t j = 0; j < total; ++j) {
            if (j == i) continue;
            const auto s = static_cast<float>(dot(row, table.row(j)));
            if (exceeds_base_threshold(s, g.params_.tau0)) out.emplace_back(static_cast<NodeId>(j), s);
        }
        return out;
    };

    const auto fresh = pass1_row(id);
    std::vector<NodeId> affected;
    for (const auto& c : fresh) affected.push_back(c.first);
    affected.push_back(id);
    std::vector<char> is_affected(total, 0);
    for (NodeId a : affected) is_affected[a] = 1;

    std::vector<std::vector<std::pair<NodeId, float>>> rows(affected.size());
#pragma omp parallel for schedule(dynamic, 4)
    for (std::size_t k = 0; k < affected.size(); ++k) rows[k] = affected[k] == id ? fresh : pass1_row(affected[k]);

    g.mean_.push_back(0.0);
    g.stddev_.push_back(0.0);
    for (std::size_t k = 0; k < affected.size(); ++k) {
        std::vector<float> sims;
        sims.reserve(rows[k].size());
        for (const auto& c : rows[k]) sims.push_back(c.second);
        std::tie(g.mean_[affected[k]], g.stddev_[affected[k]]) = detail::mean_stddev(sims);
    }

    // Pass-2 filter of every edge touching an affected node; untouched rows gain entries
    // pointing at affected nodes.
    std::vector<std::vector<std::pair<NodeId, float>>> extra(total);
    for (std::size_t k = 0; k < affected.size(); ++k) {
        const NodeId a = affected[k];
        std::erase_if(rows[k], [&](const std::pair<NodeId, float>& c) {
            return !(static_cast<double>(c.second) > std::max(g.node_threshold(a), g.node_threshold(c.first)));
        });
        for (const auto& [b, s] : rows[k]) {
            if (!is_affected[b]) extra[b].emplace_back(a, s);
        }
    }
    std::vector<std::size_t> slot(total, 0);
    for (std::size_t k = 0; k < affected.size(); ++k) slot[affected[k]] = k;

    std::vector<std::uint64_t> offsets(total + 1, 0);
    std::vector<NodeId> cols;
    std::vector<float> weights;
    std::vector<float> simv;
    cols.reserve(g.cols_.size() + 2 * fresh.size());
    weights.reserve(cols.capacity());
    simv.reserve(cols.capacity());
    auto emit = [&](NodeId j, float s, float w) {
        cols.push_back(j);
        weights.push_back(w);
        simv.push_back(s);
    };
    for (std::size_t i = 0; i < total; ++i) {
        if (is_affected[i]) {
            for (const auto& [j, s] : rows[slot[i]]) emit(j, s, edge_weight(s, g.params_));
        } else {
            auto& add = extra[i];
            std::sort(add.begin(), add.end());
            auto it = add.begin();
            for (auto k = g.offsets_[i]; k < g.offsets_[i + 1]; ++k) {
                const NodeId j = g.cols_[k];
                if (is_affected[j]) continue;
                for (; it != add.end() && it->first < j; ++it) emit(it->first, it->second, edge_weight(it->second, g.params_));
                emit(j, g.sims_[k], g.weights_[k]);
            }
            for (; it != add.end(); ++it) emit(it->first, it->second, edge_weight(it->second, g.params_));
        }
        offsets[i + 1] = cols.size();
    }
    g.offsets_ = std::move(offsets);
    g.cols_ = std::move(cols);
    g.weights_ = std::move(weights);
    g.sims_ = std::move(simv);
    g.source_hash_ = table.content_hash();
    return id;
}

inline DegreeStats degree_stats(const SemanticGraph& g) {
    DegreeStats s;
    const std::size_t n = g.node_count();
    s.edge_count = g.edge_count();
    for (std::size_t i = 0; i < n; ++i) {
        const auto d = g.degree(static_cast<NodeId>(i));
        s.max_degree = std::max(s.max_degree, d);
        if (d == 0) ++s.isolated_count;
    }
    s.mean_degree = n == 0 ? 0.0 : 2.0 * static_cast<double>(s.edge_count) / static_cast<double>(n);
    return s;
}

/// Layout: magic, u32 version, u64 source-table hash, f64 tau0/sigma/lambda,
/// u32 node_count, f64 mean[n], f64 stddev[n], u64 offsets[n+1], u32 cols[nnz],
/// f32 weights[nnz], f32 similarities[nnz]. All little-endian.
inline void save_graph(const SemanticGraph& g, const std::string& path) {
    detail::ByteWriter w;
    w.raw(kGraphMagic);
    w.put<std::uint32_t>(kFormatVersion);
    w.put<std::uint64_t>(g.source_hash());
    w.put<double>(g.params().tau0);
    w.put<double>(g.params().sigma);
    w.put<double>(g.params().lambda);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(g.node_count()));
    std::vector<double> mean(g.node_count());
    std::vector<double> stddev(g.node_count());
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        mean[i] = g.neighborhood_mean(static_cast<NodeId>(i));
        stddev[i] = g.neighborhood_stddev(static_cast<NodeId>(i));
    }
    w.put_array(mean);
    w.put_array(stddev);
    w.put_array(g.offsets());
    w.put_array(g.columns());
    w.put_array(g.weight_array());
    w.put_array(g.similarity_array());
    w.write_file(path);
}

/// Reads the source-table hash recorded in a graph file without loading the rest.
inline std::uint64_t read_graph_source_hash(const std::string& path) {
    auto r = detail::ByteReader::from_file(path);
    r.expect_magic(kGraphMagic, "graph");
    const auto version = r.get<std::uint32_t>("version");
    if (version != kFormatVersion) throw FormatError("unsupported graph version " + std::to_string(version));
    return r.get<std::uint64_t>("source hash");
}

/// Loads a graph and binds it to `table`, which must be the table it was built from.
inline SemanticGraph load_graph(const std::string& path, std::shared_ptr<EmbeddingTable> table) {
    auto r = detail::ByteReader::from_file(path);
    r.expect_magic(kGraphMagic, "graph");
    const auto version = r.get<std::uint32_t>("version");
    if (version != kFormatVersion) throw FormatError("unsupported graph version " + std::to_string(version));
    SemanticGraph g;
    g.source_hash_ = r.get<std::uint64_t>("source hash");
    g.params_.tau0 = r.get<double>("tau0");
    g.params_.sigma = r.get<double>("sigma");
    g.params_.lambda = r.get<double>("lambda");
    const auto n = r.get<std::uint32_t>("node count");
    g.mean_ = r.get_array<double>(n, "node means");
    g.stddev_ = r.get_array<double>(n, "node deviations");
    g.offsets_ = r.get_array<std::uint64_t>(static_cast<std::size_t>(n) + 1, "row offsets");
    if (g.offsets_.front() != 0 || !std::is_sorted(g.offsets_.begin(), g.offsets_.end())) {
        throw FormatError("graph row offsets are not monotone");
    }
    const auto nnz = static_cast<std::size_t>(g.offsets_.back());
    g.cols_ = r.get_array<NodeId>(nnz, "column ids");
    g.weights_ = r.get_array<float>(nnz, "weights");
    g.sims_ = r.get_array<float>(nnz, "similarities");
    if (r.remaining() != 0) throw FormatError("trailing bytes after graph payload");
    for (NodeId c : g.cols_) {
        if (c >= n) throw FormatError("column id out of range");
    }
    try {
        g.params_.validate();
    } catch (const ValidationError& e) {
        throw FormatError(std::string("graph parameters invalid: ") + e.what());
    }
    if (!table) throw ValidationError("load_graph needs the source embedding table");
    const auto hash = table->content_hash();
    if (hash != g.source_hash_ || table->count() != n) {
        throw IntegrityError("embedding table does not match the graph's source table (hash mismatch)");
    }
    g.table_ = std::move(table);
    return g;
}

}  // namespace groce

#endif  // GROCE_SEMGRAPH_HPP
