#ifndef GROCE_CONFIG_HPP
#define GROCE_CONFIG_HPP

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "groce/clusterid.hpp"
#include "groce/embedstore.hpp"
#include "groce/eraser.hpp"
#include "groce/errors.hpp"
#include "groce/semgraph.hpp"

namespace groce {

/// Every tunable of a run. Built-in defaults, overridden by a config file, overridden by flags.
struct RunConfig {
    GraphParams graph;
    ClusterParams cluster;
    ErasureParams erasure;
    unsigned thread_count = 0;  // 0: library default
    std::string embeddings;
    std::string graph_path;

    void validate() const {
        graph.validate();
        cluster.validate();
        erasure.validate();
    }
};

namespace detail {

inline double parse_config_double(const std::string& key, std::string_view value, std::size_t line) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw ParseError("invalid number for " + key + ": \"" + std::string(value) + "\"", line);
    }
    return v;
}

inline std::uint32_t parse_config_uint(const std::string& key, std::string_view value, std::size_t line) {
    std::uint32_t v = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw ParseError("invalid integer for " + key + ": \"" + std::string(value) + "\"", line);
    }
    return v;
}

}  // namespace detail

/// Applies `key = value` lines onto `cfg`. Blank lines and `#` comments are ignored;
/// unknown keys are rejected.
inline void apply_config(std::istream& in, RunConfig& cfg) {
    using Setter = std::function<void(const std::string&, std::string_view, std::size_t)>;
    const auto real = [](double& slot) -> Setter {
        return [&slot](const std::string& k, std::string_view v, std::size_t l) { slot = detail::parse_config_double(k, v, l); };
    };
    const auto whole = [](std::uint32_t& slot) -> Setter {
        return [&slot](const std::string& k, std::string_view v, std::size_t l) { slot = detail::parse_config_uint(k, v, l); };
    };
    const std::map<std::string, Setter> setters{
        {"tau0", real(cfg.graph.tau0)},
        {"sigma", real(cfg.graph.sigma)},
        {"lambda", real(cfg.graph.lambda)},
        {"n", whole(cfg.cluster.radius)},
        {"K", whole(cfg.cluster.top_k)},
        {"t", real(cfg.cluster.t)},
        {"tol", real(cfg.cluster.tol)},
        {"sigma_p", real(cfg.erasure.sigma_p)},
        {"attach_threshold",
         [&cfg](const std::string& k, std::string_view v, std::size_t l) {
             cfg.erasure.attach_threshold = detail::parse_config_double(k, v, l);
         }},
        {"passes", whole(cfg.erasure.passes)},
        {"thread_count",
         [&cfg](const std::string& k, std::string_view v, std::size_t l) {
             cfg.thread_count = detail::parse_config_uint(k, v, l);
         }},
        {"embeddings", [&cfg](const std::string&, std::string_view v, std::size_t) { cfg.embeddings = std::string(v); }},
        {"graph", [&cfg](const std::string&, std::string_view v, std::size_t) { cfg.graph_path = std::string(v); }},
    };
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto body = detail::trim(line);
        if (body.empty() || body.front() == '#') continue;
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) throw ParseError("expected key=value", line_no);
        const std::string key(detail::trim(body.substr(0, eq)));
        const auto value = detail::trim(body.substr(eq + 1));
        auto it = setters.find(key);
        if (it == setters.end()) throw ParseError("unknown config key \"" + key + "\"", line_no);
        it->second(key, value, line_no);
    }
}

inline void apply_config_file(const std::string& path, RunConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw IoError("file not found", path);
    apply_config(in, cfg);
}

/// Effective configuration as key=value lines, in the config file's own syntax.
inline std::string describe_config(const RunConfig& cfg) {
    std::ostringstream out;
    out.precision(17);
    out << "tau0=" << cfg.graph.tau0 << "\nsigma=" << cfg.graph.sigma << "\nlambda=" << cfg.graph.lambda
        << "\nn=" << cfg.cluster.radius << "\nK=" << cfg.cluster.top_k << "\nt=" << cfg.cluster.t
        << "\ntol=" << cfg.cluster.tol << "\nsigma_p=" << cfg.erasure.sigma_p << '\n';
    if (cfg.erasure.attach_threshold) {
        out << "attach_threshold=" << *cfg.erasure.attach_threshold << '\n';
    } else {
        out << "# attach_threshold follows tau0\n";
    }
    out << "passes=" << cfg.erasure.passes << "\nthread_count=" << cfg.thread_count << '\n';
    if (!cfg.embeddings.empty()) out << "embeddings=" << cfg.embeddings << '\n';
    if (!cfg.graph_path.empty()) out << "graph=" << cfg.graph_path << '\n';
    return out.str();
}

}  // namespace groce

#endif  // GROCE_CONFIG_HPP
