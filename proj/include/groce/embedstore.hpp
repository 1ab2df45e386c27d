#ifndef GROCE_EMBEDSTORE_HPP
#define GROCE_EMBEDSTORE_HPP

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "groce/binary_io.hpp"
#include "groce/errors.hpp"

namespace groce {

using NodeId = std::uint32_t;

enum class TableFormat { text, binary };

inline constexpr std::string_view kTableMagic = "GROCEEMB";
inline constexpr std::string_view kPromptMagic = "GROCEPRM";
inline constexpr std::uint32_t kFormatVersion = 1;

/// 64-bit dot product of two equally sized float rows.
inline double dot(std::span<const float> a, std::span<const float> b) {
    double acc = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) acc += static_cast<double>(a[k]) * static_cast<double>(b[k]);
    return acc;
}

inline double norm(std::span<const float> a) { return std::sqrt(dot(a, a)); }

/// Scales `v` to unit L2 norm in place. Throws on a zero (or non-finite) vector.
inline void normalize_in_place(std::span<float> v) {
    const double n = norm(v);
    if (!(n > 0.0) || !std::isfinite(n)) throw ValidationError("cannot normalize zero or non-finite vector");
    for (float& x : v) x = static_cast<float>(static_cast<double>(x) / n);
}

/// Vocabulary embeddings: M labelled unit-norm rows of dimension D, stored row-major in f32.
class EmbeddingTable {
public:
    EmbeddingTable() = default;

    /// Builds a table from raw rows; every row is renormalized.
    static EmbeddingTable from_rows(std::vector<std::string> labels, std::vector<float> data, std::size_t dim) {
        if (dim < 2) throw ValidationError("embedding dimension must be at least 2, got " + std::to_string(dim));
        if (labels.empty()) throw ValidationError("embedding table must contain at least one row");
        if (data.size() != labels.size() * dim) {
            throw ValidationError("payload holds " + std::to_string(data.size()) + " values, expected " +
                                  std::to_string(labels.size() * dim));
        }
        EmbeddingTable t;
        t.dim_ = dim;
        t.labels_.reserve(labels.size());
        t.data_ = std::move(data);
        for (std::size_t i = 0; i < labels.size(); ++i) {
            try {
                normalize_in_place(t.mutable_row(i));
            } catch (const ValidationError&) {
                throw ValidationError("zero vector for label \"" + labels[i] + "\"");
            }
            t.register_label(std::move(labels[i]));
        }
        return t;
    }

    std::size_t count() const noexcept { return labels_.size(); }
    std::size_t dim() const noexcept { return dim_; }

    std::span<const float> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
    const std::string& label(std::size_t i) const { return labels_[i]; }
    const std::vector<std::string>& labels() const noexcept { return labels_; }
    const std::vector<float>& data() const noexcept { return data_; }

    std::optional<NodeId> find(std::string_view label) const {
        auto it = index_.find(std::string(label));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    NodeId index_of(std::string_view label) const {
        if (auto id = find(label)) return *id;
        throw ResolutionError("unknown label \"" + std::string(label) + "\"");
    }

    /// Appends a normalized copy of `vector` and returns its row index.
    NodeId append(std::string label, std::span<const float> vector) {
        if (vector.size() != dim_) {
            throw ValidationError("vector dimension " + std::to_string(vector.size()) + " does not match table dimension " +
                                  std::to_string(dim_));
        }
        if (index_.count(label) != 0) throw ValidationError("duplicate label \"" + label + "\"");
        std::vector<float> v(vector.begin(), vector.end());
        normalize_in_place(v);
        data_.insert(data_.end(), v.begin(), v.end());
        register_label(std::move(label));
        return static_cast<NodeId>(count() - 1);
    }

    /// FNV-1a over M, D, labels and the f32 payload bits.
    std::uint64_t content_hash() const {
        detail::Fnv1a h;
        h.update_value(static_cast<std::uint64_t>(count()));
        h.update_value(static_cast<std::uint64_t>(dim_));
        for (const auto& l : labels_) {
            h.update_value(static_cast<std::uint64_t>(l.size()));
            h.update(l.data(), l.size());
        }
        for (float x : data_) h.update_value(x);
        return h.digest();
    }

private:
    std::span<float> mutable_row(std::size_t i) { return {data_.data() + i * dim_, dim_}; }

    void register_label(std::string label) {
        auto [it, inserted] = index_.emplace(label, static_cast<NodeId>(labels_.size()));
        if (!inserted) throw ValidationError("duplicate label \"" + label + "\"");
        labels_.push_back(std::move(label));
    }

    std::size_t dim_ = 0;
    std::vector<std::string> labels_;
    std::vector<float> data_;
    std::unordered_map<std::string, NodeId> index_;
};

/// Ordered prompt-token vectors (L x D). Magnitudes are kept as given.
struct PromptEmbedding {
    std::size_t dim = 0;
    std::vector<float> tokens;
    std::vector<std::string> source_labels;  // empty when unknown

    std::size_t length() const noexcept { return dim == 0 ? 0 : tokens.size() / dim; }
    std::span<const float> token(std::size_t i) const { return {tokens.data() + i * dim, dim}; }
    std::span<float> token(std::size_t i) { return {tokens.data() + i * dim, dim}; }

    static PromptEmbedding from_rows(std::vector<float> data, std::size_t dim) {
        if (dim == 0 || data.empty() || data.size() % dim != 0) {
            throw ValidationError("prompt payload of " + std::to_string(data.size()) +
                                  " values is not a positive multiple of dimension " + std::to_string(dim));
        }
        return PromptEmbedding{dim, std::move(data), {}};
    }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        if (i == line.size()) break;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
        out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

inline float parse_float(std::string_view field, std::size_t line) {
    float v = 0.0f;
    const auto* first = field.data();
    const auto* last = field.data() + field.size();
    if (!field.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
        throw ParseError("invalid number \"" + std::string(field) + "\"", line);
    }
    return v;
}

inline EmbeddingTable parse_text_table(std::istream& in) {
    std::vector<std::string> labels;
    std::vector<float> data;
    std::size_t dim = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto body = trim(line);
        if (body.empty() || body.front() == '#') continue;
        const auto fields = split_fields(body);
        if (dim == 0) {
            if (fields.size() < 3) throw ParseError("row needs a label and at least 2 components", line_no);
            dim = fields.size() - 1;
        } else if (fields.size() != dim + 1) {
            throw ParseError("expected " + std::to_string(dim + 1) + " fields, found " + std::to_string(fields.size()),
                             line_no);
        }
        labels.emplace_back(fields[0]);
        for (std::size_t k = 1; k < fields.size(); ++k) data.push_back(parse_float(fields[k], line_no));
    }
    if (labels.empty()) throw ValidationError("embedding table is empty");
    return EmbeddingTable::from_rows(std::move(labels), std::move(data), dim);
}

inline EmbeddingTable parse_binary_table(ByteReader& r) {
    r.expect_magic(kTableMagic, "embedding table");
    const auto version = r.get<std::uint32_t>("version");
    if (version != kFormatVersion) throw FormatError("unsupported embedding table version " + std::to_string(version));
    const auto m = r.get<std::uint32_t>("row count");
    const auto d = r.get<std::uint32_t>("dimension");
    std::vector<std::string> labels;
    labels.reserve(m);
    for (std::uint32_t i = 0; i < m; ++i) {
        const auto len = r.get<std::uint16_t>("label length");
        labels.push_back(r.get_string(len, "label"));
    }
    const std::size_t expected = static_cast<std::size_t>(m) * d * sizeof(float);
    if (r.remaining() != expected) {
        throw FormatError("embedding payload size mismatch: expected " + std::to_string(expected) + " bytes, found " +
                          std::to_string(r.remaining()));
    }
    auto data = r.get_array<float>(static_cast<std::size_t>(m) * d, "embedding payload");
    return EmbeddingTable::from_rows(std::move(labels), std::move(data), d);
}

}  // namespace detail

inline EmbeddingTable load_table(const std::string& path, TableFormat format) {
    if (format == TableFormat::text) {
        std::ifstream in(path);
        if (!in) throw IoError("file not found", path);
        return detail::parse_text_table(in);
    }
    auto reader = detail::ByteReader::from_file(path);
    return detail::parse_binary_table(reader);
}

inline void save_table(const EmbeddingTable& table, const std::string& path, TableFormat format) {
    if (format == TableFormat::text) {
        std::ofstream out(path, std::ios::trunc);
        if (!out) throw IoError("cannot open for writing", path);
        char buf[32];
        for (std::size_t i = 0; i < table.count(); ++i) {
            out << table.label(i);
            for (float x : table.row(i)) {
                std::snprintf(buf, sizeof buf, " %.9g", static_cast<double>(x));
                out << buf;
            }
            out << '\n';
        }
        if (!out) throw IoError("write failed", path);
        return;
    }
    detail::ByteWriter w;
    w.raw(kTableMagic);
    w.put<std::uint32_t>(kFormatVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(table.count()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(table.dim()));
    for (const auto& l : table.labels()) {
        if (l.size() > UINT16_MAX) throw ValidationError("label too long for binary format: " + l.substr(0, 32));
        w.put<std::uint16_t>(static_cast<std::uint16_t>(l.size()));
        w.raw(l);
    }
    w.put_array(table.data());
    w.write_file(path);
}

inline PromptEmbedding load_prompt(const std::string& path) {
    auto r = detail::ByteReader::from_file(path);
    r.expect_magic(kPromptMagic, "prompt");
    const auto version = r.get<std::uint32_t>("version");
    if (version != kFormatVersion) throw FormatError("unsupported prompt version " + std::to_string(version));
    const auto len = r.get<std::uint32_t>("token count");
    const auto d = r.get<std::uint32_t>("dimension");
    if (len == 0) throw FormatError("prompt must contain at least one token");
    if (d == 0) throw FormatError("prompt dimension must be positive");
    const std::size_t expected = static_cast<std::size_t>(len) * d * sizeof(float);
    if (r.remaining() != expected) {
        throw FormatError("prompt payload size mismatch: expected " + std::to_string(expected) + " bytes, found " +
                          std::to_string(r.remaining()));
    }
    return PromptEmbedding::from_rows(r.get_array<float>(static_cast<std::size_t>(len) * d, "prompt payload"), d);
}

inline void save_prompt(const PromptEmbedding& prompt, const std::string& path) {
    detail::ByteWriter w;
    w.raw(kPromptMagic);
    w.put<std::uint32_t>(kFormatVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(prompt.length()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(prompt.dim));
    w.put_array(prompt.tokens);
    w.write_file(path);
}

inline TableFormat parse_table_format(std::string_view name) {
    if (name == "text" || name == "txt") return TableFormat::text;
    if (name == "binary" || name == "bin") return TableFormat::binary;
    throw ValidationError("unknown table format \"" + std::string(name) + "\" (expected text or binary)");
}

/// Picks binary for files starting with the table magic, text otherwise.
inline TableFormat sniff_table_format(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("file not found", path);
    char magic[8] = {};
    in.read(magic, sizeof magic);
    if (in.gcount() == 8 && std::string_view(magic, 8) == kTableMagic) return TableFormat::binary;
    return TableFormat::text;
}

}  // namespace groce

#endif  // GROCE_EMBEDSTORE_HPP
