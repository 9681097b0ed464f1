#pragma once

// Portable on-disk container for embedding matrices, per-layer traces and
// candidate-probability sets.
//
// Layout (all integers little-endian):
//
//   bytes 0..3   magic "EMB1"
//   bytes 4..7   uint32 header length H
//   next H bytes UTF-8 JSON header
//                  {version: 1, kind, dim, count, labels, sample_ids,
//                   payload: "f64le", [layers], [token_probs]}
//   remainder    count * dim IEEE-754 binary64 values, row-major
//
// `dim` is always the payload row width. For kind "layers" a row holds L
// concatenated layer vectors (dim = L * layer width, L stored as `layers`);
// for kind "candidates" a row holds the k joint sequence probabilities.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "gem/error.hpp"

namespace gem {

enum class Label { Id, Ood, Unknown };

inline std::string_view to_string(Label label) {
    switch (label) {
        case Label::Id: return "ID";
        case Label::Ood: return "OOD";
        case Label::Unknown: return "UNKNOWN";
    }
    return "UNKNOWN";
}

inline Label parse_label(std::string_view text) {
    if (text == "ID") return Label::Id;
    if (text == "OOD") return Label::Ood;
    if (text == "UNKNOWN") return Label::Unknown;
    throw ValidationError("unknown label '" + std::string(text) + "' (expected ID, OOD or UNKNOWN)");
}

enum class ContainerKind { Embeddings, Layers, Candidates };

inline std::string_view to_string(ContainerKind kind) {
    switch (kind) {
        case ContainerKind::Embeddings: return "embeddings";
        case ContainerKind::Layers: return "layers";
        case ContainerKind::Candidates: return "candidates";
    }
    return "embeddings";
}

inline ContainerKind parse_kind(std::string_view text) {
    if (text == "embeddings") return ContainerKind::Embeddings;
    if (text == "layers") return ContainerKind::Layers;
    if (text == "candidates") return ContainerKind::Candidates;
    throw FormatError("unknown container kind '" + std::string(text) + "'");
}

// Hidden representations y_1..y_L of one sample, layer-major.
struct LayerTrace {
    std::size_t layers = 0;
    std::size_t dim = 0;
    std::vector<double> reps;  // layers * dim

    std::span<const double> layer(std::size_t l) const {
        return std::span<const double>(reps).subspan(l * dim, dim);
    }
};

// k generated sequences of one sample: joint probabilities and, optionally,
// the per-token factors they were multiplied from.
struct CandidateSet {
    std::vector<double> seq_probs;
    std::optional<std::vector<std::vector<double>>> token_probs;
};

// A labeled count x dim matrix of finite doubles. Also carries layer traces
// and candidate sets, distinguished by `kind`.
struct EmbeddingSet {
    ContainerKind kind = ContainerKind::Embeddings;
    std::size_t dim = 0;
    std::size_t layers = 0;  // kind == Layers only
    std::vector<double> values;
    std::vector<Label> labels;
    std::vector<std::string> sample_ids;
    // kind == Candidates only: [sample][candidate][token]
    std::optional<std::vector<std::vector<std::vector<double>>>> token_probs;

    std::size_t count() const { return labels.size(); }

    std::span<const double> row(std::size_t i) const {
        return std::span<const double>(values).subspan(i * dim, dim);
    }

    std::size_t layer_dim() const { return layers == 0 ? dim : dim / layers; }

    void validate() const;
};

namespace detail {

inline std::string at_sample(std::size_t i) { return " (sample " + std::to_string(i) + ")"; }

inline bool close_relative(double a, double b, double rel) {
    return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b));
}

}  // namespace detail

inline void EmbeddingSet::validate() const {
    if (dim == 0) throw ValidationError("dim: must be >= 1");
    if (labels.empty()) throw ValidationError("count: must be >= 1");
    if (sample_ids.size() != labels.size())
        throw ValidationError("sample_ids: " + std::to_string(sample_ids.size()) +
                              " entries for count " + std::to_string(labels.size()));
    if (values.size() != labels.size() * dim)
        throw ValidationError("vectors: " + std::to_string(values.size()) +
                              " values, expected count*dim = " + std::to_string(labels.size() * dim));
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i]))
            throw ValidationError("vectors: non-finite value" + detail::at_sample(i / dim));
    }
    std::unordered_set<std::string_view> seen;
    seen.reserve(sample_ids.size());
    for (std::size_t i = 0; i < sample_ids.size(); ++i) {
        if (!seen.insert(sample_ids[i]).second)
            throw ValidationError("sample_ids: duplicate id '" + sample_ids[i] + "'" + detail::at_sample(i));
    }
    if (kind == ContainerKind::Layers) {
        if (layers == 0) throw ValidationError("layers: must be >= 1");
        if (dim % layers != 0)
            throw ValidationError("layers: row width " + std::to_string(dim) + " not divisible by L = " +
                                  std::to_string(layers));
    } else if (layers != 0) {
        throw ValidationError("layers: only valid for kind 'layers'");
    }
    if (kind == ContainerKind::Candidates) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (!(values[i] > 0.0 && values[i] <= 1.0))
                throw ValidationError("seq_probs: probability outside (0, 1]" + detail::at_sample(i / dim));
        }
        if (token_probs) {
            if (token_probs->size() != count())
                throw ValidationError("token_probs: one entry per sample required");
            for (std::size_t i = 0; i < count(); ++i) {
                const auto& per_candidate = (*token_probs)[i];
                if (per_candidate.size() != dim)
                    throw ValidationError("token_probs: candidate count differs from k" + detail::at_sample(i));
                for (std::size_t j = 0; j < dim; ++j) {
                    double product = 1.0;
                    for (double p : per_candidate[j]) {
                        if (!(p > 0.0 && p <= 1.0))
                            throw ValidationError("token_probs: probability outside (0, 1]" + detail::at_sample(i));
                        product *= p;
                    }
                    if (!detail::close_relative(product, values[i * dim + j], 1e-9))
                        throw ValidationError("token_probs: product differs from joint probability" +
                                              detail::at_sample(i));
                }
            }
        }
    } else if (token_probs) {
        throw ValidationError("token_probs: only valid for kind 'candidates'");
    }
}

// --- views -----------------------------------------------------------------

inline std::vector<LayerTrace> layer_traces(const EmbeddingSet& set) {
    if (set.kind != ContainerKind::Layers)
        throw ValidationError("expected a container of kind 'layers', got '" + std::string(to_string(set.kind)) + "'");
    std::vector<LayerTrace> out;
    out.reserve(set.count());
    for (std::size_t i = 0; i < set.count(); ++i) {
        auto row = set.row(i);
        out.push_back(LayerTrace{set.layers, set.layer_dim(), std::vector<double>(row.begin(), row.end())});
    }
    return out;
}

inline std::vector<CandidateSet> candidate_sets(const EmbeddingSet& set) {
    if (set.kind != ContainerKind::Candidates)
        throw ValidationError("expected a container of kind 'candidates', got '" +
                              std::string(to_string(set.kind)) + "'");
    std::vector<CandidateSet> out;
    out.reserve(set.count());
    for (std::size_t i = 0; i < set.count(); ++i) {
        auto row = set.row(i);
        CandidateSet c{std::vector<double>(row.begin(), row.end()), std::nullopt};
        if (set.token_probs) c.token_probs = (*set.token_probs)[i];
        out.push_back(std::move(c));
    }
    return out;
}

inline EmbeddingSet make_layer_set(const std::vector<LayerTrace>& traces, std::vector<Label> labels,
                                   std::vector<std::string> ids) {
    if (traces.empty()) throw ValidationError("count: must be >= 1");
    EmbeddingSet set;
    set.kind = ContainerKind::Layers;
    set.layers = traces.front().layers;
    set.dim = traces.front().layers * traces.front().dim;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        const auto& t = traces[i];
        if (t.layers != set.layers || t.layers * t.dim != set.dim || t.reps.size() != set.dim)
            throw ValidationError("layers: trace shape differs from the first trace" + detail::at_sample(i));
        set.values.insert(set.values.end(), t.reps.begin(), t.reps.end());
    }
    set.labels = std::move(labels);
    set.sample_ids = std::move(ids);
    set.validate();
    return set;
}

inline EmbeddingSet make_candidate_set(const std::vector<CandidateSet>& candidates, std::vector<Label> labels,
                                       std::vector<std::string> ids) {
    if (candidates.empty()) throw ValidationError("count: must be >= 1");
    EmbeddingSet set;
    set.kind = ContainerKind::Candidates;
    set.dim = candidates.front().seq_probs.size();
    const bool with_tokens = candidates.front().token_probs.has_value();
    if (with_tokens) set.token_probs.emplace();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto& c = candidates[i];
        if (c.seq_probs.size() != set.dim)
            throw ValidationError("seq_probs: candidate count differs from the first sample" + detail::at_sample(i));
        if (c.token_probs.has_value() != with_tokens)
            throw ValidationError("token_probs: present for some samples only" + detail::at_sample(i));
        set.values.insert(set.values.end(), c.seq_probs.begin(), c.seq_probs.end());
        if (with_tokens) set.token_probs->push_back(*c.token_probs);
    }
    set.labels = std::move(labels);
    set.sample_ids = std::move(ids);
    set.validate();
    return set;
}

// Default ids "0", "1", ... for generated sets.
inline std::vector<std::string> sequential_ids(std::size_t count, std::string_view prefix = "") {
    std::vector<std::string> ids;
    ids.reserve(count);
    for (std::size_t i = 0; i < count; ++i) ids.push_back(std::string(prefix) + std::to_string(i));
    return ids;
}

// --- binary container --------------------------------------------------------

inline constexpr std::array<char, 4> kContainerMagic{'E', 'M', 'B', '1'};

namespace detail {

inline void put_u32_le(std::string& out, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFFu));
}

inline std::uint32_t get_u32_le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void put_f64_le(std::string& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFFu));
}

inline double get_f64_le(const unsigned char* p) {
    std::uint64_t bits = 0;
    for (int b = 7; b >= 0; --b) bits = (bits << 8) | p[b];
    return std::bit_cast<double>(bits);
}

inline nlohmann::json container_header(const EmbeddingSet& set) {
    nlohmann::json header;
    header["version"] = 1;
    header["kind"] = std::string(to_string(set.kind));
    header["dim"] = set.dim;
    header["count"] = set.count();
    auto labels = nlohmann::json::array();
    for (Label l : set.labels) labels.push_back(std::string(to_string(l)));
    header["labels"] = std::move(labels);
    header["sample_ids"] = set.sample_ids;
    header["payload"] = "f64le";
    if (set.kind == ContainerKind::Layers) header["layers"] = set.layers;
    if (set.token_probs) header["token_probs"] = *set.token_probs;
    return header;
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failure on '" + path.string() + "'");
    return bytes;
}

inline void write_file_bytes(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("write failure on '" + path.string() + "'");
}

}  // namespace detail

// Serializes a validated set to the container byte layout.
inline std::string encode_container(const EmbeddingSet& set) {
    set.validate();
    const std::string header = detail::container_header(set).dump();
    std::string out;
    out.reserve(8 + header.size() + set.values.size() * 8);
    out.append(kContainerMagic.data(), kContainerMagic.size());
    detail::put_u32_le(out, static_cast<std::uint32_t>(header.size()));
    out += header;
    for (double v : set.values) detail::put_f64_le(out, v);
    return out;
}

inline EmbeddingSet decode_container(std::string_view bytes) {
    const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < 4 || !std::equal(kContainerMagic.begin(), kContainerMagic.end(), bytes.begin()))
        throw FormatError("bad magic: expected 'EMB1'");
    if (bytes.size() < 8) throw FormatError("truncated: missing header length");
    const std::size_t header_len = detail::get_u32_le(data + 4);
    if (bytes.size() < 8 + header_len) throw FormatError("truncated: header shorter than declared length");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.substr(8, header_len));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed JSON header: ") + e.what());
    }

    EmbeddingSet set;
    try {
        if (header.at("version").get<int>() != 1) throw FormatError("unsupported container version");
        if (header.at("payload").get<std::string>() != "f64le") throw FormatError("unsupported payload encoding");
        set.kind = parse_kind(header.value("kind", std::string("embeddings")));
        set.dim = header.at("dim").get<std::size_t>();
        const auto count = header.at("count").get<std::size_t>();
        if (set.dim == 0 || count == 0) throw FormatError("header: dim and count must be >= 1");
        for (const auto& l : header.at("labels")) set.labels.push_back(parse_label(l.get<std::string>()));
        set.sample_ids = header.at("sample_ids").get<std::vector<std::string>>();
        if (set.labels.size() != count || set.sample_ids.size() != count)
            throw FormatError("header: labels/sample_ids length differs from count");
        if (set.kind == ContainerKind::Layers) set.layers = header.at("layers").get<std::size_t>();
        if (header.contains("token_probs"))
            set.token_probs = header.at("token_probs").get<std::vector<std::vector<std::vector<double>>>>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed JSON header: ") + e.what());
    }

    const std::size_t expected = set.count() * set.dim * 8;
    const std::size_t available = bytes.size() - 8 - header_len;
    if (available < expected)
        throw FormatError("truncated payload: " + std::to_string(available) + " bytes, header declares " +
                          std::to_string(expected));
    if (available > expected)
        throw FormatError("payload size mismatch: " + std::to_string(available) + " bytes, header declares " +
                          std::to_string(expected));

    set.values.resize(set.count() * set.dim);
    const unsigned char* payload = data + 8 + header_len;
    for (std::size_t i = 0; i < set.values.size(); ++i) set.values[i] = detail::get_f64_le(payload + 8 * i);
    set.validate();
    return set;
}

inline void write_container(const EmbeddingSet& set, const std::filesystem::path& path) {
    detail::write_file_bytes(path, encode_container(set));
}

inline EmbeddingSet read_container(const std::filesystem::path& path) {
    return decode_container(detail::read_file_bytes(path));
}

// One JSON object per line: {"id": ..., "label": ..., "vector": [...]}.
// Blank lines are skipped; a missing label reads as UNKNOWN.
inline EmbeddingSet read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    EmbeddingSet set;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = " (line " + std::to_string(line_no) + ")";
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
            auto vec = obj.at("vector").get<std::vector<double>>();
            if (vec.empty()) throw ValidationError("vector: empty" + where);
            if (set.labels.empty()) {
                set.dim = vec.size();
            } else if (vec.size() != set.dim) {
                throw ValidationError("vector: ragged dimension " + std::to_string(vec.size()) + " vs " +
                                      std::to_string(set.dim) + where);
            }
            set.sample_ids.push_back(obj.at("id").is_string() ? obj.at("id").get<std::string>()
                                                              : obj.at("id").dump());
            set.labels.push_back(parse_label(obj.value("label", std::string("UNKNOWN"))));
            set.values.insert(set.values.end(), vec.begin(), vec.end());
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(std::string("malformed JSONL record: ") + e.what() + where);
        }
    }
    if (set.labels.empty()) throw ValidationError("count: '" + path.string() + "' holds no records");
    set.validate();
    return set;
}

// Dispatches on extension: ".jsonl" reads JSON lines, anything else the binary container.
inline EmbeddingSet read_any(const std::filesystem::path& path) {
    if (path.extension() == ".jsonl") return read_jsonl(path);
    return read_container(path);
}

}  // namespace gem
