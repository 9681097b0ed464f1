#pragma once

// The GEM detector: centroid of the ID embeddings, Euclidean distances to it,
// a BIC-selected univariate mixture over those distances, and per-component
// n-sigma intervals. A test embedding is ID when its centroid distance falls
// inside any interval.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gem/container.hpp"
#include "gem/error.hpp"
#include "gem/gmm.hpp"

namespace gem {

inline constexpr double kDefaultSigma = 3.0;
inline constexpr int kDetectorFormatVersion = 1;

struct GemDetector {
    std::vector<double> centroid;
    gmm::GmmModel model;
    gmm::IdIntervals intervals;
    std::size_t dim = 0;
    std::vector<gmm::SweepEntry> sweep;  // BIC per attempted component count

    double n_sigma() const { return intervals.sigma_multiplier; }
};

struct Verdict {
    double distance = 0.0;
    bool is_ood = false;
    std::size_t nearest_component = 0;
    double z = 0.0;
};

enum class Route { Local, Fallback };

inline std::string_view to_string(Route r) { return r == Route::Local ? "LOCAL" : "FALLBACK"; }

// Coordinate-wise mean of the rows.
inline std::vector<double> centroid(const EmbeddingSet& train) {
    if (train.count() == 0 || train.dim == 0) throw ValidationError("centroid: empty embedding set");
    std::vector<gmm::detail::CompensatedSum> sums(train.dim);
    for (std::size_t i = 0; i < train.count(); ++i) {
        const auto row = train.row(i);
        for (std::size_t d = 0; d < train.dim; ++d) sums[d].add(row[d]);
    }
    std::vector<double> mu(train.dim);
    const auto k = static_cast<double>(train.count());
    for (std::size_t d = 0; d < train.dim; ++d) mu[d] = sums[d].value() / k;
    return mu;
}

inline double euclidean(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw ValidationError("dimension mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    double s = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) {
        const double diff = a[d] - b[d];
        s += diff * diff;
    }
    return std::sqrt(s);
}

// ||e_i - centroid||_2 for every row, in input order.
inline std::vector<double> distances(const EmbeddingSet& set, std::span<const double> center) {
    if (set.dim != center.size())
        throw ValidationError("dimension mismatch: set dim " + std::to_string(set.dim) + ", centroid dim " +
                              std::to_string(center.size()));
    std::vector<double> out;
    out.reserve(set.count());
    for (std::size_t i = 0; i < set.count(); ++i) out.push_back(euclidean(set.row(i), center));
    return out;
}

inline GemDetector fit_detector(const EmbeddingSet& train, const gmm::FitConfig& cfg, double n_sigma = kDefaultSigma) {
    if (train.kind != ContainerKind::Embeddings)
        throw ValidationError("train: expected an embeddings container, got '" + std::string(to_string(train.kind)) +
                              "'");
    train.validate();
    for (std::size_t i = 0; i < train.count(); ++i) {
        if (train.labels[i] == Label::Ood)
            throw ValidationError("labels: OOD row in training input (sample " + std::to_string(i) + ", id '" +
                                  train.sample_ids[i] + "')");
    }
    gmm::check_sigma(n_sigma);

    GemDetector det;
    det.dim = train.dim;
    det.centroid = centroid(train);
    const auto dist = distances(train, det.centroid);
    auto selection = gmm::select_model_sweep(dist, cfg);
    det.model = std::move(selection.model);
    det.sweep = std::move(selection.sweep);
    det.intervals = gmm::id_intervals(det.model, n_sigma);
    return det;
}

inline Verdict verdict_for_distance(const GemDetector& det, double d) {
    Verdict v;
    v.distance = d;
    v.is_ood = gmm::classify_distance(d, det.intervals) == gmm::Membership::Ood;
    const auto nearest = gmm::nearest_component(d, det.model);
    v.nearest_component = nearest.index;
    v.z = nearest.z;
    return v;
}

inline Verdict detect(const GemDetector& det, std::span<const double> e) {
    if (e.size() != det.dim)
        throw ValidationError("dimension mismatch: detector dim " + std::to_string(det.dim) + ", input dim " +
                              std::to_string(e.size()));
    for (double x : e) {
        if (!std::isfinite(x)) throw ValidationError("input: non-finite value");
    }
    return verdict_for_distance(det, euclidean(e, det.centroid));
}

inline std::vector<Verdict> detect_batch(const GemDetector& det, const EmbeddingSet& set) {
    if (set.dim != det.dim)
        throw ValidationError("dimension mismatch: detector dim " + std::to_string(det.dim) + ", input dim " +
                              std::to_string(set.dim));
    std::vector<Verdict> out;
    out.reserve(set.count());
    for (std::size_t i = 0; i < set.count(); ++i) out.push_back(detect(det, set.row(i)));
    return out;
}

// OOD inputs go to the fallback (e.g. a stronger remote model); ID stays local.
constexpr Route route(const Verdict& v) noexcept { return v.is_ood ? Route::Fallback : Route::Local; }

// --- serialization -----------------------------------------------------------

namespace detail {

inline constexpr std::string_view kBase64Alphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

inline std::string base64_encode(std::string_view bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 3 <= bytes.size(); i += 3) {
        const std::uint32_t v = (static_cast<unsigned char>(bytes[i]) << 16) |
                                (static_cast<unsigned char>(bytes[i + 1]) << 8) | static_cast<unsigned char>(bytes[i + 2]);
        for (int s = 18; s >= 0; s -= 6) out.push_back(kBase64Alphabet[(v >> s) & 0x3F]);
    }
    const std::size_t rest = bytes.size() - i;
    if (rest > 0) {
        std::uint32_t v = static_cast<unsigned char>(bytes[i]) << 16;
        if (rest == 2) v |= static_cast<unsigned char>(bytes[i + 1]) << 8;
        out.push_back(kBase64Alphabet[(v >> 18) & 0x3F]);
        out.push_back(kBase64Alphabet[(v >> 12) & 0x3F]);
        out.push_back(rest == 2 ? kBase64Alphabet[(v >> 6) & 0x3F] : '=');
        out.push_back('=');
    }
    return out;
}

inline std::string base64_decode(std::string_view text) {
    if (text.size() % 4 != 0) throw FormatError("base64: length not a multiple of 4");
    std::string out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        std::uint32_t v = 0;
        int pad = 0;
        for (std::size_t c = 0; c < 4; ++c) {
            const char ch = text[i + c];
            std::uint32_t sextet = 0;
            if (ch == '=') {
                if (i + 4 != text.size() || c < 2) throw FormatError("base64: misplaced padding");
                ++pad;
            } else {
                if (pad > 0) throw FormatError("base64: data after padding");
                const auto pos = kBase64Alphabet.find(ch);
                if (pos == std::string_view::npos) throw FormatError("base64: invalid character");
                sextet = static_cast<std::uint32_t>(pos);
            }
            v = (v << 6) | sextet;
        }
        out.push_back(static_cast<char>((v >> 16) & 0xFF));
        if (pad < 2) out.push_back(static_cast<char>((v >> 8) & 0xFF));
        if (pad < 1) out.push_back(static_cast<char>(v & 0xFF));
    }
    return out;
}

}  // namespace detail

inline std::string encode_centroid(std::span<const double> c) {
    std::string bytes;
    bytes.reserve(c.size() * 8);
    for (double v : c) detail::put_f64_le(bytes, v);
    return detail::base64_encode(bytes);
}

inline std::vector<double> decode_centroid(std::string_view b64) {
    const std::string bytes = detail::base64_decode(b64);
    if (bytes.size() % 8 != 0) throw FormatError("centroid: byte length not a multiple of 8");
    std::vector<double> out(bytes.size() / 8);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = detail::get_f64_le(p + 8 * i);
    return out;
}

inline nlohmann::ordered_json to_json(const GemDetector& det) {
    nlohmann::ordered_json j;
    j["version"] = kDetectorFormatVersion;
    j["dim"] = det.dim;
    j["centroid"] = encode_centroid(det.centroid);
    j["centroid_encoding"] = "f64le+base64";
    j["n_sigma"] = det.n_sigma();
    const auto model = gmm::to_json(det.model);
    for (auto& [key, value] : model.items()) j[key] = value;
    auto sweep = nlohmann::ordered_json::array();
    for (const auto& s : det.sweep) {
        nlohmann::ordered_json e;
        e["components"] = s.components;
        e["log_likelihood"] = s.log_likelihood;
        e["bic"] = s.bic;
        sweep.push_back(std::move(e));
    }
    j["bic_sweep"] = std::move(sweep);
    return j;
}

inline std::string serialize(const GemDetector& det) { return to_json(det).dump(2) + "\n"; }

inline GemDetector detector_from_json(const nlohmann::json& j) {
    GemDetector det;
    try {
        if (j.at("version").get<int>() != kDetectorFormatVersion)
            throw FormatError("detector: unsupported version " + j.at("version").dump());
        if (j.value("centroid_encoding", std::string("f64le+base64")) != "f64le+base64")
            throw FormatError("detector: unsupported centroid encoding");
        det.dim = j.at("dim").get<std::size_t>();
        det.centroid = decode_centroid(j.at("centroid").get<std::string>());
        det.model = gmm::model_from_json(j);
        det.intervals = gmm::id_intervals(det.model, j.at("n_sigma").get<double>());
        if (j.contains("bic_sweep")) {
            for (const auto& e : j.at("bic_sweep"))
                det.sweep.push_back({e.at("components").get<int>(), e.at("log_likelihood").get<double>(),
                                     e.at("bic").get<double>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed detector JSON: ") + e.what());
    }
    if (det.centroid.size() != det.dim)
        throw ValidationError("detector: centroid length " + std::to_string(det.centroid.size()) +
                              " differs from dim " + std::to_string(det.dim));
    for (double c : det.centroid) {
        if (!std::isfinite(c)) throw ValidationError("detector: non-finite centroid");
    }
    return det;
}

inline void save_detector(const GemDetector& det, const std::filesystem::path& path) {
    detail::write_file_bytes(path, serialize(det));
}

inline GemDetector load_detector(const std::filesystem::path& path) {
    const std::string text = detail::read_file_bytes(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("detector '" + path.string() + "': " + e.what());
    }
    return detector_from_json(j);
}

}  // namespace gem
