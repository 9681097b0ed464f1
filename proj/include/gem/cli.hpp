#pragma once

// Batch commands behind the `gem` tool. Each command takes a RunConfig and
// writes to the given stream, so tests can drive them without a process.
// Evaluation truth comes from the file role: every row of the ID-test file
// counts as ID and every row of the OOD-test file as OOD.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gem/container.hpp"
#include "gem/detector.hpp"
#include "gem/error.hpp"
#include "gem/gmm.hpp"
#include "gem/metrics.hpp"
#include "gem/random.hpp"
#include "gem/scorer.hpp"

namespace gem::cli {

enum class OutputFormat { Json, Table, Csv };

inline OutputFormat parse_format(std::string_view s) {
    if (s == "json") return OutputFormat::Json;
    if (s == "table") return OutputFormat::Table;
    if (s == "csv") return OutputFormat::Csv;
    throw ValidationError("format: expected json, table or csv, got '" + std::string(s) + "'");
}

struct RunConfig {
    Method method = Method::Gem;
    std::filesystem::path train;
    std::filesystem::path id_test;
    std::filesystem::path ood_test;
    std::filesystem::path val_id;
    std::filesystem::path val_ood;
    std::filesystem::path detector;  // detect: model to load
    std::filesystem::path input;     // detect: samples to score
    std::filesystem::path out;       // fit: model file; roc/detect: optional output file
    std::filesystem::path out_dir;
    gmm::FitConfig fit;
    double n_sigma = kDefaultSigma;
    int tv_order = 1;
    double lambda = baselines::kDefaultLambda;
    OutputFormat format = OutputFormat::Table;
    std::optional<double> holdout;  // fit: fraction of train kept out of the fit
};

namespace detail {

inline void require(const std::filesystem::path& p, const char* flag) {
    if (p.empty()) throw ValidationError(std::string("missing required option ") + flag);
}

inline EmbeddingSet load(const std::filesystem::path& p, const char* flag) {
    require(p, flag);
    return read_any(p);
}

inline void relabel(EmbeddingSet& set, Label label) { std::fill(set.labels.begin(), set.labels.end(), label); }

inline EmbeddingSet subset(const EmbeddingSet& set, const std::vector<std::size_t>& rows) {
    EmbeddingSet out;
    out.kind = set.kind;
    out.dim = set.dim;
    out.layers = set.layers;
    for (std::size_t r : rows) {
        const auto row = set.row(r);
        out.values.insert(out.values.end(), row.begin(), row.end());
        out.labels.push_back(set.labels[r]);
        out.sample_ids.push_back(set.sample_ids[r]);
    }
    if (set.token_probs) {
        out.token_probs.emplace();
        for (std::size_t r : rows) out.token_probs->push_back((*set.token_probs)[r]);
    }
    return out;
}

// Seeded Fisher-Yates split; the last `held` shuffled rows are kept out of the fit.
inline std::pair<EmbeddingSet, EmbeddingSet> split_holdout(const EmbeddingSet& set, double fraction,
                                                           std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw ValidationError("holdout: fraction must lie in (0, 1)");
    const std::size_t n = set.count();
    const auto held = static_cast<std::size_t>(static_cast<double>(n) * fraction);
    if (held == 0 || held == n) throw ValidationError("holdout: fraction leaves an empty split");
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    SplitMix64 rng(derive_seed(seed, 0x686f6c64));
    for (std::size_t i = n - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform01() * static_cast<double>(i + 1));
        std::swap(idx[i], idx[std::min(j, i)]);
    }
    std::vector<std::size_t> fit_rows(idx.begin(), idx.end() - static_cast<std::ptrdiff_t>(held));
    std::vector<std::size_t> held_rows(idx.end() - static_cast<std::ptrdiff_t>(held), idx.end());
    std::sort(fit_rows.begin(), fit_rows.end());
    std::sort(held_rows.begin(), held_rows.end());
    return {subset(set, fit_rows), subset(set, held_rows)};
}

inline std::string fmt(double v) { return metrics::format_double(v); }

struct TestSets {
    EmbeddingSet id;
    EmbeddingSet ood;
};

inline TestSets load_tests(const RunConfig& cfg) {
    TestSets t{load(cfg.id_test, "--id-test"), load(cfg.ood_test, "--ood-test")};
    relabel(t.id, Label::Id);
    relabel(t.ood, Label::Ood);
    return t;
}

inline std::vector<metrics::Decision> gem_decisions(const GemDetector& det, const TestSets& t) {
    std::vector<metrics::Decision> out;
    for (const auto& v : detect_batch(det, t.id)) out.push_back({v.is_ood, Label::Id});
    for (const auto& v : detect_batch(det, t.ood)) out.push_back({v.is_ood, Label::Ood});
    return out;
}

inline double id_retention(const std::vector<metrics::Decision>& ds) {
    std::size_t id = 0, kept = 0;
    for (const auto& d : ds) {
        if (d.true_label != Label::Id) continue;
        ++id;
        if (!d.is_ood) ++kept;
    }
    return id == 0 ? 0.0 : static_cast<double>(kept) / static_cast<double>(id);
}

}  // namespace detail

// Fits GEM on the training embeddings, writes the detector JSON and prints
// the BIC sweep and the selected components.
inline GemDetector cmd_fit(const RunConfig& cfg, std::ostream& out) {
    cfg.fit.validate();
    gmm::check_sigma(cfg.n_sigma);
    detail::require(cfg.out, "--out");
    EmbeddingSet train = detail::load(cfg.train, "--train");
    std::optional<EmbeddingSet> held;
    if (cfg.holdout) {
        auto [fit_part, held_part] = detail::split_holdout(train, *cfg.holdout, cfg.fit.seed);
        train = std::move(fit_part);
        held = std::move(held_part);
    }
    const GemDetector det = fit_detector(train, cfg.fit, cfg.n_sigma);
    save_detector(det, cfg.out);

    char line[160];
    out << "m* = " << det.model.size() << "  (train " << det.model.train_count << ", dim " << det.dim << ")\n";
    out << "BIC sweep:\n";
    std::snprintf(line, sizeof line, "  %4s %20s %20s\n", "m", "log_likelihood", "bic");
    out << line;
    for (const auto& s : det.sweep) {
        std::snprintf(line, sizeof line, "  %4d %20.6f %20.6f%s\n", s.components, s.log_likelihood, s.bic,
                      static_cast<std::size_t>(s.components) == det.model.size() ? "  *" : "");
        out << line;
    }
    out << "components (n_sigma = " << det.n_sigma() << "):\n";
    std::snprintf(line, sizeof line, "  %4s %12s %14s %14s %14s %14s\n", "j", "weight", "mean", "std", "lower",
                  "upper");
    out << line;
    for (std::size_t j = 0; j < det.model.size(); ++j) {
        const auto& c = det.model.components[j];
        const auto& iv = det.intervals.intervals[j];
        std::snprintf(line, sizeof line, "  %4zu %12.6f %14.6f %14.6f %14.6f %14.6f\n", j + 1, c.weight, c.mean,
                      c.std, iv.lower, iv.upper);
        out << line;
    }
    if (held) {
        std::size_t kept = 0;
        for (const auto& v : detect_batch(det, *held)) kept += v.is_ood ? 0 : 1;
        out << "holdout: " << kept << "/" << held->count() << " inside the ID intervals\n";
    }
    out << "wrote " << cfg.out.string() << "\n";
    return det;
}

// One JSON line per input sample, in input order.
inline void cmd_detect(const RunConfig& cfg, std::ostream& out) {
    detail::require(cfg.detector, "--detector");
    const GemDetector det = load_detector(cfg.detector);
    const EmbeddingSet input = detail::load(cfg.input, "--input");
    if (input.kind != ContainerKind::Embeddings)
        throw ValidationError("input: expected an embeddings container, got '" + std::string(to_string(input.kind)) +
                              "'");
    const auto verdicts = detect_batch(det, input);
    std::ostringstream text;
    for (std::size_t i = 0; i < verdicts.size(); ++i) {
        const auto& v = verdicts[i];
        nlohmann::ordered_json j;
        j["id"] = input.sample_ids[i];
        j["distance"] = v.distance;
        j["z"] = v.z;
        j["is_ood"] = v.is_ood;
        j["route"] = std::string(to_string(route(v)));
        text << j.dump() << "\n";
    }
    if (cfg.out.empty()) {
        out << text.str();
    } else {
        gem::detail::write_file_bytes(cfg.out, text.str());
    }
}

struct Evaluation {
    metrics::EvalReport report;
    metrics::RocCurve roc;
};

inline ScorerOptions scorer_options(const RunConfig& cfg) {
    ScorerOptions opt;
    opt.fit = cfg.fit;
    opt.n_sigma = cfg.n_sigma;
    opt.tv_order = cfg.tv_order;
    opt.lambda = cfg.lambda;
    if (cfg.method == Method::BestLayer) {
        opt.val_id = detail::load(cfg.val_id, "--val-id");
        opt.val_ood = detail::load(cfg.val_ood, "--val-ood");
    }
    return opt;
}

// Scores both test sets with the chosen method. GEM decides at its sigma
// boundary; every other method at the Youden threshold of these scores.
inline Evaluation evaluate(const RunConfig& cfg) {
    cfg.fit.validate();
    gmm::check_sigma(cfg.n_sigma);
    auto scorer = make_scorer(cfg.method, scorer_options(cfg));
    if (needs_training(cfg.method)) {
        EmbeddingSet train = detail::load(cfg.train, "--train");
        scorer->fit(train);
    }
    const auto tests = detail::load_tests(cfg);
    const auto samples = metrics::label_scores(scorer->score(tests.id), scorer->score(tests.ood));

    Evaluation ev;
    ev.roc = metrics::roc_curve(samples);
    auto& r = ev.report;
    r.method = std::string(to_string(cfg.method));
    r.n_id = tests.id.count();
    r.n_ood = tests.ood.count();
    r.auroc = metrics::auroc(ev.roc);
    r.fpr95 = metrics::fpr_at_tpr(ev.roc, 0.95);
    std::vector<metrics::Decision> decisions;
    if (cfg.method == Method::Gem) {
        const auto& det = static_cast<const GemScorer&>(*scorer).detector();
        decisions = detail::gem_decisions(det, tests);
        r.boundary = "sigma";
        r.boundary_value = cfg.n_sigma;
        r.components = det.model.size();
    } else {
        const auto y = baselines::youden_threshold(samples);
        for (const auto& s : samples) decisions.push_back({s.score >= y.threshold, s.true_label});
        r.boundary = "youden";
        r.boundary_value = y.threshold;
    }
    r.confusion = metrics::confusion_at_boundary(decisions);
    return ev;
}

inline std::string report_csv(const metrics::EvalReport& r) {
    std::string s = "method,n_id,n_ood,accuracy,precision,recall,f1,auroc,fpr95,boundary,boundary_value\n";
    s += r.method + "," + std::to_string(r.n_id) + "," + std::to_string(r.n_ood) + "," +
         detail::fmt(r.confusion.accuracy) + "," + detail::fmt(r.confusion.precision) + "," +
         detail::fmt(r.confusion.recall) + "," + detail::fmt(r.confusion.f1) + "," + detail::fmt(r.auroc) + "," +
         detail::fmt(r.fpr95) + "," + r.boundary + "," + detail::fmt(r.boundary_value) + "\n";
    return s;
}

inline metrics::EvalReport cmd_eval(const RunConfig& cfg, std::ostream& out) {
    const auto ev = evaluate(cfg);
    const std::string json = metrics::to_json(ev.report).dump(2) + "\n";
    const std::string table = metrics::to_table(std::span(&ev.report, 1));
    switch (cfg.format) {
        case OutputFormat::Json: out << json; break;
        case OutputFormat::Table: out << table; break;
        case OutputFormat::Csv: out << report_csv(ev.report); break;
    }
    if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        gem::detail::write_file_bytes(cfg.out_dir / "report.json", json);
        gem::detail::write_file_bytes(cfg.out_dir / "report.txt", table);
    }
    return ev.report;
}

inline std::string cmd_roc(const RunConfig& cfg, std::ostream& out) {
    const std::string csv = metrics::roc_csv(evaluate(cfg).roc);
    if (cfg.out.empty()) {
        out << csv;
    } else {
        gem::detail::write_file_bytes(cfg.out, csv);
    }
    return csv;
}

struct AblationCsv {
    std::string max_components;
    std::string sigma;
};

// GEM sweeps: metrics against the BIC search bound (1..15) and against the
// interval width (1..5 sigma). Every m is fitted once; the fit for a given m
// does not depend on the search bound, so each bound takes the BIC arg-min
// over a prefix of the same sweep.
inline AblationCsv cmd_ablate(const RunConfig& cfg, std::ostream& out) {
    if (cfg.method != Method::Gem) throw ValidationError("ablate: only the gem method has these parameters");
    cfg.fit.validate();
    gmm::check_sigma(cfg.n_sigma);
    detail::require(cfg.out_dir, "--out-dir");
    const EmbeddingSet train = detail::load(cfg.train, "--train");
    const auto tests = detail::load_tests(cfg);

    if (train.kind != ContainerKind::Embeddings)
        throw ValidationError("train: expected an embeddings container, got '" + std::string(to_string(train.kind)) +
                              "'");
    GemDetector base;
    base.dim = train.dim;
    base.centroid = centroid(train);
    auto full = cfg.fit;
    full.max_components = 15;
    const auto sel = gmm::select_model_sweep(distances(train, base.centroid), full);

    const std::string header = ",m_star,accuracy,precision,recall,f1,auroc,fpr95,id_retention\n";
    auto row = [&](const gmm::GmmModel& model, double n_sigma) {
        GemDetector det = base;
        det.model = model;
        det.intervals = gmm::id_intervals(model, n_sigma);
        const auto decisions = detail::gem_decisions(det, tests);
        const auto c = metrics::confusion_at_boundary(decisions);
        std::vector<double> id_z, ood_z;
        for (const auto& v : detect_batch(det, tests.id)) id_z.push_back(v.z);
        for (const auto& v : detect_batch(det, tests.ood)) ood_z.push_back(v.z);
        const auto roc = metrics::roc_curve(metrics::label_scores(id_z, ood_z));
        return std::to_string(model.size()) + "," + detail::fmt(c.accuracy) + "," + detail::fmt(c.precision) + "," +
               detail::fmt(c.recall) + "," + detail::fmt(c.f1) + "," + detail::fmt(metrics::auroc(roc)) + "," +
               detail::fmt(metrics::fpr_at_tpr(roc)) + "," + detail::fmt(detail::id_retention(decisions)) + "\n";
    };

    AblationCsv csv;
    csv.max_components = "max_components" + header;
    std::size_t best = 0;
    for (std::size_t bound = 1; bound <= sel.fits.size(); ++bound) {
        if (sel.fits[bound - 1].bic < sel.fits[best].bic) best = bound - 1;
        csv.max_components += std::to_string(bound) + "," + row(sel.fits[best], cfg.n_sigma);
    }
    // The sigma sweep uses the model selected under the configured bound.
    std::size_t sel_idx = 0;
    const auto bound = std::min<std::size_t>(static_cast<std::size_t>(cfg.fit.max_components), sel.fits.size());
    for (std::size_t m = 1; m < bound; ++m) {
        if (sel.fits[m].bic < sel.fits[sel_idx].bic) sel_idx = m;
    }
    csv.sigma = "n_sigma" + header;
    for (int n = 1; n <= 5; ++n) csv.sigma += std::to_string(n) + "," + row(sel.fits[sel_idx], n);

    std::filesystem::create_directories(cfg.out_dir);
    gem::detail::write_file_bytes(cfg.out_dir / "ablate_max_components.csv", csv.max_components);
    gem::detail::write_file_bytes(cfg.out_dir / "ablate_sigma.csv", csv.sigma);
    out << csv.max_components << "\n" << csv.sigma;
    return csv;
}

}  // namespace gem::cli
