#pragma once

// Evaluation: ROC construction, AUROC, FPR at a target TPR and confusion
// metrics. OOD is the positive class everywhere; every score follows the
// "higher = more OOD" orientation and a sample is flagged when score >= t.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gem/container.hpp"
#include "gem/error.hpp"

namespace gem::metrics {

struct ScoredSample {
    double score = 0.0;
    Label true_label = Label::Id;
};

struct ClassCounts {
    std::size_t id = 0;
    std::size_t ood = 0;
};

inline ClassCounts check_samples(std::span<const ScoredSample> samples) {
    ClassCounts n;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (!std::isfinite(samples[i].score))
            throw ValidationError("scores: non-finite score (sample " + std::to_string(i) + ")");
        switch (samples[i].true_label) {
            case Label::Id: ++n.id; break;
            case Label::Ood: ++n.ood; break;
            case Label::Unknown:
                throw ValidationError("labels: UNKNOWN label in evaluation input (sample " + std::to_string(i) + ")");
        }
    }
    if (n.id == 0 || n.ood == 0) throw ValidationError("one-class input: evaluation needs both ID and OOD samples");
    return n;
}

inline std::vector<ScoredSample> label_scores(std::span<const double> id_scores, std::span<const double> ood_scores) {
    std::vector<ScoredSample> out;
    out.reserve(id_scores.size() + ood_scores.size());
    for (double s : id_scores) out.push_back({s, Label::Id});
    for (double s : ood_scores) out.push_back({s, Label::Ood});
    return out;
}

struct RocPoint {
    double threshold = 0.0;
    double fpr = 0.0;
    double tpr = 0.0;
    std::size_t fp = 0;
    std::size_t tp = 0;
};

// Points from (0,0) at threshold +inf, one per distinct score in descending
// order (equal scores enter together), to (1,1) at threshold -inf.
struct RocCurve {
    std::vector<RocPoint> points;
    std::size_t positives = 0;  // OOD
    std::size_t negatives = 0;  // ID
};

inline RocCurve roc_curve(std::span<const ScoredSample> samples) {
    const auto counts = check_samples(samples);
    std::vector<ScoredSample> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.score > b.score; });

    RocCurve roc;
    roc.positives = counts.ood;
    roc.negatives = counts.id;
    const auto P = static_cast<double>(counts.ood);
    const auto N = static_cast<double>(counts.id);
    roc.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0, 0, 0});
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < sorted.size();) {
        const double t = sorted[i].score;
        for (; i < sorted.size() && sorted[i].score == t; ++i) {
            if (sorted[i].true_label == Label::Ood) {
                ++tp;
            } else {
                ++fp;
            }
        }
        roc.points.push_back({t, static_cast<double>(fp) / N, static_cast<double>(tp) / P, fp, tp});
    }
    roc.points.push_back({-std::numeric_limits<double>::infinity(), 1.0, 1.0, counts.id, counts.ood});
    return roc;
}

// Trapezoidal area under the ROC curve, accumulated in exact integer counts.
inline double auroc(const RocCurve& roc) {
    unsigned long long twice_area = 0;
    for (std::size_t i = 1; i < roc.points.size(); ++i) {
        const auto& a = roc.points[i - 1];
        const auto& b = roc.points[i];
        twice_area += static_cast<unsigned long long>(b.fp - a.fp) * (a.tp + b.tp);
    }
    return static_cast<double>(twice_area) /
           (2.0 * static_cast<double>(roc.positives) * static_cast<double>(roc.negatives));
}

inline double auroc(std::span<const ScoredSample> samples) { return auroc(roc_curve(samples)); }

// Smallest FPR over thresholds whose TPR reaches the target.
inline double fpr_at_tpr(const RocCurve& roc, double target_tpr = 0.95) {
    if (!(target_tpr > 0.0 && target_tpr <= 1.0)) throw ValidationError("target_tpr: must lie in (0, 1]");
    const double needed = target_tpr * static_cast<double>(roc.positives) * (1.0 - 1e-12);
    double best = 1.0;
    for (const auto& p : roc.points) {
        if (static_cast<double>(p.tp) >= needed) best = std::min(best, p.fpr);
    }
    return best;
}

inline double fpr_at_tpr(std::span<const ScoredSample> samples, double target_tpr = 0.95) {
    return fpr_at_tpr(roc_curve(samples), target_tpr);
}

inline std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string roc_csv(const RocCurve& roc) {
    std::string out = "threshold,fpr,tpr\n";
    for (const auto& p : roc.points) out += format_double(p.threshold) + "," + format_double(p.fpr) + "," +
                                           format_double(p.tpr) + "\n";
    return out;
}

// --- confusion at a decision boundary -----------------------------------------

struct Decision {
    bool is_ood = false;
    Label true_label = Label::Id;
};

struct Confusion {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool precision_defined = true;  // false when nothing was flagged OOD
    bool recall_defined = true;     // false when no sample is truly OOD

    std::size_t total() const { return tp + fp + tn + fn; }
};

inline Confusion confusion_at_boundary(std::span<const Decision> decisions) {
    if (decisions.empty()) throw ValidationError("confusion: empty input");
    Confusion c;
    for (std::size_t i = 0; i < decisions.size(); ++i) {
        const auto& d = decisions[i];
        if (d.true_label == Label::Unknown)
            throw ValidationError("labels: UNKNOWN label in evaluation input (sample " + std::to_string(i) + ")");
        const bool truly_ood = d.true_label == Label::Ood;
        if (d.is_ood && truly_ood) ++c.tp;
        else if (d.is_ood) ++c.fp;
        else if (truly_ood) ++c.fn;
        else ++c.tn;
    }
    const auto total = static_cast<double>(c.total());
    c.accuracy = static_cast<double>(c.tp + c.tn) / total;
    c.precision_defined = c.tp + c.fp > 0;
    c.recall_defined = c.tp + c.fn > 0;
    c.precision = c.precision_defined ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
    c.recall = c.recall_defined ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
    c.f1 = c.precision + c.recall > 0.0 ? 2.0 * c.precision * c.recall / (c.precision + c.recall) : 0.0;
    return c;
}

// --- report -----------------------------------------------------------------

struct EvalReport {
    std::string method;
    std::size_t n_id = 0;
    std::size_t n_ood = 0;
    double auroc = 0.0;
    double fpr95 = 0.0;
    Confusion confusion;
    std::string boundary;  // "sigma" or "youden"
    double boundary_value = 0.0;  // n_sigma or the Youden threshold
    std::optional<std::size_t> components;  // GEM only: m*
};

inline nlohmann::ordered_json to_json(const EvalReport& r) {
    nlohmann::ordered_json j;
    j["method"] = r.method;
    j["n_id"] = r.n_id;
    j["n_ood"] = r.n_ood;
    j["auroc"] = r.auroc;
    j["fpr95"] = r.fpr95;
    j["accuracy"] = r.confusion.accuracy;
    j["precision"] = r.confusion.precision;
    j["recall"] = r.confusion.recall;
    j["f1"] = r.confusion.f1;
    j["precision_defined"] = r.confusion.precision_defined;
    j["recall_defined"] = r.confusion.recall_defined;
    j["counts"] = {{"tp", r.confusion.tp}, {"fp", r.confusion.fp}, {"tn", r.confusion.tn}, {"fn", r.confusion.fn}};
    j["boundary"] = r.boundary;
    if (std::isfinite(r.boundary_value)) {
        j["boundary_value"] = r.boundary_value;
    } else {
        j["boundary_value"] = format_double(r.boundary_value);
    }
    if (r.components) j["components"] = *r.components;
    return j;
}

// Aligned text table with Acc/Prec/Rec/F1 and AUROC/FPR95, all in percent.
inline std::string to_table(std::span<const EvalReport> reports) {
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof line, "%-14s %8s %8s %8s %8s %8s %8s\n", "Method", "Acc.(%)", "Prec.(%)", "Rec.(%)",
                  "F1(%)", "AUROC(%)", "FPR95(%)");
    os << line;
    for (const auto& r : reports) {
        std::snprintf(line, sizeof line, "%-14s %8.2f %8.2f %8.2f %8.2f %8.2f %8.2f\n", r.method.c_str(),
                      100.0 * r.confusion.accuracy, 100.0 * r.confusion.precision, 100.0 * r.confusion.recall,
                      100.0 * r.confusion.f1, 100.0 * r.auroc, 100.0 * r.fpr95);
        os << line;
    }
    return os.str();
}

}  // namespace gem::metrics
