#pragma once

// Comparison detectors: TV score over per-layer Gaussians, top-k confidence,
// output entropy, last-layer and best-layer Euclidean distance, plus Youden
// index thresholding. All scores are oriented "higher = more OOD".

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "gem/container.hpp"
#include "gem/error.hpp"
#include "gem/metrics.hpp"

namespace gem::baselines {

inline constexpr double kDefaultLambda = 1e-3;
inline constexpr double kAbsoluteRidge = 1e-12;

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline Vector to_vector(std::span<const double> xs) {
    return Eigen::Map<const Vector>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

// Per-layer Gaussians N(mu_l, Sigma_l) of the ID traces. Covariances are
// stored after ridge regularization.
struct LayerGaussians {
    std::vector<Vector> means;
    std::vector<Matrix> covs;
    std::size_t dim = 0;
    double lambda = kDefaultLambda;

    std::size_t layers() const { return means.size(); }
};

namespace detail {

inline void check_traces(std::span<const LayerTrace> traces, std::size_t min_count) {
    if (traces.size() < min_count)
        throw ValidationError("traces: need at least " + std::to_string(min_count) + ", got " +
                              std::to_string(traces.size()));
    const auto& first = traces.front();
    if (first.layers == 0 || first.dim == 0) throw ValidationError("traces: empty layer shape");
    for (std::size_t i = 0; i < traces.size(); ++i) {
        const auto& t = traces[i];
        if (t.layers != first.layers || t.dim != first.dim || t.reps.size() != t.layers * t.dim)
            throw ValidationError("traces: shape mismatch (trace " + std::to_string(i) + ")");
    }
}

inline void check_same_shape(const LayerTrace& t, std::size_t layers, std::size_t dim) {
    if (t.layers != layers || t.dim != dim || t.reps.size() != layers * dim)
        throw ValidationError("trace: shape " + std::to_string(t.layers) + "x" + std::to_string(t.dim) +
                              " differs from fitted " + std::to_string(layers) + "x" + std::to_string(dim));
}

inline double binomial(int n, int k) {
    double c = 1.0;
    for (int t = 1; t <= k; ++t) c = c * static_cast<double>(n - k + t) / static_cast<double>(t);
    return c;
}

}  // namespace detail

// Empirical mean and unbiased covariance per layer, no regularization.
inline LayerGaussians layer_moments(std::span<const LayerTrace> traces) {
    detail::check_traces(traces, 2);
    const std::size_t L = traces.front().layers;
    const std::size_t dim = traces.front().dim;
    const auto n = static_cast<double>(traces.size());
    LayerGaussians g;
    g.dim = dim;
    g.lambda = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
        Vector mu = Vector::Zero(static_cast<Eigen::Index>(dim));
        for (const auto& t : traces) mu += to_vector(t.layer(l));
        mu /= n;
        Matrix cov = Matrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
        for (const auto& t : traces) {
            const Vector c = to_vector(t.layer(l)) - mu;
            cov.noalias() += c * c.transpose();
        }
        cov /= (n - 1.0);
        g.means.push_back(std::move(mu));
        g.covs.push_back(std::move(cov));
    }
    return g;
}

// Sigma + max(lambda * trace(Sigma) / dim, 1e-12) * I.
inline Matrix regularize(const Matrix& cov, double lambda) {
    const double ridge = std::max(lambda * cov.trace() / static_cast<double>(cov.rows()), kAbsoluteRidge);
    Matrix out = cov;
    out.diagonal().array() += ridge;
    return out;
}

inline LayerGaussians fit_layer_gaussians(std::span<const LayerTrace> id_traces, double lambda = kDefaultLambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ValidationError("lambda: must be a finite value >= 0");
    LayerGaussians g = layer_moments(id_traces);
    g.lambda = lambda;
    for (auto& cov : g.covs) cov = regularize(cov, lambda);
    return g;
}

// Square-root-free Cholesky (L D L^T) of a covariance, reusable across many
// Mahalanobis queries. Without square roots, simple cases such as a 1x1
// covariance of 2 come out exact.
class CovarianceFactor {
public:
    explicit CovarianceFactor(const Matrix& cov) {
        if (cov.rows() != cov.cols()) throw ValidationError("covariance: not square");
        ldlt_.compute(cov);
        if (ldlt_.info() != Eigen::Success || !(ldlt_.vectorD().array() > 0.0).all())
            throw ValidationError("covariance: not positive definite");
    }

    // (y - mu)^T Sigma^{-1} (y - mu)
    double squared_distance(const Vector& diff) const {
        if (diff.size() != ldlt_.rows()) throw ValidationError("mahalanobis: dimension mismatch");
        return diff.dot(ldlt_.solve(diff));
    }

private:
    Eigen::LDLT<Matrix> ldlt_;
};

inline double mahalanobis(const Vector& y, const Vector& mu, const Matrix& cov) {
    if (y.size() != mu.size() || mu.size() != cov.rows())
        throw ValidationError("mahalanobis: dimension mismatch");
    return CovarianceFactor(cov).squared_distance(y - mu);
}

// Smoothed i-th order differential form of the layer Gaussians at layer l
// (0-based): signed binomial differences of the means, binomial sums of the
// covariances.
inline std::pair<Vector, Matrix> diff_gaussian_params(const LayerGaussians& g, int order, std::size_t l) {
    if (order < 0) throw ValidationError("order: must be >= 0");
    if (l + static_cast<std::size_t>(order) >= g.layers())
        throw ValidationError("order: layer " + std::to_string(l) + " + order " + std::to_string(order) +
                              " exceeds the " + std::to_string(g.layers()) + " fitted layers");
    const auto dim = static_cast<Eigen::Index>(g.dim);
    Vector mu = Vector::Zero(dim);
    Matrix cov = Matrix::Zero(dim, dim);
    for (int t = 0; t <= order; ++t) {
        const double c = detail::binomial(order, t);
        const double sign = (order + t) % 2 == 0 ? 1.0 : -1.0;
        mu += sign * c * g.means[l + static_cast<std::size_t>(t)];
        cov += c * g.covs[l + static_cast<std::size_t>(t)];
    }
    return {std::move(mu), std::move(cov)};
}

// The test trace's i-th order difference at layer l, built like the means.
inline Vector diff_trace(const LayerTrace& trace, int order, std::size_t l) {
    Vector y = Vector::Zero(static_cast<Eigen::Index>(trace.dim));
    for (int t = 0; t <= order; ++t) {
        const double sign = (order + t) % 2 == 0 ? 1.0 : -1.0;
        y += sign * detail::binomial(order, t) * to_vector(trace.layer(l + static_cast<std::size_t>(t)));
    }
    return y;
}

// TV score at a fixed differential order, with the per-position Cholesky
// factors computed once. Averages over the L - order valid positions.
class TvScorer {
public:
    TvScorer(LayerGaussians gaussians, int order) : g_(std::move(gaussians)), order_(order) {
        if (order < 0) throw ValidationError("tv order: must be >= 0");
        if (g_.layers() == 0 || static_cast<std::size_t>(order) > g_.layers() - 1)
            throw ValidationError("tv order: " + std::to_string(order) + " too large for " +
                                  std::to_string(g_.layers()) + " layers");
        for (std::size_t l = 0; l + static_cast<std::size_t>(order) < g_.layers(); ++l) {
            auto [mu, cov] = diff_gaussian_params(g_, order, l);
            means_.push_back(std::move(mu));
            factors_.emplace_back(cov);
        }
    }

    double score(const LayerTrace& test) const {
        detail::check_same_shape(test, g_.layers(), g_.dim);
        double total = 0.0;
        for (std::size_t l = 0; l < means_.size(); ++l)
            total += factors_[l].squared_distance(diff_trace(test, order_, l) - means_[l]);
        return total / static_cast<double>(means_.size());
    }

    int order() const { return order_; }
    const LayerGaussians& gaussians() const { return g_; }

private:
    LayerGaussians g_;
    int order_;
    std::vector<Vector> means_;
    std::vector<CovarianceFactor> factors_;
};

inline double tv_score(const LayerTrace& test, const LayerGaussians& gaussians, int order) {
    return TvScorer(gaussians, order).score(test);
}

// --- uncertainty baselines ---------------------------------------------------

// Negated best joint probability, so that low confidence scores high.
inline double topk_confidence(const CandidateSet& c) {
    if (c.seq_probs.empty()) throw ValidationError("candidates: empty set");
    return -*std::max_element(c.seq_probs.begin(), c.seq_probs.end());
}

// Natural-log entropy of the candidate probabilities after normalization.
inline double output_entropy(const CandidateSet& c) {
    if (c.seq_probs.empty()) throw ValidationError("candidates: empty set");
    double total = 0.0;
    for (double p : c.seq_probs) {
        if (!(p >= 0.0) || !std::isfinite(p)) throw ValidationError("candidates: invalid probability");
        total += p;
    }
    if (!(total > 0.0)) throw ValidationError("candidates: all probabilities are zero");
    double h = 0.0;
    for (double p : c.seq_probs) {
        const double q = p / total;
        if (q > 0.0) h -= q * std::log(q);
    }
    return h;
}

// --- layer-distance baselines -------------------------------------------------

// Per-layer ID means for the Euclidean layer baselines.
struct LayerMeans {
    std::vector<std::vector<double>> means;
    std::size_t dim = 0;

    std::size_t layers() const { return means.size(); }
};

inline LayerMeans layer_means(std::span<const LayerTrace> id_traces) {
    detail::check_traces(id_traces, 1);
    LayerMeans out;
    out.dim = id_traces.front().dim;
    const std::size_t L = id_traces.front().layers;
    const auto n = static_cast<double>(id_traces.size());
    for (std::size_t l = 0; l < L; ++l) {
        std::vector<double> mu(out.dim, 0.0);
        for (const auto& t : id_traces) {
            const auto rep = t.layer(l);
            for (std::size_t d = 0; d < out.dim; ++d) mu[d] += rep[d];
        }
        for (double& x : mu) x /= n;
        out.means.push_back(std::move(mu));
    }
    return out;
}

inline double layer_distance(const LayerTrace& test, const LayerMeans& m, std::size_t l) {
    detail::check_same_shape(test, m.layers(), m.dim);
    if (l >= m.layers()) throw ValidationError("layer index out of range");
    const auto rep = test.layer(l);
    double s = 0.0;
    for (std::size_t d = 0; d < m.dim; ++d) {
        const double diff = rep[d] - m.means[l][d];
        s += diff * diff;
    }
    return std::sqrt(s);
}

inline double last_layer_score(const LayerTrace& test, std::span<const LayerTrace> id_traces) {
    const auto m = layer_means(id_traces);
    return layer_distance(test, m, m.layers() - 1);
}

struct LayerChoice {
    std::size_t layer = 0;         // 0-based
    std::vector<double> aurocs;  // per layer
};

// Layer whose Euclidean score separates the validation sets best (AUROC);
// ties go to the smallest index.
inline LayerChoice select_best_layer(const LayerMeans& id_means, std::span<const LayerTrace> id_val,
                                     std::span<const LayerTrace> ood_val) {
    if (id_val.empty() || ood_val.empty()) throw ValidationError("validation: both ID and OOD sets required");
    LayerChoice choice;
    double best = -1.0;
    for (std::size_t l = 0; l < id_means.layers(); ++l) {
        std::vector<metrics::ScoredSample> samples;
        for (const auto& t : id_val) samples.push_back({layer_distance(t, id_means, l), Label::Id});
        for (const auto& t : ood_val) samples.push_back({layer_distance(t, id_means, l), Label::Ood});
        const double a = metrics::auroc(samples);
        choice.aurocs.push_back(a);
        if (a > best) {
            best = a;
            choice.layer = l;
        }
    }
    return choice;
}

inline LayerChoice select_best_layer(std::span<const LayerTrace> id_val, std::span<const LayerTrace> ood_val) {
    if (id_val.empty() || ood_val.empty()) throw ValidationError("validation: both ID and OOD sets required");
    return select_best_layer(layer_means(id_val), id_val, ood_val);
}

// --- Youden index ----------------------------------------------------------------

struct YoudenResult {
    double threshold = 0.0;
    double j = 0.0;
    double tpr = 0.0;
    double fpr = 0.0;
};

// Sweeps -inf, the midpoints between adjacent distinct scores, and +inf;
// returns the threshold maximizing TPR - FPR (flag score >= t), smallest on ties.
inline YoudenResult youden_threshold(std::span<const metrics::ScoredSample> samples) {
    const auto counts = metrics::check_samples(samples);
    std::vector<metrics::ScoredSample> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.score < b.score; });
    const auto P = static_cast<long long>(counts.ood);
    const auto N = static_cast<long long>(counts.id);

    // At t = -inf everything is flagged.
    long long tp = P, fp = N;
    auto scaled_j = [&] { return tp * N - fp * P; };  // J * P * N, exact
    long long best_scaled = scaled_j();
    YoudenResult best{-std::numeric_limits<double>::infinity(), 0.0, 1.0, 1.0};

    for (std::size_t i = 0; i < sorted.size();) {
        const double s = sorted[i].score;
        for (; i < sorted.size() && sorted[i].score == s; ++i) {
            if (sorted[i].true_label == Label::Ood) {
                --tp;
            } else {
                --fp;
            }
        }
        const double t = i < sorted.size() ? s + (sorted[i].score - s) / 2.0 : std::numeric_limits<double>::infinity();
        if (scaled_j() > best_scaled) {
            best_scaled = scaled_j();
            best = {t, 0.0, static_cast<double>(tp) / static_cast<double>(P),
                    static_cast<double>(fp) / static_cast<double>(N)};
        }
    }
    best.j = best.tpr - best.fpr;
    return best;
}

}  // namespace gem::baselines
