#pragma once

// Univariate Gaussian mixtures fitted by expectation-maximization, with
// BIC-driven selection of the component count and n-sigma ID intervals.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gem/error.hpp"
#include "gem/random.hpp"

namespace gem::gmm {

struct FitConfig {
    int max_components = 15;
    int max_iters = 500;
    double rel_tol = 1e-8;  // stop once the relative log-likelihood gain drops below this
    double variance_floor_scale = 1e-8;
    int restarts = 5;
    std::uint64_t seed = 42;

    void validate() const {
        if (max_components < 1) throw ValidationError("max_components: must be >= 1");
        if (max_iters < 1) throw ValidationError("max_iters: must be >= 1");
        if (!(rel_tol > 0.0)) throw ValidationError("rel_tol: must be > 0");
        if (!(variance_floor_scale > 0.0)) throw ValidationError("variance_floor_scale: must be > 0");
        if (restarts < 1) throw ValidationError("restarts: must be >= 1");
    }
};

struct GmmComponent {
    double weight = 1.0;
    double mean = 0.0;
    double std = 1.0;
};

struct GmmModel {
    std::vector<GmmComponent> components;  // ascending mean
    std::size_t train_count = 0;
    double log_likelihood = 0.0;
    double bic = 0.0;
    int iterations = 0;
    bool converged = false;

    std::size_t size() const { return components.size(); }
};

// Per-iteration record of one EM run, for diagnostics and monotonicity checks.
struct FitTrace {
    std::vector<double> log_likelihood;  // entry t: log-likelihood before M-step t
    std::vector<std::size_t> reseeds;    // iterations whose M-step re-seeded an empty component
};

struct Interval {
    double lower = 0.0;
    double upper = 0.0;

    bool contains(double x) const { return lower <= x && x <= upper; }
};

struct IdIntervals {
    std::vector<Interval> intervals;
    double sigma_multiplier = 3.0;
};

enum class Membership { Id, Ood };

inline constexpr double kAbsoluteVarianceFloor = 1e-12;
inline constexpr double kEmptyComponentMass = 1e-10;
inline constexpr int kBurnInIters = 20;

namespace detail {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2 pi))

// Neumaier-compensated running sum.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            carry_ += (sum_ - t) + x;
        } else {
            carry_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    double value() const { return sum_ + carry_; }

private:
    double sum_ = 0.0;
    double carry_ = 0.0;
};

inline void check_distances(std::span<const double> distances) {
    if (distances.empty()) throw ValidationError("distances: empty input");
    for (std::size_t i = 0; i < distances.size(); ++i) {
        if (!std::isfinite(distances[i]))
            throw ValidationError("distances: non-finite value (sample " + std::to_string(i) + ")");
    }
}

inline double mean_of(std::span<const double> xs) {
    CompensatedSum s;
    for (double x : xs) s.add(x);
    return s.value() / static_cast<double>(xs.size());
}

// Maximum-likelihood (divide-by-k) variance, two-pass.
inline double variance_of(std::span<const double> xs, double mean) {
    CompensatedSum s;
    for (double x : xs) s.add((x - mean) * (x - mean));
    return s.value() / static_cast<double>(xs.size());
}

inline double variance_floor(double data_variance, double scale) {
    return data_variance > 0.0 ? std::max(scale * data_variance, std::numeric_limits<double>::min())
                               : kAbsoluteVarianceFloor;
}

// Linear-interpolated empirical quantile of sorted data.
inline double quantile_sorted(std::span<const double> sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

struct Params {
    std::vector<double> weight, mean, var;
};

inline double log_density(double d, double weight, double mean, double var) {
    const double diff = d - mean;
    return std::log(weight) - kLogSqrt2Pi - 0.5 * std::log(var) - diff * diff / (2.0 * var);
}

// exp(x) for x <= 0 as a branch-free kernel the compiler can vectorize.
// Range reduction x = n ln2 + r, |r| <= ln2/2, degree-13 Taylor polynomial,
// scaling by 2^n through the exponent bits. Inputs below -700 are clamped
// (result ~1e-304 rather than a denormal or zero). Relative error ~2 ulp.
inline double exp_nonpositive(double x) {
    constexpr double kLog2e = 1.4426950408889634074;
    constexpr double kLn2Hi = 6.93147180369123816490e-01;
    constexpr double kLn2Lo = 1.90821492927058770002e-10;
    constexpr double kShifter = 0x1.8p52;
    x = x < -700.0 ? -700.0 : x;
    const double t = x * kLog2e + kShifter;
    const double n = t - kShifter;
    const double r = (x - n * kLn2Hi) - n * kLn2Lo;
    double p = 1.0 / 6227020800.0;
    p = p * r + 1.0 / 479001600.0;
    p = p * r + 1.0 / 39916800.0;
    p = p * r + 1.0 / 3628800.0;
    p = p * r + 1.0 / 362880.0;
    p = p * r + 1.0 / 40320.0;
    p = p * r + 1.0 / 5040.0;
    p = p * r + 1.0 / 720.0;
    p = p * r + 1.0 / 120.0;
    p = p * r + 1.0 / 24.0;
    p = p * r + 1.0 / 6.0;
    p = p * r + 0.5;
    p = p * r + 1.0;
    p = p * r + 1.0;
    const std::uint64_t scale = (std::bit_cast<std::uint64_t>(t) + 1023u) << 52;
    return p * std::bit_cast<double>(scale);
}

// One EM run from `start` on sorted data.
struct RunResult {
    Params params;
    double log_likelihood = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Sufficient statistics of one E-step, taken about the current means so the
// variance update needs no second pass:
//   mass_j  = sum_i g_ij
//   shift_j = sum_i g_ij (d_i - mu_j)
//   sq_j    = sum_i g_ij (d_i - mu_j)^2
// giving mu_new = mu_j + shift_j / mass_j and
// var_new = sq_j / mass_j - (shift_j / mass_j)^2.
struct Moments {
    std::vector<double> mass, shift, sq;
    double log_likelihood = 0.0;
    std::size_t worst_sample = 0;  // lowest mixture density
};

class EmRunner {
public:
    static constexpr std::size_t kBlock = 256;
    static constexpr std::size_t kLanes = 4;

    EmRunner(std::span<const double> data, double floor_var, double data_var, const FitConfig& cfg)
        : data_(data), floor_var_(floor_var), data_var_(data_var), cfg_(cfg) {}

    // E-step at `p`: log-likelihood plus moments for the M-step.
    Moments e_step(const Params& p) {
        const std::size_t k = data_.size();
        const std::size_t m = p.mean.size();
        Moments mo;
        mo.mass.assign(m, 0.0);
        mo.shift.assign(m, 0.0);
        mo.sq.assign(m, 0.0);
        offset_.resize(m);
        inv2var_.resize(m);
        for (std::size_t j = 0; j < m; ++j) {
            offset_[j] = p.weight[j] > 0.0 ? std::log(p.weight[j]) - kLogSqrt2Pi - 0.5 * std::log(p.var[j])
                                           : -std::numeric_limits<double>::infinity();
            inv2var_[j] = 0.5 / p.var[j];
        }
        block_.resize(m * kBlock);
        top_.resize(kBlock);
        total_.resize(kBlock);

        CompensatedSum ll;
        double worst_ll = std::numeric_limits<double>::infinity();
        for (std::size_t base = 0; base < k; base += kBlock) {
            const std::size_t n = std::min(kBlock, k - base);
            const double* d = data_.data() + base;
            std::fill_n(top_.begin(), n, -std::numeric_limits<double>::infinity());
            for (std::size_t j = 0; j < m; ++j) {
                double* __restrict g = block_.data() + j * kBlock;
                double* __restrict top = top_.data();
                const double mu = p.mean[j], off = offset_[j], iv = inv2var_[j];
                for (std::size_t b = 0; b < n; ++b) {
                    const double diff = d[b] - mu;
                    g[b] = off - diff * diff * iv;
                    top[b] = g[b] > top[b] ? g[b] : top[b];
                }
            }
            std::fill_n(total_.begin(), n, 0.0);
            for (std::size_t j = 0; j < m; ++j) {
                double* __restrict g = block_.data() + j * kBlock;
                double* __restrict total = total_.data();
                const double* __restrict top = top_.data();
                for (std::size_t b = 0; b < n; ++b) g[b] = exp_nonpositive(g[b] - top[b]);
                for (std::size_t b = 0; b < n; ++b) total[b] += g[b];
            }
            for (std::size_t b = 0; b < n; ++b) {
                const double sample_ll = top_[b] + std::log(total_[b]);
                ll.add(sample_ll);
                if (sample_ll < worst_ll) {
                    worst_ll = sample_ll;
                    mo.worst_sample = base + b;
                }
                total_[b] = 1.0 / total_[b];
            }
            for (std::size_t j = 0; j < m; ++j) {
                const double* __restrict g = block_.data() + j * kBlock;
                const double* __restrict inv_total = total_.data();
                const double mu = p.mean[j];
                // Fixed four-lane partial sums: vectorizable, order still deterministic.
                double mass[kLanes] = {}, shift[kLanes] = {}, sq[kLanes] = {};
                std::size_t b = 0;
                for (; b + kLanes <= n; b += kLanes) {
                    for (std::size_t l = 0; l < kLanes; ++l) {
                        const double gamma = g[b + l] * inv_total[b + l];
                        const double diff = d[b + l] - mu;
                        mass[l] += gamma;
                        shift[l] += gamma * diff;
                        sq[l] += gamma * diff * diff;
                    }
                }
                for (; b < n; ++b) {
                    const double gamma = g[b] * inv_total[b];
                    const double diff = d[b] - mu;
                    mass[0] += gamma;
                    shift[0] += gamma * diff;
                    sq[0] += gamma * diff * diff;
                }
                mo.mass[j] += (mass[0] + mass[1]) + (mass[2] + mass[3]);
                mo.shift[j] += (shift[0] + shift[1]) + (shift[2] + shift[3]);
                mo.sq[j] += (sq[0] + sq[1]) + (sq[2] + sq[3]);
            }
        }
        mo.log_likelihood = ll.value();
        return mo;
    }

    // EM accelerated by squared extrapolation (SQUAREM): two EM steps
    // theta0 -> theta1 -> theta2 define r = theta1 - theta0 and
    // v = theta2 - theta1 - r, and the next point is
    // theta0 - 2 a r + a^2 v, followed by one stabilizing EM step.
    // Extrapolation works on (mean, log var, log weight). A point is only
    // accepted if its log-likelihood is at least the last recorded one;
    // otherwise a is halved toward -1, where the formula reduces to theta2,
    // the plain double EM step. Cycles that re-seed a component fall back
    // to plain EM. Every recorded log-likelihood counts as one iteration.
    RunResult run(Params params, int max_iters, FitTrace* trace) {
        RunResult result;
        int iter = 0;
        Moments mo = e_step(params);
        double last_ll = mo.log_likelihood;
        if (trace) trace->log_likelihood.push_back(last_ll);

        // Records the log-likelihood of `p`; true once converged or out of budget.
        auto record = [&](Params& p, const Moments& m) {
            const double gain = m.log_likelihood - last_ll;
            last_ll = m.log_likelihood;
            ++iter;
            if (trace) trace->log_likelihood.push_back(last_ll);
            params = p;
            mo = m;
            if (gain < cfg_.rel_tol * std::abs(last_ll - gain)) {
                result.converged = true;
                return true;
            }
            return iter >= max_iters;
        };
        auto note_reseed = [&] {
            if (trace) trace->reseeds.push_back(static_cast<std::size_t>(iter));
        };

        while (iter < max_iters) {
            Params p1 = params;
            if (m_step(p1, mo)) {
                note_reseed();
                if (record(p1, e_step(p1))) break;
                continue;
            }
            Moments mo1 = e_step(p1);
            Params theta0 = std::move(params);
            if (record(p1, mo1)) break;
            Params p2 = p1;
            if (m_step(p2, mo1)) {
                note_reseed();
                if (record(p2, e_step(p2))) break;
                continue;
            }

            const auto c0 = coords(theta0), c1 = coords(p1), c2 = coords(p2);
            std::vector<double> r(c0.size()), v(c0.size());
            double rr = 0.0, vv = 0.0;
            for (std::size_t i = 0; i < c0.size(); ++i) {
                r[i] = c1[i] - c0[i];
                v[i] = c2[i] - c1[i] - r[i];
                rr += r[i] * r[i];
                vv += v[i] * v[i];
            }
            double alpha = vv > 0.0 ? -std::sqrt(rr / vv) : -1.0;
            alpha = std::clamp(alpha, -kMaxStep, -1.0);
            Params next;
            Moments mo_next;
            for (;;) {
                if (alpha == -1.0) {
                    next = p2;
                } else {
                    std::vector<double> c(c0.size());
                    for (std::size_t i = 0; i < c.size(); ++i) c[i] = c0[i] - 2.0 * alpha * r[i] + alpha * alpha * v[i];
                    next = from_coords(c, p1.mean.size());
                }
                mo_next = e_step(next);
                if (alpha == -1.0 || (std::isfinite(mo_next.log_likelihood) && mo_next.log_likelihood >= last_ll)) break;
                alpha = std::min((alpha - 1.0) / 2.0, -1.0);
                if (alpha > -1.0 - 1e-9) alpha = -1.0;
            }
            if (record(next, mo_next)) break;

            Params stable = params;
            if (m_step(stable, mo)) note_reseed();
            if (record(stable, e_step(stable))) break;
        }
        result.log_likelihood = last_ll;
        result.iterations = iter;
        result.params = std::move(params);
        return result;
    }

private:
    // Returns true when an empty component had to be re-seeded.
    bool m_step(Params& p, const Moments& mo) const {
        const std::size_t k = data_.size();
        const std::size_t m = p.mean.size();
        bool reseeded = false;
        for (std::size_t j = 0; j < m; ++j) {
            const double nj = mo.mass[j];
            if (nj < kEmptyComponentMass) {
                // Re-seed at the sample the current mixture explains worst.
                p.mean[j] = data_[mo.worst_sample];
                p.var[j] = std::max(data_var_ / static_cast<double>(m * m), floor_var_);
                p.weight[j] = 1.0 / static_cast<double>(k);
                reseeded = true;
                continue;
            }
            const double step = mo.shift[j] / nj;
            p.weight[j] = nj / static_cast<double>(k);
            p.mean[j] += step;
            p.var[j] = std::max(mo.sq[j] / nj - step * step, floor_var_);
        }
        double total = 0.0;
        for (double w : p.weight) total += w;
        for (double& w : p.weight) w /= total;
        return reseeded;
    }

    static constexpr double kMaxStep = 64.0;

    static std::vector<double> coords(const Params& p) {
        const std::size_t m = p.mean.size();
        std::vector<double> c(3 * m);
        for (std::size_t j = 0; j < m; ++j) {
            c[j] = p.mean[j];
            c[m + j] = std::log(p.var[j]);
            c[2 * m + j] = std::log(p.weight[j]);
        }
        return c;
    }

    Params from_coords(const std::vector<double>& c, std::size_t m) const {
        Params p;
        double total = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            p.mean.push_back(c[j]);
            p.var.push_back(std::max(std::exp(c[m + j]), floor_var_));
            p.weight.push_back(std::exp(c[2 * m + j]));
            total += p.weight.back();
        }
        for (double& w : p.weight) w /= total;
        return p;
    }

    std::span<const double> data_;
    double floor_var_;
    double data_var_;
    const FitConfig& cfg_;
    std::vector<double> offset_, inv2var_, block_, top_, total_;
};

inline Params quantile_start(std::span<const double> sorted, std::size_t m, double data_var, double floor_var) {
    Params p;
    const double var0 = std::max(data_var / static_cast<double>(m * m), floor_var);
    for (std::size_t j = 0; j < m; ++j) {
        const double q = (2.0 * static_cast<double>(j) + 1.0) / (2.0 * static_cast<double>(m));
        p.mean.push_back(quantile_sorted(sorted, q));
        p.var.push_back(var0);
        p.weight.push_back(1.0 / static_cast<double>(m));
    }
    return p;
}

// Quantile start with each level drawn uniformly inside its own 1/m slice.
inline Params jittered_start(std::span<const double> sorted, std::size_t m, double data_var, double floor_var,
                             SplitMix64& rng) {
    Params p = quantile_start(sorted, m, data_var, floor_var);
    for (std::size_t j = 0; j < m; ++j) {
        const double q = (static_cast<double>(j) + rng.uniform01()) / static_cast<double>(m);
        p.mean[j] = quantile_sorted(sorted, q);
    }
    return p;
}

}  // namespace detail

inline double bic_score(const GmmModel& model) {
    return -2.0 * model.log_likelihood +
           static_cast<double>(model.size()) * std::log(static_cast<double>(model.train_count));
}

// Sum over samples of log sum_j pi_j N(d | mu_j, sigma_j^2), via log-sum-exp.
inline double log_likelihood(std::span<const double> distances, const GmmModel& model) {
    detail::check_distances(distances);
    if (model.components.empty()) throw ValidationError("model: no components");
    detail::CompensatedSum total;
    std::vector<double> terms(model.size());
    for (double d : distances) {
        double top = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < model.size(); ++j) {
            const auto& c = model.components[j];
            terms[j] = c.weight > 0.0 ? detail::log_density(d, c.weight, c.mean, c.std * c.std)
                                      : -std::numeric_limits<double>::infinity();
            top = std::max(top, terms[j]);
        }
        double s = 0.0;
        for (double t : terms) s += std::exp(t - top);
        total.add(top + std::log(s));
    }
    return total.value();
}

// Fits an m-component mixture. Deterministic in (distances as a multiset, m, cfg).
inline GmmModel fit_em(std::span<const double> distances, int m, const FitConfig& cfg, FitTrace* trace = nullptr) {
    cfg.validate();
    detail::check_distances(distances);
    if (m < 1) throw ValidationError("m: must be >= 1");
    const auto comps = static_cast<std::size_t>(m);
    if (distances.size() < comps)
        throw InsufficientDataError("insufficient data: " + std::to_string(distances.size()) +
                                    " distances for " + std::to_string(m) + " components");

    std::vector<double> sorted(distances.begin(), distances.end());
    std::sort(sorted.begin(), sorted.end());
    const double mean = detail::mean_of(sorted);
    const double data_var = detail::variance_of(sorted, mean);
    const double floor_var = detail::variance_floor(data_var, cfg.variance_floor_scale);

    detail::EmRunner runner(sorted, floor_var, data_var, cfg);
    SplitMix64 rng(derive_seed(cfg.seed, comps));

    // Short-run restarts: every start gets a burn-in of at most kBurnInIters
    // EM iterations, then only the leader (ties to the earliest start) runs
    // on to convergence. Starts that converge during burn-in are final.
    std::optional<detail::RunResult> best;
    FitTrace best_trace;
    const int burn_in = std::min(cfg.max_iters, kBurnInIters);
    for (int r = 0; r < cfg.restarts; ++r) {
        auto start = r == 0 ? detail::quantile_start(sorted, comps, data_var, floor_var)
                            : detail::jittered_start(sorted, comps, data_var, floor_var, rng);
        FitTrace run_trace;
        auto result = runner.run(std::move(start), burn_in, trace ? &run_trace : nullptr);
        if (!best || result.log_likelihood > best->log_likelihood) {
            best = std::move(result);
            best_trace = std::move(run_trace);
        }
    }
    if (!best->converged && best->iterations < cfg.max_iters) {
        FitTrace tail;
        auto rest = runner.run(std::move(best->params), cfg.max_iters - best->iterations, trace ? &tail : nullptr);
        // The first entry re-evaluates the burn-in's final parameters.
        if (trace && !tail.log_likelihood.empty()) {
            const auto offset = static_cast<std::size_t>(best->iterations);
            best_trace.log_likelihood.insert(best_trace.log_likelihood.end(), tail.log_likelihood.begin() + 1,
                                             tail.log_likelihood.end());
            for (auto it : tail.reseeds) best_trace.reseeds.push_back(it + offset);
        }
        rest.iterations += best->iterations;
        best = std::move(rest);
    }
    if (trace) *trace = std::move(best_trace);

    GmmModel model;
    model.train_count = distances.size();
    model.log_likelihood = best->log_likelihood;
    model.iterations = best->iterations;
    model.converged = best->converged;
    for (std::size_t j = 0; j < comps; ++j)
        model.components.push_back({best->params.weight[j], best->params.mean[j], std::sqrt(best->params.var[j])});
    std::sort(model.components.begin(), model.components.end(), [](const GmmComponent& a, const GmmComponent& b) {
        return a.mean < b.mean || (a.mean == b.mean && a.std < b.std);
    });
    model.bic = bic_score(model);
    return model;
}

struct SweepEntry {
    int components = 0;
    double log_likelihood = 0.0;
    double bic = 0.0;
};

struct Selection {
    GmmModel model;
    std::vector<SweepEntry> sweep;  // ascending component count
    std::vector<GmmModel> fits;     // every fitted model, same order as sweep
};

// Fits every m in [1, min(max_components, k)] and keeps the BIC minimizer;
// ties go to the smaller m.
inline Selection select_model_sweep(std::span<const double> distances, const FitConfig& cfg) {
    cfg.validate();
    detail::check_distances(distances);
    const int upper = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(cfg.max_components),
                                                             distances.size()));
    Selection out;
    for (int m = 1; m <= upper; ++m) {
        GmmModel model = fit_em(distances, m, cfg);
        out.sweep.push_back({m, model.log_likelihood, model.bic});
        if (m == 1 || model.bic < out.model.bic) out.model = model;
        out.fits.push_back(std::move(model));
    }
    return out;
}

inline GmmModel select_model(std::span<const double> distances, const FitConfig& cfg) {
    return select_model_sweep(distances, cfg).model;
}

inline void check_sigma(double n_sigma) {
    if (!(n_sigma >= 0.0) || !std::isfinite(n_sigma))
        throw ValidationError("n_sigma: must be a finite value >= 0");
}

inline IdIntervals id_intervals(const GmmModel& model, double n_sigma) {
    check_sigma(n_sigma);
    IdIntervals out;
    out.sigma_multiplier = n_sigma;
    for (const auto& c : model.components)
        out.intervals.push_back({c.mean - n_sigma * c.std, c.mean + n_sigma * c.std});
    return out;
}

// ID iff d lies in some closed interval.
inline Membership classify_distance(double d, const IdIntervals& ids) {
    for (const auto& iv : ids.intervals) {
        if (iv.contains(d)) return Membership::Id;
    }
    return Membership::Ood;
}

struct NearestComponent {
    std::size_t index = 0;
    double z = 0.0;  // |d - mu_j| / sigma_j
};

inline NearestComponent nearest_component(double d, const GmmModel& model) {
    NearestComponent best{0, std::numeric_limits<double>::infinity()};
    for (std::size_t j = 0; j < model.size(); ++j) {
        const auto& c = model.components[j];
        const double z = std::abs(d - c.mean) / c.std;
        if (z < best.z) best = {j, z};
    }
    return best;
}

// --- serialization -----------------------------------------------------------

inline nlohmann::ordered_json to_json(const GmmModel& model) {
    nlohmann::ordered_json j;
    auto comps = nlohmann::ordered_json::array();
    for (const auto& c : model.components) {
        nlohmann::ordered_json cj;
        cj["weight"] = c.weight;
        cj["mean"] = c.mean;
        cj["std"] = c.std;
        comps.push_back(std::move(cj));
    }
    j["components"] = std::move(comps);
    j["train_count"] = model.train_count;
    j["log_likelihood"] = model.log_likelihood;
    j["bic"] = model.bic;
    return j;
}

template <typename Json>
GmmModel model_from_json(const Json& j) {
    GmmModel model;
    try {
        for (const auto& cj : j.at("components")) {
            GmmComponent c{cj.at("weight").template get<double>(), cj.at("mean").template get<double>(),
                           cj.at("std").template get<double>()};
            if (!(c.weight >= 0.0 && c.weight <= 1.0) || !std::isfinite(c.mean) || !(c.std > 0.0) ||
                !std::isfinite(c.std))
                throw ValidationError("components: invalid weight/mean/std");
            model.components.push_back(c);
        }
        model.train_count = j.at("train_count").template get<std::size_t>();
        model.log_likelihood = j.at("log_likelihood").template get<double>();
        model.bic = j.at("bic").template get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed model JSON: ") + e.what());
    }
    if (model.components.empty()) throw ValidationError("components: at least one required");
    double total = 0.0;
    for (const auto& c : model.components) total += c.weight;
    if (std::abs(total - 1.0) > 1e-9) throw ValidationError("components: weights do not sum to 1");
    if (!std::is_sorted(model.components.begin(), model.components.end(),
                        [](const auto& a, const auto& b) { return a.mean < b.mean; }))
        throw ValidationError("components: means not in ascending order");
    return model;
}

}  // namespace gem::gmm
