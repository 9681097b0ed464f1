#pragma once

// Brute-force reference implementations for the tests. Nothing here calls
// into the library's numeric kernels: densities use long double std::exp and
// std::log, sums are plain loops, linear solves are Gaussian elimination.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <vector>

namespace oracle {

using real = long double;

// --- mixture likelihood ------------------------------------------------------

struct Component {
    real weight, mean, std;
};

inline real mixture_log_likelihood(const std::vector<double>& xs, const std::vector<Component>& comps) {
    const real log_norm = std::log(std::sqrt(2.0L * std::numbers::pi_v<real>));
    real total = 0.0L;
    for (double x : xs) {
        real p = 0.0L;
        real best_log = -std::numeric_limits<real>::infinity();
        std::vector<real> logs;
        logs.reserve(comps.size());
        for (const auto& c : comps) {
            const real z = (static_cast<real>(x) - c.mean) / c.std;
            const real l = std::log(c.weight) - std::log(c.std) - log_norm - 0.5L * z * z;
            logs.push_back(l);
            best_log = std::max(best_log, l);
        }
        for (real l : logs) p += std::exp(l - best_log);
        total += best_log + std::log(p);
    }
    return total;
}

struct GridSpec {
    int mean_levels = 12;    // evenly spaced over [min, max] of the data
    int std_levels = 6;      // log-spaced from the variance floor up to the data range
    int weight_steps = 6;    // simplex resolution 1/weight_steps, every weight > 0
    int refine_starts = 4;   // best grid cells handed to the local search
    double floor_scale = 1e-8;
};

struct GridResult {
    double log_likelihood = 0.0;      // best value after refinement
    double grid_log_likelihood = 0.0; // best raw grid cell
    std::vector<Component> best;
    bool too_coarse = false;          // a neighbor of the best cell differs by > 0.1
};

namespace detail {

inline void weight_compositions(int steps, int parts, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
    if (parts == 1) {
        if (steps >= 1) {
            cur.push_back(steps);
            out.push_back(cur);
            cur.pop_back();
        }
        return;
    }
    for (int s = 1; s <= steps - (parts - 1); ++s) {
        cur.push_back(s);
        weight_compositions(steps - s, parts - 1, cur, out);
        cur.pop_back();
    }
}

inline void nondecreasing(int levels, int parts, int from, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
    if (parts == 0) {
        out.push_back(cur);
        return;
    }
    for (int i = from; i < levels; ++i) {
        cur.push_back(i);
        nondecreasing(levels, parts - 1, i, cur, out);
        cur.pop_back();
    }
}

// Data binned on a fine histogram; only used to rank grid cells cheaply.
struct Histogram {
    std::vector<real> centers, counts;
};

inline Histogram histogram(const std::vector<double>& xs, int bins) {
    const auto [lo_it, hi_it] = std::minmax_element(xs.begin(), xs.end());
    const real lo = *lo_it, hi = *hi_it;
    Histogram h;
    if (hi == lo) {
        h.centers = {lo};
        h.counts = {static_cast<real>(xs.size())};
        return h;
    }
    const real width = (hi - lo) / bins;
    h.centers.resize(bins);
    h.counts.assign(bins, 0.0L);
    for (int b = 0; b < bins; ++b) h.centers[b] = lo + (b + 0.5L) * width;
    for (double x : xs) {
        int b = static_cast<int>((x - lo) / width);
        h.counts[std::min(b, bins - 1)] += 1.0L;
    }
    return h;
}

// Double precision is enough here: the binned value only ranks cells.
inline double binned_ll(const Histogram& h, const std::vector<Component>& comps) {
    double total = 0.0;
    for (std::size_t b = 0; b < h.centers.size(); ++b) {
        if (h.counts[b] == 0.0L) continue;
        double p = 0.0;
        for (const auto& c : comps) {
            const double z = static_cast<double>((h.centers[b] - c.mean) / c.std);
            p += static_cast<double>(c.weight / c.std) * std::exp(-0.5 * z * z);
        }
        total += static_cast<double>(h.counts[b]) * std::log(std::max(p, std::numeric_limits<double>::min()));
    }
    return total;
}

// Unconstrained coordinates: means, log stds, weight logits (last logit 0).
inline std::vector<Component> decode(const std::vector<real>& p, std::size_t m, real min_std) {
    std::vector<Component> c(m);
    real z = 0.0L;
    for (std::size_t j = 0; j < m; ++j) {
        c[j].mean = p[j];
        c[j].std = std::max(std::exp(p[m + j]), min_std);
        c[j].weight = j + 1 < m ? std::exp(p[2 * m + j]) : 1.0L;
        z += c[j].weight;
    }
    for (auto& cj : c) cj.weight /= z;
    return c;
}

inline std::vector<real> encode(const std::vector<Component>& c) {
    const std::size_t m = c.size();
    std::vector<real> p(3 * m - 1);
    for (std::size_t j = 0; j < m; ++j) {
        p[j] = c[j].mean;
        p[m + j] = std::log(c[j].std);
        if (j + 1 < m) p[2 * m + j] = std::log(c[j].weight / c[m - 1].weight);
    }
    return p;
}

// Log-likelihood and its gradient in the unconstrained coordinates.
inline real value_and_gradient(const std::vector<double>& xs, const std::vector<real>& p, std::size_t m,
                               real min_std, std::vector<real>& grad) {
    const auto c = decode(p, m, min_std);
    const real log_norm = std::log(std::sqrt(2.0L * std::numbers::pi_v<real>));
    grad.assign(p.size(), 0.0L);
    std::vector<real> logs(m), resp(m);
    real total = 0.0L;
    for (double xd : xs) {
        const real x = xd;
        real top = -std::numeric_limits<real>::infinity();
        for (std::size_t j = 0; j < m; ++j) {
            const real z = (x - c[j].mean) / c[j].std;
            logs[j] = std::log(c[j].weight) - std::log(c[j].std) - log_norm - 0.5L * z * z;
            top = std::max(top, logs[j]);
        }
        real sum = 0.0L;
        for (std::size_t j = 0; j < m; ++j) sum += (resp[j] = std::exp(logs[j] - top));
        total += top + std::log(sum);
        for (std::size_t j = 0; j < m; ++j) {
            const real r = resp[j] / sum;
            const real z = (x - c[j].mean) / c[j].std;
            grad[j] += r * z / c[j].std;
            // a std clamped at the floor has no gradient
            if (std::exp(p[m + j]) > min_std) grad[m + j] += r * (z * z - 1.0L);
            if (j + 1 < m) grad[2 * m + j] += r - c[j].weight;
        }
    }
    return total;
}

// BFGS ascent with a backtracking (Armijo) line search.
inline std::pair<std::vector<real>, real> bfgs(const std::vector<double>& xs, std::vector<real> p, std::size_t m,
                                               real min_std, int max_iters = 2000) {
    const std::size_t n = p.size();
    std::vector<real> g, g_new;
    real f = value_and_gradient(xs, p, m, min_std, g);
    std::vector<std::vector<real>> h(n, std::vector<real>(n, 0.0L));  // inverse Hessian of -f
    const real scale = 1.0L / static_cast<real>(xs.size());
    for (std::size_t i = 0; i < n; ++i) h[i][i] = scale;
    for (int it = 0; it < max_iters; ++it) {
        std::vector<real> dir(n, 0.0L);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < n; ++k) dir[i] += h[i][k] * g[k];
        real slope = 0.0L;
        for (std::size_t i = 0; i < n; ++i) slope += dir[i] * g[i];
        if (!(slope > 0.0L)) {
            for (std::size_t i = 0; i < n; ++i) {
                std::fill(h[i].begin(), h[i].end(), 0.0L);
                h[i][i] = scale;
                dir[i] = scale * g[i];
            }
            slope = 0.0L;
            for (std::size_t i = 0; i < n; ++i) slope += dir[i] * g[i];
            if (!(slope > 0.0L)) break;
        }
        real t = 1.0L;
        std::vector<real> q(n);
        real fq = 0.0L;
        bool moved = false;
        for (int ls = 0; ls < 60; ++ls, t *= 0.5L) {
            for (std::size_t i = 0; i < n; ++i) q[i] = p[i] + t * dir[i];
            fq = value_and_gradient(xs, q, m, min_std, g_new);
            if (std::isfinite(fq) && fq >= f + 1e-4L * t * slope) {
                moved = true;
                break;
            }
        }
        if (!moved || fq - f <= 1e-16L * std::abs(f)) {
            if (moved && fq > f) {
                p = q;
                f = fq;
            }
            break;
        }
        std::vector<real> sv(n), yv(n);
        for (std::size_t i = 0; i < n; ++i) {
            sv[i] = q[i] - p[i];
            yv[i] = g[i] - g_new[i];  // gradient of -f
        }
        real sy = 0.0L;
        for (std::size_t i = 0; i < n; ++i) sy += sv[i] * yv[i];
        if (sy > 0.0L) {
            std::vector<real> hy(n, 0.0L);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t k = 0; k < n; ++k) hy[i] += h[i][k] * yv[k];
            real yhy = 0.0L;
            for (std::size_t i = 0; i < n; ++i) yhy += yv[i] * hy[i];
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t k = 0; k < n; ++k)
                    h[i][k] += (sy + yhy) * sv[i] * sv[k] / (sy * sy) - (hy[i] * sv[k] + sv[i] * hy[k]) / sy;
        }
        p = q;
        f = fq;
        g = g_new;
    }
    return {p, f};
}

}  // namespace detail

inline GridResult grid_likelihood_oracle(const std::vector<double>& xs, std::size_t m, const GridSpec& spec) {
    const auto [lo_it, hi_it] = std::minmax_element(xs.begin(), xs.end());
    const real lo = *lo_it, hi = *hi_it;
    real mean = 0.0L;
    for (double x : xs) mean += x;
    mean /= xs.size();
    real var = 0.0L;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= xs.size();
    const real floor_var = var > 0.0L ? spec.floor_scale * var : 1e-12L;
    const real min_std = std::sqrt(floor_var);

    std::vector<real> mean_grid, std_grid;
    for (int i = 0; i < spec.mean_levels; ++i)
        mean_grid.push_back(spec.mean_levels == 1 ? lo : lo + (hi - lo) * i / (spec.mean_levels - 1));
    const real std_hi = std::max(hi - lo, min_std);
    for (int i = 0; i < spec.std_levels; ++i) {
        const real t = spec.std_levels == 1 ? 0.0L : static_cast<real>(i) / (spec.std_levels - 1);
        std_grid.push_back(min_std * std::pow(std_hi / min_std, t));
    }
    // Degenerate data: the grid collapses onto the single value.
    if (hi == lo) {
        mean_grid.assign(1, lo);
        std_grid.assign(1, min_std);
    }

    std::vector<std::vector<int>> mean_tuples, weight_tuples;
    std::vector<int> cur;
    detail::nondecreasing(static_cast<int>(mean_grid.size()), static_cast<int>(m), 0, cur, mean_tuples);
    detail::weight_compositions(spec.weight_steps, static_cast<int>(m), cur, weight_tuples);
    if (weight_tuples.empty()) weight_tuples.push_back(std::vector<int>(m, 1));
    const int weight_total = [&] {
        int s = 0;
        for (int w : weight_tuples.front()) s += w;
        return s;
    }();

    std::vector<std::vector<int>> std_tuples;
    {
        std::vector<int> idx(m, 0);
        const int L = static_cast<int>(std_grid.size());
        for (;;) {
            std_tuples.push_back(idx);
            std::size_t k = 0;
            while (k < m && ++idx[k] == L) idx[k++] = 0;
            if (k == m) break;
        }
    }

    const auto hist = detail::histogram(xs, 128);
    struct Cell {
        double ll;
        std::size_t mt, st, wt;
    };
    std::vector<Cell> top;
    auto components = [&](std::size_t mt, std::size_t st, std::size_t wt) {
        std::vector<Component> c(m);
        for (std::size_t j = 0; j < m; ++j) {
            c[j].mean = mean_grid[mean_tuples[mt][j]];
            c[j].std = std_grid[std_tuples[st][j]];
            c[j].weight = static_cast<real>(weight_tuples[wt][j]) / weight_total;
        }
        return c;
    };
    for (std::size_t mt = 0; mt < mean_tuples.size(); ++mt)
        for (std::size_t st = 0; st < std_tuples.size(); ++st)
            for (std::size_t wt = 0; wt < weight_tuples.size(); ++wt) {
                const double ll = detail::binned_ll(hist, components(mt, st, wt));
                if (top.size() < static_cast<std::size_t>(spec.refine_starts) || ll > top.back().ll) {
                    top.push_back({ll, mt, st, wt});
                    std::sort(top.begin(), top.end(), [](const Cell& a, const Cell& b) { return a.ll > b.ll; });
                    if (top.size() > static_cast<std::size_t>(spec.refine_starts)) top.pop_back();
                }
            }

    GridResult out;
    out.grid_log_likelihood = -std::numeric_limits<double>::infinity();
    out.log_likelihood = -std::numeric_limits<double>::infinity();
    for (const auto& cell : top) {
        const auto start = components(cell.mt, cell.st, cell.wt);
        const real exact = mixture_log_likelihood(xs, start);
        out.grid_log_likelihood = std::max(out.grid_log_likelihood, static_cast<double>(exact));
        if (hi == lo) {
            if (exact > out.log_likelihood) {
                out.log_likelihood = static_cast<double>(exact);
                out.best = start;
            }
            continue;
        }
        auto [p, v] = detail::bfgs(xs, detail::encode(start), m, min_std);
        if (v > out.log_likelihood) {
            out.log_likelihood = static_cast<double>(v);
            out.best = detail::decode(p, m, min_std);
        }
    }

    // Neighbor spread of the best raw cell, as a resolution sanity check.
    const auto& b = top.front();
    const real center = mixture_log_likelihood(xs, components(b.mt, b.st, b.wt));
    for (std::size_t j = 0; j < m && hi != lo; ++j) {
        for (int d : {-1, 1}) {
            auto c = components(b.mt, b.st, b.wt);
            const int mi = mean_tuples[b.mt][j] + d;
            if (mi >= 0 && mi < static_cast<int>(mean_grid.size())) {
                c[j].mean = mean_grid[mi];
                if (std::abs(mixture_log_likelihood(xs, c) - center) > 0.1L * static_cast<real>(xs.size()))
                    out.too_coarse = true;
            }
        }
    }
    std::sort(out.best.begin(), out.best.end(), [](const auto& a, const auto& c) { return a.mean < c.mean; });
    return out;
}

// --- AUROC and ROC -------------------------------------------------------------

inline double mann_whitney_auroc(const std::vector<double>& id, const std::vector<double>& ood) {
    long long twice = 0;
    for (double o : ood)
        for (double i : id) twice += o > i ? 2 : (o == i ? 1 : 0);
    return static_cast<double>(twice) / (2.0 * static_cast<double>(id.size()) * static_cast<double>(ood.size()));
}

struct Rate {
    double fpr, tpr;
};

// Rates when flagging score >= t, by direct counting.
inline Rate rates_at(const std::vector<double>& id, const std::vector<double>& ood, double t) {
    std::size_t fp = 0, tp = 0;
    for (double s : id) fp += s >= t;
    for (double s : ood) tp += s >= t;
    return {static_cast<double>(fp) / id.size(), static_cast<double>(tp) / ood.size()};
}

// Every candidate threshold: +inf, each distinct score, -inf.
inline std::vector<double> candidate_thresholds(const std::vector<double>& id, const std::vector<double>& ood) {
    std::vector<double> t(id);
    t.insert(t.end(), ood.begin(), ood.end());
    std::sort(t.begin(), t.end(), std::greater<>());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    t.insert(t.begin(), std::numeric_limits<double>::infinity());
    t.push_back(-std::numeric_limits<double>::infinity());
    return t;
}

inline double brute_fpr_at_tpr(const std::vector<double>& id, const std::vector<double>& ood, double target) {
    double best = 1.0;
    for (double t : candidate_thresholds(id, ood)) {
        std::size_t tp = 0;
        for (double s : ood) tp += s >= t;
        if (static_cast<double>(tp) >= target * static_cast<double>(ood.size()) - 1e-9)
            best = std::min(best, rates_at(id, ood, t).fpr);
    }
    return best;
}

struct YoudenOracle {
    double threshold, j;
};

// Exhaustive Youden sweep: all midpoints of adjacent distinct scores plus
// +-inf, J evaluated by recounting at each threshold.
inline YoudenOracle brute_youden(const std::vector<double>& id, const std::vector<double>& ood) {
    std::vector<double> s(id);
    s.insert(s.end(), ood.begin(), ood.end());
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    std::vector<double> cands{-std::numeric_limits<double>::infinity()};
    for (std::size_t i = 0; i + 1 < s.size(); ++i) cands.push_back(s[i] + (s[i + 1] - s[i]) / 2.0);
    cands.push_back(std::numeric_limits<double>::infinity());
    YoudenOracle best{0.0, -2.0};
    for (double t : cands) {
        const auto r = rates_at(id, ood, t);
        const double j = r.tpr - r.fpr;
        if (j > best.j + 1e-12) best = {t, j};
    }
    return best;
}

// --- linear algebra and geometry ----------------------------------------------

using Matrix = std::vector<std::vector<double>>;

inline std::vector<double> naive_centroid(const std::vector<std::vector<double>>& rows) {
    std::vector<real> acc(rows.front().size(), 0.0L);
    for (const auto& r : rows)
        for (std::size_t d = 0; d < r.size(); ++d) acc[d] += r[d];
    std::vector<double> out;
    for (real a : acc) out.push_back(static_cast<double>(a / rows.size()));
    return out;
}

inline double naive_distance(const std::vector<double>& a, const std::vector<double>& b) {
    real s = 0.0L;
    for (std::size_t d = 0; d < a.size(); ++d) s += (static_cast<real>(a[d]) - b[d]) * (static_cast<real>(a[d]) - b[d]);
    return static_cast<double>(std::sqrt(s));
}

// Two-pass unbiased covariance.
inline Matrix naive_covariance(const std::vector<std::vector<double>>& rows) {
    const auto mu = naive_centroid(rows);
    const std::size_t d = mu.size();
    Matrix c(d, std::vector<double>(d, 0.0));
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) {
            real s = 0.0L;
            for (const auto& r : rows) s += (static_cast<real>(r[a]) - mu[a]) * (static_cast<real>(r[b]) - mu[b]);
            c[a][b] = static_cast<double>(s / (rows.size() - 1));
        }
    return c;
}

// (y - mu)^T S^{-1} (y - mu) by Gaussian elimination with partial pivoting.
inline double naive_mahalanobis(const std::vector<double>& y, const std::vector<double>& mu, Matrix s) {
    const std::size_t n = y.size();
    std::vector<real> rhs(n);
    for (std::size_t i = 0; i < n; ++i) rhs[i] = static_cast<real>(y[i]) - mu[i];
    const auto diff = rhs;
    std::vector<std::vector<real>> a(n, std::vector<real>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a[i][j] = s[i][j];
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        std::swap(a[c], a[piv]);
        std::swap(rhs[c], rhs[piv]);
        for (std::size_t r = c + 1; r < n; ++r) {
            const real f = a[r][c] / a[c][c];
            for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
            rhs[r] -= f * rhs[c];
        }
    }
    std::vector<real> x(n);
    for (std::size_t i = n; i-- > 0;) {
        real v = rhs[i];
        for (std::size_t k = i + 1; k < n; ++k) v -= a[i][k] * x[k];
        x[i] = v / a[i][i];
    }
    real out = 0.0L;
    for (std::size_t i = 0; i < n; ++i) out += diff[i] * x[i];
    return static_cast<double>(out);
}

// P(|Z| <= n) for a standard normal.
inline double normal_coverage(double n) { return std::erf(n / std::numbers::sqrt2); }

}  // namespace oracle
