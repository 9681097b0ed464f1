#pragma once

// Seeded synthetic data: 1-D Gaussian mixtures and embedding clouds whose
// centroid distances follow a chosen mixture. All randomness comes from
// SplitMix64 (see random.hpp), so fixtures are reproducible anywhere.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gem/container.hpp"
#include "gem/error.hpp"
#include "gem/random.hpp"

namespace gem::synth {

struct MixtureComponent {
    double weight = 1.0;
    double mean = 0.0;
    double std = 1.0;
};

struct MixtureSpec {
    std::vector<MixtureComponent> components;
    std::size_t count = 0;
    std::uint64_t seed = 0;

    void validate() const {
        if (components.empty()) throw ValidationError("components: at least one required");
        double total = 0.0;
        for (const auto& c : components) {
            if (!(c.weight >= 0.0)) throw ValidationError("components: negative weight");
            if (!(c.std > 0.0) || !std::isfinite(c.std)) throw ValidationError("components: std must be > 0");
            if (!std::isfinite(c.mean)) throw ValidationError("components: non-finite mean");
            total += c.weight;
        }
        if (std::abs(total - 1.0) > 1e-9) throw ValidationError("components: weights must sum to 1");
    }
};

namespace detail {

// Component index by inverse CDF over the weights.
inline std::size_t pick_component(const std::vector<MixtureComponent>& comps, double u) {
    double acc = 0.0;
    for (std::size_t j = 0; j + 1 < comps.size(); ++j) {
        acc += comps[j].weight;
        if (u < acc) return j;
    }
    return comps.size() - 1;
}

}  // namespace detail

// Per draw: one uniform picks the component, then one Box-Muller normal
// (two uniforms) gives the deviate.
inline std::vector<double> sample_mixture(const MixtureSpec& spec) {
    spec.validate();
    SplitMix64 rng(spec.seed);
    std::vector<double> out;
    out.reserve(spec.count);
    for (std::size_t i = 0; i < spec.count; ++i) {
        const auto& c = spec.components[detail::pick_component(spec.components, rng.uniform01())];
        out.push_back(rng.normal(c.mean, c.std));
    }
    return out;
}

// Isotropic Gaussian cloud: center + sigma * N(0, I).
inline EmbeddingSet gaussian_cloud(const std::vector<double>& center, double sigma, std::size_t count,
                                   std::uint64_t seed, Label label = Label::Id, std::string_view id_prefix = "g") {
    if (center.empty()) throw ValidationError("center: empty");
    if (!(sigma > 0.0)) throw ValidationError("sigma: must be > 0");
    SplitMix64 rng(seed);
    EmbeddingSet set;
    set.dim = center.size();
    set.values.reserve(count * set.dim);
    for (std::size_t i = 0; i < count; ++i) {
        for (double c : center) set.values.push_back(rng.normal(c, sigma));
    }
    set.labels.assign(count, label);
    set.sample_ids = sequential_ids(count, id_prefix);
    set.validate();
    return set;
}

// Points center + r * u with u uniform on the unit sphere and r drawn from a
// mixture of radii. With `max_z`, radii more than max_z component stds from
// their component mean are redrawn (rejection), bounding the shell thickness.
struct ShellSpec {
    std::vector<double> center;
    std::vector<MixtureComponent> radii;
    std::size_t count = 0;
    std::uint64_t seed = 0;
    std::optional<double> max_z;
    Label label = Label::Id;
    std::string id_prefix = "s";
};

inline EmbeddingSet shell_cloud(const ShellSpec& spec) {
    if (spec.center.empty()) throw ValidationError("center: empty");
    MixtureSpec{spec.radii, spec.count, spec.seed}.validate();
    SplitMix64 rng(spec.seed);
    const std::size_t dim = spec.center.size();
    EmbeddingSet set;
    set.dim = dim;
    set.values.reserve(spec.count * dim);
    std::vector<double> dir(dim);
    for (std::size_t i = 0; i < spec.count; ++i) {
        double norm = 0.0;
        do {
            norm = 0.0;
            for (double& x : dir) {
                x = rng.normal();
                norm += x * x;
            }
        } while (norm == 0.0);
        norm = std::sqrt(norm);
        const auto& comp = spec.radii[detail::pick_component(spec.radii, rng.uniform01())];
        double z = rng.normal();
        if (spec.max_z) {
            while (std::abs(z) > *spec.max_z) z = rng.normal();
        }
        const double r = comp.mean + comp.std * z;
        for (std::size_t d = 0; d < dim; ++d) set.values.push_back(spec.center[d] + r * dir[d] / norm);
    }
    set.labels.assign(spec.count, spec.label);
    set.sample_ids = sequential_ids(spec.count, spec.id_prefix);
    set.validate();
    return set;
}

}  // namespace gem::synth
