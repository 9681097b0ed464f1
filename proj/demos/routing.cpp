// Fits a detector on a synthetic two-shell ID corpus and routes a few probes:
// points on either shell stay LOCAL, points between or beyond go to FALLBACK.

#include <cstdio>
#include <string>
#include <vector>

#include "gem/detector.hpp"
#include "gem/synth.hpp"

int main() {
    // ID embeddings sit on two concentric shells around the origin, so their
    // centroid distances are bimodal.
    gem::synth::ShellSpec spec;
    spec.center.assign(8, 0.0);
    spec.radii = {{0.5, 4.0, 0.3}, {0.5, 9.0, 0.5}};
    spec.count = 2000;
    spec.seed = 7;
    const auto train = gem::synth::shell_cloud(spec);

    gem::gmm::FitConfig cfg;
    cfg.max_components = 6;
    const auto det = gem::fit_detector(train, cfg);
    std::printf("m* = %zu\n", det.model.size());
    for (const auto& c : det.model.components)
        std::printf("  weight %.3f  mean %.3f  std %.3f\n", c.weight, c.mean, c.std);

    // Probes along the first axis. Radius 6.5 falls in the gap between the shells.
    std::printf("%-6s %9s %7s  %s\n", "probe", "distance", "z", "route");
    for (double r : {4.1, 6.5, 8.8, 20.0}) {
        std::vector<double> e(8, 0.0);
        e[0] = r;
        const auto v = gem::detect(det, e);
        std::printf("%-6.1f %9.3f %7.2f  %s\n", r, v.distance, v.z,
                    std::string(gem::to_string(gem::route(v))).c_str());
    }
}
