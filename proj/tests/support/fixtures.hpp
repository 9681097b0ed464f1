#pragma once

// Shared fixtures: oracle fixture loading, temp directories, and a helper
// that runs the gem binary and captures its output.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "gem/synth.hpp"
#include "support/oracles.hpp"

namespace fixtures {

inline std::filesystem::path data_dir() { return GEM_TEST_DATA; }

inline nlohmann::json load_json(const std::string& name) {
    std::ifstream in(data_dir() / name);
    return nlohmann::json::parse(in);
}

struct OracleFixture {
    std::string name;
    std::vector<double> data;
    std::size_t components = 1;
};

inline std::vector<OracleFixture> oracle_fixtures() {
    const auto cfg = load_json("oracle_grid.json");
    std::vector<OracleFixture> out;
    for (const auto& f : cfg.at("fixtures")) {
        OracleFixture fx;
        fx.name = f.at("name").get<std::string>();
        const auto count = f.at("count").get<std::size_t>();
        if (f.contains("constant")) {
            fx.data.assign(count, f.at("constant").get<double>());
        } else {
            gem::synth::MixtureSpec spec;
            for (const auto& c : f.at("components"))
                spec.components.push_back({c[0].get<double>(), c[1].get<double>(), c[2].get<double>()});
            spec.count = count;
            spec.seed = f.at("seed").get<std::uint64_t>();
            fx.data = gem::synth::sample_mixture(spec);
            fx.components = spec.components.size();
        }
        out.push_back(std::move(fx));
    }
    return out;
}

inline oracle::GridSpec grid_spec() {
    const auto g = load_json("oracle_grid.json").at("grid");
    oracle::GridSpec s;
    s.mean_levels = g.at("mean_levels");
    s.std_levels = g.at("std_levels");
    s.weight_steps = g.at("weight_steps");
    s.refine_starts = g.at("refine_starts");
    s.floor_scale = g.at("floor_scale");
    return s;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("gem-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct RunOutput {
    int exit_code = -1;
    std::string out;
    std::string err;
};

inline std::string quote(const std::string& s) {
    std::string q = "'";
    for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return q + "'";
}

// Runs the gem binary with `args`; `env` is prepended as VAR=value pairs.
inline RunOutput run_gem(const std::vector<std::string>& args, const std::string& env = "") {
    static int counter = 0;
    const auto base = std::filesystem::temp_directory_path() /
                      ("gem-run-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::string cmd = env.empty() ? "" : env + " ";
    cmd += quote(GEM_CLI_PATH);
    for (const auto& a : args) cmd += " " + quote(a);
    cmd += " > " + quote(base.string() + ".out") + " 2> " + quote(base.string() + ".err");
    const int status = std::system(cmd.c_str());
    RunOutput r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(base.string() + ".out");
    r.err = slurp(base.string() + ".err");
    std::filesystem::remove(base.string() + ".out");
    std::filesystem::remove(base.string() + ".err");
    return r;
}

// The seven-score example: ID {0.1, 0.35, 0.4, 0.8}, OOD {0.5, 0.7, 0.9}.
inline const std::vector<double> kSevenId{0.1, 0.35, 0.4, 0.8};
inline const std::vector<double> kSevenOod{0.5, 0.7, 0.9};

}  // namespace fixtures

namespace fixtures {

struct EvalFiles {
    std::filesystem::path train, id_test, ood_test;
};

// ID: a 16-D shell of radius N(10, 0.5) around the origin; the ID test
// radii are truncated at 1.5 sd. OOD: the same shell around (40, 0, ...),
// so every OOD centroid distance is near 30 or beyond.
inline EvalFiles write_separable(const std::filesystem::path& dir) {
    gem::synth::ShellSpec id;
    id.center.assign(16, 0.0);
    id.radii = {{1.0, 10.0, 0.5}};
    id.count = 1000;
    id.seed = 101;
    id.id_prefix = "train";
    gem::synth::ShellSpec id_test = id;
    id_test.count = 300;
    id_test.seed = 102;
    id_test.max_z = 1.5;
    id_test.id_prefix = "idt";
    gem::synth::ShellSpec ood = id_test;
    ood.center[0] = 40.0;
    ood.seed = 103;
    ood.label = gem::Label::Ood;
    ood.id_prefix = "ood";

    EvalFiles f{dir / "train.emb", dir / "id_test.emb", dir / "ood_test.emb"};
    gem::write_container(gem::synth::shell_cloud(id), f.train);
    gem::write_container(gem::synth::shell_cloud(id_test), f.id_test);
    gem::write_container(gem::synth::shell_cloud(ood), f.ood_test);
    return f;
}

}  // namespace fixtures
