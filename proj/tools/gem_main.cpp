// gem: fit, apply and evaluate GEM OOD detectors from the command line.
//
// Exit codes: 0 success, 1 I/O failure, 2 validation failure.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gem/cli.hpp"
#include "gem/error.hpp"

namespace {

enum Exit { kOk = 0, kIo = 1, kInvalid = 2 };

struct Raw {
    std::string method = "gem";
    std::string format = "table";
    double holdout = 0.0;
};

// Options shared by every subcommand. Values come from (lowest to highest)
// the defaults, a --config key=value file, GEM_SEED and the command line.
void add_common(CLI::App* sub, gem::cli::RunConfig& cfg, std::string& config_path) {
    // Consumed by expand_config before parsing; registered for --help.
    sub->add_option("--config", config_path, "key=value file with option defaults");
    sub->add_option("--max-components", cfg.fit.max_components, "upper bound of the BIC search")
        ->capture_default_str();
    sub->add_option("--max-iters", cfg.fit.max_iters, "EM iteration cap")->capture_default_str();
    sub->add_option("--rel-tol", cfg.fit.rel_tol, "relative log-likelihood tolerance")->capture_default_str();
    sub->add_option("--restarts", cfg.fit.restarts, "EM starts per component count")->capture_default_str();
    sub->add_option("--seed", cfg.fit.seed, "RNG seed")->envname("GEM_SEED")->capture_default_str();
    sub->add_option("--sigma", cfg.n_sigma, "ID interval half-width in standard deviations")->capture_default_str();
}

void add_eval_inputs(CLI::App* sub, gem::cli::RunConfig& cfg, Raw& raw) {
    sub->add_option("--method", raw.method, "gem, tv, topk, entropy, last-layer or best-layer")
        ->capture_default_str();
    sub->add_option("--train", cfg.train, "ID training container");
    sub->add_option("--id-test", cfg.id_test, "ID test container");
    sub->add_option("--ood-test", cfg.ood_test, "OOD test container");
    sub->add_option("--val-id", cfg.val_id, "ID validation container (best-layer)");
    sub->add_option("--val-ood", cfg.val_ood, "OOD validation container (best-layer)");
    sub->add_option("--tv-order", cfg.tv_order, "differential order of the TV score")->capture_default_str();
    sub->add_option("--lambda", cfg.lambda, "covariance ridge, relative to the mean variance")->capture_default_str();
}

int report(int code, const std::string& what) {
    std::cerr << "gem: " << what << "\n";
    return code;
}

bool has_flag(const std::vector<std::string>& args, const std::string& flag) {
    return std::any_of(args.begin(), args.end(),
                       [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
}

// CLI11 reads config files only for the root app, so a --config given to a
// subcommand is expanded here: every key becomes a flag unless the command
// line already sets it, and `seed` yields to GEM_SEED. Keys may sit at the
// top level or under a [<subcommand>] section.
std::vector<std::string> expand_config(std::vector<std::string> args) {
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[i + 1];
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + 2));
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
            break;
        }
    }
    if (path.empty()) return args;
    std::ifstream in(path);
    if (!in) throw CLI::FileError::Missing(path);
    const std::string sub = args.empty() ? "" : args.front();
    for (const auto& item : CLI::ConfigTOML().from_config(in)) {
        if (item.name == "++" || item.name == "--" || item.inputs.empty()) continue;
        if (!item.parents.empty() && !(item.parents.size() == 1 && item.parents[0] == sub)) continue;
        std::string key = item.name;
        std::replace(key.begin(), key.end(), '_', '-');
        const std::string flag = "--" + key;
        if (has_flag(args, flag)) continue;
        if (key == "seed" && std::getenv("GEM_SEED") != nullptr) continue;
        args.push_back(flag);
        for (const auto& v : item.inputs) args.push_back(v);
    }
    return args;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GEM out-of-distribution detector toolkit"};
    app.require_subcommand(1);

    gem::cli::RunConfig cfg;
    Raw raw;
    std::string config_path;

    auto* fit = app.add_subcommand("fit", "fit a detector on ID training embeddings");
    add_common(fit, cfg, config_path);
    fit->add_option("--train", cfg.train, "ID training container")->required();
    fit->add_option("--out", cfg.out, "detector JSON to write")->required();
    fit->add_option("--holdout", raw.holdout, "fraction of the training set kept out of the fit");

    auto* detect = app.add_subcommand("detect", "score samples with a fitted detector");
    add_common(detect, cfg, config_path);
    detect->add_option("--detector", cfg.detector, "detector JSON")->required();
    detect->add_option("--input", cfg.input, "embeddings to score")->required();
    detect->add_option("--out", cfg.out, "write JSON lines here instead of stdout");

    auto* eval = app.add_subcommand("eval", "evaluate a method on ID/OOD test sets");
    add_common(eval, cfg, config_path);
    add_eval_inputs(eval, cfg, raw);
    eval->add_option("--format", raw.format, "json, table or csv")->capture_default_str();
    eval->add_option("--out-dir", cfg.out_dir, "also write report.json and report.txt here");

    auto* ablate = app.add_subcommand("ablate", "sweep max components and sigma");
    add_common(ablate, cfg, config_path);
    add_eval_inputs(ablate, cfg, raw);
    ablate->add_option("--out-dir", cfg.out_dir, "directory for the sweep CSVs")->required();

    auto* roc = app.add_subcommand("roc", "write the ROC curve as CSV");
    add_common(roc, cfg, config_path);
    add_eval_inputs(roc, cfg, raw);
    roc->add_option("--out", cfg.out, "CSV file (default stdout)");

    try {
        std::vector<std::string> args = expand_config(std::vector<std::string>(argv + 1, argv + argc));
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::FileError& e) {
        return report(kIo, e.what());
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kInvalid;
    }

    try {
        cfg.method = gem::parse_method(raw.method);
        cfg.format = gem::cli::parse_format(raw.format);
        if (fit->count("--holdout") > 0) cfg.holdout = raw.holdout;

        if (fit->parsed()) {
            gem::cli::cmd_fit(cfg, std::cout);
        } else if (detect->parsed()) {
            gem::cli::cmd_detect(cfg, std::cout);
        } else if (eval->parsed()) {
            gem::cli::cmd_eval(cfg, std::cout);
        } else if (ablate->parsed()) {
            gem::cli::cmd_ablate(cfg, std::cout);
        } else if (roc->parsed()) {
            gem::cli::cmd_roc(cfg, std::cout);
        }
    } catch (const gem::IoError& e) {
        return report(kIo, e.what());
    } catch (const gem::ValidationError& e) {
        return report(kInvalid, e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        return report(kIo, e.what());
    } catch (const std::exception& e) {
        return report(kIo, e.what());
    }
    return kOk;
}
