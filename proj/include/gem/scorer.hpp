#pragma once

// Common fit/score interface over GEM and the baselines, so callers can
// switch detectors by name.

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gem/baselines.hpp"
#include "gem/container.hpp"
#include "gem/detector.hpp"
#include "gem/error.hpp"
#include "gem/gmm.hpp"

namespace gem {

enum class Method { Gem, Tv, TopK, Entropy, LastLayer, BestLayer };

inline std::string_view to_string(Method m) {
    switch (m) {
        case Method::Gem: return "gem";
        case Method::Tv: return "tv";
        case Method::TopK: return "topk";
        case Method::Entropy: return "entropy";
        case Method::LastLayer: return "last-layer";
        case Method::BestLayer: return "best-layer";
    }
    return "gem";
}

inline Method parse_method(std::string_view name) {
    for (Method m : {Method::Gem, Method::Tv, Method::TopK, Method::Entropy, Method::LastLayer, Method::BestLayer}) {
        if (to_string(m) == name) return m;
    }
    throw ValidationError("unknown method '" + std::string(name) +
                          "' (expected gem, tv, topk, entropy, last-layer or best-layer)");
}

// Container kind each method scores.
inline ContainerKind input_kind(Method m) {
    switch (m) {
        case Method::Gem: return ContainerKind::Embeddings;
        case Method::TopK:
        case Method::Entropy: return ContainerKind::Candidates;
        default: return ContainerKind::Layers;
    }
}

inline bool needs_training(Method m) { return m != Method::TopK && m != Method::Entropy; }

struct ScorerOptions {
    gmm::FitConfig fit;
    double n_sigma = kDefaultSigma;
    int tv_order = 1;
    double lambda = baselines::kDefaultLambda;
    // best-layer only: validation split for choosing the layer
    std::optional<EmbeddingSet> val_id;
    std::optional<EmbeddingSet> val_ood;
};

class Scorer {
public:
    virtual ~Scorer() = default;

    virtual Method method() const = 0;
    // No-op for methods without a fitted state.
    virtual void fit(const EmbeddingSet& train) = 0;
    virtual double score_row(const EmbeddingSet& set, std::size_t i) const = 0;

    std::vector<double> score(const EmbeddingSet& set) const {
        check_kind(set);
        std::vector<double> out;
        out.reserve(set.count());
        for (std::size_t i = 0; i < set.count(); ++i) out.push_back(score_row(set, i));
        return out;
    }

protected:
    void check_kind(const EmbeddingSet& set) const {
        if (set.kind != input_kind(method()))
            throw ValidationError("method '" + std::string(to_string(method())) + "' expects a '" +
                                  std::string(to_string(input_kind(method()))) + "' container, got '" +
                                  std::string(to_string(set.kind)) + "'");
    }
};

namespace detail {

inline LayerTrace trace_at(const EmbeddingSet& set, std::size_t i) {
    const auto row = set.row(i);
    return LayerTrace{set.layers, set.layer_dim(), std::vector<double>(row.begin(), row.end())};
}

inline CandidateSet candidates_at(const EmbeddingSet& set, std::size_t i) {
    const auto row = set.row(i);
    return CandidateSet{std::vector<double>(row.begin(), row.end()), std::nullopt};
}

}  // namespace detail

// Score = minimal normalized deviation z from the fitted components.
class GemScorer final : public Scorer {
public:
    GemScorer(gmm::FitConfig cfg, double n_sigma) : cfg_(cfg), n_sigma_(n_sigma) {}

    Method method() const override { return Method::Gem; }
    void fit(const EmbeddingSet& train) override {
        check_kind(train);
        det_ = fit_detector(train, cfg_, n_sigma_);
    }
    double score_row(const EmbeddingSet& set, std::size_t i) const override {
        return gem::detect(detector(), set.row(i)).z;
    }

    const GemDetector& detector() const {
        if (!det_) throw ValidationError("gem scorer used before fit");
        return *det_;
    }

private:
    gmm::FitConfig cfg_;
    double n_sigma_;
    std::optional<GemDetector> det_;
};

class TvScoreScorer final : public Scorer {
public:
    TvScoreScorer(int order, double lambda) : order_(order), lambda_(lambda) {}

    Method method() const override { return Method::Tv; }
    void fit(const EmbeddingSet& train) override {
        check_kind(train);
        const auto traces = layer_traces(train);
        tv_.emplace(baselines::fit_layer_gaussians(traces, lambda_), order_);
    }
    double score_row(const EmbeddingSet& set, std::size_t i) const override {
        if (!tv_) throw ValidationError("tv scorer used before fit");
        return tv_->score(detail::trace_at(set, i));
    }

private:
    int order_;
    double lambda_;
    std::optional<baselines::TvScorer> tv_;
};

class TopKScorer final : public Scorer {
public:
    Method method() const override { return Method::TopK; }
    void fit(const EmbeddingSet&) override {}
    double score_row(const EmbeddingSet& set, std::size_t i) const override {
        return baselines::topk_confidence(detail::candidates_at(set, i));
    }
};

class EntropyScorer final : public Scorer {
public:
    Method method() const override { return Method::Entropy; }
    void fit(const EmbeddingSet&) override {}
    double score_row(const EmbeddingSet& set, std::size_t i) const override {
        return baselines::output_entropy(detail::candidates_at(set, i));
    }
};

// Euclidean distance to the ID mean at one layer: the last layer, or the
// layer chosen on a validation split.
class LayerDistanceScorer final : public Scorer {
public:
    LayerDistanceScorer(Method method, std::optional<EmbeddingSet> val_id, std::optional<EmbeddingSet> val_ood)
        : method_(method), val_id_(std::move(val_id)), val_ood_(std::move(val_ood)) {
        if (method_ == Method::BestLayer && (!val_id_ || !val_ood_))
            throw ValidationError("best-layer needs both --val-id and --val-ood validation sets");
    }

    Method method() const override { return method_; }
    void fit(const EmbeddingSet& train) override {
        check_kind(train);
        means_ = baselines::layer_means(layer_traces(train));
        if (method_ == Method::LastLayer) {
            layer_ = means_.layers() - 1;
        } else {
            check_kind(*val_id_);
            check_kind(*val_ood_);
            const auto choice = baselines::select_best_layer(means_, layer_traces(*val_id_), layer_traces(*val_ood_));
            layer_ = choice.layer;
            aurocs_ = choice.aurocs;
        }
    }
    double score_row(const EmbeddingSet& set, std::size_t i) const override {
        return baselines::layer_distance(detail::trace_at(set, i), means_, layer_);
    }

    std::size_t layer() const { return layer_; }
    const std::vector<double>& validation_aurocs() const { return aurocs_; }

private:
    Method method_;
    std::optional<EmbeddingSet> val_id_, val_ood_;
    baselines::LayerMeans means_;
    std::size_t layer_ = 0;
    std::vector<double> aurocs_;
};

inline std::unique_ptr<Scorer> make_scorer(Method m, const ScorerOptions& opt) {
    switch (m) {
        case Method::Gem: return std::make_unique<GemScorer>(opt.fit, opt.n_sigma);
        case Method::Tv: return std::make_unique<TvScoreScorer>(opt.tv_order, opt.lambda);
        case Method::TopK: return std::make_unique<TopKScorer>();
        case Method::Entropy: return std::make_unique<EntropyScorer>();
        case Method::LastLayer:
        case Method::BestLayer: return std::make_unique<LayerDistanceScorer>(m, opt.val_id, opt.val_ood);
    }
    throw ValidationError("unknown method");
}

}  // namespace gem
