#include "distill/core.hpp"

#include <cmath>

namespace distill {

double Rng::uniform(double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    return dist(engine_);
}

std::size_t Rng::uniform_index(std::size_t lo, std::size_t hi) {
    std::uniform_int_distribution<std::size_t> dist(lo, hi);
    return dist(engine_);
}

double Rng::normal(double mean, double stddev) {
    std::normal_distribution<double> dist(mean, stddev);
    return dist(engine_);
}

Rng Rng::derive(std::uint64_t salt) const {
    // Peek at the engine state without advancing it, so deriving is const.
    std::mt19937_64 copy = engine_;
    return Rng(mix_seed(copy(), salt));
}

Rng make_rng(std::uint64_t seed) { return Rng(seed); }

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

void TimeSeriesDataset::validate() const {
    if (values.rows < 1) throw DataError("dataset '" + name + "' has no channels");
    if (values.cols < 1) throw DataError("dataset '" + name + "' has no timesteps");
    if (values.data.size() != values.rows * values.cols)
        throw DataError("dataset '" + name + "' has inconsistent storage");
    if (labels && labels->size() != values.cols)
        throw DataError("dataset '" + name + "': " + std::to_string(labels->size()) +
                        " labels for " + std::to_string(values.cols) + " timesteps");
    for (std::size_t i = 0; i < values.data.size(); ++i) {
        if (!std::isfinite(values.data[i])) {
            throw DataError("dataset '" + name + "': non-finite value at channel " +
                            std::to_string(i / values.cols) + ", t=" +
                            std::to_string(i % values.cols));
        }
    }
}

void AugmentSpec::validate() const {
    if (kinds.empty()) throw UsageError("augmentation: at least one kind must be enabled");
    if (!(segment_fraction_min > 0.0) || segment_fraction_max > 1.0 ||
        segment_fraction_min > segment_fraction_max)
        throw UsageError("augmentation: segment fraction range must lie within (0, 1]");
    if (jitter_sigma < 0.0) throw UsageError("augmentation: jitter_sigma must be >= 0");
    if (scale_low_min > scale_low_max || scale_high_min > scale_high_max)
        throw UsageError("augmentation: scale ranges must be ordered");
    if (warp_knots < 1) throw UsageError("augmentation: warp_knots must be >= 1");
}

std::size_t Config::patch_count() const {
    if (patch_size > window_size || patch_stride == 0) return 0;
    return (window_size - patch_size) / patch_stride + 1;
}

void Config::validate() const {
    auto positive = [](std::size_t v, const char* name) {
        if (v < 1) throw UsageError(std::string("config: ") + name + " must be >= 1");
    };
    positive(window_size, "window_size");
    positive(patch_size, "patch_size");
    positive(patch_stride, "patch_stride");
    positive(feature_dim, "feature_dim");
    positive(model_dim, "model_dim");
    positive(ffn_multiplier, "ffn_multiplier");
    positive(student_layers, "student_layers");
    positive(teacher_layers, "teacher_layers");
    positive(prototype_count, "prototype_count");
    positive(head_count, "head_count");
    positive(batch_size, "batch_size");
    positive(epochs, "epochs");
    positive(patience, "patience");
    positive(score_stride, "score_stride");
    if (patch_size > window_size) throw UsageError("config: patch_size exceeds window_size");
    if (model_dim % head_count != 0)
        throw UsageError("config: head_count must divide model_dim");
    if (patch_count() > max_positions)
        throw UsageError("config: patch count exceeds max_positions");
    if (!(learning_rate > 0.0)) throw UsageError("config: learning_rate must be > 0");
    if (contrastive_weight < 0.0) throw UsageError("config: contrastive_weight must be >= 0");
    if (dropout < 0.0 || dropout >= 1.0) throw UsageError("config: dropout must be in [0, 1)");
    if (!(threshold_quantile > 0.0 && threshold_quantile < 1.0))
        throw UsageError("config: threshold_quantile must be in (0, 1)");
    augmentation.validate();
}

std::string to_string(AugmentKind kind) {
    switch (kind) {
        case AugmentKind::jitter: return "jitter";
        case AugmentKind::scale: return "scale";
        case AugmentKind::warp: return "warp";
    }
    return "unknown";
}

AugmentKind augment_kind_from_string(const std::string& s) {
    if (s == "jitter") return AugmentKind::jitter;
    if (s == "scale") return AugmentKind::scale;
    if (s == "warp") return AugmentKind::warp;
    throw UsageError("unknown augmentation kind '" + s + "'");
}

}  // namespace distill
