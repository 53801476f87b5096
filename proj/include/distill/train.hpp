// Training: model state, Adam, the distillation loop and checkpoints.
#pragma once

#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "distill/core.hpp"
#include "distill/losses.hpp"
#include "distill/student.hpp"
#include "distill/teacher.hpp"
#include "distill/tensor.hpp"

namespace distill {

// Full: augmentation + teacher contrast. NonAug: normal pairs only.
// NoContrastive: drops the teacher contrast. StudentContrastive: Full plus a
// term pushing the student's original and augmented representations apart.
enum class Strategy { full, nonaug, noct, wcs };

std::string to_string(Strategy s);
// Accepts the CLI names full | nonaug | noct | wcs.
Strategy strategy_from_string(const std::string& s);
LossWeights loss_weights(Strategy s, double lambda);

struct AdamState {
    std::uint64_t step = 0;
    // Indexed like the ParamStore; empty for frozen tensors.
    std::vector<std::vector<float>> m;
    std::vector<std::vector<float>> v;
};

struct AdamOptions {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Updates every trainable tensor that has a gradient. Frozen tensors are never written.
void adam_step(ParamStore& params, const Gradients& grads, AdamState& state, const AdamOptions& opt);

struct ModelState {
    Config config;
    std::size_t channels = 1;
    Strategy strategy = Strategy::full;
    ParamStore params;
    AdamState optim;
    std::size_t epoch = 0;
    double best_loss = std::numeric_limits<double>::infinity();

    // Fresh parameters. Prototypes are sampled from `train_series` when given;
    // the teacher uses `backbone` or, when null, a seeded surrogate.
    static ModelState create(const Config& config, std::size_t channels, Strategy strategy,
                             const Matrix* train_series = nullptr,
                             const BackboneSpec* backbone = nullptr);

    Student student() const { return Student(params, config, channels); }
    Teacher teacher() const { return Teacher(params, config, channels); }
};

struct LossBreakdown {
    double kd = 0.0;
    double ce = 0.0;
    double cs = 0.0;
    double total = 0.0;
    std::size_t count = 0;
};

// Per-sample augmentation/dropout seeds fix every random draw of a pass, so
// the same seeds reproduce the same loss for finite-difference checks.
// Gradients are of the batch-mean loss; grads may be null for a forward-only pass.
LossBreakdown batch_loss(const ModelState& state, const std::vector<const Matrix*>& windows,
                         const std::vector<std::uint64_t>& seeds, Gradients* grads);

struct EpochRecord {
    std::size_t epoch = 0;
    LossBreakdown loss;
    bool has_ce = false;
    bool has_cs = false;
};

struct TrainOptions {
    std::function<void(const EpochRecord&)> on_epoch;
    const BackboneSpec* backbone = nullptr;
    // Stops after this many optimizer steps when set.
    std::optional<std::size_t> max_steps;
};

// Windows the series with the training stride and runs Adam with early
// stopping on the epoch-mean training loss. Throws NumericError on a
// non-finite loss.
ModelState train(const TimeSeriesDataset& series, const Config& config, Strategy strategy,
                 const TrainOptions& options = {});

// Checkpoint = named-tensor container at `path` plus "<path>.json" sidecar.
void save_checkpoint(const ModelState& state, const std::filesystem::path& path);
ModelState load_checkpoint(const std::filesystem::path& path);
// Rebuilds against `expected` instead of the sidecar config; mismatched shapes throw.
ModelState load_checkpoint(const std::filesystem::path& path, const Config& expected);

std::filesystem::path sidecar_path(const std::filesystem::path& path);

}  // namespace distill
