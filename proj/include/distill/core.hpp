// Core domain types, configuration and the RNG contract shared by every module.
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace distill {

// ---------------------------------------------------------------------------
// Errors. The CLI maps each family onto an exit code.
// ---------------------------------------------------------------------------
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Deterministic random stream. Every stochastic operation takes one of these
// explicitly; nothing draws from global state.
// ---------------------------------------------------------------------------
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }
    // Uniform in [lo, hi).
    double uniform(double lo = 0.0, double hi = 1.0);
    // Uniform integer in [lo, hi] (inclusive).
    std::size_t uniform_index(std::size_t lo, std::size_t hi);
    double normal(double mean = 0.0, double stddev = 1.0);

    // Independent child stream; `salt` distinguishes siblings.
    Rng derive(std::uint64_t salt) const;

private:
    std::mt19937_64 engine_;
};

Rng make_rng(std::uint64_t seed);

// Stateless mixing of several words into one seed (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

// ---------------------------------------------------------------------------
// Dense row-major real matrix used for series and windows ([rows x cols]).
// ---------------------------------------------------------------------------
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, float fill = 0.0f)
        : rows(r), cols(c), data(r * c, fill) {}

    float& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    float operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    const float* row(std::size_t r) const { return data.data() + r * cols; }
    float* row(std::size_t r) { return data.data() + r * cols; }
    bool operator==(const Matrix&) const = default;
};

enum class Split { train, test };

// values is [D channels x L timesteps].
struct TimeSeriesDataset {
    Matrix values;
    std::optional<std::vector<std::uint8_t>> labels;
    std::string name;
    Split split = Split::train;

    std::size_t channels() const { return values.rows; }
    std::size_t length() const { return values.cols; }
    // Throws DataError when an invariant does not hold.
    void validate() const;
};

// windows has N entries of shape [D x T].
struct WindowBatch {
    std::vector<Matrix> windows;
    std::vector<std::size_t> starts;
    std::size_t stride = 1;
    std::optional<std::vector<std::uint8_t>> labels;

    std::size_t size() const { return windows.size(); }
};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------
enum class AugmentKind { jitter, scale, warp };

struct AugmentSpec {
    std::vector<AugmentKind> kinds{AugmentKind::jitter, AugmentKind::warp};
    double segment_fraction_min = 0.2;
    double segment_fraction_max = 0.5;
    double jitter_sigma = 0.1;  // in units of the window channel std
    // Factor drawn uniformly from one of the two sides.
    double scale_low_min = 0.1;
    double scale_low_max = 0.5;
    double scale_high_min = 2.0;
    double scale_high_max = 5.0;
    std::size_t warp_knots = 4;

    void validate() const;
};

enum class Aggregation { mean, max };

struct Config {
    std::size_t window_size = 32;
    std::size_t patch_size = 8;
    std::size_t patch_stride = 8;
    std::size_t feature_dim = 64;   // representation size d
    std::size_t model_dim = 64;     // transformer width, shared by both networks
    std::size_t ffn_multiplier = 4;
    std::size_t student_layers = 3;
    std::size_t teacher_layers = 3;
    std::size_t prototype_count = 32;
    std::size_t head_count = 8;
    std::size_t max_positions = 64; // surrogate positional table length
    double learning_rate = 1e-4;
    std::size_t batch_size = 128;
    std::size_t epochs = 100;
    std::size_t patience = 10;
    double contrastive_weight = 0.1;
    double dropout = 0.0;
    AugmentSpec augmentation;
    std::size_t train_stride = 0;  // 0 selects window_size
    std::size_t score_stride = 1;
    Aggregation aggregation = Aggregation::mean;
    double threshold_quantile = 0.99;
    std::size_t ucr_margin = 0;    // 0 selects window_size
    std::uint64_t seed = 0;

    std::size_t effective_train_stride() const { return train_stride ? train_stride : window_size; }
    std::size_t effective_ucr_margin() const { return ucr_margin ? ucr_margin : window_size; }
    std::size_t patch_count() const;

    void validate() const;
};

std::string to_string(AugmentKind kind);
AugmentKind augment_kind_from_string(const std::string& s);

}  // namespace distill
