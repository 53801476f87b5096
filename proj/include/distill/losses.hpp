// Distillation objectives. Values are accumulated in double precision.
#pragma once

#include <span>
#include <vector>

namespace distill {

inline constexpr double kLogClamp = 1e-12;  // floor on every log argument
inline constexpr double kNormEpsilon = 1e-12;

using Representation = std::vector<float>;

double squared_distance(std::span<const float> a, std::span<const float> b);
double cosine(std::span<const float> a, std::span<const float> b);

// Hypersphere classifier loss with l = exp(-|z - c|^2):
// -(1-y) log l - y log(1 - l).
double hsc_loss(std::span<const float> z, std::span<const float> c, int y);

// mean_i [ |z_i - c_i|^2 - log(1 - exp(-|z_i^a - c_i^a|^2)) ]
double kd_loss(const std::vector<Representation>& z, const std::vector<Representation>& c,
               const std::vector<Representation>& z_aug, const std::vector<Representation>& c_aug);
// First term only, used when no synthetic anomalies are generated.
double kd_loss_normal_only(const std::vector<Representation>& z, const std::vector<Representation>& c);

// mean_i -cos(c_i, c_i^a), in [-1, 1].
double contrastive_loss(const std::vector<Representation>& c, const std::vector<Representation>& c_aug);

double total_loss(double kd, double ce, double lambda);

// Per-sample terms and their gradients w.r.t. the four representations,
// already divided by the batch size.
struct SampleLoss {
    double kd = 0.0;
    double ce = 0.0;
    double cs = 0.0;  // student-side cosine term (StudentContrastive only)
    double total = 0.0;
    std::vector<float> dz, dc, dz_aug, dc_aug;
};

struct LossWeights {
    bool augmented = true;       // include the synthetic pair term
    bool teacher_contrast = true;
    bool student_contrast = false;
    double lambda = 0.1;
};

// z_aug / c_aug are ignored when !weights.augmented.
SampleLoss sample_loss(std::span<const float> z, std::span<const float> c,
                       std::span<const float> z_aug, std::span<const float> c_aug,
                       const LossWeights& weights, double batch_size);

}  // namespace distill
