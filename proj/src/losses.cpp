#include "distill/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace distill {

namespace {

double norm(std::span<const float> a) {
    double s = 0.0;
    for (float v : a) s += static_cast<double>(v) * v;
    return std::sqrt(s);
}

double neg_log_one_minus_exp(double sq) {
    return -std::log(std::max(1.0 - std::exp(-sq), kLogClamp));
}

void check_same(std::size_t a, std::size_t b) {
    if (a != b) throw std::invalid_argument("loss: mismatched sizes");
}

// d cos(a, b) / d a
void cosine_grad(std::span<const float> a, std::span<const float> b, double scale,
                 std::vector<float>& out) {
    const double na = std::max(norm(a), kNormEpsilon);
    const double nb = std::max(norm(b), kNormEpsilon);
    double ab = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) ab += static_cast<double>(a[i]) * b[i];
    const double cos = ab / (na * nb);
    for (std::size_t i = 0; i < a.size(); ++i)
        out[i] += static_cast<float>(scale * (b[i] / (na * nb) - cos * a[i] / (na * na)));
}

}  // namespace

double squared_distance(std::span<const float> a, std::span<const float> b) {
    check_same(a.size(), b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - b[i];
        s += d * d;
    }
    return s;
}

double cosine(std::span<const float> a, std::span<const float> b) {
    check_same(a.size(), b.size());
    double ab = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) ab += static_cast<double>(a[i]) * b[i];
    return ab / (std::max(norm(a), kNormEpsilon) * std::max(norm(b), kNormEpsilon));
}

double hsc_loss(std::span<const float> z, std::span<const float> c, int y) {
    const double l = std::exp(-squared_distance(z, c));
    const double normal_term = -std::log(std::max(l, kLogClamp));
    const double anomalous_term = -std::log(std::max(1.0 - l, kLogClamp));
    return (1 - y) * normal_term + y * anomalous_term;
}

double kd_loss(const std::vector<Representation>& z, const std::vector<Representation>& c,
               const std::vector<Representation>& z_aug, const std::vector<Representation>& c_aug) {
    if (z.empty()) throw std::invalid_argument("kd_loss: empty batch");
    check_same(z.size(), c.size());
    check_same(z.size(), z_aug.size());
    check_same(z.size(), c_aug.size());
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i)
        s += squared_distance(z[i], c[i]) + neg_log_one_minus_exp(squared_distance(z_aug[i], c_aug[i]));
    return s / static_cast<double>(z.size());
}

double kd_loss_normal_only(const std::vector<Representation>& z, const std::vector<Representation>& c) {
    if (z.empty()) throw std::invalid_argument("kd_loss: empty batch");
    check_same(z.size(), c.size());
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) s += squared_distance(z[i], c[i]);
    return s / static_cast<double>(z.size());
}

double contrastive_loss(const std::vector<Representation>& c, const std::vector<Representation>& c_aug) {
    if (c.empty()) throw std::invalid_argument("contrastive_loss: empty batch");
    check_same(c.size(), c_aug.size());
    double s = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) s -= cosine(c[i], c_aug[i]);
    return s / static_cast<double>(c.size());
}

double total_loss(double kd, double ce, double lambda) { return kd + lambda * ce; }

SampleLoss sample_loss(std::span<const float> z, std::span<const float> c,
                       std::span<const float> z_aug, std::span<const float> c_aug,
                       const LossWeights& w, double batch_size) {
    check_same(z.size(), c.size());
    const std::size_t d = z.size();
    const double inv_n = 1.0 / batch_size;
    SampleLoss out;
    out.dz.assign(d, 0.0f);
    out.dc.assign(d, 0.0f);

    const double sq = squared_distance(z, c);
    out.kd = sq;
    for (std::size_t i = 0; i < d; ++i) {
        const double g = 2.0 * (static_cast<double>(z[i]) - c[i]) * inv_n;
        out.dz[i] = static_cast<float>(g);
        out.dc[i] = static_cast<float>(-g);
    }

    if (w.augmented) {
        check_same(z_aug.size(), d);
        check_same(c_aug.size(), d);
        out.dz_aug.assign(d, 0.0f);
        out.dc_aug.assign(d, 0.0f);
        const double sa = squared_distance(z_aug, c_aug);
        const double e = std::exp(-sa);
        out.kd += neg_log_one_minus_exp(sa);
        // d/ds of -log(1 - e^{-s}); zero once the clamp is active.
        const double dds = (1.0 - e) > kLogClamp ? -e / (1.0 - e) : 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double g = dds * 2.0 * (static_cast<double>(z_aug[i]) - c_aug[i]) * inv_n;
            out.dz_aug[i] = static_cast<float>(g);
            out.dc_aug[i] = static_cast<float>(-g);
        }
        if (w.teacher_contrast) {
            out.ce = -cosine(c, c_aug);
            cosine_grad(c, c_aug, -w.lambda * inv_n, out.dc);
            cosine_grad(c_aug, c, -w.lambda * inv_n, out.dc_aug);
        }
        if (w.student_contrast) {
            out.cs = cosine(z, z_aug);
            cosine_grad(z, z_aug, w.lambda * inv_n, out.dz);
            cosine_grad(z_aug, z, w.lambda * inv_n, out.dz_aug);
        }
    }
    out.total = out.kd + w.lambda * (out.ce + out.cs);
    return out;
}

}  // namespace distill
