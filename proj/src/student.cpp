#include "distill/student.hpp"

#include <algorithm>
#include <cmath>

#include "distill/preprocess.hpp"

namespace distill {

double cosine_or_minus_one(const float* a, const float* b, std::size_t n) {
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ab += static_cast<double>(a[i]) * b[i];
        aa += static_cast<double>(a[i]) * a[i];
        bb += static_cast<double>(b[i]) * b[i];
    }
    if (aa == 0.0 || bb == 0.0) return -1.0;
    return ab / (std::sqrt(aa) * std::sqrt(bb));
}

std::vector<std::size_t> select_prototype(const Tensor& prototypes, const Matrix& window) {
    if (prototypes.shape.size() != 3) throw UsageError("prototype pool must be [D x M x T]");
    const std::size_t D = prototypes.shape[0], M = prototypes.shape[1], T = prototypes.shape[2];
    if (window.rows != D)
        throw UsageError("prototype pool has " + std::to_string(D) + " channels, window has " +
                         std::to_string(window.rows));
    if (window.cols != T)
        throw UsageError("prototype length " + std::to_string(T) + " does not match window length " +
                         std::to_string(window.cols));
    std::vector<std::size_t> sel(D, 0);
    for (std::size_t c = 0; c < D; ++c) {
        double best = -INFINITY;
        for (std::size_t m = 0; m < M; ++m) {
            const double s = cosine_or_minus_one(prototypes.data.data() + (c * M + m) * T, window.row(c), T);
            if (s > best) {
                best = s;
                sel[c] = m;
            }
        }
    }
    return sel;
}

Tensor init_prototypes(const Config& config, std::size_t channels, const Matrix* series, Rng& rng) {
    const std::size_t M = config.prototype_count, T = config.window_size;
    Tensor pool({channels, M, T});
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t m = 0; m < M; ++m) {
            float* dst = pool.data.data() + (c * M + m) * T;
            if (series && series->cols >= T) {
                const std::size_t start = rng.uniform_index(0, series->cols - T);
                std::copy_n(series->row(c) + start, T, dst);
            } else {
                for (std::size_t t = 0; t < T; ++t) dst[t] = static_cast<float>(rng.normal());
            }
        }
    }
    return pool;
}

void add_student_params(ParamStore& store, const Config& config, std::size_t channels,
                        const Matrix* train_series, Rng& rng) {
    const std::string p = kStudentPrefix;
    const std::size_t dm = config.model_dim, P = config.patch_size, n = config.patch_count();
    const std::size_t ff = dm * config.ffn_multiplier;
    store.add(kPrototypeTensor, init_prototypes(config, channels, train_series, rng));
    store.add(p + "embed.weight", init_linear(P, dm, rng));
    store.add(p + "embed.bias", Tensor({dm}));
    store.add(p + "pos_embed", init_normal({n, dm}, 0.02, rng));
    for (std::size_t b = 0; b < config.student_layers; ++b) {
        const std::string bp = p + "blocks." + std::to_string(b) + ".";
        add_norm_params(store, bp + "norm1", dm);
        for (const char* w : {"q_w", "k_w", "v_w", "q_m", "k_m", "v_m", "out"})
            store.add(bp + "attn." + w, init_linear(dm, dm, rng));
        add_norm_params(store, bp + "norm2", dm);
        store.add(bp + "ffn.w1", init_linear(dm, ff, rng));
        store.add(bp + "ffn.b1", Tensor({ff}));
        store.add(bp + "ffn.w2", init_linear(ff, dm, rng));
        store.add(bp + "ffn.b2", Tensor({dm}));
    }
    store.add(p + "head.weight", init_linear(channels * n * dm, config.feature_dim, rng));
    store.add(p + "head.bias", Tensor({config.feature_dim}));
}

Student::Student(const ParamStore& store, const Config& config, std::size_t channels)
    : config_(config), channels_(channels), patches_(config.patch_count()) {
    const std::string p = kStudentPrefix;
    prototypes_ = store.index(kPrototypeTensor);
    embed_w_ = store.index(p + "embed.weight");
    embed_b_ = store.index(p + "embed.bias");
    pos_ = store.index(p + "pos_embed");
    head_w_ = store.index(p + "head.weight");
    head_b_ = store.index(p + "head.bias");
    for (std::size_t b = 0; b < config.student_layers; ++b) {
        const std::string bp = p + "blocks." + std::to_string(b) + ".";
        Block blk;
        blk.norm1 = NormIds::resolve(store, bp + "norm1");
        blk.norm2 = NormIds::resolve(store, bp + "norm2");
        blk.q_w = store.index(bp + "attn.q_w");
        blk.k_w = store.index(bp + "attn.k_w");
        blk.v_w = store.index(bp + "attn.v_w");
        blk.q_m = store.index(bp + "attn.q_m");
        blk.k_m = store.index(bp + "attn.k_m");
        blk.v_m = store.index(bp + "attn.v_m");
        blk.out = store.index(bp + "attn.out");
        blk.ffn = FfnIds::resolve(store, bp + "ffn");
        blocks_.push_back(blk);
    }
}

Graph::Node Student::forward(Graph& g, const Matrix& window, StudentTrace* trace,
                             Rng* dropout_rng) const {
    if (window.rows != channels_ || window.cols != config_.window_size)
        throw UsageError("student: expected window [" + std::to_string(channels_) + " x " +
                         std::to_string(config_.window_size) + "], got [" +
                         std::to_string(window.rows) + " x " + std::to_string(window.cols) + "]");
    const std::size_t P = config_.patch_size, stride = config_.patch_stride, n = patches_;
    const std::size_t M = config_.prototype_count, T = config_.window_size;
    const bool drop = dropout_rng && config_.dropout > 0.0;

    const auto selected = select_prototype(g.store().at(prototypes_).value, window);
    const auto [normalized, stats] = instance_normalize(window);
    const PatchSequence seq = patch(normalized, P, stride);

    if (trace) {
        trace->selected = selected;
        trace->attention.assign(channels_, {});
    }

    std::vector<Graph::Node> encoded;
    encoded.reserve(channels_);
    for (std::size_t c = 0; c < channels_; ++c) {
        auto embed = [&](Graph::Node patches) {
            auto e = g.add_row(g.matmul(patches, g.param(embed_w_)), g.param(embed_b_));
            return g.add(e, g.param(pos_));
        };
        Graph::Node xw = embed(g.constant(seq.patches[c]));
        Graph::Node proto = g.param_patches(prototypes_, (c * M + selected[c]) * T, n, P, stride,
                                            stats.mean[c], stats.std[c]);
        const Graph::Node xm = embed(proto);

        for (const auto& blk : blocks_) {
            const auto hw = apply_norm(g, xw, blk.norm1);
            const auto hm = apply_norm(g, xm, blk.norm1);
            const auto q = g.matmul(hw, g.param(blk.q_w));
            const auto keys = g.concat_rows(g.matmul(hw, g.param(blk.k_w)), g.matmul(hm, g.param(blk.k_m)));
            const auto vals = g.concat_rows(g.matmul(hw, g.param(blk.v_w)), g.matmul(hm, g.param(blk.v_m)));
            const auto att = g.attention(q, keys, vals, config_.head_count);
            if (trace) trace->attention[c].push_back(att);
            auto o = g.matmul(att, g.param(blk.out));
            if (drop) o = g.mul_const(o, dropout_mask(n, config_.model_dim, config_.dropout, *dropout_rng));
            xw = g.add(xw, o);
            auto f = apply_ffn(g, apply_norm(g, xw, blk.norm2), blk.ffn);
            if (drop) f = g.mul_const(f, dropout_mask(n, config_.model_dim, config_.dropout, *dropout_rng));
            xw = g.add(xw, f);
        }
        encoded.push_back(xw);
    }
    const auto flat = g.flatten_concat(encoded);
    return g.add_row(g.matmul(flat, g.param(head_w_)), g.param(head_b_));
}

std::vector<float> Student::represent(const ParamStore& store, const Matrix& window) const {
    Graph g(store);
    return g.value(forward(g, window)).data;
}

}  // namespace distill
