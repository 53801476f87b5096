#include "distill/teacher.hpp"

#include <cmath>

#include "distill/container.hpp"
#include "distill/preprocess.hpp"

namespace distill {

namespace {

std::string block_prefix(std::size_t i) { return "backbone.blocks." + std::to_string(i) + "."; }

// Rows of a Gaussian matrix orthonormalized by modified Gram-Schmidt.
Tensor orthonormal(std::size_t n, Rng& rng) {
    Tensor t({n, n});
    for (auto& v : t.data) v = static_cast<float>(rng.normal());
    std::vector<double> row(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < n; ++c) row[c] = t.data[i * n + c];
        for (std::size_t j = 0; j < i; ++j) {
            double dot = 0.0;
            for (std::size_t c = 0; c < n; ++c) dot += row[c] * t.data[j * n + c];
            for (std::size_t c = 0; c < n; ++c) row[c] -= dot * t.data[j * n + c];
        }
        double norm = 0.0;
        for (double v : row) norm += v * v;
        norm = std::sqrt(norm);
        for (std::size_t c = 0; c < n; ++c) t.data[i * n + c] = static_cast<float>(row[c] / norm);
    }
    return t;
}

Tensor sinusoidal_positions(std::size_t rows, std::size_t width) {
    Tensor t({rows, width});
    for (std::size_t p = 0; p < rows; ++p) {
        for (std::size_t i = 0; i < width; ++i) {
            const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(width));
            const double a = static_cast<double>(p) * freq;
            t.data[p * width + i] = static_cast<float>(i % 2 == 0 ? std::sin(a) : std::cos(a));
        }
    }
    return t;
}

}  // namespace

std::vector<std::string> required_backbone_names(std::size_t blocks) {
    std::vector<std::string> names{"backbone.pos_embed"};
    for (std::size_t i = 0; i < blocks; ++i) {
        const auto bp = block_prefix(i);
        for (const char* s : {"attn.q", "attn.k", "attn.v", "attn.out", "ffn.w1", "ffn.b1", "ffn.w2",
                              "ffn.b2", "norm1.scale", "norm1.bias", "norm2.scale", "norm2.bias"})
            names.push_back(bp + s);
    }
    return names;
}

bool is_frozen_backbone_tensor(const std::string& name) {
    return name.find(".attn.") != std::string::npos || name.find(".ffn.") != std::string::npos;
}

BackboneSpec make_surrogate_backbone(const Config& config, Rng& rng) {
    BackboneSpec spec;
    spec.blocks = config.teacher_layers;
    spec.model_dim = config.model_dim;
    spec.heads = config.head_count;
    spec.ffn_dim = config.model_dim * config.ffn_multiplier;
    spec.max_positions = config.max_positions;
    const std::size_t dm = spec.model_dim, ff = spec.ffn_dim;

    spec.tensors.add("backbone.pos_embed", sinusoidal_positions(spec.max_positions, dm), false);
    for (std::size_t i = 0; i < spec.blocks; ++i) {
        const auto bp = block_prefix(i);
        for (const char* s : {"attn.q", "attn.k", "attn.v", "attn.out"})
            spec.tensors.add(bp + s, orthonormal(dm, rng), true);
        spec.tensors.add(bp + "ffn.w1", init_linear(dm, ff, rng), true);
        spec.tensors.add(bp + "ffn.b1", init_normal({ff}, 0.02, rng), true);
        spec.tensors.add(bp + "ffn.w2", init_normal({ff, dm}, 0.5 / std::sqrt(static_cast<double>(ff)), rng), true);
        spec.tensors.add(bp + "ffn.b2", init_normal({dm}, 0.02, rng), true);
        add_norm_params(spec.tensors, bp + "norm1", dm, false);
        add_norm_params(spec.tensors, bp + "norm2", dm, false);
    }
    return spec;
}

BackboneSpec load_pretrained(const std::filesystem::path& path, const Config& config) {
    return backbone_from_tensors(read_container(path), config, path.string());
}

BackboneSpec backbone_from_tensors(TensorMap file, const Config& config, const std::string& origin) {
    const std::string& path = origin;
    const std::size_t dm = config.model_dim, ff = config.model_dim * config.ffn_multiplier;
    const auto names = required_backbone_names(config.teacher_layers);

    std::string missing;
    for (const auto& name : names)
        if (!file.count(name)) missing += (missing.empty() ? "" : ", ") + name;
    if (!missing.empty())
        throw DataError(path + ": missing backbone tensors: " + missing);

    BackboneSpec spec;
    spec.blocks = config.teacher_layers;
    spec.model_dim = dm;
    spec.heads = config.head_count;
    spec.ffn_dim = ff;

    auto expect = [&](const std::string& name, const std::vector<std::size_t>& shape) {
        const auto& t = file.at(name);
        if (t.shape != shape)
            throw DataError(path + ": shape mismatch for '" + name + "': file has " +
                            shape_string(t.shape) + ", config requires " + shape_string(shape));
    };
    const auto& pos = file.at("backbone.pos_embed");
    if (pos.shape.size() != 2 || pos.shape[1] != dm || pos.shape[0] < config.patch_count())
        throw DataError(path + ": shape mismatch for 'backbone.pos_embed': file has " +
                        shape_string(pos.shape) + ", config requires [>=" +
                        std::to_string(config.patch_count()) + "," + std::to_string(dm) + "]");
    spec.max_positions = pos.shape[0];

    for (const auto& name : names) {
        if (name == "backbone.pos_embed") {
        } else if (name.find(".attn.") != std::string::npos) {
            expect(name, {dm, dm});
        } else if (name.ends_with("ffn.w1")) {
            expect(name, {dm, ff});
        } else if (name.ends_with("ffn.b1")) {
            expect(name, {ff});
        } else if (name.ends_with("ffn.w2")) {
            expect(name, {ff, dm});
        } else {
            expect(name, {dm});
        }
        spec.tensors.add(name, std::move(file.at(name)), is_frozen_backbone_tensor(name));
    }
    return spec;
}

void save_backbone(const BackboneSpec& spec, const std::filesystem::path& path) {
    TensorMap out;
    for (const auto& p : spec.tensors.all()) out.emplace(p.name, p.value);
    write_container(path, out);
}

void add_teacher_params(ParamStore& store, const Config& config, std::size_t channels,
                        const BackboneSpec& backbone, Rng& rng) {
    const std::string p = kTeacherPrefix;
    const std::size_t dm = config.model_dim, n = config.patch_count();
    if (backbone.model_dim != dm || backbone.blocks < config.teacher_layers)
        throw UsageError("teacher: backbone does not match config (model_dim " +
                         std::to_string(backbone.model_dim) + ", blocks " +
                         std::to_string(backbone.blocks) + ")");
    store.add(p + "embed.weight", init_linear(config.patch_size, dm, rng));
    store.add(p + "embed.bias", Tensor({dm}));
    for (const auto& t : backbone.tensors.all()) store.add(p + t.name, t.value, t.frozen);
    store.add(p + "head.weight", init_linear(channels * n * dm, config.feature_dim, rng));
    store.add(p + "head.bias", Tensor({config.feature_dim}));
}

Teacher::Teacher(const ParamStore& store, const Config& config, std::size_t channels)
    : config_(config), channels_(channels), patches_(config.patch_count()) {
    const std::string p = kTeacherPrefix;
    embed_w_ = store.index(p + "embed.weight");
    embed_b_ = store.index(p + "embed.bias");
    pos_ = store.index(p + "backbone.pos_embed");
    head_w_ = store.index(p + "head.weight");
    head_b_ = store.index(p + "head.bias");
    for (std::size_t i = 0; i < config.teacher_layers; ++i) {
        const std::string bp = p + block_prefix(i);
        Block blk;
        blk.norm1 = NormIds::resolve(store, bp + "norm1");
        blk.norm2 = NormIds::resolve(store, bp + "norm2");
        blk.q = store.index(bp + "attn.q");
        blk.k = store.index(bp + "attn.k");
        blk.v = store.index(bp + "attn.v");
        blk.out = store.index(bp + "attn.out");
        blk.ffn = FfnIds::resolve(store, bp + "ffn");
        blocks_.push_back(blk);
    }
}

Graph::Node Teacher::forward(Graph& g, const Matrix& window) const {
    if (window.rows != channels_ || window.cols != config_.window_size)
        throw UsageError("teacher: expected window [" + std::to_string(channels_) + " x " +
                         std::to_string(config_.window_size) + "], got [" +
                         std::to_string(window.rows) + " x " + std::to_string(window.cols) + "]");
    const auto normalized = instance_normalize(window).first;
    const PatchSequence seq = patch(normalized, config_.patch_size, config_.patch_stride);

    std::vector<Graph::Node> encoded;
    encoded.reserve(channels_);
    const auto pos = g.param_rows(pos_, 0, patches_);
    for (std::size_t c = 0; c < channels_; ++c) {
        auto x = g.add_row(g.matmul(g.constant(seq.patches[c]), g.param(embed_w_)), g.param(embed_b_));
        x = g.add(x, pos);
        for (const auto& blk : blocks_) {
            const auto h = apply_norm(g, x, blk.norm1);
            const auto att = g.attention(g.matmul(h, g.param(blk.q)), g.matmul(h, g.param(blk.k)),
                                         g.matmul(h, g.param(blk.v)), config_.head_count);
            x = g.add(x, g.matmul(att, g.param(blk.out)));
            x = g.add(x, apply_ffn(g, apply_norm(g, x, blk.norm2), blk.ffn));
        }
        encoded.push_back(x);
    }
    const auto flat = g.flatten_concat(encoded);
    return g.add_row(g.matmul(flat, g.param(head_w_)), g.param(head_b_));
}

std::vector<float> Teacher::represent(const ParamStore& store, const Matrix& window) const {
    Graph g(store);
    return g.value(forward(g, window)).data;
}

}  // namespace distill
