// Teacher encoder c = varphi(w) on top of a pretrained (or surrogate) backbone.
//
// The input embedding is a bare linear map; positions come from the
// backbone's own table, sliced to the patch count. Attention and feed-forward
// tensors of the backbone are frozen, while its positional table and layer
// norms stay trainable together with the embedding and the output head.
//
// Backbone tensor names, for converting an external checkpoint:
//   backbone.pos_embed                      [max_positions x model_dim]
//   backbone.blocks.{i}.attn.{q,k,v,out}    [model_dim x model_dim]
//   backbone.blocks.{i}.ffn.w1 / b1         [model_dim x ffn_dim] / [ffn_dim]
//   backbone.blocks.{i}.ffn.w2 / b2         [ffn_dim x model_dim] / [model_dim]
//   backbone.blocks.{i}.norm{1,2}.{scale,bias}  [model_dim]
// Blocks are pre-norm: x += attn(norm1(x)); x += ffn(norm2(x)).
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "distill/autograd.hpp"
#include "distill/container.hpp"
#include "distill/core.hpp"
#include "distill/layers.hpp"
#include "distill/tensor.hpp"

namespace distill {

inline constexpr const char* kTeacherPrefix = "teacher/";

struct BackboneSpec {
    std::size_t blocks = 0;
    std::size_t model_dim = 0;
    std::size_t heads = 0;
    std::size_t ffn_dim = 0;
    std::size_t max_positions = 0;
    // Names are the bare "backbone.*" names; frozen flags follow the policy.
    ParamStore tensors;
};

// Names every block must provide.
std::vector<std::string> required_backbone_names(std::size_t blocks);
// True for attention and feed-forward tensors.
bool is_frozen_backbone_tensor(const std::string& name);

// Seeded random stand-in for a pretrained model: orthonormal attention
// projections, scaled Gaussian feed-forward weights, unit norms.
BackboneSpec make_surrogate_backbone(const Config& config, Rng& rng);

// Reads the named-tensor container, keeping the first config.teacher_layers
// blocks. Missing tensors are reported together; shapes are checked against config.
BackboneSpec load_pretrained(const std::filesystem::path& path, const Config& config);
// Same checks on tensors already in memory; `origin` prefixes error messages.
BackboneSpec backbone_from_tensors(TensorMap tensors, const Config& config, const std::string& origin);
void save_backbone(const BackboneSpec& spec, const std::filesystem::path& path);

// Copies the backbone under the "teacher/" prefix and adds embedding and head.
void add_teacher_params(ParamStore& store, const Config& config, std::size_t channels,
                        const BackboneSpec& backbone, Rng& rng);

class Teacher {
public:
    Teacher(const ParamStore& store, const Config& config, std::size_t channels);

    Graph::Node forward(Graph& g, const Matrix& window) const;
    std::vector<float> represent(const ParamStore& store, const Matrix& window) const;

private:
    struct Block {
        NormIds norm1, norm2;
        std::size_t q, k, v, out;
        FfnIds ffn;
    };

    Config config_;
    std::size_t channels_;
    std::size_t patches_;
    std::size_t embed_w_, embed_b_, pos_, head_w_, head_b_;
    std::vector<Block> blocks_;
};

}  // namespace distill
