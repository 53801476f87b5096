// Small building blocks shared by the student and teacher encoders.
#pragma once

#include <string>

#include "distill/autograd.hpp"
#include "distill/core.hpp"
#include "distill/tensor.hpp"

namespace distill {

// N(0, 1/fan_in) weights of shape [in x out].
Tensor init_linear(std::size_t in, std::size_t out, Rng& rng);
Tensor init_normal(std::vector<std::size_t> shape, double stddev, Rng& rng);

struct NormIds {
    std::size_t scale = 0;
    std::size_t bias = 0;

    static NormIds resolve(const ParamStore& store, const std::string& prefix);
};

struct FfnIds {
    std::size_t w1 = 0, b1 = 0, w2 = 0, b2 = 0;

    static FfnIds resolve(const ParamStore& store, const std::string& prefix);
};

void add_norm_params(ParamStore& store, const std::string& prefix, std::size_t width,
                     bool frozen = false);

Graph::Node apply_norm(Graph& g, Graph::Node x, const NormIds& ids);
// x W1 + b1 -> GELU -> W2 + b2
Graph::Node apply_ffn(Graph& g, Graph::Node x, const FfnIds& ids);

// Inverted dropout mask of the given shape; all ones when rate == 0.
Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng);

}  // namespace distill
