#include "distill/layers.hpp"

#include <cmath>

namespace distill {

Tensor init_normal(std::vector<std::size_t> shape, double stddev, Rng& rng) {
    Tensor t(std::move(shape));
    for (auto& v : t.data) v = static_cast<float>(rng.normal(0.0, stddev));
    return t;
}

Tensor init_linear(std::size_t in, std::size_t out, Rng& rng) {
    return init_normal({in, out}, 1.0 / std::sqrt(static_cast<double>(in)), rng);
}

NormIds NormIds::resolve(const ParamStore& store, const std::string& prefix) {
    return {store.index(prefix + ".scale"), store.index(prefix + ".bias")};
}

FfnIds FfnIds::resolve(const ParamStore& store, const std::string& prefix) {
    return {store.index(prefix + ".w1"), store.index(prefix + ".b1"), store.index(prefix + ".w2"),
            store.index(prefix + ".b2")};
}

void add_norm_params(ParamStore& store, const std::string& prefix, std::size_t width, bool frozen) {
    store.add(prefix + ".scale", Tensor({width}, 1.0f), frozen);
    store.add(prefix + ".bias", Tensor({width}, 0.0f), frozen);
}

Graph::Node apply_norm(Graph& g, Graph::Node x, const NormIds& ids) {
    return g.layer_norm(x, g.param(ids.scale), g.param(ids.bias));
}

Graph::Node apply_ffn(Graph& g, Graph::Node x, const FfnIds& ids) {
    auto h = g.gelu(g.add_row(g.matmul(x, g.param(ids.w1)), g.param(ids.b1)));
    return g.add_row(g.matmul(h, g.param(ids.w2)), g.param(ids.b2));
}

Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng) {
    Matrix m(rows, cols, 1.0f);
    if (rate <= 0.0) return m;
    const float keep = static_cast<float>(1.0 / (1.0 - rate));
    for (auto& v : m.data) v = rng.uniform() < rate ? 0.0f : keep;
    return m;
}

}  // namespace distill
