// Reverse-mode differentiation over row-major float matrices.
//
// A Graph records one forward pass. Parameter leaves read straight from a
// ParamStore; their gradients land in a Gradients object at backward time.
// Frozen parameters act as constants: gradients flow *through* them to
// upstream nodes, but no weight gradient is ever formed for them.
#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "distill/core.hpp"
#include "distill/tensor.hpp"

namespace distill {

class Graph {
public:
    using Node = std::size_t;

    explicit Graph(const ParamStore& store);

    // Leaves
    Node constant(Matrix value);
    // Whole tensor viewed as [rows x cols] (rank-1 tensors become [1 x n]).
    // Repeated calls for the same id return the same leaf.
    Node param(std::size_t id);
    // Rows [start, start+count) of a 2-D tensor.
    Node param_rows(std::size_t id, std::size_t start, std::size_t count);
    // [n x P] patches read from a flat parameter at `offset` with the given
    // stride between patch starts, affinely normalized as (x - mean) / std.
    Node param_patches(std::size_t id, std::size_t offset, std::size_t n, std::size_t P,
                       std::size_t stride, float mean, float std);

    // Ops
    Node matmul(Node a, Node b);
    Node add(Node a, Node b);
    // a [m x n] + bias [1 x n] broadcast over rows.
    Node add_row(Node a, Node bias);
    Node mul_const(Node a, const Matrix& mask);
    // Row-wise layer normalization with affine [1 x n] scale / bias.
    Node layer_norm(Node x, Node scale, Node bias, float eps = 1e-5f);
    Node gelu(Node x);
    // Multi-head scaled dot-product attention. q [nq x dm], k/v [nk x dm].
    // Softmax runs over all nk keys jointly for every query row.
    Node attention(Node q, Node k, Node v, std::size_t heads);
    Node concat_rows(Node a, Node b);
    // Concatenate the flattened values of several nodes into one [1 x sum] row.
    Node flatten_concat(const std::vector<Node>& parts);

    const Matrix& value(Node n) const { return nodes_[n].value; }
    // Attention probabilities [heads][nq x nk] of an attention node.
    const std::vector<Matrix>& attention_probs(Node n) const;

    // Adds `grad` (same shape as the node value) to the node's incoming gradient.
    void seed(Node n, const std::vector<float>& grad);
    // Propagates seeded gradients to every parameter leaf.
    void backward(Gradients& grads);

    std::size_t size() const { return nodes_.size(); }
    const ParamStore& store() const { return *store_; }

private:
    struct NodeData {
        Matrix value;
        std::vector<float> grad;
        bool requires_grad = false;
        std::function<void(Graph&, Node, Gradients&)> back;
        std::vector<Matrix> saved;  // op-specific saved tensors
        std::vector<float> aux;     // op-specific saved scalars
    };

    Node push(Matrix value, bool requires_grad);
    std::vector<float>& grad_of(Node n);
    bool needs(Node n) const { return nodes_[n].requires_grad; }

    static constexpr Node kNoNode = static_cast<Node>(-1);

    const ParamStore* store_;
    std::vector<NodeData> nodes_;
    std::vector<Node> param_cache_;
};

}  // namespace distill
