// Prototype-conditioned student encoder z = phi(w).
//
// Each channel is encoded on its own. The input window is z-scored; the most
// cosine-similar prototype of that channel is normalized with the *input's*
// statistics. Both are patched and embedded (linear + learned positions). In
// every block the input patches emit queries that attend over the
// concatenation of input keys and prototype keys under one softmax, so each
// query row distributes unit mass across 2n keys. Channel encodings are
// flattened, concatenated and mapped to d by a linear head.
#pragma once

#include <vector>

#include "distill/autograd.hpp"
#include "distill/core.hpp"
#include "distill/layers.hpp"
#include "distill/tensor.hpp"

namespace distill {

inline constexpr const char* kStudentPrefix = "student/";
inline constexpr const char* kPrototypeTensor = "student/prototypes";

// Index of the most cosine-similar prototype per channel. prototypes is the
// [D x M x T] pool; ties resolve to the lowest index; zero-norm vectors score -1.
std::vector<std::size_t> select_prototype(const Tensor& prototypes, const Matrix& window);
double cosine_or_minus_one(const float* a, const float* b, std::size_t n);

// Fills the pool with M random length-T slices of each channel of `series`,
// or with N(0,1) noise when no series is given.
Tensor init_prototypes(const Config& config, std::size_t channels, const Matrix* series, Rng& rng);

// Adds every student tensor (including the prototype pool) to `store`.
void add_student_params(ParamStore& store, const Config& config, std::size_t channels,
                        const Matrix* train_series, Rng& rng);

// Optional record of a forward pass, for inspection and tests.
struct StudentTrace {
    std::vector<std::size_t> selected;                  // per channel
    std::vector<std::vector<Graph::Node>> attention;    // [channel][block]
};

class Student {
public:
    Student(const ParamStore& store, const Config& config, std::size_t channels);

    // Returns the [1 x d] representation node. `dropout_rng` enables dropout
    // when config.dropout > 0.
    Graph::Node forward(Graph& g, const Matrix& window, StudentTrace* trace = nullptr,
                        Rng* dropout_rng = nullptr) const;

    std::vector<float> represent(const ParamStore& store, const Matrix& window) const;

    std::size_t channels() const { return channels_; }

private:
    struct Block {
        NormIds norm1, norm2;
        std::size_t q_w, k_w, v_w, q_m, k_m, v_m, out;
        FfnIds ffn;
    };

    Config config_;
    std::size_t channels_;
    std::size_t patches_;
    std::size_t prototypes_, embed_w_, embed_b_, pos_, head_w_, head_b_;
    std::vector<Block> blocks_;
};

}  // namespace distill
