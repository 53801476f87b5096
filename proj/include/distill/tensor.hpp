// Named parameter tensors and gradient buffers.
#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace distill {

struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<float> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> s, float fill = 0.0f);

    std::size_t numel() const { return data.size(); }
    // Leading dimension; 1 for rank-1 tensors.
    std::size_t rows() const;
    // Product of the remaining dimensions.
    std::size_t cols() const;
    bool operator==(const Tensor&) const = default;
};

std::size_t shape_numel(const std::vector<std::size_t>& shape);
std::string shape_string(const std::vector<std::size_t>& shape);

struct Parameter {
    std::string name;
    Tensor value;
    bool frozen = false;
};

// Insertion-ordered set of named tensors. Indices are stable once added.
class ParamStore {
public:
    std::size_t add(std::string name, Tensor value, bool frozen = false);

    std::size_t size() const { return params_.size(); }
    Parameter& at(std::size_t i) { return params_[i]; }
    const Parameter& at(std::size_t i) const { return params_[i]; }
    std::optional<std::size_t> find(const std::string& name) const;
    // Throws std::out_of_range naming the missing tensor.
    std::size_t index(const std::string& name) const;
    const std::vector<Parameter>& all() const { return params_; }

private:
    std::vector<Parameter> params_;
    std::map<std::string, std::size_t> index_;
};

// One buffer per parameter, allocated on first write.
class Gradients {
public:
    explicit Gradients(const ParamStore& store);

    std::vector<float>& buffer(std::size_t param);
    bool has(std::size_t param) const { return !buffers_[param].empty(); }
    const std::vector<float>& get(std::size_t param) const { return buffers_[param]; }
    std::size_t size() const { return buffers_.size(); }

    // Elementwise this += other; both must come from the same store.
    void accumulate(const Gradients& other);
    void scale(float factor);
    void clear();

private:
    const ParamStore* store_;
    std::vector<std::vector<float>> buffers_;
};

}  // namespace distill
