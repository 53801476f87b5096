#include "distill/tensor.hpp"

#include <functional>
#include <numeric>
#include <stdexcept>

namespace distill {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const std::vector<std::size_t>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor::Tensor(std::vector<std::size_t> s, float fill)
    : shape(std::move(s)), data(shape_numel(shape), fill) {}

std::size_t Tensor::rows() const { return shape.size() <= 1 ? 1 : shape[0]; }

std::size_t Tensor::cols() const {
    if (shape.empty()) return 1;
    if (shape.size() == 1) return shape[0];
    return numel() / shape[0];
}

std::size_t ParamStore::add(std::string name, Tensor value, bool frozen) {
    if (index_.count(name)) throw std::invalid_argument("duplicate tensor name '" + name + "'");
    const std::size_t i = params_.size();
    index_.emplace(name, i);
    params_.push_back(Parameter{std::move(name), std::move(value), frozen});
    return i;
}

std::optional<std::size_t> ParamStore::find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::size_t ParamStore::index(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("no tensor named '" + name + "'");
    return it->second;
}

Gradients::Gradients(const ParamStore& store) : store_(&store), buffers_(store.size()) {}

std::vector<float>& Gradients::buffer(std::size_t param) {
    auto& b = buffers_[param];
    if (b.empty()) b.assign(store_->at(param).value.numel(), 0.0f);
    return b;
}

void Gradients::accumulate(const Gradients& other) {
    for (std::size_t p = 0; p < buffers_.size(); ++p) {
        if (!other.has(p)) continue;
        auto& dst = buffer(p);
        const auto& src = other.get(p);
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
}

void Gradients::scale(float factor) {
    for (auto& b : buffers_)
        for (auto& v : b) v *= factor;
}

void Gradients::clear() {
    for (auto& b : buffers_) b.clear();
}

}  // namespace distill
