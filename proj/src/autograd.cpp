#include "distill/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace distill {

namespace {

void check(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("graph: ") + what);
}

// out[m x n] += a[m x k] * b[k x n]
void gemm_nn(const float* a, const float* b, float* out, std::size_t m, std::size_t k,
             std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        float* o = out + i * n;
        const float* ai = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const float av = ai[p];
            if (av == 0.0f) continue;
            const float* bp = b + p * n;
            for (std::size_t j = 0; j < n; ++j) o[j] += av * bp[j];
        }
    }
}

// out[m x k] += g[m x n] * b[k x n]^T
void gemm_nt(const float* g, const float* b, float* out, std::size_t m, std::size_t n,
             std::size_t k) {
    for (std::size_t i = 0; i < m; ++i) {
        const float* gi = g + i * n;
        float* o = out + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const float* bp = b + p * n;
            float acc = 0.0f;
            for (std::size_t j = 0; j < n; ++j) acc += gi[j] * bp[j];
            o[p] += acc;
        }
    }
}

// out[k x n] += a[m x k]^T * g[m x n]
void gemm_tn(const float* a, const float* g, float* out, std::size_t m, std::size_t k,
             std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const float* ai = a + i * k;
        const float* gi = g + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const float av = ai[p];
            if (av == 0.0f) continue;
            float* o = out + p * n;
            for (std::size_t j = 0; j < n; ++j) o[j] += av * gi[j];
        }
    }
}

constexpr float kGeluC = 0.7978845608028654f;  // sqrt(2/pi)
constexpr float kGeluA = 0.044715f;

}  // namespace

Graph::Graph(const ParamStore& store)
    : store_(&store), param_cache_(store.size(), kNoNode) {
    nodes_.reserve(512);
}

Graph::Node Graph::push(Matrix value, bool requires_grad) {
    NodeData d;
    d.value = std::move(value);
    d.requires_grad = requires_grad;
    nodes_.push_back(std::move(d));
    return nodes_.size() - 1;
}

std::vector<float>& Graph::grad_of(Node n) {
    auto& g = nodes_[n].grad;
    if (g.empty()) g.assign(nodes_[n].value.data.size(), 0.0f);
    return g;
}

Graph::Node Graph::constant(Matrix value) { return push(std::move(value), false); }

Graph::Node Graph::param(std::size_t id) {
    if (param_cache_[id] != kNoNode) return param_cache_[id];
    const auto& p = store_->at(id);
    Matrix m(p.value.rows(), p.value.cols());
    m.data = p.value.data;
    const Node n = push(std::move(m), !p.frozen);
    if (!p.frozen) {
        nodes_[n].back = [id](Graph& g, Node self, Gradients& grads) {
            auto& dst = grads.buffer(id);
            const auto& src = g.nodes_[self].grad;
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
        };
    }
    param_cache_[id] = n;
    return n;
}

Graph::Node Graph::param_rows(std::size_t id, std::size_t start, std::size_t count) {
    const auto& p = store_->at(id);
    check(p.value.shape.size() == 2, "param_rows needs a 2-D tensor");
    check(start + count <= p.value.shape[0], "param_rows out of range");
    const std::size_t cols = p.value.shape[1];
    Matrix m(count, cols);
    std::copy_n(p.value.data.begin() + start * cols, count * cols, m.data.begin());
    const Node n = push(std::move(m), !p.frozen);
    if (!p.frozen) {
        nodes_[n].back = [id, start, cols](Graph& g, Node self, Gradients& grads) {
            auto& dst = grads.buffer(id);
            const auto& src = g.nodes_[self].grad;
            for (std::size_t i = 0; i < src.size(); ++i) dst[start * cols + i] += src[i];
        };
    }
    return n;
}

Graph::Node Graph::param_patches(std::size_t id, std::size_t offset, std::size_t n,
                                 std::size_t P, std::size_t stride, float mean, float std) {
    const auto& p = store_->at(id);
    check(n == 0 || offset + (n - 1) * stride + P <= p.value.numel(), "param_patches out of range");
    Matrix m(n, P);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < P; ++j)
            m(i, j) = (p.value.data[offset + i * stride + j] - mean) / std;
    const Node node = push(std::move(m), !p.frozen);
    if (!p.frozen) {
        nodes_[node].back = [id, offset, n, P, stride, std](Graph& g, Node self, Gradients& grads) {
            auto& dst = grads.buffer(id);
            const auto& src = g.nodes_[self].grad;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < P; ++j)
                    dst[offset + i * stride + j] += src[i * P + j] / std;
        };
    }
    return node;
}

Graph::Node Graph::matmul(Node a, Node b) {
    const auto& A = nodes_[a].value;
    const auto& B = nodes_[b].value;
    check(A.cols == B.rows, "matmul inner dimension mismatch");
    Matrix out(A.rows, B.cols);
    gemm_nn(A.data.data(), B.data.data(), out.data.data(), A.rows, A.cols, B.cols);
    const Node n = push(std::move(out), needs(a) || needs(b));
    if (!needs(n)) return n;
    nodes_[n].back = [a, b](Graph& g, Node self, Gradients&) {
        const auto& A = g.nodes_[a].value;
        const auto& B = g.nodes_[b].value;
        const auto& dC = g.nodes_[self].grad;
        if (g.needs(a)) gemm_nt(dC.data(), B.data.data(), g.grad_of(a).data(), A.rows, B.cols, A.cols);
        if (g.needs(b)) gemm_tn(A.data.data(), dC.data(), g.grad_of(b).data(), A.rows, A.cols, B.cols);
    };
    return n;
}

Graph::Node Graph::add(Node a, Node b) {
    const auto& A = nodes_[a].value;
    const auto& B = nodes_[b].value;
    check(A.rows == B.rows && A.cols == B.cols, "add shape mismatch");
    Matrix out = A;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += B.data[i];
    const Node n = push(std::move(out), needs(a) || needs(b));
    if (!needs(n)) return n;
    nodes_[n].back = [a, b](Graph& g, Node self, Gradients&) {
        const auto& d = g.nodes_[self].grad;
        for (Node src : {a, b}) {
            if (!g.needs(src)) continue;
            auto& gs = g.grad_of(src);
            for (std::size_t i = 0; i < d.size(); ++i) gs[i] += d[i];
        }
    };
    return n;
}

Graph::Node Graph::add_row(Node a, Node bias) {
    const auto& A = nodes_[a].value;
    const auto& B = nodes_[bias].value;
    check(B.rows == 1 && B.cols == A.cols, "add_row bias shape mismatch");
    Matrix out = A;
    for (std::size_t r = 0; r < out.rows; ++r)
        for (std::size_t c = 0; c < out.cols; ++c) out(r, c) += B.data[c];
    const Node n = push(std::move(out), needs(a) || needs(bias));
    if (!needs(n)) return n;
    nodes_[n].back = [a, bias](Graph& g, Node self, Gradients&) {
        const auto& d = g.nodes_[self].grad;
        const std::size_t cols = g.nodes_[a].value.cols;
        if (g.needs(a)) {
            auto& ga = g.grad_of(a);
            for (std::size_t i = 0; i < d.size(); ++i) ga[i] += d[i];
        }
        if (g.needs(bias)) {
            auto& gb = g.grad_of(bias);
            for (std::size_t i = 0; i < d.size(); ++i) gb[i % cols] += d[i];
        }
    };
    return n;
}

Graph::Node Graph::mul_const(Node a, const Matrix& mask) {
    const auto& A = nodes_[a].value;
    check(A.rows == mask.rows && A.cols == mask.cols, "mul_const shape mismatch");
    Matrix out = A;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= mask.data[i];
    const Node n = push(std::move(out), needs(a));
    if (!needs(n)) return n;
    nodes_[n].saved.push_back(mask);
    nodes_[n].back = [a](Graph& g, Node self, Gradients&) {
        const auto& d = g.nodes_[self].grad;
        const auto& m = g.nodes_[self].saved[0].data;
        auto& ga = g.grad_of(a);
        for (std::size_t i = 0; i < d.size(); ++i) ga[i] += d[i] * m[i];
    };
    return n;
}

Graph::Node Graph::layer_norm(Node x, Node scale, Node bias, float eps) {
    const auto& X = nodes_[x].value;
    const auto& S = nodes_[scale].value;
    const auto& B = nodes_[bias].value;
    check(S.data.size() == X.cols && B.data.size() == X.cols, "layer_norm parameter shape mismatch");
    Matrix out(X.rows, X.cols);
    Matrix xhat(X.rows, X.cols);
    std::vector<float> inv_std(X.rows);
    for (std::size_t r = 0; r < X.rows; ++r) {
        const float* xr = X.row(r);
        float mean = 0.0f;
        for (std::size_t c = 0; c < X.cols; ++c) mean += xr[c];
        mean /= static_cast<float>(X.cols);
        float var = 0.0f;
        for (std::size_t c = 0; c < X.cols; ++c) var += (xr[c] - mean) * (xr[c] - mean);
        var /= static_cast<float>(X.cols);
        const float is = 1.0f / std::sqrt(var + eps);
        inv_std[r] = is;
        for (std::size_t c = 0; c < X.cols; ++c) {
            xhat(r, c) = (xr[c] - mean) * is;
            out(r, c) = xhat(r, c) * S.data[c] + B.data[c];
        }
    }
    const Node n = push(std::move(out), needs(x) || needs(scale) || needs(bias));
    if (!needs(n)) return n;
    nodes_[n].saved.push_back(std::move(xhat));
    nodes_[n].aux = std::move(inv_std);
    nodes_[n].back = [x, scale, bias](Graph& g, Node self, Gradients&) {
        const auto& d = g.nodes_[self].grad;
        const auto& xh = g.nodes_[self].saved[0];
        const auto& is = g.nodes_[self].aux;
        const auto& S = g.nodes_[scale].value;
        const std::size_t rows = xh.rows, cols = xh.cols;
        if (g.needs(scale)) {
            auto& gs = g.grad_of(scale);
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < cols; ++c) gs[c] += d[r * cols + c] * xh(r, c);
        }
        if (g.needs(bias)) {
            auto& gb = g.grad_of(bias);
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < cols; ++c) gb[c] += d[r * cols + c];
        }
        if (g.needs(x)) {
            auto& gx = g.grad_of(x);
            std::vector<float> dxh(cols);
            for (std::size_t r = 0; r < rows; ++r) {
                float mean_d = 0.0f, mean_dx = 0.0f;
                for (std::size_t c = 0; c < cols; ++c) {
                    dxh[c] = d[r * cols + c] * S.data[c];
                    mean_d += dxh[c];
                    mean_dx += dxh[c] * xh(r, c);
                }
                mean_d /= static_cast<float>(cols);
                mean_dx /= static_cast<float>(cols);
                for (std::size_t c = 0; c < cols; ++c)
                    gx[r * cols + c] += is[r] * (dxh[c] - mean_d - xh(r, c) * mean_dx);
            }
        }
    };
    return n;
}

Graph::Node Graph::gelu(Node x) {
    const auto& X = nodes_[x].value;
    Matrix out(X.rows, X.cols);
    for (std::size_t i = 0; i < X.data.size(); ++i) {
        const float v = X.data[i];
        out.data[i] = 0.5f * v * (1.0f + std::tanh(kGeluC * (v + kGeluA * v * v * v)));
    }
    const Node n = push(std::move(out), needs(x));
    if (!needs(n)) return n;
    nodes_[n].back = [x](Graph& g, Node self, Gradients&) {
        const auto& d = g.nodes_[self].grad;
        const auto& X = g.nodes_[x].value;
        auto& gx = g.grad_of(x);
        for (std::size_t i = 0; i < d.size(); ++i) {
            const float v = X.data[i];
            const float t = std::tanh(kGeluC * (v + kGeluA * v * v * v));
            const float dt = (1.0f - t * t) * kGeluC * (1.0f + 3.0f * kGeluA * v * v);
            gx[i] += d[i] * (0.5f * (1.0f + t) + 0.5f * v * dt);
        }
    };
    return n;
}

Graph::Node Graph::attention(Node q, Node k, Node v, std::size_t heads) {
    const auto& Q = nodes_[q].value;
    const auto& K = nodes_[k].value;
    const auto& V = nodes_[v].value;
    check(Q.cols == K.cols && K.cols == V.cols && K.rows == V.rows, "attention shape mismatch");
    check(heads >= 1 && Q.cols % heads == 0, "attention heads must divide width");
    const std::size_t nq = Q.rows, nk = K.rows, dm = Q.cols, dh = dm / heads;
    const float scale = 1.0f / std::sqrt(static_cast<float>(dh));

    Matrix out(nq, dm);
    std::vector<Matrix> probs;
    probs.reserve(heads);
    std::vector<float> logits(nk);
    for (std::size_t h = 0; h < heads; ++h) {
        Matrix p(nq, nk);
        const std::size_t off = h * dh;
        for (std::size_t i = 0; i < nq; ++i) {
            float mx = -INFINITY;
            for (std::size_t t = 0; t < nk; ++t) {
                float s = 0.0f;
                for (std::size_t e = 0; e < dh; ++e) s += Q(i, off + e) * K(t, off + e);
                logits[t] = s * scale;
                mx = std::max(mx, logits[t]);
            }
            float z = 0.0f;
            for (std::size_t t = 0; t < nk; ++t) {
                p(i, t) = std::exp(logits[t] - mx);
                z += p(i, t);
            }
            for (std::size_t t = 0; t < nk; ++t) p(i, t) /= z;
            for (std::size_t t = 0; t < nk; ++t) {
                const float w = p(i, t);
                for (std::size_t e = 0; e < dh; ++e) out(i, off + e) += w * V(t, off + e);
            }
        }
        probs.push_back(std::move(p));
    }
    const Node n = push(std::move(out), needs(q) || needs(k) || needs(v));
    nodes_[n].saved = std::move(probs);
    nodes_[n].aux = {static_cast<float>(heads)};
    if (!needs(n)) return n;
    nodes_[n].back = [q, k, v, heads, scale](Graph& g, Node self, Gradients&) {
        const auto& Q = g.nodes_[q].value;
        const auto& K = g.nodes_[k].value;
        const auto& V = g.nodes_[v].value;
        const auto& dO = g.nodes_[self].grad;
        const auto& probs = g.nodes_[self].saved;
        const std::size_t nq = Q.rows, nk = K.rows, dm = Q.cols, dh = dm / heads;
        float* gq = g.needs(q) ? g.grad_of(q).data() : nullptr;
        float* gk = g.needs(k) ? g.grad_of(k).data() : nullptr;
        float* gv = g.needs(v) ? g.grad_of(v).data() : nullptr;
        std::vector<float> dp(nk), ds(nk);
        for (std::size_t h = 0; h < heads; ++h) {
            const auto& P = probs[h];
            const std::size_t off = h * dh;
            for (std::size_t i = 0; i < nq; ++i) {
                const float* doi = dO.data() + i * dm + off;
                float rowdot = 0.0f;
                for (std::size_t t = 0; t < nk; ++t) {
                    float s = 0.0f;
                    for (std::size_t e = 0; e < dh; ++e) s += doi[e] * V(t, off + e);
                    dp[t] = s;
                    rowdot += s * P(i, t);
                    if (gv) {
                        const float w = P(i, t);
                        for (std::size_t e = 0; e < dh; ++e) gv[t * dm + off + e] += w * doi[e];
                    }
                }
                for (std::size_t t = 0; t < nk; ++t) ds[t] = P(i, t) * (dp[t] - rowdot) * scale;
                for (std::size_t t = 0; t < nk; ++t) {
                    if (gq)
                        for (std::size_t e = 0; e < dh; ++e) gq[i * dm + off + e] += ds[t] * K(t, off + e);
                    if (gk)
                        for (std::size_t e = 0; e < dh; ++e) gk[t * dm + off + e] += ds[t] * Q(i, off + e);
                }
            }
        }
    };
    return n;
}

const std::vector<Matrix>& Graph::attention_probs(Node n) const {
    check(nodes_[n].aux.size() == 1 && !nodes_[n].saved.empty(), "node is not an attention node");
    return nodes_[n].saved;
}

Graph::Node Graph::concat_rows(Node a, Node b) {
    const auto& A = nodes_[a].value;
    const auto& B = nodes_[b].value;
    check(A.cols == B.cols, "concat_rows width mismatch");
    Matrix out(A.rows + B.rows, A.cols);
    std::copy(A.data.begin(), A.data.end(), out.data.begin());
    std::copy(B.data.begin(), B.data.end(), out.data.begin() + A.data.size());
    const Node n = push(std::move(out), needs(a) || needs(b));
    if (!needs(n)) return n;
    nodes_[n].back = [a, b](Graph& g, Node self, Gradients&) {
        const auto& d = g.nodes_[self].grad;
        const std::size_t na = g.nodes_[a].value.data.size();
        if (g.needs(a)) {
            auto& ga = g.grad_of(a);
            for (std::size_t i = 0; i < na; ++i) ga[i] += d[i];
        }
        if (g.needs(b)) {
            auto& gb = g.grad_of(b);
            for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += d[na + i];
        }
    };
    return n;
}

Graph::Node Graph::flatten_concat(const std::vector<Node>& parts) {
    std::size_t total = 0;
    bool rg = false;
    for (Node p : parts) {
        total += nodes_[p].value.data.size();
        rg = rg || needs(p);
    }
    Matrix out(1, total);
    std::size_t off = 0;
    for (Node p : parts) {
        const auto& v = nodes_[p].value.data;
        std::copy(v.begin(), v.end(), out.data.begin() + off);
        off += v.size();
    }
    const Node n = push(std::move(out), rg);
    if (!rg) return n;
    nodes_[n].back = [parts](Graph& g, Node self, Gradients&) {
        const auto& d = g.nodes_[self].grad;
        std::size_t off = 0;
        for (Node p : parts) {
            const std::size_t sz = g.nodes_[p].value.data.size();
            if (g.needs(p)) {
                auto& gp = g.grad_of(p);
                for (std::size_t i = 0; i < sz; ++i) gp[i] += d[off + i];
            }
            off += sz;
        }
    };
    return n;
}

void Graph::seed(Node n, const std::vector<float>& grad) {
    check(grad.size() == nodes_[n].value.data.size(), "seed gradient size mismatch");
    if (!needs(n)) return;
    auto& g = grad_of(n);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += grad[i];
}

void Graph::backward(Gradients& grads) {
    for (std::size_t i = nodes_.size(); i-- > 0;) {
        auto& nd = nodes_[i];
        if (!nd.requires_grad || nd.grad.empty() || !nd.back) continue;
        nd.back(*this, i, grads);
    }
}

}  // namespace distill
