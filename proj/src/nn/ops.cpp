#include "ikrnet/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ikrnet/errors.hpp"

namespace ikrnet::nn {

namespace {

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                         " differ");
    }
}

template <typename T>
void require_rank(const Tensor<T>& a, std::size_t rank, const char* op) {
    if (a.rank() != rank) {
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_str(a.shape()));
    }
}

// Accumulation target for a parent, or nullptr when it needs no gradient.
template <typename T>
T* grad_of(const NodePtr<T>& p) {
    return p && p->requires_grad ? p->grad_buffer().data() : nullptr;
}

// Inner conv kernels. x is read at x[i * xs]; y never aliases x.
template <typename T>
void axpy(T* __restrict y, const T* __restrict x, std::size_t xs, T a, std::size_t n) {
    if (xs == 1) {
        for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
    } else {
        for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i * xs];
    }
}

template <typename T>
void scatter_axpy(T* __restrict y, std::size_t ys, const T* __restrict x, T a, std::size_t n) {
    if (ys == 1) {
        for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
    } else {
        for (std::size_t i = 0; i < n; ++i) y[i * ys] += a * x[i];
    }
}

// Eight interleaved partial sums so the loop vectorizes without reassociation
// flags; the summation order is fixed, so results stay deterministic.
template <typename T>
T dot(const T* __restrict a, const T* __restrict b, std::size_t bs, std::size_t n) {
    T acc[8] = {};
    std::size_t i = 0;
    if (bs == 1) {
        for (; i + 8 <= n; i += 8) {
            for (std::size_t j = 0; j < 8; ++j) acc[j] += a[i + j] * b[i + j];
        }
    } else {
        for (; i + 8 <= n; i += 8) {
            for (std::size_t j = 0; j < 8; ++j) acc[j] += a[i + j] * b[(i + j) * bs];
        }
    }
    T tail = T(0);
    for (; i < n; ++i) tail += a[i] * b[i * bs];
    return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

template <typename T>
T sigmoid_scalar(T x) {
    if (x >= T(0)) {
        return T(1) / (T(1) + std::exp(-x));
    }
    const T e = std::exp(x);
    return e / (T(1) + e);
}

// outer = prod(shape[:axis]), inner = prod(shape[axis+1:])
void split_axis(const Shape& shape, std::size_t axis, std::size_t& outer, std::size_t& inner) {
    outer = 1;
    inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "add");
    std::vector<T> out(a.numel());
    const auto x = a.data();
    const auto y = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
    NodePtr<T> pa = a.node(), pb = b.node();
    return make_result<T>(a.shape(), std::move(out), {pa, pb}, [pa, pb](const Node<T>& o) {
        for (const auto& p : {pa, pb}) {
            if (T* g = grad_of(p)) {
                for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
            }
        }
    }, "add");
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "mul");
    std::vector<T> out(a.numel());
    const auto x = a.data();
    const auto y = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
    NodePtr<T> pa = a.node(), pb = b.node();
    return make_result<T>(a.shape(), std::move(out), {pa, pb}, [pa, pb](const Node<T>& o) {
        if (T* g = grad_of(pa)) {
            for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * pb->data[i];
        }
        if (T* g = grad_of(pb)) {
            for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * pa->data[i];
        }
    }, "mul");
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
    std::vector<T> out(a.numel());
    const auto x = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
    NodePtr<T> pa = a.node();
    return make_result<T>(a.shape(), std::move(out), {pa}, [pa, factor](const Node<T>& o) {
        if (T* g = grad_of(pa)) {
            for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * factor;
        }
    }, "scale");
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
    std::vector<T> out(a.numel());
    const auto x = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
    NodePtr<T> pa = a.node();
    return make_result<T>(a.shape(), std::move(out), {pa}, [pa](const Node<T>& o) {
        if (T* g = grad_of(pa)) {
            for (std::size_t i = 0; i < o.grad.size(); ++i) {
                if (pa->data[i] > T(0)) g[i] += o.grad[i];
            }
        }
    }, "relu");
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
    std::vector<T> out(a.numel());
    const auto x = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid_scalar(x[i]);
    NodePtr<T> pa = a.node();
    return make_result<T>(a.shape(), std::move(out), {pa}, [pa](const Node<T>& o) {
        if (T* g = grad_of(pa)) {
            for (std::size_t i = 0; i < o.grad.size(); ++i) {
                const T s = o.data[i];
                g[i] += o.grad[i] * s * (T(1) - s);
            }
        }
    }, "sigmoid");
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& a) {
    std::vector<T> out(a.numel());
    const auto x = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x[i]);
    NodePtr<T> pa = a.node();
    return make_result<T>(a.shape(), std::move(out), {pa}, [pa](const Node<T>& o) {
        if (T* g = grad_of(pa)) {
            for (std::size_t i = 0; i < o.grad.size(); ++i) {
                const T t = o.data[i];
                g[i] += o.grad[i] * (T(1) - t * t);
            }
        }
    }, "tanh");
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) {
        throw ShapeError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    }
    std::vector<T> out(m * n, T(0));
    const T* A = a.data().data();
    const T* B = b.data().data();
    for (std::size_t i = 0; i < m; ++i) {
        T* row = out.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const T av = A[i * k + p];
            const T* brow = B + p * n;
            for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
        }
    }
    NodePtr<T> pa = a.node(), pb = b.node();
    return make_result<T>({m, n}, std::move(out), {pa, pb}, [pa, pb, m, k, n](const Node<T>& o) {
        const T* G = o.grad.data();
        if (T* ga = grad_of(pa)) {
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    T s = T(0);
                    for (std::size_t j = 0; j < n; ++j) s += G[i * n + j] * pb->data[p * n + j];
                    ga[i * k + p] += s;
                }
            }
        }
        if (T* gb = grad_of(pb)) {
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    const T av = pa->data[i * k + p];
                    for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * G[i * n + j];
                }
            }
        }
    }, "matmul");
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const std::optional<Tensor<T>>& bias) {
    require_rank(x, 2, "linear");
    require_rank(weight, 2, "linear");
    const std::size_t batch = x.dim(0), in = x.dim(1), out_dim = weight.dim(0);
    if (weight.dim(1) != in) {
        throw ShapeError("linear: input " + shape_str(x.shape()) + " does not match weight " +
                         shape_str(weight.shape()));
    }
    if (bias && (bias->rank() != 1 || bias->dim(0) != out_dim)) {
        throw ShapeError("linear: bias " + shape_str(bias->shape()) + " does not match " + std::to_string(out_dim) +
                         " outputs");
    }
    std::vector<T> out(batch * out_dim);
    const T* X = x.data().data();
    const T* W = weight.data().data();
    const T* Bv = bias ? bias->data().data() : nullptr;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t idx = 0; idx < static_cast<std::ptrdiff_t>(batch * out_dim); ++idx) {
        const std::size_t b = static_cast<std::size_t>(idx) / out_dim;
        const std::size_t o = static_cast<std::size_t>(idx) % out_dim;
        const T* xr = X + b * in;
        const T* wr = W + o * in;
        T s = Bv ? Bv[o] : T(0);
        for (std::size_t i = 0; i < in; ++i) s += xr[i] * wr[i];
        out[static_cast<std::size_t>(idx)] = s;
    }
    NodePtr<T> px = x.node(), pw = weight.node();
    NodePtr<T> pb = bias ? bias->node() : nullptr;
    return make_result<T>({batch, out_dim}, std::move(out), {px, pw, pb},
                          [px, pw, pb, batch, in, out_dim](const Node<T>& o) {
        const T* G = o.grad.data();
        if (T* gx = grad_of(px)) {
#pragma omp parallel for schedule(static)
            for (std::ptrdiff_t bi = 0; bi < static_cast<std::ptrdiff_t>(batch); ++bi) {
                const std::size_t b = static_cast<std::size_t>(bi);
                T* gr = gx + b * in;
                for (std::size_t j = 0; j < out_dim; ++j) {
                    const T gv = G[b * out_dim + j];
                    const T* wr = pw->data.data() + j * in;
                    for (std::size_t i = 0; i < in; ++i) gr[i] += gv * wr[i];
                }
            }
        }
        if (T* gw = grad_of(pw)) {
#pragma omp parallel for schedule(static)
            for (std::ptrdiff_t oi = 0; oi < static_cast<std::ptrdiff_t>(out_dim); ++oi) {
                const std::size_t j = static_cast<std::size_t>(oi);
                T* wr = gw + j * in;
                for (std::size_t b = 0; b < batch; ++b) {
                    const T gv = G[b * out_dim + j];
                    const T* xr = px->data.data() + b * in;
                    for (std::size_t i = 0; i < in; ++i) wr[i] += gv * xr[i];
                }
            }
        }
        if (T* gb = grad_of(pb)) {
            for (std::size_t b = 0; b < batch; ++b) {
                for (std::size_t j = 0; j < out_dim; ++j) gb[j] += G[b * out_dim + j];
            }
        }
    }, "linear");
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
    if (numel(shape) != a.numel()) {
        throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
    }
    NodePtr<T> pa = a.node();
    return make_result<T>(std::move(shape), a.to_vector(), {pa}, [pa](const Node<T>& o) {
        if (T* g = grad_of(pa)) {
            for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
        }
    }, "reshape");
}

template <typename T>
Tensor<T> transpose_last2(const Tensor<T>& a) {
    if (a.rank() < 2) {
        throw ShapeError("transpose_last2: need rank >= 2, got " + shape_str(a.shape()));
    }
    Shape shape = a.shape();
    const std::size_t r = shape[shape.size() - 2], c = shape[shape.size() - 1];
    const std::size_t outer = a.numel() / (r * c);
    std::swap(shape[shape.size() - 2], shape[shape.size() - 1]);
    std::vector<T> out(a.numel());
    const T* X = a.data().data();
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) out[o * r * c + j * r + i] = X[o * r * c + i * c + j];
        }
    }
    NodePtr<T> pa = a.node();
    return make_result<T>(std::move(shape), std::move(out), {pa}, [pa, outer, r, c](const Node<T>& o) {
        if (T* g = grad_of(pa)) {
            for (std::size_t q = 0; q < outer; ++q) {
                for (std::size_t i = 0; i < r; ++i) {
                    for (std::size_t j = 0; j < c; ++j) g[q * r * c + i * c + j] += o.grad[q * r * c + j * r + i];
                }
            }
        }
    }, "transpose");
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
    if (parts.empty()) {
        throw ShapeError("concat: no inputs");
    }
    const Shape& first = parts.front().shape();
    if (axis >= first.size()) {
        throw ShapeError("concat: axis out of range for " + shape_str(first));
    }
    Shape shape = first;
    shape[axis] = 0;
    std::vector<std::size_t> widths;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        bool ok = s.size() == first.size();
        for (std::size_t i = 0; ok && i < s.size(); ++i) {
            if (i != axis && s[i] != first[i]) ok = false;
        }
        if (!ok) {
            throw ShapeError("concat: incompatible part " + shape_str(s) + " vs " + shape_str(first));
        }
        shape[axis] += s[axis];
        widths.push_back(s[axis]);
    }
    std::size_t outer = 0, inner = 0;
    split_axis(first, axis, outer, inner);
    const std::size_t total = shape[axis];
    std::vector<T> out(numel(shape));
    std::size_t offset = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
        const T* src = parts[p].data().data();
        const std::size_t block = widths[p] * inner;
        for (std::size_t o = 0; o < outer; ++o) {
            std::copy_n(src + o * block, block, out.data() + (o * total + offset) * inner);
        }
        offset += widths[p];
    }
    std::vector<NodePtr<T>> nodes;
    for (const auto& p : parts) nodes.push_back(p.node());
    return make_result<T>(std::move(shape), std::move(out), nodes,
                          [nodes, widths, outer, inner, total](const Node<T>& o) {
        std::size_t off = 0;
        for (std::size_t p = 0; p < nodes.size(); ++p) {
            const std::size_t block = widths[p] * inner;
            if (T* g = grad_of(nodes[p])) {
                for (std::size_t q = 0; q < outer; ++q) {
                    const T* src = o.grad.data() + (q * total + off) * inner;
                    T* dst = g + q * block;
                    for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
                }
            }
            off += widths[p];
        }
    }, "concat");
}

template <typename T>
Tensor<T> slice(const Tensor<T>& a, std::size_t axis, std::size_t begin, std::size_t end) {
    if (axis >= a.rank() || begin >= end || end > a.dim(axis)) {
        throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) + ") on axis " +
                         std::to_string(axis) + " invalid for " + shape_str(a.shape()));
    }
    std::size_t outer = 0, inner = 0;
    split_axis(a.shape(), axis, outer, inner);
    const std::size_t full = a.dim(axis), width = end - begin;
    Shape shape = a.shape();
    shape[axis] = width;
    std::vector<T> out(outer * width * inner);
    const T* X = a.data().data();
    for (std::size_t o = 0; o < outer; ++o) {
        std::copy_n(X + (o * full + begin) * inner, width * inner, out.data() + o * width * inner);
    }
    NodePtr<T> pa = a.node();
    return make_result<T>(std::move(shape), std::move(out), {pa},
                          [pa, outer, inner, full, begin, width](const Node<T>& o) {
        if (T* g = grad_of(pa)) {
            for (std::size_t q = 0; q < outer; ++q) {
                const T* src = o.grad.data() + q * width * inner;
                T* dst = g + (q * full + begin) * inner;
                for (std::size_t i = 0; i < width * inner; ++i) dst[i] += src[i];
            }
        }
    }, "slice");
}

template <typename T>
Tensor<T> select(const Tensor<T>& a, std::size_t axis, std::size_t index) {
    if (axis >= a.rank() || index >= a.dim(axis)) {
        throw ShapeError("select: index " + std::to_string(index) + " on axis " + std::to_string(axis) +
                         " invalid for " + shape_str(a.shape()));
    }
    Shape shape = a.shape();
    shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
    return reshape(slice(a, axis, index, index + 1), shape);
}

template <typename T>
Tensor<T> stack(const std::vector<Tensor<T>>& parts, std::size_t axis) {
    if (parts.empty()) {
        throw ShapeError("stack: no inputs");
    }
    Shape unsqueezed = parts.front().shape();
    if (axis > unsqueezed.size()) {
        throw ShapeError("stack: axis out of range");
    }
    unsqueezed.insert(unsqueezed.begin() + static_cast<std::ptrdiff_t>(axis), 1);
    std::vector<Tensor<T>> views;
    views.reserve(parts.size());
    for (const auto& p : parts) {
        if (p.shape() != parts.front().shape()) {
            throw ShapeError("stack: parts differ in shape");
        }
        views.push_back(reshape(p, unsqueezed));
    }
    return concat(views, axis);
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
    const std::size_t n = a.numel();
    T s = T(0);
    for (T v : a.data()) s += v;
    NodePtr<T> pa = a.node();
    return make_result<T>({1}, {s / static_cast<T>(n)}, {pa}, [pa, n](const Node<T>& o) {
        if (T* g = grad_of(pa)) {
            const T gv = o.grad[0] / static_cast<T>(n);
            for (std::size_t i = 0; i < n; ++i) g[i] += gv;
        }
    }, "mean");
}

template <typename T>
Tensor<T> mean_last(const Tensor<T>& a) {
    if (a.rank() < 1 || a.shape().back() == 0) {
        throw ShapeError("mean_last: empty last axis");
    }
    const std::size_t len = a.shape().back();
    const std::size_t rows = a.numel() / len;
    Shape shape(a.shape().begin(), a.shape().end() - 1);
    if (shape.empty()) shape = {1};
    std::vector<T> out(rows);
    const T* X = a.data().data();
    for (std::size_t r = 0; r < rows; ++r) {
        T s = T(0);
        for (std::size_t l = 0; l < len; ++l) s += X[r * len + l];
        out[r] = s / static_cast<T>(len);
    }
    NodePtr<T> pa = a.node();
    return make_result<T>(std::move(shape), std::move(out), {pa}, [pa, rows, len](const Node<T>& o) {
        if (T* g = grad_of(pa)) {
            for (std::size_t r = 0; r < rows; ++r) {
                const T gv = o.grad[r] / static_cast<T>(len);
                for (std::size_t l = 0; l < len; ++l) g[r * len + l] += gv;
            }
        }
    }, "mean_last");
}

template <typename T>
Tensor<T> scale_channels(const Tensor<T>& x, const Tensor<T>& s) {
    require_rank(x, 3, "scale_channels");
    require_rank(s, 2, "scale_channels");
    const std::size_t batch = x.dim(0), ch = x.dim(1), len = x.dim(2);
    if (s.dim(0) != batch || s.dim(1) != ch) {
        throw ShapeError("scale_channels: gate " + shape_str(s.shape()) + " does not match " + shape_str(x.shape()));
    }
    std::vector<T> out(x.numel());
    const T* X = x.data().data();
    const T* S = s.data().data();
    for (std::size_t r = 0; r < batch * ch; ++r) {
        for (std::size_t l = 0; l < len; ++l) out[r * len + l] = X[r * len + l] * S[r];
    }
    NodePtr<T> px = x.node(), ps = s.node();
    return make_result<T>(x.shape(), std::move(out), {px, ps}, [px, ps, batch, ch, len](const Node<T>& o) {
        const T* G = o.grad.data();
        if (T* gx = grad_of(px)) {
            for (std::size_t r = 0; r < batch * ch; ++r) {
                const T sv = ps->data[r];
                for (std::size_t l = 0; l < len; ++l) gx[r * len + l] += G[r * len + l] * sv;
            }
        }
        if (T* gs = grad_of(ps)) {
            for (std::size_t r = 0; r < batch * ch; ++r) {
                T acc = T(0);
                for (std::size_t l = 0; l < len; ++l) acc += G[r * len + l] * px->data[r * len + l];
                gs[r] += acc;
            }
        }
    }, "scale_channels");
}

template <typename T>
Tensor<T> conv1d(const Tensor<T>& input, const Tensor<T>& weight, const std::optional<Tensor<T>>& bias,
                 std::size_t stride, std::size_t padding, std::size_t groups) {
    require_rank(input, 3, "conv1d");
    require_rank(weight, 3, "conv1d");
    if (stride < 1 || groups < 1) {
        throw InvalidArgument("conv1d: stride and groups must be >= 1");
    }
    const std::size_t batch = input.dim(0), cin = input.dim(1), len = input.dim(2);
    const std::size_t cout = weight.dim(0), cin_g = weight.dim(1), k = weight.dim(2);
    if (k < 1) {
        throw InvalidArgument("conv1d: kernel size must be >= 1");
    }
    if (cin % groups != 0 || cout % groups != 0 || cin_g != cin / groups) {
        throw ShapeError("conv1d: input " + shape_str(input.shape()) + " incompatible with weight " +
                         shape_str(weight.shape()) + " and groups=" + std::to_string(groups));
    }
    if (bias && (bias->rank() != 1 || bias->dim(0) != cout)) {
        throw ShapeError("conv1d: bias " + shape_str(bias->shape()) + " does not match " + std::to_string(cout) +
                         " output channels");
    }
    if (len + 2 * padding < k) {
        throw InvalidArgument("conv1d: input length " + std::to_string(len) + " with padding " +
                              std::to_string(padding) + " is shorter than kernel " + std::to_string(k));
    }
    const std::size_t lout = (len + 2 * padding - k) / stride + 1;
    const std::size_t cout_g = cout / groups;

    // Valid output range [lo, hi) for tap kk: 0 <= l*stride + kk - padding < len.
    std::vector<std::size_t> lo(k), hi(k);
    for (std::size_t kk = 0; kk < k; ++kk) {
        const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(kk) - static_cast<std::ptrdiff_t>(padding);
        const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(stride);
        std::ptrdiff_t first = shift >= 0 ? 0 : (-shift + s - 1) / s;
        std::ptrdiff_t last = (static_cast<std::ptrdiff_t>(len) - 1 - shift);
        last = last < 0 ? -1 : last / s;
        first = std::min<std::ptrdiff_t>(first, static_cast<std::ptrdiff_t>(lout));
        last = std::min<std::ptrdiff_t>(last, static_cast<std::ptrdiff_t>(lout) - 1);
        lo[kk] = static_cast<std::size_t>(first);
        hi[kk] = last + 1 > first ? static_cast<std::size_t>(last + 1) : lo[kk];
    }

    std::vector<T> out(batch * cout * lout);
    const T* X = input.data().data();
    const T* W = weight.data().data();
    const T* Bv = bias ? bias->data().data() : nullptr;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t idx = 0; idx < static_cast<std::ptrdiff_t>(batch * cout); ++idx) {
        const std::size_t b = static_cast<std::size_t>(idx) / cout;
        const std::size_t co = static_cast<std::size_t>(idx) % cout;
        const std::size_t grp = co / cout_g;
        T* orow = out.data() + (b * cout + co) * lout;
        std::fill_n(orow, lout, Bv ? Bv[co] : T(0));
        for (std::size_t ci = 0; ci < cin_g; ++ci) {
            const T* xrow = X + (b * cin + grp * cin_g + ci) * len;
            const T* wrow = W + (co * cin_g + ci) * k;
            for (std::size_t kk = 0; kk < k; ++kk) {
                if (hi[kk] <= lo[kk]) continue;
                const std::ptrdiff_t first = static_cast<std::ptrdiff_t>(lo[kk] * stride + kk) -
                                             static_cast<std::ptrdiff_t>(padding);
                axpy(orow + lo[kk], xrow + first, stride, wrow[kk], hi[kk] - lo[kk]);
            }
        }
    }

    NodePtr<T> px = input.node(), pw = weight.node();
    NodePtr<T> pb = bias ? bias->node() : nullptr;
    return make_result<T>({batch, cout, lout}, std::move(out), {px, pw, pb},
                          [px, pw, pb, batch, cin, len, cout, cin_g, cout_g, k, lout, stride, padding, lo,
                           hi](const Node<T>& o) {
        const T* G = o.grad.data();
        const T* X = px->data.data();
        const T* W = pw->data.data();
        if (T* gx = grad_of(px)) {
#pragma omp parallel for schedule(static)
            for (std::ptrdiff_t idx = 0; idx < static_cast<std::ptrdiff_t>(batch * cin); ++idx) {
                const std::size_t b = static_cast<std::size_t>(idx) / cin;
                const std::size_t c = static_cast<std::size_t>(idx) % cin;
                const std::size_t grp = c / cin_g;
                const std::size_t ci = c % cin_g;
                T* gxrow = gx + (b * cin + c) * len;
                for (std::size_t co = grp * cout_g; co < (grp + 1) * cout_g; ++co) {
                    const T* grow = G + (b * cout + co) * lout;
                    const T* wrow = W + (co * cin_g + ci) * k;
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        if (hi[kk] <= lo[kk]) continue;
                        const std::ptrdiff_t first = static_cast<std::ptrdiff_t>(lo[kk] * stride + kk) -
                                                     static_cast<std::ptrdiff_t>(padding);
                        scatter_axpy(gxrow + first, stride, grow + lo[kk], wrow[kk], hi[kk] - lo[kk]);
                    }
                }
            }
        }
        if (T* gw = grad_of(pw)) {
#pragma omp parallel for schedule(static)
            for (std::ptrdiff_t coi = 0; coi < static_cast<std::ptrdiff_t>(cout); ++coi) {
                const std::size_t co = static_cast<std::size_t>(coi);
                const std::size_t grp = co / cout_g;
                for (std::size_t ci = 0; ci < cin_g; ++ci) {
                    T* gwrow = gw + (co * cin_g + ci) * k;
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        if (hi[kk] <= lo[kk]) continue;
                        const std::ptrdiff_t first = static_cast<std::ptrdiff_t>(lo[kk] * stride + kk) -
                                                     static_cast<std::ptrdiff_t>(padding);
                        T acc = T(0);
                        for (std::size_t b = 0; b < batch; ++b) {
                            const T* grow = G + (b * cout + co) * lout;
                            const T* xrow = X + (b * cin + grp * cin_g + ci) * len;
                            acc += dot(grow + lo[kk], xrow + first, stride, hi[kk] - lo[kk]);
                        }
                        gwrow[kk] += acc;
                    }
                }
            }
        }
        if (T* gb = grad_of(pb)) {
            for (std::size_t co = 0; co < cout; ++co) {
                T acc = T(0);
                for (std::size_t b = 0; b < batch; ++b) {
                    const T* grow = G + (b * cout + co) * lout;
                    for (std::size_t l = 0; l < lout; ++l) acc += grow[l];
                }
                gb[co] += acc;
            }
        }
    }, "conv1d");
}

template <typename T>
Tensor<T> adaptive_avg_pool1d(const Tensor<T>& input, std::size_t out_len) {
    require_rank(input, 3, "adaptive_avg_pool1d");
    if (out_len < 1) {
        throw InvalidArgument("adaptive_avg_pool1d: out_len must be >= 1");
    }
    const std::size_t rows = input.dim(0) * input.dim(1), len = input.dim(2);
    if (len < 1) {
        throw ShapeError("adaptive_avg_pool1d: empty input");
    }
    std::vector<std::size_t> starts(out_len), ends(out_len);
    for (std::size_t i = 0; i < out_len; ++i) {
        starts[i] = (i * len) / out_len;
        ends[i] = ((i + 1) * len + out_len - 1) / out_len;
    }
    std::vector<T> out(rows * out_len);
    const T* X = input.data().data();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < out_len; ++i) {
            T s = T(0);
            for (std::size_t l = starts[i]; l < ends[i]; ++l) s += X[r * len + l];
            out[r * out_len + i] = s / static_cast<T>(ends[i] - starts[i]);
        }
    }
    NodePtr<T> pa = input.node();
    return make_result<T>({input.dim(0), input.dim(1), out_len}, std::move(out), {pa},
                          [pa, rows, len, out_len, starts, ends](const Node<T>& o) {
        if (T* g = grad_of(pa)) {
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t i = 0; i < out_len; ++i) {
                    const T gv = o.grad[r * out_len + i] / static_cast<T>(ends[i] - starts[i]);
                    for (std::size_t l = starts[i]; l < ends[i]; ++l) g[r * len + l] += gv;
                }
            }
        }
    }, "adaptive_avg_pool1d");
}

template <typename T>
Tensor<T> batchnorm1d(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                      Tensor<T>& running_mean, Tensor<T>& running_var, const BatchNormOptions& options) {
    require_rank(input, 3, "batchnorm1d");
    const std::size_t batch = input.dim(0), ch = input.dim(1), len = input.dim(2);
    for (const Tensor<T>* t : std::initializer_list<const Tensor<T>*>{&gamma, &beta, &running_mean, &running_var}) {
        if (t->rank() != 1 || t->dim(0) != ch) {
            throw ShapeError("batchnorm1d: per-channel tensor " + shape_str(t->shape()) + " does not match " +
                             std::to_string(ch) + " channels");
        }
    }
    const std::size_t count = batch * len;
    if (options.training && count < 2) {
        throw InvalidArgument("batchnorm1d: training mode needs at least 2 values per channel, got " +
                              std::to_string(count));
    }
    const T* X = input.data().data();
    std::vector<T> mean_c(ch), inv_std(ch);
    auto rm = running_mean.data();
    auto rv = running_var.data();
    for (std::size_t c = 0; c < ch; ++c) {
        if (options.training) {
            double s = 0.0;
            for (std::size_t b = 0; b < batch; ++b) {
                const T* row = X + (b * ch + c) * len;
                for (std::size_t l = 0; l < len; ++l) s += row[l];
            }
            const double mu = s / static_cast<double>(count);
            double ss = 0.0;
            for (std::size_t b = 0; b < batch; ++b) {
                const T* row = X + (b * ch + c) * len;
                for (std::size_t l = 0; l < len; ++l) ss += (row[l] - mu) * (row[l] - mu);
            }
            const double var = ss / static_cast<double>(count);
            mean_c[c] = static_cast<T>(mu);
            inv_std[c] = static_cast<T>(1.0 / std::sqrt(var + options.eps));
            const double unbiased = ss / static_cast<double>(count - 1);
            rm[c] = static_cast<T>((1.0 - options.momentum) * rm[c] + options.momentum * mu);
            rv[c] = static_cast<T>((1.0 - options.momentum) * rv[c] + options.momentum * unbiased);
        } else {
            mean_c[c] = rm[c];
            inv_std[c] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(rv[c]) + options.eps));
        }
    }
    std::vector<T> out(input.numel());
    const T* Gm = gamma.data().data();
    const T* Bt = beta.data().data();
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t c = 0; c < ch; ++c) {
            const std::size_t off = (b * ch + c) * len;
            const T a = Gm[c] * inv_std[c];
            const T shift = Bt[c] - a * mean_c[c];
            for (std::size_t l = 0; l < len; ++l) out[off + l] = a * X[off + l] + shift;
        }
    }
    NodePtr<T> px = input.node(), pg = gamma.node(), pb = beta.node();
    const bool training = options.training;
    return make_result<T>(input.shape(), std::move(out), {px, pg, pb},
                          [px, pg, pb, batch, ch, len, count, mean_c, inv_std, training](const Node<T>& o) {
        const T* G = o.grad.data();
        const T* X = px->data.data();
        T* gx = grad_of(px);
        T* gg = grad_of(pg);
        T* gb = grad_of(pb);
        for (std::size_t c = 0; c < ch; ++c) {
            // sum(dy) and sum(dy * xhat) over the channel
            T sum_g = T(0), sum_gx = T(0);
            for (std::size_t b = 0; b < batch; ++b) {
                const std::size_t off = (b * ch + c) * len;
                for (std::size_t l = 0; l < len; ++l) {
                    const T xhat = (X[off + l] - mean_c[c]) * inv_std[c];
                    sum_g += G[off + l];
                    sum_gx += G[off + l] * xhat;
                }
            }
            if (gg) gg[c] += sum_gx;
            if (gb) gb[c] += sum_g;
            if (!gx) continue;
            const T a = pg->data[c] * inv_std[c];
            const T n = static_cast<T>(count);
            for (std::size_t b = 0; b < batch; ++b) {
                const std::size_t off = (b * ch + c) * len;
                for (std::size_t l = 0; l < len; ++l) {
                    if (training) {
                        const T xhat = (X[off + l] - mean_c[c]) * inv_std[c];
                        gx[off + l] += a * (G[off + l] - sum_g / n - xhat * sum_gx / n);
                    } else {
                        gx[off + l] += a * G[off + l];
                    }
                }
            }
        }
    }, "batchnorm1d");
}

template <typename T>
Tensor<T> bce_loss(const Tensor<T>& scores, const Tensor<T>& labels) {
    require_same_shape(scores, labels, "bce_loss");
    const std::size_t n = scores.numel();
    if (n == 0) {
        throw ShapeError("bce_loss: empty batch");
    }
    const T lo = static_cast<T>(kBceEps);
    const T hi = static_cast<T>(1.0 - kBceEps);
    const T* P = scores.data().data();
    const T* Y = labels.data().data();
    T total = T(0);
    for (std::size_t i = 0; i < n; ++i) {
        const T p = std::clamp(P[i], lo, hi);
        total -= Y[i] * std::log(p) + (T(1) - Y[i]) * std::log(T(1) - p);
    }
    NodePtr<T> pp = scores.node(), py = labels.node();
    return make_result<T>({1}, {total / static_cast<T>(n)}, {pp}, [pp, py, n, lo, hi](const Node<T>& o) {
        if (T* g = grad_of(pp)) {
            const T scale_v = o.grad[0] / static_cast<T>(n);
            for (std::size_t i = 0; i < n; ++i) {
                const T raw = pp->data[i];
                if (raw < lo || raw > hi) continue;
                const T y = py->data[i];
                g[i] += scale_v * (-y / raw + (T(1) - y) / (T(1) - raw));
            }
        }
    }, "bce_loss");
}

#define IKRNET_INSTANTIATE_OPS(T)                                                                              \
    template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                                \
    template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                                \
    template Tensor<T> scale(const Tensor<T>&, T);                                                             \
    template Tensor<T> relu(const Tensor<T>&);                                                                 \
    template Tensor<T> sigmoid(const Tensor<T>&);                                                              \
    template Tensor<T> tanh(const Tensor<T>&);                                                                 \
    template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                             \
    template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const std::optional<Tensor<T>>&);            \
    template Tensor<T> reshape(const Tensor<T>&, Shape);                                                       \
    template Tensor<T> transpose_last2(const Tensor<T>&);                                                      \
    template Tensor<T> concat(const std::vector<Tensor<T>>&, std::size_t);                                     \
    template Tensor<T> slice(const Tensor<T>&, std::size_t, std::size_t, std::size_t);                         \
    template Tensor<T> select(const Tensor<T>&, std::size_t, std::size_t);                                     \
    template Tensor<T> stack(const std::vector<Tensor<T>>&, std::size_t);                                      \
    template Tensor<T> mean(const Tensor<T>&);                                                                 \
    template Tensor<T> mean_last(const Tensor<T>&);                                                            \
    template Tensor<T> scale_channels(const Tensor<T>&, const Tensor<T>&);                                     \
    template Tensor<T> conv1d(const Tensor<T>&, const Tensor<T>&, const std::optional<Tensor<T>>&, std::size_t, \
                              std::size_t, std::size_t);                                                       \
    template Tensor<T> adaptive_avg_pool1d(const Tensor<T>&, std::size_t);                                     \
    template Tensor<T> batchnorm1d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Tensor<T>&,           \
                                   Tensor<T>&, const BatchNormOptions&);                                       \
    template Tensor<T> bce_loss(const Tensor<T>&, const Tensor<T>&);

IKRNET_INSTANTIATE_OPS(float)
IKRNET_INSTANTIATE_OPS(double)

}  // namespace ikrnet::nn
