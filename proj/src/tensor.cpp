// SPDX-License-Identifier: MIT

#include "lrf/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace lrf {

namespace {

using detail::Node;
using detail::NodePtr;

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
constexpr double kFocalLo = 1e-12;
constexpr double kFocalHi = 1.0 - 1e-12;

NodePtr make_node(std::vector<int> shape) {
    std::int64_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("tensor: nonpositive extent in " + shape_str(shape));
        n *= d;
    }
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->val.assign(static_cast<size_t>(n), 0.0);
    return node;
}

void check_finite(const Node& n, const char* op) {
    for (double v : n.val) {
        if (!std::isfinite(v))
            throw std::runtime_error(std::string(op) + ": non-finite value in output " +
                                     shape_str(n.shape));
    }
}

std::int64_t numel_of(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

const Node& deref(const Tensor& t, const char* op) {
    if (!t.defined()) throw std::invalid_argument(std::string(op) + ": undefined tensor");
    return *t.node();
}

// Wires parents/backward only when some input needs gradients.
void attach(const NodePtr& out, std::vector<NodePtr> parents, std::function<void()> bw) {
    bool need = false;
    for (const auto& p : parents)
        if (p && p->requires_grad) need = true;
    if (!need) return;
    out->requires_grad = true;
    out->parents = std::move(parents);
    out->backward = std::move(bw);
}

}  // namespace

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
}

// ---- Tensor basics ----

Tensor Tensor::zeros(const std::vector<int>& shape, bool requires_grad) {
    auto n = make_node(shape);
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::full(const std::vector<int>& shape, double v, bool requires_grad) {
    auto n = make_node(shape);
    std::fill(n->val.begin(), n->val.end(), v);
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::from_data(const std::vector<int>& shape, std::vector<double> data,
                         bool requires_grad) {
    auto n = make_node(shape);
    require(static_cast<std::int64_t>(data.size()) == n->numel(),
            "from_data: " + shape_str(shape) + " needs " + std::to_string(n->numel()) +
                " values, got " + std::to_string(data.size()));
    n->val = std::move(data);
    n->requires_grad = requires_grad;
    check_finite(*n, "from_data");
    return Tensor(n);
}

Tensor Tensor::uniform(const std::vector<int>& shape, double lo, double hi,
                       std::mt19937_64& rng, bool requires_grad) {
    auto n = make_node(shape);
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& v : n->val) v = dist(rng);
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::param(const std::vector<int>& shape, int fan_in, std::mt19937_64& rng) {
    require(fan_in > 0, "param: fan_in must be positive");
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    return uniform(shape, -bound, bound, rng, true);
}

const std::vector<int>& Tensor::shape() const { return deref(*this, "shape").shape; }
int Tensor::rank() const { return static_cast<int>(shape().size()); }
int Tensor::dim(int i) const { return shape().at(static_cast<size_t>(i)); }
std::int64_t Tensor::numel() const { return deref(*this, "numel").numel(); }
const std::vector<double>& Tensor::value() const { return deref(*this, "value").val; }
std::vector<double>& Tensor::value() { return n_->val; }
bool Tensor::requires_grad() const { return deref(*this, "requires_grad").requires_grad; }

const std::vector<double>& Tensor::grad() const {
    const Node& n = deref(*this, "grad");
    const_cast<Node&>(n).ensure_grad();
    return n.grad;
}

double Tensor::item() const {
    require(numel() == 1, "item: tensor has " + std::to_string(numel()) + " elements");
    return value()[0];
}

void Tensor::zero_grad() {
    Node& n = *n_;
    n.ensure_grad();
    std::fill(n.grad.begin(), n.grad.end(), 0.0);
}

void Tensor::backward() const {
    const Node& root = deref(*this, "backward");
    require(root.numel() == 1, "backward: root must be scalar, got " + shape_str(root.shape));

    // Iterative post-order DFS over parents -> topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(n_.get(), 0);
    seen.insert(n_.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx++].get();
            if (p && p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    n_->ensure_grad();
    n_->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (node->backward) node->backward();
    }
}

// ---- elementwise ----

namespace {

Tensor binary_same_shape(const Tensor& a, const Tensor& b, const char* op,
                         const std::function<double(double, double)>& f,
                         // dval_a, dval_b as functions of (va, vb)
                         const std::function<double(double, double)>& dfa,
                         const std::function<double(double, double)>& dfb) {
    const Node& an = deref(a, op);
    const Node& bn = deref(b, op);
    require(an.shape == bn.shape, std::string(op) + ": shape mismatch " + shape_str(an.shape) +
                                      " vs " + shape_str(bn.shape));
    auto out = make_node(an.shape);
    const size_t n = an.val.size();
    for (size_t i = 0; i < n; ++i) out->val[i] = f(an.val[i], bn.val[i]);
    check_finite(*out, op);
    Node* o = out.get();
    Node* ap = a.node().get();
    Node* bp = b.node().get();
    attach(out, {a.node(), b.node()}, [o, ap, bp, dfa, dfb, n] {
        if (ap->requires_grad) {
            ap->ensure_grad();
            for (size_t i = 0; i < n; ++i) ap->grad[i] += o->grad[i] * dfa(ap->val[i], bp->val[i]);
        }
        if (bp->requires_grad) {
            bp->ensure_grad();
            for (size_t i = 0; i < n; ++i) bp->grad[i] += o->grad[i] * dfb(ap->val[i], bp->val[i]);
        }
    });
    return Tensor(out);
}

Tensor unary(const Tensor& a, const char* op, const std::function<double(double)>& f,
             const std::function<double(double)>& df) {
    const Node& an = deref(a, op);
    auto out = make_node(an.shape);
    const size_t n = an.val.size();
    for (size_t i = 0; i < n; ++i) out->val[i] = f(an.val[i]);
    check_finite(*out, op);
    Node* o = out.get();
    Node* ap = a.node().get();
    attach(out, {a.node()}, [o, ap, df, n] {
        ap->ensure_grad();
        for (size_t i = 0; i < n; ++i) ap->grad[i] += o->grad[i] * df(ap->val[i]);
    });
    return Tensor(out);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_same_shape(
        a, b, "add", [](double x, double y) { return x + y; },
        [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_same_shape(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_same_shape(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor add_scalar(const Tensor& a, double s) {
    return unary(a, "add_scalar", [s](double x) { return x + s; }, [](double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double s) {
    return unary(a, "mul_scalar", [s](double x) { return x * s; }, [s](double) { return s; });
}

Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0); }

Tensor sigmoid(const Tensor& a) {
    return unary(
        a, "sigmoid", [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
        [](double x) {
            double s = 1.0 / (1.0 + std::exp(-x));
            return s * (1.0 - s);
        });
}

Tensor gelu(const Tensor& a) {
    return unary(
        a, "gelu", [](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); },
        [](double x) {
            double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
            double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
            return cdf + x * pdf;
        });
}

Tensor emax(const Tensor& a, const Tensor& b) {
    const Node& an = deref(a, "emax");
    const Node& bn = deref(b, "emax");
    require(an.shape == bn.shape, "emax: shape mismatch " + shape_str(an.shape) + " vs " +
                                      shape_str(bn.shape));
    auto out = make_node(an.shape);
    const size_t n = an.val.size();
    // winner[i] = 1 when a wins (ties included), 0 when b wins.
    auto winner = std::make_shared<std::vector<std::uint8_t>>(n);
    for (size_t i = 0; i < n; ++i) {
        bool aw = an.val[i] >= bn.val[i];
        (*winner)[i] = aw ? 1 : 0;
        out->val[i] = aw ? an.val[i] : bn.val[i];
    }
    check_finite(*out, "emax");
    Node* o = out.get();
    Node* ap = a.node().get();
    Node* bp = b.node().get();
    attach(out, {a.node(), b.node()}, [o, ap, bp, winner, n] {
        if (ap->requires_grad) {
            ap->ensure_grad();
            for (size_t i = 0; i < n; ++i)
                if ((*winner)[i]) ap->grad[i] += o->grad[i];
        }
        if (bp->requires_grad) {
            bp->ensure_grad();
            for (size_t i = 0; i < n; ++i)
                if (!(*winner)[i]) bp->grad[i] += o->grad[i];
        }
    });
    return Tensor(out);
}

// ---- shape ----

Tensor reshape(const Tensor& a, const std::vector<int>& shape) {
    const Node& an = deref(a, "reshape");
    require(numel_of(shape) == an.numel(), "reshape: cannot view " + shape_str(an.shape) +
                                               " as " + shape_str(shape));
    auto out = make_node(shape);
    out->val = an.val;
    Node* o = out.get();
    Node* ap = a.node().get();
    attach(out, {a.node()}, [o, ap] {
        ap->ensure_grad();
        const size_t n = ap->grad.size();
        for (size_t i = 0; i < n; ++i) ap->grad[i] += o->grad[i];
    });
    return Tensor(out);
}

Tensor transpose(const Tensor& a) {
    const Node& an = deref(a, "transpose");
    require(an.shape.size() == 2, "transpose: rank-2 required, got " + shape_str(an.shape));
    const int m = an.shape[0], n = an.shape[1];
    auto out = make_node({n, m});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out->val[(size_t)j * m + i] = an.val[(size_t)i * n + j];
    Node* o = out.get();
    Node* ap = a.node().get();
    attach(out, {a.node()}, [o, ap, m, n] {
        ap->ensure_grad();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) ap->grad[(size_t)i * n + j] += o->grad[(size_t)j * m + i];
    });
    return Tensor(out);
}

Tensor concat_channels(const std::vector<Tensor>& xs) {
    require(!xs.empty(), "concat_channels: empty input list");
    const Node& first = deref(xs[0], "concat_channels");
    require(first.shape.size() == 3, "concat_channels: rank-3 required");
    const int H = first.shape[1], W = first.shape[2];
    int ctotal = 0;
    for (const Tensor& x : xs) {
        const Node& n = deref(x, "concat_channels");
        require(n.shape.size() == 3 && n.shape[1] == H && n.shape[2] == W,
                "concat_channels: spatial mismatch " + shape_str(n.shape));
        ctotal += n.shape[0];
    }
    auto out = make_node({ctotal, H, W});
    size_t off = 0;
    for (const Tensor& x : xs) {
        const auto& v = x.node()->val;
        std::copy(v.begin(), v.end(), out->val.begin() + off);
        off += v.size();
    }
    Node* o = out.get();
    std::vector<NodePtr> parents;
    for (const Tensor& x : xs) parents.push_back(x.node());
    std::vector<Node*> raw;
    for (const auto& p : parents) raw.push_back(p.get());
    attach(out, parents, [o, raw] {
        size_t off = 0;
        for (Node* p : raw) {
            const size_t n = p->val.size();
            if (p->requires_grad) {
                p->ensure_grad();
                for (size_t i = 0; i < n; ++i) p->grad[i] += o->grad[off + i];
            }
            off += n;
        }
    });
    return Tensor(out);
}

Tensor roll2d(const Tensor& a, int dy, int dx) {
    const Node& an = deref(a, "roll2d");
    require(an.shape.size() == 3, "roll2d: rank-3 required, got " + shape_str(an.shape));
    const int C = an.shape[0], H = an.shape[1], W = an.shape[2];
    auto mod = [](int v, int m) { return ((v % m) + m) % m; };
    const int sy = mod(dy, H), sx = mod(dx, W);
    auto out = make_node(an.shape);
    for (int c = 0; c < C; ++c)
        for (int r = 0; r < H; ++r) {
            const size_t dst = ((size_t)c * H + r) * W;
            const size_t src = ((size_t)c * H + mod(r - sy, H)) * W;
            for (int col = 0; col < W; ++col)
                out->val[dst + col] = an.val[src + mod(col - sx, W)];
        }
    Node* o = out.get();
    Node* ap = a.node().get();
    attach(out, {a.node()}, [o, ap, C, H, W, sy, sx, mod] {
        ap->ensure_grad();
        for (int c = 0; c < C; ++c)
            for (int r = 0; r < H; ++r) {
                const size_t dst = ((size_t)c * H + r) * W;
                const size_t src = ((size_t)c * H + mod(r - sy, H)) * W;
                for (int col = 0; col < W; ++col)
                    ap->grad[src + mod(col - sx, W)] += o->grad[dst + col];
            }
    });
    return Tensor(out);
}

Tensor upsample_nearest(const Tensor& a, int factor) {
    const Node& an = deref(a, "upsample_nearest");
    require(an.shape.size() == 3, "upsample_nearest: rank-3 required");
    require(factor >= 1, "upsample_nearest: factor must be >= 1");
    const int C = an.shape[0], H = an.shape[1], W = an.shape[2];
    const int Ho = H * factor, Wo = W * factor;
    auto out = make_node({C, Ho, Wo});
    for (int c = 0; c < C; ++c)
        for (int r = 0; r < Ho; ++r)
            for (int col = 0; col < Wo; ++col)
                out->val[((size_t)c * Ho + r) * Wo + col] =
                    an.val[((size_t)c * H + r / factor) * W + col / factor];
    Node* o = out.get();
    Node* ap = a.node().get();
    attach(out, {a.node()}, [o, ap, C, H, W, Ho, Wo, factor] {
        ap->ensure_grad();
        for (int c = 0; c < C; ++c)
            for (int r = 0; r < Ho; ++r)
                for (int col = 0; col < Wo; ++col)
                    ap->grad[((size_t)c * H + r / factor) * W + col / factor] +=
                        o->grad[((size_t)c * Ho + r) * Wo + col];
    });
    return Tensor(out);
}

Tensor gather_cells(const Tensor& x, const std::vector<int>& cells) {
    const Node& xn = deref(x, "gather_cells");
    require(xn.shape.size() == 3, "gather_cells: rank-3 required");
    const int C = xn.shape[0];
    const int HW = xn.shape[1] * xn.shape[2];
    const int N = static_cast<int>(cells.size());
    require(N > 0, "gather_cells: empty cell list");
    for (int cell : cells)
        require(cell >= 0 && cell < HW, "gather_cells: cell index out of range");
    auto out = make_node({C, N});
    for (int c = 0; c < C; ++c)
        for (int j = 0; j < N; ++j)
            out->val[(size_t)c * N + j] = xn.val[(size_t)c * HW + cells[(size_t)j]];
    Node* o = out.get();
    Node* xp = x.node().get();
    auto idx = std::make_shared<std::vector<int>>(cells);
    attach(out, {x.node()}, [o, xp, idx, C, HW, N] {
        xp->ensure_grad();
        for (int c = 0; c < C; ++c)
            for (int j = 0; j < N; ++j)
                xp->grad[(size_t)c * HW + (*idx)[(size_t)j]] += o->grad[(size_t)c * N + j];
    });
    return Tensor(out);
}

Tensor scatter_cells(const Tensor& x, const std::vector<int>& cells, int H, int W) {
    const Node& xn = deref(x, "scatter_cells");
    require(xn.shape.size() == 2, "scatter_cells: x must be [Ch,N]");
    const int C = xn.shape[0], N = xn.shape[1];
    require(static_cast<int>(cells.size()) == N,
            "scatter_cells: " + std::to_string(cells.size()) + " cells for N=" +
                std::to_string(N));
    const int HW = H * W;
    std::unordered_set<int> seen;
    for (int cell : cells) {
        require(cell >= 0 && cell < HW, "scatter_cells: cell index out of range");
        require(seen.insert(cell).second,
                "scatter_cells: duplicate cell index " + std::to_string(cell));
    }
    auto out = make_node({C, H, W});
    for (int c = 0; c < C; ++c)
        for (int j = 0; j < N; ++j)
            out->val[(size_t)c * HW + cells[(size_t)j]] = xn.val[(size_t)c * N + j];
    Node* o = out.get();
    Node* xp = x.node().get();
    auto idx = std::make_shared<std::vector<int>>(cells);
    attach(out, {x.node()}, [o, xp, idx, C, HW, N] {
        xp->ensure_grad();
        for (int c = 0; c < C; ++c)
            for (int j = 0; j < N; ++j)
                xp->grad[(size_t)c * N + j] += o->grad[(size_t)c * HW + (*idx)[(size_t)j]];
    });
    return Tensor(out);
}

// ---- linear algebra ----

Tensor matmul(const Tensor& a, const Tensor& b) {
    const Node& an = deref(a, "matmul");
    const Node& bn = deref(b, "matmul");
    require(an.shape.size() == 2 && bn.shape.size() == 2,
            "matmul: rank-2 required, got " + shape_str(an.shape) + " and " + shape_str(bn.shape));
    const int m = an.shape[0], k = an.shape[1];
    require(bn.shape[0] == k, "matmul: inner dimensions disagree, " + shape_str(an.shape) +
                                  " x " + shape_str(bn.shape));
    const int n = bn.shape[1];
    auto out = make_node({m, n});
    const double* A = an.val.data();
    const double* B = bn.val.data();
    double* O = out->val.data();
    for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
            const double av = A[(size_t)i * k + p];
            const double* brow = B + (size_t)p * n;
            double* orow = O + (size_t)i * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    check_finite(*out, "matmul");
    Node* o = out.get();
    Node* ap = a.node().get();
    Node* bp = b.node().get();
    attach(out, {a.node(), b.node()}, [o, ap, bp, m, k, n] {
        const double* G = o->grad.data();
        if (ap->requires_grad) {
            ap->ensure_grad();  // dA = G * B^T
            const double* B = bp->val.data();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    const double g = G[(size_t)i * n + j];
                    const double* brow = B + 0;
                    for (int p = 0; p < k; ++p)
                        ap->grad[(size_t)i * k + p] += g * brow[(size_t)p * n + j];
                }
        }
        if (bp->requires_grad) {
            bp->ensure_grad();  // dB = A^T * G
            const double* A = ap->val.data();
            for (int p = 0; p < k; ++p)
                for (int i = 0; i < m; ++i) {
                    const double av = A[(size_t)i * k + p];
                    const double* grow = G + (size_t)i * n;
                    double* brow = bp->grad.data() + (size_t)p * n;
                    for (int j = 0; j < n; ++j) brow[j] += av * grow[j];
                }
        }
    });
    return Tensor(out);
}

Tensor linear(const Tensor& x, const Tensor& W, const Tensor& b) {
    const Node& xn = deref(x, "linear");
    const Node& wn = deref(W, "linear");
    require(wn.shape.size() == 2, "linear: W must be rank-2, got " + shape_str(wn.shape));
    require(!xn.shape.empty(), "linear: x must have rank >= 1");
    const int cin = xn.shape[0];
    const int cout = wn.shape[0];
    require(wn.shape[1] == cin, "linear: W " + shape_str(wn.shape) + " does not accept x " +
                                    shape_str(xn.shape) + " (channel axis first)");
    const std::int64_t spatial = xn.numel() / cin;
    if (b.defined()) {
        const Node& bn = deref(b, "linear");
        require(bn.shape.size() == 1 && bn.shape[0] == cout,
                "linear: bias must be [" + std::to_string(cout) + "], got " + shape_str(bn.shape));
    }
    std::vector<int> oshape = xn.shape;
    oshape[0] = cout;
    auto out = make_node(oshape);
    const double* X = xn.val.data();
    const double* Wd = wn.val.data();
    double* O = out->val.data();
    for (int co = 0; co < cout; ++co) {
        double* orow = O + (size_t)co * spatial;
        if (b.defined()) {
            const double bv = b.node()->val[(size_t)co];
            for (std::int64_t s = 0; s < spatial; ++s) orow[s] = bv;
        }
        for (int ci = 0; ci < cin; ++ci) {
            const double wv = Wd[(size_t)co * cin + ci];
            const double* xrow = X + (size_t)ci * spatial;
            for (std::int64_t s = 0; s < spatial; ++s) orow[s] += wv * xrow[s];
        }
    }
    check_finite(*out, "linear");
    Node* o = out.get();
    Node* xp = x.node().get();
    Node* wp = W.node().get();
    Node* bp = b.defined() ? b.node().get() : nullptr;
    std::vector<NodePtr> parents = {x.node(), W.node()};
    if (b.defined()) parents.push_back(b.node());
    attach(out, parents, [o, xp, wp, bp, cin, cout, spatial] {
        const double* G = o->grad.data();
        if (xp->requires_grad) {
            xp->ensure_grad();
            for (int ci = 0; ci < cin; ++ci) {
                double* xg = xp->grad.data() + (size_t)ci * spatial;
                for (int co = 0; co < cout; ++co) {
                    const double wv = wp->val[(size_t)co * cin + ci];
                    const double* grow = G + (size_t)co * spatial;
                    for (std::int64_t s = 0; s < spatial; ++s) xg[s] += wv * grow[s];
                }
            }
        }
        if (wp->requires_grad) {
            wp->ensure_grad();
            for (int co = 0; co < cout; ++co) {
                const double* grow = G + (size_t)co * spatial;
                for (int ci = 0; ci < cin; ++ci) {
                    const double* xrow = xp->val.data() + (size_t)ci * spatial;
                    double acc = 0.0;
                    for (std::int64_t s = 0; s < spatial; ++s) acc += grow[s] * xrow[s];
                    wp->grad[(size_t)co * cin + ci] += acc;
                }
            }
        }
        if (bp && bp->requires_grad) {
            bp->ensure_grad();
            for (int co = 0; co < cout; ++co) {
                const double* grow = G + (size_t)co * spatial;
                double acc = 0.0;
                for (std::int64_t s = 0; s < spatial; ++s) acc += grow[s];
                bp->grad[(size_t)co] += acc;
            }
        }
    });
    return Tensor(out);
}

// ---- neural primitives ----

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad,
              int groups) {
    const Node& xn = deref(x, "conv2d");
    const Node& wn = deref(w, "conv2d");
    require(xn.shape.size() == 3, "conv2d: x must be [C,H,W], got " + shape_str(xn.shape));
    require(wn.shape.size() == 4, "conv2d: w must be [Co,Ci/g,kh,kw], got " + shape_str(wn.shape));
    require(stride >= 1 && pad >= 0 && groups >= 1, "conv2d: bad stride/pad/groups");
    const int Ci = xn.shape[0], H = xn.shape[1], W = xn.shape[2];
    const int Co = wn.shape[0], Cig = wn.shape[1], kh = wn.shape[2], kw = wn.shape[3];
    require(Ci % groups == 0 && Co % groups == 0,
            "conv2d: channels not divisible by groups (Ci=" + std::to_string(Ci) +
                ", Co=" + std::to_string(Co) + ", g=" + std::to_string(groups) + ")");
    require(Cig == Ci / groups, "conv2d: kernel expects Ci/g=" + std::to_string(Cig) +
                                    " but x has Ci/g=" + std::to_string(Ci / groups));
    const int Ho = (H + 2 * pad - kh) / stride + 1;
    const int Wo = (W + 2 * pad - kw) / stride + 1;
    require(Ho >= 1 && Wo >= 1, "conv2d: kernel larger than padded input");
    if (b.defined()) {
        const Node& bn = deref(b, "conv2d");
        require(bn.shape.size() == 1 && bn.shape[0] == Co,
                "conv2d: bias must be [" + std::to_string(Co) + "], got " + shape_str(bn.shape));
    }
    auto out = make_node({Co, Ho, Wo});
    const int cog = Co / groups;
    const double* X = xn.val.data();
    const double* Wd = wn.val.data();
    double* O = out->val.data();
    for (int co = 0; co < Co; ++co) {
        const int g = co / cog;
        double* oplane = O + (size_t)co * Ho * Wo;
        if (b.defined()) {
            const double bv = b.node()->val[(size_t)co];
            for (int i = 0; i < Ho * Wo; ++i) oplane[i] = bv;
        }
        for (int cig = 0; cig < Cig; ++cig) {
            const int ci = g * Cig + cig;
            const double* xplane = X + (size_t)ci * H * W;
            const double* kplane = Wd + (((size_t)co * Cig + cig) * kh) * kw;
            for (int r = 0; r < kh; ++r)
                for (int s = 0; s < kw; ++s) {
                    const double kv = kplane[(size_t)r * kw + s];
                    for (int oh = 0; oh < Ho; ++oh) {
                        const int ih = oh * stride - pad + r;
                        if (ih < 0 || ih >= H) continue;
                        const double* xrow = xplane + (size_t)ih * W;
                        double* orow = oplane + (size_t)oh * Wo;
                        for (int ow = 0; ow < Wo; ++ow) {
                            const int iw = ow * stride - pad + s;
                            if (iw < 0 || iw >= W) continue;
                            orow[ow] += kv * xrow[iw];
                        }
                    }
                }
        }
    }
    check_finite(*out, "conv2d");
    Node* o = out.get();
    Node* xp = x.node().get();
    Node* wp = w.node().get();
    Node* bp = b.defined() ? b.node().get() : nullptr;
    std::vector<NodePtr> parents = {x.node(), w.node()};
    if (b.defined()) parents.push_back(b.node());
    attach(out, parents, [o, xp, wp, bp, Ci, H, W, Co, Cig, kh, kw, Ho, Wo, stride, pad, cog] {
        const double* G = o->grad.data();
        if (xp->requires_grad) xp->ensure_grad();
        if (wp->requires_grad) wp->ensure_grad();
        for (int co = 0; co < Co; ++co) {
            const int g = co / cog;
            const double* gplane = G + (size_t)co * Ho * Wo;
            for (int cig = 0; cig < Cig; ++cig) {
                const int ci = g * Cig + cig;
                for (int r = 0; r < kh; ++r)
                    for (int s = 0; s < kw; ++s) {
                        const size_t widx = (((size_t)co * Cig + cig) * kh + r) * kw + s;
                        const double kv = wp->val[widx];
                        double wacc = 0.0;
                        for (int oh = 0; oh < Ho; ++oh) {
                            const int ih = oh * stride - pad + r;
                            if (ih < 0 || ih >= H) continue;
                            const double* grow = gplane + (size_t)oh * Wo;
                            const double* xrow = xp->val.data() + ((size_t)ci * H + ih) * W;
                            double* xgrow = xp->requires_grad
                                                ? xp->grad.data() + ((size_t)ci * H + ih) * W
                                                : nullptr;
                            for (int ow = 0; ow < Wo; ++ow) {
                                const int iw = ow * stride - pad + s;
                                if (iw < 0 || iw >= W) continue;
                                const double gv = grow[ow];
                                if (xgrow) xgrow[iw] += kv * gv;
                                wacc += gv * xrow[iw];
                            }
                        }
                        if (wp->requires_grad) wp->grad[widx] += wacc;
                    }
            }
        }
        if (bp && bp->requires_grad) {
            bp->ensure_grad();
            for (int co = 0; co < Co; ++co) {
                const double* gplane = G + (size_t)co * Ho * Wo;
                double acc = 0.0;
                for (int i = 0; i < Ho * Wo; ++i) acc += gplane[i];
                bp->grad[(size_t)co] += acc;
            }
        }
    });
    return Tensor(out);
}

Tensor adaptive_avg_pool(const Tensor& x, int oh, int ow) {
    const Node& xn = deref(x, "adaptive_avg_pool");
    require(xn.shape.size() == 3, "adaptive_avg_pool: rank-3 required");
    const int C = xn.shape[0], H = xn.shape[1], W = xn.shape[2];
    require(oh >= 1 && oh <= H && ow >= 1 && ow <= W,
            "adaptive_avg_pool: output " + std::to_string(oh) + "x" + std::to_string(ow) +
                " larger than input " + std::to_string(H) + "x" + std::to_string(W));
    // Window i spans [floor(i*H/oh), ceil((i+1)*H/oh)).
    auto lo = [](int i, int in, int out) { return (i * in) / out; };
    auto hi = [](int i, int in, int out) { return ((i + 1) * in + out - 1) / out; };
    auto out = make_node({C, oh, ow});
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < oh; ++i)
            for (int j = 0; j < ow; ++j) {
                const int r0 = lo(i, H, oh), r1 = hi(i, H, oh);
                const int c0 = lo(j, W, ow), c1 = hi(j, W, ow);
                double acc = 0.0;
                for (int r = r0; r < r1; ++r)
                    for (int s = c0; s < c1; ++s) acc += xn.val[((size_t)c * H + r) * W + s];
                out->val[((size_t)c * oh + i) * ow + j] = acc / ((r1 - r0) * (c1 - c0));
            }
    Node* o = out.get();
    Node* xp = x.node().get();
    attach(out, {x.node()}, [o, xp, C, H, W, oh, ow, lo, hi] {
        xp->ensure_grad();
        for (int c = 0; c < C; ++c)
            for (int i = 0; i < oh; ++i)
                for (int j = 0; j < ow; ++j) {
                    const int r0 = lo(i, H, oh), r1 = hi(i, H, oh);
                    const int c0 = lo(j, W, ow), c1 = hi(j, W, ow);
                    const double g =
                        o->grad[((size_t)c * oh + i) * ow + j] / ((r1 - r0) * (c1 - c0));
                    for (int r = r0; r < r1; ++r)
                        for (int s = c0; s < c1; ++s) xp->grad[((size_t)c * H + r) * W + s] += g;
                }
    });
    return Tensor(out);
}

Tensor softmax_rows(const Tensor& a) {
    const Node& an = deref(a, "softmax_rows");
    require(an.shape.size() == 2, "softmax_rows: rank-2 required, got " + shape_str(an.shape));
    const int R = an.shape[0], C = an.shape[1];
    auto out = make_node(an.shape);
    for (int i = 0; i < R; ++i) {
        const double* row = an.val.data() + (size_t)i * C;
        double mx = row[0];
        for (int j = 1; j < C; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        double* orow = out->val.data() + (size_t)i * C;
        for (int j = 0; j < C; ++j) {
            orow[j] = std::exp(row[j] - mx);
            z += orow[j];
        }
        for (int j = 0; j < C; ++j) orow[j] /= z;
    }
    check_finite(*out, "softmax_rows");
    Node* o = out.get();
    Node* ap = a.node().get();
    attach(out, {a.node()}, [o, ap, R, C] {
        ap->ensure_grad();
        for (int i = 0; i < R; ++i) {
            const double* y = o->val.data() + (size_t)i * C;
            const double* g = o->grad.data() + (size_t)i * C;
            double dot = 0.0;
            for (int j = 0; j < C; ++j) dot += y[j] * g[j];
            double* ag = ap->grad.data() + (size_t)i * C;
            for (int j = 0; j < C; ++j) ag[j] += y[j] * (g[j] - dot);
        }
    });
    return Tensor(out);
}

Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    const Node& xn = deref(x, "instance_norm");
    const Node& gn = deref(gamma, "instance_norm");
    const Node& bn = deref(beta, "instance_norm");
    require(xn.shape.size() == 3, "instance_norm: rank-3 required");
    const int C = xn.shape[0];
    const std::int64_t N = (std::int64_t)xn.shape[1] * xn.shape[2];
    require(gn.shape.size() == 1 && gn.shape[0] == C && bn.shape.size() == 1 && bn.shape[0] == C,
            "instance_norm: affine parameters must be [" + std::to_string(C) + "]");
    auto out = make_node(xn.shape);
    // Per-channel mean and 1/std are cached for the backward sweep.
    auto mu = std::make_shared<std::vector<double>>(C);
    auto inv = std::make_shared<std::vector<double>>(C);
    for (int c = 0; c < C; ++c) {
        const double* xc = xn.val.data() + (size_t)c * N;
        double m = 0.0;
        for (std::int64_t i = 0; i < N; ++i) m += xc[i];
        m /= (double)N;
        double v = 0.0;
        for (std::int64_t i = 0; i < N; ++i) v += (xc[i] - m) * (xc[i] - m);
        v /= (double)N;
        (*mu)[c] = m;
        (*inv)[c] = 1.0 / std::sqrt(v + eps);
        const double gv = gn.val[(size_t)c], bv = bn.val[(size_t)c];
        double* oc = out->val.data() + (size_t)c * N;
        for (std::int64_t i = 0; i < N; ++i) oc[i] = gv * (xc[i] - m) * (*inv)[c] + bv;
    }
    check_finite(*out, "instance_norm");
    Node* o = out.get();
    Node* xp = x.node().get();
    Node* gp = gamma.node().get();
    Node* bp = beta.node().get();
    attach(out, {x.node(), gamma.node(), beta.node()}, [o, xp, gp, bp, mu, inv, C, N] {
        for (int c = 0; c < C; ++c) {
            const double* xc = xp->val.data() + (size_t)c * N;
            const double* gc = o->grad.data() + (size_t)c * N;
            const double m = (*mu)[c], is = (*inv)[c];
            const double gv = gp->val[(size_t)c];
            double gsum = 0.0, gxhat = 0.0;
            for (std::int64_t i = 0; i < N; ++i) {
                const double xh = (xc[i] - m) * is;
                gsum += gc[i];
                gxhat += gc[i] * xh;
            }
            if (gp->requires_grad) {
                gp->ensure_grad();
                gp->grad[(size_t)c] += gxhat;
            }
            if (bp->requires_grad) {
                bp->ensure_grad();
                bp->grad[(size_t)c] += gsum;
            }
            if (xp->requires_grad) {
                xp->ensure_grad();
                double* xg = xp->grad.data() + (size_t)c * N;
                const double mg = gsum / (double)N, mgx = gxhat / (double)N;
                for (std::int64_t i = 0; i < N; ++i) {
                    const double xh = (xc[i] - m) * is;
                    xg[i] += gv * is * (gc[i] - mg - xh * mgx);
                }
            }
        }
    });
    return Tensor(out);
}

Tensor scale_channels(const Tensor& x, const Tensor& s) {
    const Node& xn = deref(x, "scale_channels");
    const Node& sn = deref(s, "scale_channels");
    require(xn.shape.size() == 3, "scale_channels: x must be rank-3");
    const int C = xn.shape[0];
    const std::int64_t N = (std::int64_t)xn.shape[1] * xn.shape[2];
    require(sn.shape.size() == 1 && sn.shape[0] == C,
            "scale_channels: scale must be [" + std::to_string(C) + "], got " +
                shape_str(sn.shape));
    auto out = make_node(xn.shape);
    for (int c = 0; c < C; ++c) {
        const double sv = sn.val[(size_t)c];
        const double* xc = xn.val.data() + (size_t)c * N;
        double* oc = out->val.data() + (size_t)c * N;
        for (std::int64_t i = 0; i < N; ++i) oc[i] = sv * xc[i];
    }
    check_finite(*out, "scale_channels");
    Node* o = out.get();
    Node* xp = x.node().get();
    Node* sp = s.node().get();
    attach(out, {x.node(), s.node()}, [o, xp, sp, C, N] {
        for (int c = 0; c < C; ++c) {
            const double* gc = o->grad.data() + (size_t)c * N;
            if (xp->requires_grad) {
                xp->ensure_grad();
                const double sv = sp->val[(size_t)c];
                double* xg = xp->grad.data() + (size_t)c * N;
                for (std::int64_t i = 0; i < N; ++i) xg[i] += sv * gc[i];
            }
            if (sp->requires_grad) {
                sp->ensure_grad();
                const double* xc = xp->val.data() + (size_t)c * N;
                double acc = 0.0;
                for (std::int64_t i = 0; i < N; ++i) acc += gc[i] * xc[i];
                sp->grad[(size_t)c] += acc;
            }
        }
    });
    return Tensor(out);
}

namespace {

Tensor reduce_cols(const Tensor& a, const char* op, bool take_max) {
    const Node& an = deref(a, op);
    require(an.shape.size() == 2, std::string(op) + ": rank-2 required");
    const int R = an.shape[0], C = an.shape[1];
    auto out = make_node({R});
    auto arg = std::make_shared<std::vector<int>>(take_max ? R : 0);
    for (int i = 0; i < R; ++i) {
        const double* row = an.val.data() + (size_t)i * C;
        if (take_max) {
            int best = 0;
            for (int j = 1; j < C; ++j)
                if (row[j] > row[best]) best = j;  // first index wins ties
            (*arg)[i] = best;
            out->val[(size_t)i] = row[best];
        } else {
            double acc = 0.0;
            for (int j = 0; j < C; ++j) acc += row[j];
            out->val[(size_t)i] = acc / C;
        }
    }
    Node* o = out.get();
    Node* ap = a.node().get();
    attach(out, {a.node()}, [o, ap, arg, R, C, take_max] {
        ap->ensure_grad();
        for (int i = 0; i < R; ++i) {
            const double g = o->grad[(size_t)i];
            if (take_max) {
                ap->grad[(size_t)i * C + (*arg)[i]] += g;
            } else {
                double* row = ap->grad.data() + (size_t)i * C;
                for (int j = 0; j < C; ++j) row[j] += g / C;
            }
        }
    });
    return Tensor(out);
}

}  // namespace

Tensor max_over_cols(const Tensor& a) { return reduce_cols(a, "max_over_cols", true); }
Tensor mean_over_cols(const Tensor& a) { return reduce_cols(a, "mean_over_cols", false); }

// ---- reductions / losses ----

Tensor sum(const Tensor& a) {
    const Node& an = deref(a, "sum");
    auto out = make_node({1});
    double acc = 0.0;
    for (double v : an.val) acc += v;
    out->val[0] = acc;
    check_finite(*out, "sum");
    Node* o = out.get();
    Node* ap = a.node().get();
    attach(out, {a.node()}, [o, ap] {
        ap->ensure_grad();
        const double g = o->grad[0];
        for (double& gv : ap->grad) gv += g;
    });
    return Tensor(out);
}

Tensor smooth_l1_sum(const Tensor& pred, const Tensor& target) {
    const Node& pn = deref(pred, "smooth_l1_sum");
    const Node& tn = deref(target, "smooth_l1_sum");
    require(pn.shape == tn.shape, "smooth_l1_sum: shape mismatch " + shape_str(pn.shape) +
                                      " vs " + shape_str(tn.shape));
    auto out = make_node({1});
    double acc = 0.0;
    const size_t n = pn.val.size();
    for (size_t i = 0; i < n; ++i) {
        const double r = pn.val[i] - tn.val[i];
        const double ar = std::abs(r);
        acc += (ar <= 1.0) ? 0.5 * r * r : ar - 0.5;  // kink takes the quadratic branch
    }
    out->val[0] = acc;
    check_finite(*out, "smooth_l1_sum");
    Node* o = out.get();
    Node* pp = pred.node().get();
    Node* tp = target.node().get();
    attach(out, {pred.node()}, [o, pp, tp, n] {
        pp->ensure_grad();
        const double g = o->grad[0];
        for (size_t i = 0; i < n; ++i) {
            const double r = pp->val[i] - tp->val[i];
            pp->grad[i] += g * ((std::abs(r) <= 1.0) ? r : (r > 0.0 ? 1.0 : -1.0));
        }
    });
    // Keep the target alive for the backward closure even though it gets no gradient.
    out->parents.push_back(target.node());
    return Tensor(out);
}

Tensor focal_loss(const Tensor& pred, const Tensor& target, double alpha, double gamma) {
    const Node& pn = deref(pred, "focal_loss");
    const Node& tn = deref(target, "focal_loss");
    require(pn.shape == tn.shape, "focal_loss: shape mismatch " + shape_str(pn.shape) + " vs " +
                                      shape_str(tn.shape));
    const size_t n = pn.val.size();
    int peaks = 0;
    for (size_t i = 0; i < n; ++i) {
        require(pn.val[i] > 0.0 && pn.val[i] < 1.0,
                "focal_loss: prediction outside (0,1) at index " + std::to_string(i));
        if (tn.val[i] == 1.0) ++peaks;
    }
    const double norm = peaks > 0 ? (double)peaks : 1.0;
    auto out = make_node({1});
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double p = std::min(std::max(pn.val[i], kFocalLo), kFocalHi);
        const double t = tn.val[i];
        if (t == 1.0)
            acc -= std::pow(1.0 - p, alpha) * std::log(p);
        else
            acc -= std::pow(1.0 - t, gamma) * std::pow(p, alpha) * std::log(1.0 - p);
    }
    out->val[0] = acc / norm;
    check_finite(*out, "focal_loss");
    Node* o = out.get();
    Node* pp = pred.node().get();
    Node* tp = target.node().get();
    attach(out, {pred.node()}, [o, pp, tp, alpha, gamma, norm, n] {
        pp->ensure_grad();
        const double g = o->grad[0] / norm;
        for (size_t i = 0; i < n; ++i) {
            const double p = std::min(std::max(pp->val[i], kFocalLo), kFocalHi);
            const double t = tp->val[i];
            double d;
            if (t == 1.0)
                d = alpha * std::pow(1.0 - p, alpha - 1.0) * std::log(p) -
                    std::pow(1.0 - p, alpha) / p;
            else
                d = std::pow(1.0 - t, gamma) *
                    (std::pow(p, alpha) / (1.0 - p) -
                     alpha * std::pow(p, alpha - 1.0) * std::log(1.0 - p));
            pp->grad[i] += g * d;
        }
    });
    out->parents.push_back(target.node());
    return Tensor(out);
}

// ---- verification ----

double grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                  std::vector<Tensor> xs, double eps) {
    for (Tensor& x : xs) x.zero_grad();
    Tensor y = f(xs);
    if (y.numel() != 1) throw std::invalid_argument("grad_check: f must return a scalar");
    y.backward();

    std::vector<std::vector<double>> adjoints;
    for (const Tensor& x : xs) adjoints.push_back(x.grad());

    double worst = 0.0;
    for (size_t xi = 0; xi < xs.size(); ++xi) {
        if (!xs[xi].requires_grad()) continue;
        std::vector<double>& v = xs[xi].value();
        for (size_t i = 0; i < v.size(); ++i) {
            const double keep = v[i];
            v[i] = keep + eps;
            const double fp = f(xs).item();
            v[i] = keep - eps;
            const double fm = f(xs).item();
            v[i] = keep;
            if (!std::isfinite(fp) || !std::isfinite(fm))
                throw std::runtime_error("grad_check: non-finite f near probe point");
            const double fd = (fp - fm) / (2.0 * eps);
            const double err = std::abs(adjoints[xi][i] - fd) / std::max(1.0, std::abs(fd));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace lrf
