// SPDX-License-Identifier: MIT
//
// Minimal dense-tensor engine with reverse-mode differentiation.
//
// Tensors are immutable once created (leaf parameter values may be updated
// in place between forward passes by the optimizer). Every operation builds
// a node in a define-by-run graph; calling backward() on a scalar result
// replays the graph in reverse topological order and accumulates adjoints
// into every reachable leaf that has requires_grad set.
//
// All storage is double precision, row-major. Every op validates shapes and
// checks its output for non-finite values (NaN/Inf is an error state).

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace lrf {

namespace detail {

struct Node {
    std::vector<int> shape;
    std::vector<double> val;
    std::vector<double> grad;  // allocated lazily, same extent as val
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void()> backward;  // accumulates this->grad into parents

    std::int64_t numel() const { return static_cast<std::int64_t>(val.size()); }
    void ensure_grad() {
        if (grad.size() != val.size()) grad.assign(val.size(), 0.0);
    }
};

using NodePtr = std::shared_ptr<Node>;

}  // namespace detail

std::string shape_str(const std::vector<int>& shape);

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(detail::NodePtr n) : n_(std::move(n)) {}

    static Tensor zeros(const std::vector<int>& shape, bool requires_grad = false);
    static Tensor full(const std::vector<int>& shape, double v, bool requires_grad = false);
    static Tensor from_data(const std::vector<int>& shape, std::vector<double> data,
                            bool requires_grad = false);
    // Uniform in [lo, hi).
    static Tensor uniform(const std::vector<int>& shape, double lo, double hi,
                          std::mt19937_64& rng, bool requires_grad = false);
    // Parameter init: uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], requires_grad on.
    static Tensor param(const std::vector<int>& shape, int fan_in, std::mt19937_64& rng);

    bool defined() const { return static_cast<bool>(n_); }
    const std::vector<int>& shape() const;
    int dim(int i) const;
    int rank() const;
    std::int64_t numel() const;

    const std::vector<double>& value() const;
    std::vector<double>& value();  // in-place update of leaf parameters only
    const std::vector<double>& grad() const;
    bool requires_grad() const;
    double item() const;  // requires numel() == 1

    void zero_grad();
    // Reverse-mode sweep from this scalar (numel() == 1), seeding d(out)/d(out)=1.
    void backward() const;

    const detail::NodePtr& node() const { return n_; }

private:
    detail::NodePtr n_;
};

// ---- elementwise ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor gelu(const Tensor& a);  // exact erf form
// Elementwise maximum; on exact ties the gradient routes to `a`.
Tensor emax(const Tensor& a, const Tensor& b);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

// ---- shape ----
Tensor reshape(const Tensor& a, const std::vector<int>& shape);  // same numel
Tensor transpose(const Tensor& a);                               // rank-2
Tensor concat_channels(const std::vector<Tensor>& xs);           // rank-3, axis 0
// Circular shift of a [C,H,W] map: row r of the output reads row (r-dy) mod H
// of the input (shift "down" by dy, "right" by dx).
Tensor roll2d(const Tensor& a, int dy, int dx);
Tensor upsample_nearest(const Tensor& a, int factor);  // [C,H,W] -> [C,fH,fW]
// out[ch, j] = x[ch, cells[j]] where cells holds flat H*W indices.
Tensor gather_cells(const Tensor& x, const std::vector<int>& cells);
// Inverse scatter: out[ch, cells[j]] = x[ch, j] on a zero [Ch,H,W] map.
// Duplicate cell indices are rejected.
Tensor scatter_cells(const Tensor& x, const std::vector<int>& cells, int H, int W);

// ---- linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k]x[k,n] -> [m,n]
// y[co, ...] = sum_ci W[co,ci] * x[ci, ...] + b[co]; x rank >= 1 with the
// channel axis first; trailing axes are broadcast over. b may be undefined.
Tensor linear(const Tensor& x, const Tensor& W, const Tensor& b);

// ---- neural primitives ----
// Cross-correlation, x:[Ci,H,W], w:[Co,Ci/groups,kh,kw], b:[Co] or undefined.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride = 1,
              int pad = 0, int groups = 1);
Tensor adaptive_avg_pool(const Tensor& x, int oh, int ow);  // [C,H,W] -> [C,oh,ow]
Tensor softmax_rows(const Tensor& a);                       // rank-2, softmax over columns
// Per-channel normalization over the spatial extent, learned affine:
// y = gamma * (x - mean) / sqrt(var + eps) + beta.
Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                     double eps = 1e-5);
// Broadcast multiply: y[c,h,w] = x[c,h,w] * s[c].
Tensor scale_channels(const Tensor& x, const Tensor& s);
Tensor max_over_cols(const Tensor& a);   // [R,C] -> [R]; first index wins ties
Tensor mean_over_cols(const Tensor& a);  // [R,C] -> [R]

// ---- reductions / losses ----
Tensor sum(const Tensor& a);  // -> scalar [1]
// Sum over elements of the Huber kernel 0.5 r^2 (|r|<1) else |r|-0.5, r = pred-target.
// The |r|=1 kink takes the quadratic branch. target carries no gradient.
Tensor smooth_l1_sum(const Tensor& pred, const Tensor& target);
// Penalty-reduced pixelwise focal loss on a heatmap in (0,1) against a target
// in [0,1] whose peak cells are exactly 1. Normalized by the peak count
// (minimum 1). pred is clamped into [1e-12, 1-1e-12] before the logs.
Tensor focal_loss(const Tensor& pred, const Tensor& target, double alpha = 2.0,
                  double gamma = 4.0);

// ---- verification ----
// Max over all coordinates of |tape adjoint - central difference| /
// max(1, |central difference|) for scalar f at the given leaves.
double grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                  std::vector<Tensor> xs, double eps = 1e-5);

}  // namespace lrf
