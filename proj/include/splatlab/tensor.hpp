// Copyright Contributors to the splatlab Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

#include "splatlab/common.hpp"

namespace splatlab {

class Tensor;

namespace detail {

struct TensorImpl;
class BackwardPass;

/// One recorded operation on the dynamic tape. Outputs are weak references:
/// an output the caller dropped simply contributes no gradient.
struct TapeNode {
    std::vector<std::shared_ptr<TensorImpl>> parents;
    std::vector<std::weak_ptr<TensorImpl>> outputs;
    std::function<void(const TapeNode&, BackwardPass&)> backward;
};

struct TensorImpl {
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad;  // leaves only; allocated on first accumulation
    std::shared_ptr<TapeNode> node;
    bool requires_grad = false;

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
    bool is_leaf() const { return node == nullptr; }
};

/// Transient gradient storage for one backward() call. Intermediate tensors
/// get fresh zero slots each pass; only leaf grads persist on the TensorImpl.
class BackwardPass {
public:
    std::vector<double>& slot(const TensorImpl* t) {
        auto& v = grads_[t];
        if (v.size() != t->data.size()) v.assign(t->data.size(), 0.0);
        return v;
    }
    const std::vector<double>* find(const TensorImpl* t) const {
        auto it = grads_.find(t);
        return it == grads_.end() ? nullptr : &it->second;
    }

private:
    std::unordered_map<const TensorImpl*, std::vector<double>> grads_;
};

}  // namespace detail

/// Dense 64-bit float array participating in reverse-mode differentiation.
/// Value semantics over a shared impl; copying a Tensor aliases its storage.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
    static Tensor from(std::vector<int> shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const std::vector<int>& shape() const;
    std::int64_t numel() const;
    bool requires_grad() const;
    bool is_leaf() const;

    const std::vector<double>& data() const;
    /// In-place data access; for parameter updates on leaves between passes.
    std::vector<double>& mutable_data();

    /// Scalar tensors only.
    double value() const;

    /// Leaf gradient after backward(); zeros if never accumulated.
    std::vector<double> grad() const;
    void zero_grad();

    /// Reverse pass from a scalar output. Accumulates additively into leaf
    /// grads; call zero_grad() on leaves to reset between steps.
    void backward() const;

    detail::TensorImpl* impl() const { return impl_.get(); }
    const std::shared_ptr<detail::TensorImpl>& impl_ptr() const { return impl_; }

    static Tensor wrap(std::shared_ptr<detail::TensorImpl> impl);

private:
    std::shared_ptr<detail::TensorImpl> impl_;
};

// Element-wise arithmetic. Broadcasting supports: identical shapes, a scalar
// on either side, and a trailing-dimension-1 operand against matching leading
// dims (e.g. patch stats of shape {K,1} against patches {K,P}).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);

Tensor add(const Tensor& a, double b);
Tensor sub(const Tensor& a, double b);
Tensor sub(double a, const Tensor& b);
Tensor mul(const Tensor& a, double b);
Tensor div(const Tensor& a, double b);
Tensor div(double a, const Tensor& b);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, double b) { return add(a, b); }
inline Tensor operator+(double a, const Tensor& b) { return add(b, a); }
inline Tensor operator-(const Tensor& a, double b) { return sub(a, b); }
inline Tensor operator-(double a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, double b) { return mul(a, b); }
inline Tensor operator*(double a, const Tensor& b) { return mul(b, a); }
inline Tensor operator/(const Tensor& a, double b) { return div(a, b); }
inline Tensor operator/(double a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
/// Backward divides by max(sqrt(x), 1e-12); the floor keeps epsilon-guarded
/// statistics finite on constant inputs.
Tensor sqrt(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor square(const Tensor& a);
/// max(x, floor) elementwise; gradient passes only where x > floor.
Tensor clamp_min(const Tensor& a, double floor);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// {K, P} -> {K, 1} reductions over the last dimension.
Tensor sum_last(const Tensor& a);
Tensor mean_last(const Tensor& a);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor reshape(const Tensor& a, std::vector<int> shape);

/// out[j] = a.flat[idx[j]]; backward scatter-adds. out_shape defaults to {len}.
Tensor gather(const Tensor& a, const std::vector<std::int64_t>& idx, std::vector<int> out_shape = {});

/// k scalar tensors -> shape {k}.
Tensor stack_scalars(const std::vector<Tensor>& parts);

/// Valid (no padding) 1-D convolutions of a 2-D tensor with a fixed kernel.
/// The kernel is a constant, not a differentiable input.
Tensor conv_rows_valid(const Tensor& a, const std::vector<double>& kernel);
Tensor conv_cols_valid(const Tensor& a, const std::vector<double>& kernel);

/// Multi-output custom operation hook: forward results are supplied by the
/// caller, backward receives per-output grad pointers (null when an output got
/// no gradient) and per-input accumulation pointers (null when the input does
/// not require grad). Used by the rasterizer's compositing stage.
using CustomBackwardFn = std::function<void(const std::vector<const double*>& output_grads,
                                            const std::vector<double*>& input_grads)>;
std::vector<Tensor> make_custom_op(const std::vector<Tensor>& inputs,
                                   const std::vector<std::vector<int>>& out_shapes,
                                   std::vector<std::vector<double>> out_data,
                                   CustomBackwardFn backward);

bool all_finite(const Tensor& a);

/// Max over all input elements of |analytic - central difference| /
/// max(|central difference|, 1e-8), at step h. Throws ContractError naming the
/// input index if f is non-finite at any probe point.
double check_gradients(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                       const std::vector<Tensor>& inputs, double h);

}  // namespace splatlab
