// Copyright Contributors to the splatlab Project
// SPDX-License-Identifier: Apache-2.0

#include "splatlab/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace splatlab {

using detail::BackwardPass;
using detail::TapeNode;
using detail::TensorImpl;

namespace {

std::int64_t shape_numel(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "{";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "}";
    return os.str();
}

std::shared_ptr<TensorImpl> alloc_impl(std::vector<int> shape) {
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data.resize(static_cast<size_t>(shape_numel(impl->shape)));
    return impl;
}

struct BcPlan {
    enum Kind { Same, ScalarL, ScalarR, RowL, RowR } kind = Same;
    std::int64_t n = 0;     // output numel
    std::int64_t last = 1;  // trailing extent for Row*
};

BcPlan plan_broadcast(const Tensor& a, const Tensor& b, const char* op, std::vector<int>* out_shape) {
    const auto& sa = a.shape();
    const auto& sb = b.shape();
    BcPlan p;
    if (sa == sb) {
        p.kind = BcPlan::Same;
        p.n = a.numel();
        *out_shape = sa;
        return p;
    }
    if (b.numel() == 1) {
        p.kind = BcPlan::ScalarR;
        p.n = a.numel();
        *out_shape = sa;
        return p;
    }
    if (a.numel() == 1) {
        p.kind = BcPlan::ScalarL;
        p.n = b.numel();
        *out_shape = sb;
        return p;
    }
    auto row_match = [](const std::vector<int>& big, const std::vector<int>& small) {
        if (big.size() != small.size() || big.empty()) return false;
        for (size_t i = 0; i + 1 < big.size(); ++i)
            if (big[i] != small[i]) return false;
        return small.back() == 1 && big.back() > 1;
    };
    if (row_match(sa, sb)) {
        p.kind = BcPlan::RowR;
        p.n = a.numel();
        p.last = sa.back();
        *out_shape = sa;
        return p;
    }
    if (row_match(sb, sa)) {
        p.kind = BcPlan::RowL;
        p.n = b.numel();
        p.last = sb.back();
        *out_shape = sb;
        return p;
    }
    throw ContractError(std::string(op) + ": incompatible shapes " + shape_str(sa) + " vs " + shape_str(sb));
}

template <class F>
inline void bc_for(const BcPlan& p, F&& f) {
    switch (p.kind) {
        case BcPlan::Same:
            for (std::int64_t i = 0; i < p.n; ++i) f(i, i, i);
            break;
        case BcPlan::ScalarR:
            for (std::int64_t i = 0; i < p.n; ++i) f(i, i, std::int64_t(0));
            break;
        case BcPlan::ScalarL:
            for (std::int64_t i = 0; i < p.n; ++i) f(i, std::int64_t(0), i);
            break;
        case BcPlan::RowR:
            for (std::int64_t i = 0; i < p.n; ++i) f(i, i, i / p.last);
            break;
        case BcPlan::RowL:
            for (std::int64_t i = 0; i < p.n; ++i) f(i, i / p.last, i);
            break;
    }
}

// fwd(av, bv) -> out; bwd(g, av, bv) -> {da, db}
template <class FwdF, class BwdF>
Tensor binary_impl(const Tensor& a, const Tensor& b, const char* op, FwdF fwd, BwdF bwd) {
    std::vector<int> out_shape;
    BcPlan p = plan_broadcast(a, b, op, &out_shape);
    auto out = alloc_impl(std::move(out_shape));
    const double* ad = a.data().data();
    const double* bd = b.data().data();
    double* od = out->data.data();
    bc_for(p, [&](std::int64_t i, std::int64_t ai, std::int64_t bi) { od[i] = fwd(ad[ai], bd[bi]); });

    if (a.requires_grad() || b.requires_grad()) {
        out->requires_grad = true;
        auto node = std::make_shared<TapeNode>();
        node->parents = {a.impl_ptr(), b.impl_ptr()};
        node->outputs = {out};
        node->backward = [p, bwd](const TapeNode& n, BackwardPass& ctx) {
            auto out_impl = n.outputs[0].lock();
            if (!out_impl) return;
            const auto* g = ctx.find(out_impl.get());
            if (!g) return;
            TensorImpl* A = n.parents[0].get();
            TensorImpl* B = n.parents[1].get();
            double* ga = A->requires_grad ? ctx.slot(A).data() : nullptr;
            double* gb = B->requires_grad ? ctx.slot(B).data() : nullptr;
            const double* av = A->data.data();
            const double* bv = B->data.data();
            const double* gd = g->data();
            bc_for(p, [&](std::int64_t i, std::int64_t ai, std::int64_t bi) {
                auto [da, db] = bwd(gd[i], av[ai], bv[bi]);
                if (ga) ga[ai] += da;
                if (gb) gb[bi] += db;
            });
        };
        out->node = std::move(node);
    }
    return Tensor::wrap(std::move(out));
}

// fwd(xv) -> out; bwd(g, xv, outv) -> dx
template <class FwdF, class BwdF>
Tensor unary_impl(const Tensor& a, FwdF fwd, BwdF bwd) {
    auto out = alloc_impl(a.shape());
    const double* ad = a.data().data();
    double* od = out->data.data();
    const std::int64_t n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) od[i] = fwd(ad[i]);

    if (a.requires_grad()) {
        out->requires_grad = true;
        auto node = std::make_shared<TapeNode>();
        node->parents = {a.impl_ptr()};
        node->outputs = {out};
        node->backward = [bwd, n](const TapeNode& nd, BackwardPass& ctx) {
            auto out_impl = nd.outputs[0].lock();
            if (!out_impl) return;
            const auto* g = ctx.find(out_impl.get());
            if (!g) return;
            TensorImpl* A = nd.parents[0].get();
            double* ga = ctx.slot(A).data();
            const double* av = A->data.data();
            const double* ov = out_impl->data.data();
            const double* gd = g->data();
            for (std::int64_t i = 0; i < n; ++i) ga[i] += bwd(gd[i], av[i], ov[i]);
        };
        out->node = std::move(node);
    }
    return Tensor::wrap(std::move(out));
}

}  // namespace

Tensor Tensor::wrap(std::shared_ptr<TensorImpl> impl) {
    Tensor t;
    t.impl_ = std::move(impl);
    return t;
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    auto impl = alloc_impl(std::move(shape));
    impl->requires_grad = requires_grad;
    return wrap(std::move(impl));
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
    auto impl = alloc_impl(std::move(shape));
    std::fill(impl->data.begin(), impl->data.end(), value);
    impl->requires_grad = requires_grad;
    return wrap(std::move(impl));
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values, bool requires_grad) {
    if (shape_numel(shape) != static_cast<std::int64_t>(values.size()))
        throw ContractError("Tensor::from: " + std::to_string(values.size()) + " values for shape " + shape_str(shape));
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(values);
    impl->requires_grad = requires_grad;
    return wrap(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from({1}, {value}, requires_grad);
}

const std::vector<int>& Tensor::shape() const {
    if (!impl_) throw ContractError("shape() on undefined tensor");
    return impl_->shape;
}

std::int64_t Tensor::numel() const {
    if (!impl_) throw ContractError("numel() on undefined tensor");
    return impl_->numel();
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

bool Tensor::is_leaf() const {
    if (!impl_) throw ContractError("is_leaf() on undefined tensor");
    return impl_->is_leaf();
}

const std::vector<double>& Tensor::data() const {
    if (!impl_) throw ContractError("data() on undefined tensor");
    return impl_->data;
}

std::vector<double>& Tensor::mutable_data() {
    if (!impl_) throw ContractError("mutable_data() on undefined tensor");
    return impl_->data;
}

double Tensor::value() const {
    if (!impl_ || impl_->numel() != 1) throw ContractError("value() requires a scalar tensor");
    return impl_->data[0];
}

std::vector<double> Tensor::grad() const {
    if (!impl_) throw ContractError("grad() on undefined tensor");
    if (impl_->grad.empty()) return std::vector<double>(impl_->data.size(), 0.0);
    return impl_->grad;
}

void Tensor::zero_grad() {
    if (!impl_) throw ContractError("zero_grad() on undefined tensor");
    impl_->grad.clear();
}

void Tensor::backward() const {
    if (!impl_) throw ContractError("backward() on undefined tensor");
    if (impl_->numel() != 1)
        throw ContractError("backward(): loss must be a scalar, got shape " + shape_str(impl_->shape));

    BackwardPass ctx;
    ctx.slot(impl_.get())[0] = 1.0;

    // Post-order over tape nodes, iterative.
    std::vector<TapeNode*> order;
    if (impl_->node) {
        std::unordered_set<TapeNode*> seen;
        struct Frame {
            TapeNode* node;
            size_t next;
        };
        std::vector<Frame> stack;
        seen.insert(impl_->node.get());
        stack.push_back({impl_->node.get(), 0});
        while (!stack.empty()) {
            Frame& f = stack.back();
            if (f.next < f.node->parents.size()) {
                TapeNode* p = f.node->parents[f.next++]->node.get();
                if (p && !seen.count(p)) {
                    seen.insert(p);
                    stack.push_back({p, 0});
                }
            } else {
                order.push_back(f.node);
                stack.pop_back();
            }
        }
    }

    for (auto it = order.rbegin(); it != order.rend(); ++it) (*it)->backward(**it, ctx);

    // Persist gradients on leaves.
    auto flush = [&](TensorImpl* t) {
        if (!t->is_leaf() || !t->requires_grad) return;
        const auto* g = ctx.find(t);
        if (!g) return;
        if (t->grad.size() != t->data.size()) t->grad.assign(t->data.size(), 0.0);
        for (size_t i = 0; i < g->size(); ++i) t->grad[i] += (*g)[i];
    };
    std::unordered_set<TensorImpl*> flushed;
    flushed.insert(impl_.get());
    flush(impl_.get());
    for (TapeNode* n : order)
        for (auto& p : n->parents)
            if (flushed.insert(p.get()).second) flush(p.get());
}

// ---------------------------------------------------------------------------
// element-wise ops

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_impl(
        a, b, "add", [](double x, double y) { return x + y; },
        [](double g, double, double) { return std::pair{g, g}; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_impl(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](double g, double, double) { return std::pair{g, -g}; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_impl(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](double g, double x, double y) { return std::pair{g * y, g * x}; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary_impl(
        a, b, "div", [](double x, double y) { return x / y; },
        [](double g, double x, double y) { return std::pair{g / y, -g * x / (y * y)}; });
}

Tensor neg(const Tensor& a) {
    return unary_impl(
        a, [](double x) { return -x; }, [](double g, double, double) { return -g; });
}

Tensor add(const Tensor& a, double b) {
    return unary_impl(
        a, [b](double x) { return x + b; }, [](double g, double, double) { return g; });
}

Tensor sub(const Tensor& a, double b) { return add(a, -b); }

Tensor sub(double a, const Tensor& b) {
    return unary_impl(
        b, [a](double x) { return a - x; }, [](double g, double, double) { return -g; });
}

Tensor mul(const Tensor& a, double b) {
    return unary_impl(
        a, [b](double x) { return x * b; }, [b](double g, double, double) { return g * b; });
}

Tensor div(const Tensor& a, double b) { return mul(a, 1.0 / b); }

Tensor div(double a, const Tensor& b) {
    return unary_impl(
        b, [a](double x) { return a / x; }, [a](double g, double x, double) { return -g * a / (x * x); });
}

Tensor exp(const Tensor& a) {
    return unary_impl(
        a, [](double x) { return std::exp(x); }, [](double g, double, double o) { return g * o; });
}

Tensor log(const Tensor& a) {
    return unary_impl(
        a, [](double x) { return std::log(x); }, [](double g, double x, double) { return g / x; });
}

Tensor sqrt(const Tensor& a) {
    return unary_impl(
        a, [](double x) { return std::sqrt(x); },
        [](double g, double, double o) { return g * 0.5 / std::max(o, 1e-12); });
}

Tensor sigmoid(const Tensor& a) {
    return unary_impl(
        a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
        [](double g, double, double o) { return g * o * (1.0 - o); });
}

Tensor abs(const Tensor& a) {
    return unary_impl(
        a, [](double x) { return std::abs(x); },
        [](double g, double x, double) { return x > 0 ? g : (x < 0 ? -g : 0.0); });
}

Tensor square(const Tensor& a) {
    return unary_impl(
        a, [](double x) { return x * x; }, [](double g, double x, double) { return 2.0 * g * x; });
}

Tensor clamp_min(const Tensor& a, double floor) {
    return unary_impl(
        a, [floor](double x) { return std::max(x, floor); },
        [floor](double g, double x, double) { return x > floor ? g : 0.0; });
}

// ---------------------------------------------------------------------------
// reductions

Tensor sum(const Tensor& a) {
    auto out = alloc_impl({1});
    double acc = 0.0;
    for (double v : a.data()) acc += v;
    out->data[0] = acc;
    if (a.requires_grad()) {
        out->requires_grad = true;
        auto node = std::make_shared<TapeNode>();
        node->parents = {a.impl_ptr()};
        node->outputs = {out};
        node->backward = [](const TapeNode& nd, BackwardPass& ctx) {
            auto out_impl = nd.outputs[0].lock();
            if (!out_impl) return;
            const auto* g = ctx.find(out_impl.get());
            if (!g) return;
            auto& ga = ctx.slot(nd.parents[0].get());
            const double gv = (*g)[0];
            for (double& v : ga) v += gv;
        };
        out->node = std::move(node);
    }
    return Tensor::wrap(std::move(out));
}

Tensor mean(const Tensor& a) { return div(sum(a), static_cast<double>(a.numel())); }

Tensor sum_last(const Tensor& a) {
    const auto& s = a.shape();
    if (s.size() < 2) throw ContractError("sum_last: rank >= 2 required, got " + shape_str(s));
    const std::int64_t last = s.back();
    const std::int64_t rows = a.numel() / last;
    std::vector<int> out_shape(s.begin(), s.end() - 1);
    out_shape.push_back(1);
    auto out = alloc_impl(std::move(out_shape));
    const double* ad = a.data().data();
    for (std::int64_t k = 0; k < rows; ++k) {
        double acc = 0.0;
        for (std::int64_t p = 0; p < last; ++p) acc += ad[k * last + p];
        out->data[static_cast<size_t>(k)] = acc;
    }
    if (a.requires_grad()) {
        out->requires_grad = true;
        auto node = std::make_shared<TapeNode>();
        node->parents = {a.impl_ptr()};
        node->outputs = {out};
        node->backward = [rows, last](const TapeNode& nd, BackwardPass& ctx) {
            auto out_impl = nd.outputs[0].lock();
            if (!out_impl) return;
            const auto* g = ctx.find(out_impl.get());
            if (!g) return;
            double* ga = ctx.slot(nd.parents[0].get()).data();
            const double* gd = g->data();
            for (std::int64_t k = 0; k < rows; ++k)
                for (std::int64_t p = 0; p < last; ++p) ga[k * last + p] += gd[k];
        };
        out->node = std::move(node);
    }
    return Tensor::wrap(std::move(out));
}

Tensor mean_last(const Tensor& a) {
    return div(sum_last(a), static_cast<double>(a.shape().back()));
}

// ---------------------------------------------------------------------------
// structure ops

Tensor matmul(const Tensor& a, const Tensor& b) {
    const auto& sa = a.shape();
    const auto& sb = b.shape();
    if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0])
        throw ContractError("matmul: shapes " + shape_str(sa) + " x " + shape_str(sb));
    const int M = sa[0], K = sa[1], N = sb[1];
    auto out = alloc_impl({M, N});
    const double* ad = a.data().data();
    const double* bd = b.data().data();
    double* od = out->data.data();
    for (int i = 0; i < M; ++i)
        for (int k = 0; k < K; ++k) {
            const double av = ad[i * K + k];
            for (int j = 0; j < N; ++j) od[i * N + j] += av * bd[k * N + j];
        }
    if (a.requires_grad() || b.requires_grad()) {
        out->requires_grad = true;
        auto node = std::make_shared<TapeNode>();
        node->parents = {a.impl_ptr(), b.impl_ptr()};
        node->outputs = {out};
        node->backward = [M, K, N](const TapeNode& nd, BackwardPass& ctx) {
            auto out_impl = nd.outputs[0].lock();
            if (!out_impl) return;
            const auto* g = ctx.find(out_impl.get());
            if (!g) return;
            TensorImpl* A = nd.parents[0].get();
            TensorImpl* B = nd.parents[1].get();
            const double* gd = g->data();
            if (A->requires_grad) {
                double* ga = ctx.slot(A).data();
                const double* bd2 = B->data.data();
                for (int i = 0; i < M; ++i)
                    for (int j = 0; j < N; ++j) {
                        const double gv = gd[i * N + j];
                        for (int k = 0; k < K; ++k) ga[i * K + k] += gv * bd2[k * N + j];
                    }
            }
            if (B->requires_grad) {
                double* gb = ctx.slot(B).data();
                const double* ad2 = A->data.data();
                for (int i = 0; i < M; ++i)
                    for (int j = 0; j < N; ++j) {
                        const double gv = gd[i * N + j];
                        for (int k = 0; k < K; ++k) gb[k * N + j] += ad2[i * K + k] * gv;
                    }
            }
        };
        out->node = std::move(node);
    }
    return Tensor::wrap(std::move(out));
}

Tensor reshape(const Tensor& a, std::vector<int> shape) {
    if (shape_numel(shape) != a.numel())
        throw ContractError("reshape: " + shape_str(a.shape()) + " to " + shape_str(shape));
    auto out = std::make_shared<TensorImpl>();
    out->shape = std::move(shape);
    out->data = a.data();
    if (a.requires_grad()) {
        out->requires_grad = true;
        auto node = std::make_shared<TapeNode>();
        node->parents = {a.impl_ptr()};
        node->outputs = {out};
        node->backward = [](const TapeNode& nd, BackwardPass& ctx) {
            auto out_impl = nd.outputs[0].lock();
            if (!out_impl) return;
            const auto* g = ctx.find(out_impl.get());
            if (!g) return;
            auto& ga = ctx.slot(nd.parents[0].get());
            for (size_t i = 0; i < g->size(); ++i) ga[i] += (*g)[i];
        };
        out->node = std::move(node);
    }
    return Tensor::wrap(std::move(out));
}

Tensor gather(const Tensor& a, const std::vector<std::int64_t>& idx, std::vector<int> out_shape) {
    const std::int64_t n = a.numel();
    for (std::int64_t j : idx)
        if (j < 0 || j >= n) throw ContractError("gather: index " + std::to_string(j) + " out of range");
    if (out_shape.empty()) out_shape = {static_cast<int>(idx.size())};
    if (shape_numel(out_shape) != static_cast<std::int64_t>(idx.size()))
        throw ContractError("gather: out_shape " + shape_str(out_shape) + " for " + std::to_string(idx.size()) + " indices");
    auto out = alloc_impl(std::move(out_shape));
    const double* ad = a.data().data();
    for (size_t j = 0; j < idx.size(); ++j) out->data[j] = ad[idx[j]];
    if (a.requires_grad()) {
        out->requires_grad = true;
        auto node = std::make_shared<TapeNode>();
        node->parents = {a.impl_ptr()};
        node->outputs = {out};
        node->backward = [idx](const TapeNode& nd, BackwardPass& ctx) {
            auto out_impl = nd.outputs[0].lock();
            if (!out_impl) return;
            const auto* g = ctx.find(out_impl.get());
            if (!g) return;
            double* ga = ctx.slot(nd.parents[0].get()).data();
            for (size_t j = 0; j < idx.size(); ++j) ga[idx[j]] += (*g)[j];
        };
        out->node = std::move(node);
    }
    return Tensor::wrap(std::move(out));
}

Tensor stack_scalars(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ContractError("stack_scalars: empty input");
    auto out = alloc_impl({static_cast<int>(parts.size())});
    bool any_grad = false;
    for (size_t i = 0; i < parts.size(); ++i) {
        out->data[i] = parts[i].value();
        any_grad = any_grad || parts[i].requires_grad();
    }
    if (any_grad) {
        out->requires_grad = true;
        auto node = std::make_shared<TapeNode>();
        for (const auto& p : parts) node->parents.push_back(p.impl_ptr());
        node->outputs = {out};
        node->backward = [](const TapeNode& nd, BackwardPass& ctx) {
            auto out_impl = nd.outputs[0].lock();
            if (!out_impl) return;
            const auto* g = ctx.find(out_impl.get());
            if (!g) return;
            for (size_t i = 0; i < nd.parents.size(); ++i) {
                TensorImpl* p = nd.parents[i].get();
                if (p->requires_grad) ctx.slot(p)[0] += (*g)[i];
            }
        };
        out->node = std::move(node);
    }
    return Tensor::wrap(std::move(out));
}

Tensor conv_rows_valid(const Tensor& a, const std::vector<double>& kernel) {
    const auto& s = a.shape();
    const int k = static_cast<int>(kernel.size());
    if (s.size() != 2) throw ContractError("conv_rows_valid: 2-D input required");
    if (s[1] < k) throw ContractError("conv_rows_valid: width " + std::to_string(s[1]) + " < kernel " + std::to_string(k));
    const int H = s[0], W = s[1], OW = W - k + 1;
    auto out = alloc_impl({H, OW});
    const double* ad = a.data().data();
    double* od = out->data.data();
    for (int i = 0; i < H; ++i)
        for (int j = 0; j < OW; ++j) {
            double acc = 0.0;
            for (int t = 0; t < k; ++t) acc += ad[i * W + j + t] * kernel[t];
            od[i * OW + j] = acc;
        }
    if (a.requires_grad()) {
        out->requires_grad = true;
        auto node = std::make_shared<TapeNode>();
        node->parents = {a.impl_ptr()};
        node->outputs = {out};
        node->backward = [kernel, H, W, OW, k](const TapeNode& nd, BackwardPass& ctx) {
            auto out_impl = nd.outputs[0].lock();
            if (!out_impl) return;
            const auto* g = ctx.find(out_impl.get());
            if (!g) return;
            double* ga = ctx.slot(nd.parents[0].get()).data();
            const double* gd = g->data();
            for (int i = 0; i < H; ++i)
                for (int j = 0; j < OW; ++j) {
                    const double gv = gd[i * OW + j];
                    for (int t = 0; t < k; ++t) ga[i * W + j + t] += gv * kernel[t];
                }
        };
        out->node = std::move(node);
    }
    return Tensor::wrap(std::move(out));
}

Tensor conv_cols_valid(const Tensor& a, const std::vector<double>& kernel) {
    const auto& s = a.shape();
    const int k = static_cast<int>(kernel.size());
    if (s.size() != 2) throw ContractError("conv_cols_valid: 2-D input required");
    if (s[0] < k) throw ContractError("conv_cols_valid: height " + std::to_string(s[0]) + " < kernel " + std::to_string(k));
    const int H = s[0], W = s[1], OH = H - k + 1;
    auto out = alloc_impl({OH, W});
    const double* ad = a.data().data();
    double* od = out->data.data();
    for (int i = 0; i < OH; ++i)
        for (int j = 0; j < W; ++j) {
            double acc = 0.0;
            for (int t = 0; t < k; ++t) acc += ad[(i + t) * W + j] * kernel[t];
            od[i * W + j] = acc;
        }
    if (a.requires_grad()) {
        out->requires_grad = true;
        auto node = std::make_shared<TapeNode>();
        node->parents = {a.impl_ptr()};
        node->outputs = {out};
        node->backward = [kernel, W, OH, k](const TapeNode& nd, BackwardPass& ctx) {
            auto out_impl = nd.outputs[0].lock();
            if (!out_impl) return;
            const auto* g = ctx.find(out_impl.get());
            if (!g) return;
            double* ga = ctx.slot(nd.parents[0].get()).data();
            const double* gd = g->data();
            for (int i = 0; i < OH; ++i)
                for (int j = 0; j < W; ++j) {
                    const double gv = gd[i * W + j];
                    for (int t = 0; t < k; ++t) ga[(i + t) * W + j] += gv * kernel[t];
                }
        };
        out->node = std::move(node);
    }
    return Tensor::wrap(std::move(out));
}

std::vector<Tensor> make_custom_op(const std::vector<Tensor>& inputs,
                                   const std::vector<std::vector<int>>& out_shapes,
                                   std::vector<std::vector<double>> out_data,
                                   CustomBackwardFn backward) {
    if (out_shapes.size() != out_data.size())
        throw ContractError("make_custom_op: shape/data count mismatch");
    bool any_grad = false;
    for (const auto& in : inputs) any_grad = any_grad || in.requires_grad();

    std::vector<Tensor> outs;
    auto node = std::make_shared<TapeNode>();
    for (size_t i = 0; i < out_shapes.size(); ++i) {
        if (shape_numel(out_shapes[i]) != static_cast<std::int64_t>(out_data[i].size()))
            throw ContractError("make_custom_op: output " + std::to_string(i) + " data/shape mismatch");
        auto impl = std::make_shared<TensorImpl>();
        impl->shape = out_shapes[i];
        impl->data = std::move(out_data[i]);
        if (any_grad) {
            impl->requires_grad = true;
            impl->node = node;
            node->outputs.push_back(impl);
        }
        outs.push_back(Tensor::wrap(std::move(impl)));
    }
    if (any_grad) {
        for (const auto& in : inputs) node->parents.push_back(in.impl_ptr());
        node->backward = [fn = std::move(backward)](const TapeNode& nd, BackwardPass& ctx) {
            std::vector<const double*> ogs(nd.outputs.size(), nullptr);
            bool any = false;
            for (size_t i = 0; i < nd.outputs.size(); ++i) {
                auto o = nd.outputs[i].lock();
                if (!o) continue;
                if (const auto* g = ctx.find(o.get())) {
                    ogs[i] = g->data();
                    any = true;
                }
            }
            if (!any) return;
            std::vector<double*> igs(nd.parents.size(), nullptr);
            for (size_t i = 0; i < nd.parents.size(); ++i)
                if (nd.parents[i]->requires_grad) igs[i] = ctx.slot(nd.parents[i].get()).data();
            fn(ogs, igs);
        };
    }
    return outs;
}

bool all_finite(const Tensor& a) {
    for (double v : a.data())
        if (!std::isfinite(v)) return false;
    return true;
}

double check_gradients(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                       const std::vector<Tensor>& inputs, double h) {
    std::vector<Tensor> ins = inputs;
    for (auto& t : ins) t.zero_grad();

    Tensor base = f(ins);
    if (base.numel() != 1) throw ContractError("check_gradients: f must return a scalar");
    if (!std::isfinite(base.value())) throw ContractError("check_gradients: non-finite f at base point");
    base.backward();

    std::vector<std::vector<double>> analytic;
    for (auto& t : ins) analytic.push_back(t.grad());

    double max_rel = 0.0;
    for (size_t ti = 0; ti < ins.size(); ++ti) {
        auto& data = ins[ti].mutable_data();
        for (size_t e = 0; e < data.size(); ++e) {
            const double saved = data[e];
            data[e] = saved + h;
            const double fp = f(ins).value();
            data[e] = saved - h;
            const double fm = f(ins).value();
            data[e] = saved;
            if (!std::isfinite(fp) || !std::isfinite(fm))
                throw ContractError("check_gradients: non-finite f probing input " + std::to_string(ti) +
                                    " element " + std::to_string(e));
            const double fd = (fp - fm) / (2.0 * h);
            const double rel = std::abs(analytic[ti][e] - fd) / std::max(std::abs(fd), 1e-8);
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

}  // namespace splatlab
