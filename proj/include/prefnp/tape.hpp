#pragma once
// Reverse-mode autodiff over tensor ops, recorded on a dynamic tape.
// Values are computed eagerly; each op pushes a node whose backward closure
// accumulates into the gradients of its inputs. Nodes are created after
// their inputs, so reverse creation order is a valid topological order.
//
// Parameters live outside the tape: external nodes reference a value tensor
// and accumulate straight into a caller-owned gradient sink, which lets one
// optimizer step sum gradients across many per-task tapes without copies.
// Plain leaves are data: nothing propagates into them, and whole subtrees
// that cannot reach a parameter are skipped during backward.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rng.hpp"
#include "tensor.hpp"

namespace prefnp {

struct Var {
    uint32_t id = UINT32_MAX;
    bool valid() const { return id != UINT32_MAX; }
};

class Tape {
public:
    // data leaf; gradients are not tracked through it
    Var leaf(Tensor value) {
        nodes_.push_back(Node{std::move(value), {}, nullptr, nullptr, nullptr, false});
        return Var{static_cast<uint32_t>(nodes_.size() - 1)};
    }

    // parameter leaf: value read from *value, gradient accumulated into *grad
    Var external(const Tensor* value, Tensor* grad) {
        if (!value || !grad || !value->same_shape(*grad))
            throw std::invalid_argument("Tape::external: value/grad missing or shape mismatch");
        nodes_.push_back(Node{{}, {}, value, grad, nullptr, true});
        return Var{static_cast<uint32_t>(nodes_.size() - 1)};
    }

    const Tensor& value(Var x) const {
        const Node& n = nodes_[x.id];
        return n.ext_value ? *n.ext_value : n.value;
    }

    const Tensor& grad(Var x) {
        Node& n = nodes_[x.id];
        if (n.ext_grad) return *n.ext_grad;
        if (n.grad.empty()) n.grad = Tensor(value(x).shape);
        return n.grad;
    }

    bool needs_grad(Var x) const { return nodes_[x.id].needs_grad; }

    size_t size() const { return nodes_.size(); }

    void clear() { nodes_.clear(); }

    void backward(Var loss) {
        if (value(loss).size() != 1)
            throw std::invalid_argument("Tape::backward: loss must be scalar");
        if (!nodes_[loss.id].needs_grad) return;  // loss does not touch any parameter
        grad_buf(loss.id).data[0] = 1.0;
        for (size_t i = nodes_.size(); i-- > 0;) {
            Node& n = nodes_[i];
            if (!n.back || !n.needs_grad) continue;
            // untouched grad means nothing downstream consumed this node
            if (!n.ext_grad && n.grad.empty()) continue;
            n.back(*this);
        }
    }

    // ---- elementwise and broadcast ops ----

    Var add(Var a, Var b) {
        const Tensor &ta = value(a), &tb = value(b);
        require(ta.same_shape(tb), "add: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
        Tensor out = ta;
        for (size_t i = 0; i < out.size(); ++i) out.data[i] += tb.data[i];
        return push(std::move(out), {a, b}, [a, b, self = next_id()](Tape& t) {
            const Tensor& g = t.grad_buf(self);
            t.accum(a, g, 1.0);
            t.accum(b, g, 1.0);
        });
    }

    Var sub(Var a, Var b) {
        const Tensor &ta = value(a), &tb = value(b);
        require(ta.same_shape(tb), "sub: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
        Tensor out = ta;
        for (size_t i = 0; i < out.size(); ++i) out.data[i] -= tb.data[i];
        return push(std::move(out), {a, b}, [a, b, self = next_id()](Tape& t) {
            const Tensor& g = t.grad_buf(self);
            t.accum(a, g, 1.0);
            t.accum(b, g, -1.0);
        });
    }

    Var mul(Var a, Var b) {
        const Tensor &ta = value(a), &tb = value(b);
        require(ta.same_shape(tb), "mul: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
        Tensor out = ta;
        for (size_t i = 0; i < out.size(); ++i) out.data[i] *= tb.data[i];
        return push(std::move(out), {a, b}, [a, b, self = next_id()](Tape& t) {
            const Tensor& g = t.grad_buf(self);
            if (Tensor* ga = t.gsink(a)) {
                const Tensor& vb = t.value(b);
                for (size_t i = 0; i < g.size(); ++i) ga->data[i] += g.data[i] * vb.data[i];
            }
            if (Tensor* gb = t.gsink(b)) {
                const Tensor& va = t.value(a);
                for (size_t i = 0; i < g.size(); ++i) gb->data[i] += g.data[i] * va.data[i];
            }
        });
    }

    Var div(Var a, Var b) {
        const Tensor &ta = value(a), &tb = value(b);
        require(ta.same_shape(tb), "div: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
        Tensor out = ta;
        for (size_t i = 0; i < out.size(); ++i) out.data[i] /= tb.data[i];
        return push(std::move(out), {a, b}, [a, b, self = next_id()](Tape& t) {
            const Tensor& g = t.grad_buf(self);
            const Tensor& vb = t.value(b);
            if (Tensor* ga = t.gsink(a))
                for (size_t i = 0; i < g.size(); ++i) ga->data[i] += g.data[i] / vb.data[i];
            if (Tensor* gb = t.gsink(b)) {
                const Tensor& vc = t.value(Var{self});
                for (size_t i = 0; i < g.size(); ++i)
                    gb->data[i] -= g.data[i] * vc.data[i] / vb.data[i];
            }
        });
    }

    Var scale(Var a, double c) {
        Tensor out = value(a);
        for (double& v : out.data) v *= c;
        return push(std::move(out), {a}, [a, c, self = next_id()](Tape& t) {
            t.accum(a, t.grad_buf(self), c);
        });
    }

    Var add_scalar(Var a, double c) {
        Tensor out = value(a);
        for (double& v : out.data) v += c;
        return push(std::move(out), {a}, [a, self = next_id()](Tape& t) {
            t.accum(a, t.grad_buf(self), 1.0);
        });
    }

    // broadcast a (1,m) row over the rows of a (n,m) matrix
    Var add_rowvec(Var a, Var v) {
        const Tensor &ta = value(a), &tv = value(v);
        require(tv.rows() == 1 && tv.cols() == ta.cols(),
                "add_rowvec: want (1," + std::to_string(ta.cols()) + "), got " + tv.shape_str());
        Tensor out = ta;
        const size_t n = ta.rows(), m = ta.cols();
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < m; ++j) out.data[i * m + j] += tv.data[j];
        return push(std::move(out), {a, v}, [a, v, self = next_id()](Tape& t) {
            const Tensor& g = t.grad_buf(self);
            t.accum(a, g, 1.0);
            if (Tensor* gv = t.gsink(v)) {
                const size_t n = g.rows(), m = g.cols();
                for (size_t i = 0; i < n; ++i)
                    for (size_t j = 0; j < m; ++j) gv->data[j] += g.data[i * m + j];
            }
        });
    }

    Var mul_rowvec(Var a, Var v) {
        const Tensor &ta = value(a), &tv = value(v);
        require(tv.rows() == 1 && tv.cols() == ta.cols(),
                "mul_rowvec: want (1," + std::to_string(ta.cols()) + "), got " + tv.shape_str());
        Tensor out = ta;
        const size_t n = ta.rows(), m = ta.cols();
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < m; ++j) out.data[i * m + j] *= tv.data[j];
        return push(std::move(out), {a, v}, [a, v, self = next_id()](Tape& t) {
            const Tensor& g = t.grad_buf(self);
            const size_t n = g.rows(), m = g.cols();
            if (Tensor* ga = t.gsink(a)) {
                const Tensor& vv = t.value(v);
                for (size_t i = 0; i < n; ++i)
                    for (size_t j = 0; j < m; ++j) ga->data[i * m + j] += g.data[i * m + j] * vv.data[j];
            }
            if (Tensor* gv = t.gsink(v)) {
                const Tensor& va = t.value(a);
                for (size_t i = 0; i < n; ++i)
                    for (size_t j = 0; j < m; ++j) gv->data[j] += g.data[i * m + j] * va.data[i * m + j];
            }
        });
    }

    // (1,d) -> (n,d)
    Var repeat_row(Var v, size_t n) {
        const Tensor& tv = value(v);
        require(tv.rows() == 1, "repeat_row: input must be a single row");
        const size_t m = tv.cols();
        Tensor out = Tensor::zeros(n, m);
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < m; ++j) out.data[i * m + j] = tv.data[j];
        return push(std::move(out), {v}, [v, self = next_id()](Tape& t) {
            const Tensor& g = t.grad_buf(self);
            if (Tensor* gv = t.gsink(v)) {
                const size_t n = g.rows(), m = g.cols();
                for (size_t i = 0; i < n; ++i)
                    for (size_t j = 0; j < m; ++j) gv->data[j] += g.data[i * m + j];
            }
        });
    }

    // ---- nonlinearities ----

    Var gelu_op(Var a) {
        Tensor out = value(a);
        for (double& v : out.data) v = gelu(v);
        return push(std::move(out), {a}, [a, self = next_id()](Tape& t) {
            const Tensor& g = t.grad_buf(self);
            if (Tensor* ga = t.gsink(a)) {
                const Tensor& va = t.value(a);
                for (size_t i = 0; i < g.size(); ++i) ga->data[i] += g.data[i] * gelu_grad(va.data[i]);
            }
        });
    }

    Var sigmoid_op(Var a) {
        Tensor out = value(a);
        for (double& v : out.data) v = sigmoid(v);
        return push(std::move(out), {a}, [a, self = next_id()](Tape& t) {
            const Tensor& g = t.grad_buf(self);
            if (Tensor* ga = t.gsink(a)) {
                const Tensor& y = t.value(Var{self});
                for (size_t i = 0; i < g.size(); ++i)
                    ga->data[i] += g.data[i] * y.data[i] * (1.0 - y.data[i]);
            }
        });
    }

    Var logsigmoid_op(Var a) {
        Tensor out = value(a);
        for (double& v : out.data) v = log_sigmoid(v);
        return push(std::move(out), {a}, [a, self = next_id()](Tape& t) {
            const Tensor& g = t.grad_buf(self);
            if (Tensor* ga = t.gsink(a)) {
                const Tensor& y = t.value(Var{self});
                for (size_t i = 0; i < g.size(); ++i)
                    ga->data[i] += g.data[i] * (1.0 - std::exp(y.data[i]));
            }
        });
    }

    Var exp_op(Var a) {
        Tensor out = value(a);
        for (double& v : out.data) v = std::exp(v);
        return push(std::move(out), {a}, [a, self = next_id()](Tape& t) {
            const Tensor& g = t.grad_buf(self);
            if (Tensor* ga = t.gsink(a)) {
                const Tensor& y = t.value(Var{self});
                for (size_t i = 0; i < g.size(); ++i) ga->data[i] += g.data[i] * y.data[i];
            }
        });
    }

    // inputs must be strictly positive
    Var log_op(Var a) {
        Tensor out = value(a);
        for (double& v : out.data) {
            require(v > 0.0, "log: non-positive input");
            v = std::log(v);
        }
        return push(std::move(out), {a}, [a, self = next_id()](Tape& t) {
            const Tensor& g = t.grad_buf(self);
            if (Tensor* ga = t.gsink(a)) {
                const Tensor& va = t.value(a);
                for (size_t i = 0; i < g.size(); ++i) ga->data[i] += g.data[i] / va.data[i];
            }
        });
    }

    Var sqrt_op(Var a) {
        Tensor out = value(a);
        for (double& v : out.data) v = std::sqrt(v);
        return push(std::move(out), {a}, [a, self = next_id()](Tape& t) {
            const Tensor& g = t.grad_buf(self);
            if (Tensor* ga = t.gsink(a)) {
                const Tensor& y = t.value(Var{self});
                for (size_t i = 0; i < g.size(); ++i) ga->data[i] += g.data[i] * 0.5 / y.data[i];
            }
        });
    }

    Var normal_cdf_op(Var a) {
        Tensor out = value(a);
        for (double& v : out.data) v = normal_cdf(v);
        return push(std::move(out), {a}, [a, self = next_id()](Tape& t) {
            const Tensor& g = t.grad_buf(self);
            if (Tensor* ga = t.gsink(a)) {
                const Tensor& va = t.value(a);
                for (size_t i = 0; i < g.size(); ++i) ga->data[i] += g.data[i] * normal_pdf(va.data[i]);
            }
        });
    }

    // max(a, floor) elementwise; gradient is zero where the floor is active
    Var clamp_min(Var a, double floor) {
        Tensor out = value(a);
        for (double& v : out.data) v = std::max(v, floor);
        return push(std::move(out), {a}, [a, floor, self = next_id()](Tape& t) {
            const Tensor& g = t.grad_buf(self);
            if (Tensor* ga = t.gsink(a)) {
                const Tensor& va = t.value(a);
                for (size_t i = 0; i < g.size(); ++i)
                    if (va.data[i] > floor) ga->data[i] += g.data[i];
            }
        });
    }

    // ---- matmuls ----

    Var matmul(Var a, Var b) {
        const Tensor &ta = value(a), &tb = value(b);
        require(ta.cols() == tb.rows(),
                "matmul: inner dims differ " + ta.shape_str() + " vs " + tb.shape_str());
        Tensor out = Tensor::zeros(ta.rows(), tb.cols());
        matmul_acc(ta.data.data(), tb.data.data(), out.data.data(), ta.rows(), ta.cols(), tb.cols());
        return push(std::move(out), {a, b}, [a, b, self = next_id()](Tape& t) {
            const Tensor& g = t.grad_buf(self);
            const Tensor &va = t.value(a), &vb = t.value(b);
            const size_t n = va.rows(), k = va.cols(), m = vb.cols();
            if (Tensor* ga = t.gsink(a))
                matmul_nt_acc(g.data.data(), vb.data.data(), ga->data.data(), n, m, k);
            if (Tensor* gb = t.gsink(b))
                matmul_tn_acc(va.data.data(), g.data.data(), gb->data.data(), n, k, m);
        });
    }

    // a (n,k) * b^T with b stored (m,k)
    Var matmul_nt(Var a, Var b) {
        const Tensor &ta = value(a), &tb = value(b);
        require(ta.cols() == tb.cols(),
                "matmul_nt: inner dims differ " + ta.shape_str() + " vs " + tb.shape_str());
        Tensor out = Tensor::zeros(ta.rows(), tb.rows());
        matmul_nt_acc(ta.data.data(), tb.data.data(), out.data.data(), ta.rows(), ta.cols(),
                      tb.rows());
        return push(std::move(out), {a, b}, [a, b, self = next_id()](Tape& t) {
            const Tensor& g = t.grad_buf(self);
            const Tensor &va = t.value(a), &vb = t.value(b);
            const size_t n = va.rows(), k = va.cols(), m = vb.rows();
            if (Tensor* ga = t.gsink(a))
                matmul_acc(g.data.data(), vb.data.data(), ga->data.data(), n, m, k);
            if (Tensor* gb = t.gsink(b))
                matmul_tn_acc(g.data.data(), va.data.data(), gb->data.data(), n, m, k);
        });
    }

    // ---- softmax family ----

    Var softmax_rows(Var a) {
        Tensor out = value(a);
        softmax_rows_inplace(out);
        return push(std::move(out), {a}, [a, self = next_id()](Tape& t) {
            t.softmax_backward(a, self);
        });
    }

    // softmax over entries with allow[i*m+j] != 0; each row needs >= 1 allowed
    Var masked_softmax_rows(Var a, std::vector<uint8_t> allow) {
        const Tensor& ta = value(a);
        require(allow.size() == ta.size(), "masked_softmax_rows: mask size mismatch");
        Tensor out = ta;
        const size_t n = ta.rows(), m = ta.cols();
        for (size_t i = 0; i < n; ++i) {
            double* row = out.data.data() + i * m;
            const uint8_t* arow = allow.data() + i * m;
            double mx = -HUGE_VAL;
            for (size_t j = 0; j < m; ++j)
                if (arow[j]) mx = std::max(mx, row[j]);
            require(mx != -HUGE_VAL, "masked_softmax_rows: fully masked row");
            double sum = 0.0;
            for (size_t j = 0; j < m; ++j) {
                row[j] = arow[j] ? std::exp(row[j] - mx) : 0.0;
                sum += row[j];
            }
            for (size_t j = 0; j < m; ++j) row[j] /= sum;
        }
        // masked entries have y = 0, which zeroes their gradient in the same
        // expression as the dense case
        return push(std::move(out), {a}, [a, self = next_id()](Tape& t) {
            t.softmax_backward(a, self);
        });
    }

    Var log_softmax_rows(Var a) {
        Tensor out = value(a);
        log_softmax_rows_inplace(out);
        return push(std::move(out), {a}, [a, self = next_id()](Tape& t) {
            const Tensor& g = t.grad_buf(self);
            if (Tensor* ga = t.gsink(a)) {
                const Tensor& y = t.value(Var{self});
                const size_t n = y.rows(), m = y.cols();
                for (size_t i = 0; i < n; ++i) {
                    const double* yr = y.data.data() + i * m;
                    const double* gr = g.data.data() + i * m;
                    double s = 0.0;
                    for (size_t j = 0; j < m; ++j) s += gr[j];
                    double* gar = ga->data.data() + i * m;
                    for (size_t j = 0; j < m; ++j) gar[j] += gr[j] - std::exp(yr[j]) * s;
                }
            }
        });
    }

    // inverted-scaling dropout; identity when rate == 0
    Var dropout(Var a, double rate, RngStream& rng) {
        require(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0,1)");
        if (rate == 0.0) return a;
        const Tensor& ta = value(a);
        const double keep = 1.0 - rate;
        std::vector<double> mask(ta.size());
        for (double& v : mask) v = rng.uniform() < keep ? 1.0 / keep : 0.0;
        Tensor out = ta;
        for (size_t i = 0; i < out.size(); ++i) out.data[i] *= mask[i];
        return push(std::move(out), {a}, [a, mask = std::move(mask), self = next_id()](Tape& t) {
            const Tensor& g = t.grad_buf(self);
            if (Tensor* ga = t.gsink(a))
                for (size_t i = 0; i < g.size(); ++i) ga->data[i] += g.data[i] * mask[i];
        });
    }

    // ---- structural ops ----

    Var concat_cols(const std::vector<Var>& parts) {
        require(!parts.empty(), "concat_cols: no inputs");
        const size_t n = value(parts[0]).rows();
        size_t mtotal = 0;
        for (Var p : parts) {
            require(value(p).rows() == n, "concat_cols: row count mismatch");
            mtotal += value(p).cols();
        }
        Tensor out = Tensor::zeros(n, mtotal);
        size_t off = 0;
        for (Var p : parts) {
            const Tensor& tp = value(p);
            const size_t m = tp.cols();
            for (size_t i = 0; i < n; ++i)
                for (size_t j = 0; j < m; ++j) out.data[i * mtotal + off + j] = tp.data[i * m + j];
            off += m;
        }
        Var result = push_multi(std::move(out), parts, [parts, self = next_id()](Tape& t) {
            const Tensor& g = t.grad_buf(self);
            const size_t n = g.rows(), mtotal = g.cols();
            size_t off = 0;
            for (Var p : parts) {
                const size_t m = t.value(p).cols();
                if (Tensor* gp = t.gsink(p)) {
                    for (size_t i = 0; i < n; ++i)
                        for (size_t j = 0; j < m; ++j)
                            gp->data[i * m + j] += g.data[i * mtotal + off + j];
                }
                off += m;
            }
        });
        return result;
    }

    Var concat_cols(Var a, Var b) { return concat_cols(std::vector<Var>{a, b}); }

    Var slice_rows(Var a, size_t r0, size_t r1) {
        const Tensor& ta = value(a);
        require(r0 < r1 && r1 <= ta.rows(), "slice_rows: bad row range");
        const size_t m = ta.cols(), h = r1 - r0;
        Tensor out = Tensor::zeros(h, m);
        std::copy(ta.data.begin() + r0 * m, ta.data.begin() + r1 * m, out.data.begin());
        return push(std::move(out), {a}, [a, r0, self = next_id()](Tape& t) {
            const Tensor& g = t.grad_buf(self);
            if (Tensor* ga = t.gsink(a)) {
                const size_t m = g.cols();
                for (size_t i = 0; i < g.rows(); ++i)
                    for (size_t j = 0; j < m; ++j) ga->data[(r0 + i) * m + j] += g.data[i * m + j];
            }
        });
    }

    Var slice_cols(Var a, size_t c0, size_t c1) {
        const Tensor& ta = value(a);
        require(c0 < c1 && c1 <= ta.cols(), "slice_cols: bad column range");
        const size_t n = ta.rows(), m = ta.cols(), w = c1 - c0;
        Tensor out = Tensor::zeros(n, w);
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < w; ++j) out.data[i * w + j] = ta.data[i * m + c0 + j];
        return push(std::move(out), {a}, [a, c0, self = next_id()](Tape& t) {
            const Tensor& g = t.grad_buf(self);
            if (Tensor* ga = t.gsink(a)) {
                const size_t n = g.rows(), w = g.cols(), m = ga->cols();
                for (size_t i = 0; i < n; ++i)
                    for (size_t j = 0; j < w; ++j) ga->data[i * m + c0 + j] += g.data[i * w + j];
            }
        });
    }

    Var mean_rows(Var a) {
        const Tensor& ta = value(a);
        const size_t n = ta.rows(), m = ta.cols();
        require(n > 0, "mean_rows: empty input");
        Tensor out = Tensor::zeros(1, m);
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < m; ++j) out.data[j] += ta.data[i * m + j];
        for (size_t j = 0; j < m; ++j) out.data[j] /= static_cast<double>(n);
        return push(std::move(out), {a}, [a, n, self = next_id()](Tape& t) {
            const Tensor& g = t.grad_buf(self);
            if (Tensor* ga = t.gsink(a)) {
                const size_t m = g.cols();
                const double inv = 1.0 / static_cast<double>(n);
                for (size_t i = 0; i < n; ++i)
                    for (size_t j = 0; j < m; ++j) ga->data[i * m + j] += g.data[j] * inv;
            }
        });
    }

    Var sum_rows(Var a) {
        const Tensor& ta = value(a);
        const size_t n = ta.rows(), m = ta.cols();
        Tensor out = Tensor::zeros(1, m);
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < m; ++j) out.data[j] += ta.data[i * m + j];
        return push(std::move(out), {a}, [a, n, self = next_id()](Tape& t) {
            const Tensor& g = t.grad_buf(self);
            if (Tensor* ga = t.gsink(a)) {
                const size_t m = g.cols();
                for (size_t i = 0; i < n; ++i)
                    for (size_t j = 0; j < m; ++j) ga->data[i * m + j] += g.data[j];
            }
        });
    }

    Var sum_all(Var a) {
        const Tensor& ta = value(a);
        double s = 0.0;
        for (double v : ta.data) s += v;
        return push(Tensor::scalar(s), {a}, [a, self = next_id()](Tape& t) {
            const double g = t.grad_buf(self).data[0];
            if (Tensor* ga = t.gsink(a))
                for (double& v : ga->data) v += g;
        });
    }

    Var mean_all(Var a) {
        const Tensor& ta = value(a);
        const size_t n = ta.size();
        double s = 0.0;
        for (double v : ta.data) s += v;
        return push(Tensor::scalar(s / static_cast<double>(n)), {a}, [a, n, self = next_id()](Tape& t) {
            const double g = t.grad_buf(self).data[0] / static_cast<double>(n);
            if (Tensor* ga = t.gsink(a))
                for (double& v : ga->data) v += g;
        });
    }

    Var gather_rows(Var table, std::vector<uint32_t> idx) {
        const Tensor& tt = value(table);
        const size_t m = tt.cols();
        Tensor out = Tensor::zeros(idx.size(), m);
        for (size_t i = 0; i < idx.size(); ++i) {
            require(idx[i] < tt.rows(), "gather_rows: index out of range");
            for (size_t j = 0; j < m; ++j) out.data[i * m + j] = tt.data[idx[i] * m + j];
        }
        return push(std::move(out), {table},
                    [table, idx = std::move(idx), self = next_id()](Tape& t) {
                        const Tensor& g = t.grad_buf(self);
                        if (Tensor* gt = t.gsink(table)) {
                            const size_t m = g.cols();
                            for (size_t i = 0; i < idx.size(); ++i)
                                for (size_t j = 0; j < m; ++j)
                                    gt->data[idx[i] * m + j] += g.data[i * m + j];
                        }
                    });
    }

    // entries[(r,c)...] -> column vector (k,1)
    Var pick(Var a, std::vector<std::pair<uint32_t, uint32_t>> rc) {
        const Tensor& ta = value(a);
        Tensor out = Tensor::zeros(rc.size(), 1);
        for (size_t i = 0; i < rc.size(); ++i) {
            require(rc[i].first < ta.rows() && rc[i].second < ta.cols(),
                    "pick: entry out of range");
            out.data[i] = ta.at(rc[i].first, rc[i].second);
        }
        return push(std::move(out), {a}, [a, rc = std::move(rc), self = next_id()](Tape& t) {
            const Tensor& g = t.grad_buf(self);
            if (Tensor* ga = t.gsink(a)) {
                const size_t m = ga->cols();
                for (size_t i = 0; i < rc.size(); ++i)
                    ga->data[rc[i].first * m + rc[i].second] += g.data[i];
            }
        });
    }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        const Tensor* ext_value = nullptr;
        Tensor* ext_grad = nullptr;
        std::function<void(Tape&)> back;
        bool needs_grad = false;
    };

    std::vector<Node> nodes_;

    uint32_t next_id() const { return static_cast<uint32_t>(nodes_.size()); }

    Var push(Tensor value, std::initializer_list<Var> inputs, std::function<void(Tape&)> back) {
        bool needs = false;
        for (Var in : inputs) needs = needs || nodes_[in.id].needs_grad;
        nodes_.push_back(Node{std::move(value), {}, nullptr, nullptr,
                              needs ? std::move(back) : nullptr, needs});
        return Var{static_cast<uint32_t>(nodes_.size() - 1)};
    }

    Var push_multi(Tensor value, const std::vector<Var>& inputs, std::function<void(Tape&)> back) {
        bool needs = false;
        for (Var in : inputs) needs = needs || nodes_[in.id].needs_grad;
        nodes_.push_back(Node{std::move(value), {}, nullptr, nullptr,
                              needs ? std::move(back) : nullptr, needs});
        return Var{static_cast<uint32_t>(nodes_.size() - 1)};
    }

    Tensor& grad_mut(Var x) {
        Node& n = nodes_[x.id];
        if (n.ext_grad) return *n.ext_grad;
        if (n.grad.empty()) n.grad = Tensor(value(x).shape);
        return n.grad;
    }

    Tensor& grad_buf(uint32_t id) { return grad_mut(Var{id}); }
    Tensor& grad_buf(Var x) { return grad_mut(x); }

    // gradient sink, or null when the input does not track gradients
    Tensor* gsink(Var x) {
        if (!nodes_[x.id].needs_grad) return nullptr;
        return &grad_mut(x);
    }

    void accum(Var x, const Tensor& g, double c) {
        if (Tensor* gx = gsink(x)) {
            for (size_t i = 0; i < g.size(); ++i) gx->data[i] += c * g.data[i];
        }
    }

    void softmax_backward(Var a, uint32_t self) {
        const Tensor& g = grad_buf(self);
        if (Tensor* ga = gsink(a)) {
            const Tensor& y = value(Var{self});
            const size_t n = y.rows(), m = y.cols();
            for (size_t i = 0; i < n; ++i) {
                const double* yr = y.data.data() + i * m;
                const double* gr = g.data.data() + i * m;
                double s = 0.0;
                for (size_t j = 0; j < m; ++j) s += gr[j] * yr[j];
                double* gar = ga->data.data() + i * m;
                for (size_t j = 0; j < m; ++j) gar[j] += yr[j] * (gr[j] - s);
            }
        }
    }

    static void require(bool ok, const std::string& msg) {
        if (!ok) throw std::invalid_argument("tape: " + msg);
    }
};

}  // namespace prefnp
