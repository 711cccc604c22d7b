#pragma once
// Parameter storage, standard layers (MLP, multi-head self-attention) and
// their initialization. Every layer has two forward paths sharing the same
// kernels: one recorded on the tape (training, gradient checks) and one
// plain-tensor path (validation and evaluation, no gradients).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "rng.hpp"
#include "tape.hpp"
#include "tensor.hpp"

namespace prefnp {

enum class Activation : uint8_t { GELU };

struct MLPSpec {
    size_t in_dim = 0;
    size_t hidden_dim = 256;
    size_t out_dim = 0;
    size_t num_hidden_layers = 2;
    Activation activation = Activation::GELU;

    size_t num_linear() const { return num_hidden_layers + 1; }

    size_t layer_in(size_t i) const { return i == 0 ? in_dim : hidden_dim; }
    size_t layer_out(size_t i) const { return i + 1 == num_linear() ? out_dim : hidden_dim; }
};

struct AttentionSpec {
    size_t model_dim = 256;
    size_t num_heads = 8;
    double dropout_rate = 0.1;

    size_t head_dim() const {
        if (num_heads == 0 || model_dim % num_heads != 0)
            throw std::invalid_argument("AttentionSpec: num_heads must divide model_dim");
        return model_dim / num_heads;
    }
};

// Ordered name -> tensor map with a matching gradient per entry.
class ParamSet {
public:
    Tensor& add(const std::string& name, Tensor init) {
        if (index_.count(name)) throw std::invalid_argument("ParamSet: duplicate name " + name);
        index_[name] = names_.size();
        names_.push_back(name);
        grads_.emplace_back(init.shape);
        values_.push_back(std::move(init));
        return values_.back();
    }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    Tensor& value(const std::string& name) { return values_[idx(name)]; }
    const Tensor& value(const std::string& name) const { return values_[idx(name)]; }
    Tensor& grad(const std::string& name) { return grads_[idx(name)]; }
    const Tensor& grad(const std::string& name) const { return grads_[idx(name)]; }

    Tensor& value_at(size_t i) { return values_[i]; }
    const Tensor& value_at(size_t i) const { return values_[i]; }
    Tensor& grad_at(size_t i) { return grads_[i]; }
    const Tensor& grad_at(size_t i) const { return grads_[i]; }

    const std::vector<std::string>& names() const { return names_; }
    size_t count() const { return names_.size(); }

    size_t total_size() const {
        size_t n = 0;
        for (const Tensor& t : values_) n += t.size();
        return n;
    }

    void zero_grads() {
        for (Tensor& g : grads_) g.fill(0.0);
    }

    void scale_grads(double c) {
        for (Tensor& g : grads_)
            for (double& v : g.data) v *= c;
    }

    bool values_finite() const {
        for (const Tensor& t : values_)
            if (!t.all_finite()) return false;
        return true;
    }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, size_t> index_;
    std::vector<Tensor> values_;
    std::vector<Tensor> grads_;

    size_t idx(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::invalid_argument("ParamSet: unknown name " + name);
        return it->second;
    }
};

// One tape node per parameter per tape, accumulating into the ParamSet grad.
class ParamBinding {
public:
    ParamBinding(Tape& tape, ParamSet& params) : tape_(tape), params_(params) {}

    Var operator()(const std::string& name) {
        auto it = cache_.find(name);
        if (it != cache_.end()) return it->second;
        Var v = tape_.external(&params_.value(name), &params_.grad(name));
        cache_[name] = v;
        return v;
    }

private:
    Tape& tape_;
    ParamSet& params_;
    std::unordered_map<std::string, Var> cache_;
};

// ---- initialization ----

// Glorot-uniform weights, zero biases.
inline Tensor glorot_uniform(size_t fan_in, size_t fan_out, RngStream& rng) {
    Tensor w = Tensor::zeros(fan_in, fan_out);
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : w.data) v = rng.uniform(-limit, limit);
    return w;
}

inline void init_mlp(ParamSet& ps, const std::string& prefix, const MLPSpec& spec,
                     RngStream& rng) {
    if (spec.in_dim == 0 || spec.out_dim == 0 || spec.hidden_dim == 0)
        throw std::invalid_argument("init_mlp: dimensions must be positive");
    for (size_t i = 0; i < spec.num_linear(); ++i) {
        ps.add(prefix + ".w" + std::to_string(i), glorot_uniform(spec.layer_in(i), spec.layer_out(i), rng));
        ps.add(prefix + ".b" + std::to_string(i), Tensor::zeros(1, spec.layer_out(i)));
    }
}

// No key bias: softmax is invariant to a per-row constant shift of the
// scores, so a key bias would be an inert parameter.
inline void init_attention(ParamSet& ps, const std::string& prefix, const AttentionSpec& spec,
                           RngStream& rng) {
    const size_t d = spec.model_dim;
    for (const char* part : {"wq", "wk", "wv", "wo"}) ps.add(prefix + "." + part, glorot_uniform(d, d, rng));
    for (const char* part : {"bq", "bv", "bo"}) ps.add(prefix + "." + part, Tensor::zeros(1, d));
}

// single linear map, no bias
inline void init_linear_nobias(ParamSet& ps, const std::string& name, size_t in_dim,
                               size_t out_dim, RngStream& rng) {
    ps.add(name, glorot_uniform(in_dim, out_dim, rng));
}

// ---- MLP forward ----

inline Var mlp_forward(Tape& tape, const MLPSpec& spec, ParamBinding& p,
                       const std::string& prefix, Var x) {
    const Tensor& tx = tape.value(x);
    if (tx.cols() != spec.in_dim)
        throw std::invalid_argument("mlp_forward: input cols " + std::to_string(tx.cols()) +
                                    " != " + prefix + " in_dim " + std::to_string(spec.in_dim));
    Var h = x;
    for (size_t i = 0; i < spec.num_linear(); ++i) {
        h = tape.add_rowvec(tape.matmul(h, p(prefix + ".w" + std::to_string(i))),
                            p(prefix + ".b" + std::to_string(i)));
        if (i + 1 < spec.num_linear()) h = tape.gelu_op(h);
    }
    return h;
}

inline Tensor mlp_forward_eval(const MLPSpec& spec, const ParamSet& ps, const std::string& prefix,
                               const Tensor& x) {
    if (x.cols() != spec.in_dim)
        throw std::invalid_argument("mlp_forward: input cols " + std::to_string(x.cols()) +
                                    " != " + prefix + " in_dim " + std::to_string(spec.in_dim));
    Tensor h = x;
    for (size_t i = 0; i < spec.num_linear(); ++i) {
        const Tensor& w = ps.value(prefix + ".w" + std::to_string(i));
        const Tensor& b = ps.value(prefix + ".b" + std::to_string(i));
        Tensor out = Tensor::zeros(h.rows(), w.cols());
        matmul_acc(h.data.data(), w.data.data(), out.data.data(), h.rows(), h.cols(), w.cols());
        for (size_t r = 0; r < out.rows(); ++r)
            for (size_t c = 0; c < out.cols(); ++c) out.at(r, c) += b.data[c];
        if (i + 1 < spec.num_linear())
            for (double& v : out.data) v = gelu(v);
        h = std::move(out);
    }
    return h;
}

// ---- multi-head self-attention ----
//
// Standard scaled dot-product attention over a set or sequence of rows.
// Dropout (train mode only) is applied to the attention weights. A causal
// mask restricts row i to keys 0..i.

inline std::vector<uint8_t> causal_mask(size_t n) {
    std::vector<uint8_t> allow(n * n, 0);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j <= i; ++j) allow[i * n + j] = 1;
    return allow;
}

// Lexicographic order of matrix rows. Set attention canonicalizes its input
// with this so that permuting the rows permutes the output bit-exactly
// (float reductions otherwise pick up order-dependent rounding).
inline std::vector<uint32_t> row_sort_order(const Tensor& t) {
    std::vector<uint32_t> order(t.rows());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<uint32_t>(i);
    const size_t m = t.cols();
    std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
        const double* ra = t.data.data() + a * m;
        const double* rb = t.data.data() + b * m;
        for (size_t j = 0; j < m; ++j) {
            if (ra[j] < rb[j]) return true;
            if (ra[j] > rb[j]) return false;
        }
        return a < b;
    });
    return order;
}

inline bool is_identity_order(const std::vector<uint32_t>& order) {
    for (size_t i = 0; i < order.size(); ++i)
        if (order[i] != i) return false;
    return true;
}

inline Var attention_forward(Tape& tape, const AttentionSpec& spec, ParamBinding& p,
                             const std::string& prefix, Var seq, bool train_mode, bool causal,
                             RngStream* dropout_rng) {
    const Tensor& ts = tape.value(seq);
    if (ts.rows() == 0) throw std::invalid_argument("attention: empty input set");
    if (ts.cols() != spec.model_dim)
        throw std::invalid_argument("attention: input cols " + std::to_string(ts.cols()) +
                                    " != model_dim " + std::to_string(spec.model_dim));
    const size_t n = ts.rows(), dh = spec.head_dim();
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

    std::vector<uint32_t> unsort;
    if (!causal) {
        std::vector<uint32_t> order = row_sort_order(ts);
        if (!is_identity_order(order)) {
            unsort.resize(n);
            for (size_t i = 0; i < n; ++i) unsort[order[i]] = static_cast<uint32_t>(i);
            seq = tape.gather_rows(seq, order);
        }
    }

    Var q = tape.add_rowvec(tape.matmul(seq, p(prefix + ".wq")), p(prefix + ".bq"));
    Var k = tape.matmul(seq, p(prefix + ".wk"));
    Var v = tape.add_rowvec(tape.matmul(seq, p(prefix + ".wv")), p(prefix + ".bv"));

    std::vector<Var> heads;
    heads.reserve(spec.num_heads);
    for (size_t h = 0; h < spec.num_heads; ++h) {
        Var qh = tape.slice_cols(q, h * dh, (h + 1) * dh);
        Var kh = tape.slice_cols(k, h * dh, (h + 1) * dh);
        Var vh = tape.slice_cols(v, h * dh, (h + 1) * dh);
        Var scores = tape.scale(tape.matmul_nt(qh, kh), inv_sqrt_dh);
        Var probs = causal ? tape.masked_softmax_rows(scores, causal_mask(n))
                           : tape.softmax_rows(scores);
        if (train_mode && spec.dropout_rate > 0.0) {
            if (!dropout_rng)
                throw std::invalid_argument("attention: train mode with dropout needs an rng");
            probs = tape.dropout(probs, spec.dropout_rate, *dropout_rng);
        }
        heads.push_back(tape.matmul(probs, vh));
    }
    Var merged = tape.concat_cols(heads);
    Var out = tape.add_rowvec(tape.matmul(merged, p(prefix + ".wo")), p(prefix + ".bo"));
    if (!unsort.empty()) out = tape.gather_rows(out, unsort);
    return out;
}

// Spec-facing wrapper: plain permutation-equivariant set attention.
inline Var multihead_attention(Tape& tape, const AttentionSpec& spec, ParamBinding& p,
                               const std::string& prefix, Var seq, bool train_mode,
                               RngStream* dropout_rng = nullptr) {
    return attention_forward(tape, spec, p, prefix, seq, train_mode, false, dropout_rng);
}

inline Tensor attention_forward_eval(const AttentionSpec& spec, const ParamSet& ps,
                                     const std::string& prefix, const Tensor& seq_in,
                                     bool causal) {
    if (seq_in.rows() == 0) throw std::invalid_argument("attention: empty input set");
    if (seq_in.cols() != spec.model_dim)
        throw std::invalid_argument("attention: input cols " + std::to_string(seq_in.cols()) +
                                    " != model_dim " + std::to_string(spec.model_dim));
    const size_t n = seq_in.rows(), d = spec.model_dim, dh = spec.head_dim();
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

    std::vector<uint32_t> order;
    Tensor sorted;
    const Tensor* seq_ptr = &seq_in;
    if (!causal) {
        order = row_sort_order(seq_in);
        if (!is_identity_order(order)) {
            sorted = Tensor::zeros(n, d);
            for (size_t i = 0; i < n; ++i)
                for (size_t j = 0; j < d; ++j) sorted.at(i, j) = seq_in.at(order[i], j);
            seq_ptr = &sorted;
        } else {
            order.clear();
        }
    }
    const Tensor& seq = *seq_ptr;

    auto proj = [&](const char* wname, const char* bname) {
        const Tensor& w = ps.value(prefix + "." + wname);
        Tensor out = Tensor::zeros(n, d);
        matmul_acc(seq.data.data(), w.data.data(), out.data.data(), n, d, d);
        if (bname) {
            const Tensor& b = ps.value(prefix + "." + bname);
            for (size_t i = 0; i < n; ++i)
                for (size_t j = 0; j < d; ++j) out.at(i, j) += b.data[j];
        }
        return out;
    };
    Tensor q = proj("wq", "bq"), k = proj("wk", nullptr), v = proj("wv", "bv");

    Tensor merged = Tensor::zeros(n, d);
    Tensor scores = Tensor::zeros(n, n);
    for (size_t h = 0; h < spec.num_heads; ++h) {
        const size_t off = h * dh;
        scores.fill(0.0);
        for (size_t i = 0; i < n; ++i) {
            const size_t jmax = causal ? i + 1 : n;
            for (size_t j = 0; j < jmax; ++j) {
                double acc = 0.0;
                for (size_t c = 0; c < dh; ++c) acc += q.at(i, off + c) * k.at(j, off + c);
                scores.at(i, j) = acc * inv_sqrt_dh;
            }
            // stable softmax over the allowed prefix
            double mx = scores.at(i, 0);
            for (size_t j = 1; j < jmax; ++j) mx = std::max(mx, scores.at(i, j));
            double sum = 0.0;
            for (size_t j = 0; j < jmax; ++j) {
                scores.at(i, j) = std::exp(scores.at(i, j) - mx);
                sum += scores.at(i, j);
            }
            for (size_t j = 0; j < jmax; ++j) scores.at(i, j) /= sum;
            for (size_t j = jmax; j < n; ++j) scores.at(i, j) = 0.0;
        }
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < n; ++j) {
                const double pij = scores.at(i, j);
                if (pij == 0.0) continue;
                for (size_t c = 0; c < dh; ++c) merged.at(i, off + c) += pij * v.at(j, off + c);
            }
    }

    const Tensor& wo = ps.value(prefix + ".wo");
    const Tensor& bo = ps.value(prefix + ".bo");
    Tensor out = Tensor::zeros(n, d);
    matmul_acc(merged.data.data(), wo.data.data(), out.data.data(), n, d, d);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < d; ++j) out.at(i, j) += bo.data[j];
    if (!order.empty()) {
        Tensor unsorted = Tensor::zeros(n, d);
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < d; ++j) unsorted.at(order[i], j) = out.at(i, j);
        return unsorted;
    }
    return out;
}

}  // namespace prefnp
