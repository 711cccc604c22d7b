#pragma once
// The three reward models: unconditional BTL, distributional DPL, and the
// conditional NP-BTL with a permutation-invariant context encoder. The
// encoder is shared with the policy module (same latent pathway).
//
// Two encoder variants sit behind one interface:
//   mean      z = outer( mean_j inner(w_j || l_j) )
//   attention z = outer( sum_j MultiHeadAttn(W [w_j || l_j]) )
// An empty context aggregates to the zero vector before the outer network.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "nn.hpp"
#include "synthdata.hpp"
#include "tape.hpp"

namespace prefnp {

inline double btl_prob(double r1, double r2) { return sigmoid(r1 - r2); }

inline double dpl_prob(double mu1, double sigma1, double mu2, double sigma2) {
    if (sigma1 <= 0.0 || sigma2 <= 0.0) throw std::invalid_argument("dpl_prob: sigmas must be positive");
    return normal_cdf((mu1 - mu2) / std::sqrt(sigma1 * sigma1 + sigma2 * sigma2));
}

enum class EncoderVariant { mean, attention };

inline std::string encoder_variant_name(EncoderVariant v) {
    return v == EncoderVariant::mean ? "mean" : "attention";
}

inline EncoderVariant encoder_variant_from(const std::string& s) {
    if (s == "mean") return EncoderVariant::mean;
    if (s == "attention") return EncoderVariant::attention;
    throw std::invalid_argument("unknown encoder variant " + s);
}

struct NPEncoderSpec {
    size_t input_dim = 0;  // per-option feature dimension
    size_t embed_dim = 256;
    EncoderVariant variant = EncoderVariant::mean;
    size_t attn_heads = 8;
    double attn_dropout = 0.1;
    // train-time dropout on the per-pair inner representations (mean variant);
    // small contexts cannot average the noise away, so the decoder learns to
    // lean on them less than on large ones
    double inner_dropout = 0.0;
    // train-time dropout of whole context pairs (mean variant): slows how
    // fast the model learns to trust a single pair while leaving large
    // contexts nearly untouched
    double context_dropout = 0.0;

    MLPSpec inner_mlp() const { return {2 * input_dim, embed_dim, embed_dim, 2}; }
    MLPSpec outer_mlp() const { return {embed_dim, embed_dim, embed_dim, 2}; }
    AttentionSpec attn() const { return {embed_dim, attn_heads, attn_dropout}; }
};

inline void init_np_encoder(ParamSet& ps, const std::string& prefix, const NPEncoderSpec& spec,
                            RngStream& rng) {
    if (spec.variant == EncoderVariant::mean) {
        init_mlp(ps, prefix + ".inner", spec.inner_mlp(), rng);
    } else {
        init_linear_nobias(ps, prefix + ".inproj", 2 * spec.input_dim, spec.embed_dim, rng);
        init_attention(ps, prefix + ".attn", spec.attn(), rng);
    }
    init_mlp(ps, prefix + ".outer", spec.outer_mlp(), rng);
}

// Context pairs as rows of [winner || loser], canonically sorted. Sorting
// makes the float reductions independent of context order, so permutation
// invariance holds bit-exactly; duplicate grouping (mean variant) makes
// duplication exact too.
inline Tensor context_matrix(const std::vector<PreferencePair>& context, size_t input_dim) {
    Tensor x = Tensor::zeros(context.size(), 2 * input_dim);
    for (size_t i = 0; i < context.size(); ++i) {
        const PreferencePair& pr = context[i];
        if (pr.winner.dim() != input_dim || pr.loser.dim() != input_dim)
            throw std::invalid_argument("encode_context: pair feature dim does not match model");
        for (size_t j = 0; j < input_dim; ++j) {
            x.at(i, j) = pr.winner.features[j];
            x.at(i, input_dim + j) = pr.loser.features[j];
        }
    }
    std::vector<uint32_t> order = row_sort_order(x);
    Tensor sorted = Tensor::zeros(x.rows(), x.cols());
    for (size_t i = 0; i < order.size(); ++i)
        for (size_t j = 0; j < x.cols(); ++j) sorted.at(i, j) = x.at(order[i], j);
    return sorted;
}

struct GroupedRows {
    Tensor unique_rows;           // (g, d)
    std::vector<double> counts;   // multiplicity per unique row
};

inline GroupedRows group_rows(const Tensor& sorted) {
    GroupedRows g;
    const size_t n = sorted.rows(), m = sorted.cols();
    std::vector<size_t> firsts;
    for (size_t i = 0; i < n; ++i) {
        const bool same = i > 0 && std::equal(sorted.data.begin() + i * m,
                                              sorted.data.begin() + (i + 1) * m,
                                              sorted.data.begin() + (i - 1) * m);
        if (same) {
            g.counts.back() += 1.0;
        } else {
            firsts.push_back(i);
            g.counts.push_back(1.0);
        }
    }
    g.unique_rows = Tensor::zeros(firsts.size(), m);
    for (size_t i = 0; i < firsts.size(); ++i)
        for (size_t j = 0; j < m; ++j) g.unique_rows.at(i, j) = sorted.at(firsts[i], j);
    return g;
}

inline Var encode_context_tape(Tape& tape, ParamBinding& p, const std::string& prefix,
                               const NPEncoderSpec& spec,
                               const std::vector<PreferencePair>& context, bool train_mode,
                               RngStream* dropout_rng) {
    Var aggregate;
    if (context.empty()) {
        aggregate = tape.leaf(Tensor::zeros(1, spec.embed_dim));
    } else if (spec.variant == EncoderVariant::mean) {
        GroupedRows g = group_rows(context_matrix(context, spec.input_dim));
        const size_t n_unique = g.unique_rows.rows();
        Var rows = tape.leaf(std::move(g.unique_rows));
        Var encoded = mlp_forward(tape, spec.inner_mlp(), p, prefix + ".inner", rows);
        if (train_mode && (spec.inner_dropout > 0.0 || spec.context_dropout > 0.0)) {
            if (!dropout_rng)
                throw std::invalid_argument("encode_context: train mode with dropout needs an rng");
            if (spec.inner_dropout > 0.0)
                encoded = tape.dropout(encoded, spec.inner_dropout, *dropout_rng);
            if (spec.context_dropout > 0.0) {
                // one inverted-scaling mask per pair, constant across features
                const double keep = 1.0 - spec.context_dropout;
                Tensor mask = Tensor::zeros(n_unique, spec.embed_dim);
                for (size_t i = 0; i < n_unique; ++i) {
                    const double v = dropout_rng->uniform() < keep ? 1.0 / keep : 0.0;
                    for (size_t j = 0; j < spec.embed_dim; ++j) mask.at(i, j) = v;
                }
                encoded = tape.mul(encoded, tape.leaf(std::move(mask)));
            }
        }
        Var weights = tape.leaf(Tensor::row(g.counts));  // (1, g)
        aggregate = tape.scale(tape.matmul(weights, encoded), 1.0 / static_cast<double>(context.size()));
    } else {
        Var rows = tape.leaf(context_matrix(context, spec.input_dim));
        Var projected = tape.matmul(rows, p(prefix + ".inproj"));
        Var attended = attention_forward(tape, spec.attn(), p, prefix + ".attn", projected,
                                         train_mode, false, dropout_rng);
        aggregate = tape.sum_rows(attended);
    }
    return mlp_forward(tape, spec.outer_mlp(), p, prefix + ".outer", aggregate);
}

inline Tensor encode_context_eval(const ParamSet& ps, const std::string& prefix,
                                  const NPEncoderSpec& spec,
                                  const std::vector<PreferencePair>& context) {
    Tensor aggregate = Tensor::zeros(1, spec.embed_dim);
    if (!context.empty()) {
        if (spec.variant == EncoderVariant::mean) {
            GroupedRows g = group_rows(context_matrix(context, spec.input_dim));
            Tensor encoded = mlp_forward_eval(spec.inner_mlp(), ps, prefix + ".inner", g.unique_rows);
            const double inv = 1.0 / static_cast<double>(context.size());
            for (size_t i = 0; i < encoded.rows(); ++i)
                for (size_t j = 0; j < spec.embed_dim; ++j)
                    aggregate.data[j] += g.counts[i] * encoded.at(i, j);
            for (double& v : aggregate.data) v *= inv;
        } else {
            Tensor rows = context_matrix(context, spec.input_dim);
            const Tensor& w = ps.value(prefix + ".inproj");
            Tensor projected = Tensor::zeros(rows.rows(), spec.embed_dim);
            matmul_acc(rows.data.data(), w.data.data(), projected.data.data(), rows.rows(),
                       rows.cols(), spec.embed_dim);
            Tensor attended = attention_forward_eval(spec.attn(), ps, prefix + ".attn", projected, false);
            for (size_t i = 0; i < attended.rows(); ++i)
                for (size_t j = 0; j < spec.embed_dim; ++j) aggregate.data[j] += attended.at(i, j);
        }
    }
    return mlp_forward_eval(spec.outer_mlp(), ps, prefix + ".outer", aggregate);
}

// ---- model definitions ----

struct BTLModel {
    MLPSpec net;  // input_dim -> 1
    ParamSet params;
};

struct DPLModel {
    MLPSpec net;  // input_dim -> (mu, log_sigma)
    ParamSet params;
};

struct NPBTLModel {
    NPEncoderSpec enc;
    ParamSet params;

    MLPSpec dec_embed() const { return {enc.input_dim, enc.embed_dim, enc.embed_dim, 2}; }
    MLPSpec dec_head() const { return {2 * enc.embed_dim, enc.embed_dim, 1, 2}; }
};

inline BTLModel make_btl(size_t input_dim, uint64_t seed) {
    BTLModel m;
    m.net = {input_dim, 256, 1, 2};
    RngStream rng = RngStream::derive(seed, "init.btl");
    init_mlp(m.params, "net", m.net, rng);
    return m;
}

inline DPLModel make_dpl(size_t input_dim, uint64_t seed) {
    DPLModel m;
    m.net = {input_dim, 256, 2, 2};
    RngStream rng = RngStream::derive(seed, "init.dpl");
    init_mlp(m.params, "net", m.net, rng);
    return m;
}

inline NPBTLModel make_np_btl(const NPEncoderSpec& enc, uint64_t seed) {
    NPBTLModel m;
    m.enc = enc;
    RngStream rng = RngStream::derive(seed, "init.np_btl");
    init_np_encoder(m.params, "enc", enc, rng);
    init_mlp(m.params, "dec.embed", m.dec_embed(), rng);
    init_mlp(m.params, "dec.head", m.dec_head(), rng);
    return m;
}

// options as rows
inline Tensor options_matrix(const std::vector<PreferencePair>& pairs) {
    if (pairs.empty()) throw std::invalid_argument("options_matrix: no pairs");
    const size_t d = pairs[0].winner.dim();
    const size_t n = pairs.size();
    Tensor y = Tensor::zeros(2 * n, d);
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < d; ++j) {
            y.at(i, j) = pairs[i].winner.features[j];
            y.at(n + i, j) = pairs[i].loser.features[j];
        }
    }
    return y;
}

// conditional rewards for a batch of options under one context embedding
inline Var np_btl_rewards_tape(Tape& tape, ParamBinding& p, const NPBTLModel& model, Var options,
                               Var z) {
    Var e = mlp_forward(tape, model.dec_embed(), p, "dec.embed", options);
    Var zrep = tape.repeat_row(z, tape.value(options).rows());
    return mlp_forward(tape, model.dec_head(), p, "dec.head", tape.concat_cols(e, zrep));
}

inline Tensor np_btl_rewards_eval(const NPBTLModel& model, const Tensor& options, const Tensor& z) {
    Tensor e = mlp_forward_eval(model.dec_embed(), model.params, "dec.embed", options);
    Tensor cat = Tensor::zeros(e.rows(), 2 * model.enc.embed_dim);
    for (size_t i = 0; i < e.rows(); ++i) {
        for (size_t j = 0; j < model.enc.embed_dim; ++j) {
            cat.at(i, j) = e.at(i, j);
            cat.at(i, model.enc.embed_dim + j) = z.data[j];
        }
    }
    return mlp_forward_eval(model.dec_head(), model.params, "dec.head", cat);
}

inline Tensor encode_context(const NPBTLModel& model, const std::vector<PreferencePair>& context) {
    return encode_context_eval(model.params, "enc", model.enc, context);
}

inline double np_btl_prob(const NPBTLModel& model, const OptionVec& y1, const OptionVec& y2,
                          const std::vector<PreferencePair>& context) {
    const Tensor z = encode_context(model, context);
    Tensor options = Tensor::zeros(2, model.enc.input_dim);
    if (y1.dim() != model.enc.input_dim || y2.dim() != model.enc.input_dim)
        throw std::invalid_argument("np_btl_prob: option dim does not match model");
    for (size_t j = 0; j < model.enc.input_dim; ++j) {
        options.at(0, j) = y1.features[j];
        options.at(1, j) = y2.features[j];
    }
    const Tensor r = np_btl_rewards_eval(model, options, z);
    return btl_prob(r.data[0], r.data[1]);
}

// ---- per-task losses (negative log-likelihood over all target pairs) ----

inline Var np_btl_task_loss_tape(Tape& tape, NPBTLModel& model, const Task& task, bool train_mode,
                                 RngStream* dropout_rng) {
    ParamBinding p(tape, model.params);
    Var z = encode_context_tape(tape, p, "enc", model.enc, task.context, train_mode, dropout_rng);
    Var options = tape.leaf(options_matrix(task.target));
    Var r = np_btl_rewards_tape(tape, p, model, options, z);
    const size_t n = task.target.size();
    Var diff = tape.sub(tape.slice_rows(r, 0, n), tape.slice_rows(r, n, 2 * n));
    return tape.scale(tape.sum_all(tape.logsigmoid_op(diff)), -1.0);
}

inline double np_btl_task_loss_eval(const NPBTLModel& model, const Task& task) {
    const Tensor z = encode_context(model, task.context);
    const Tensor r = np_btl_rewards_eval(model, options_matrix(task.target), z);
    const size_t n = task.target.size();
    double loss = 0.0;
    for (size_t i = 0; i < n; ++i) loss -= log_sigmoid(r.data[i] - r.data[n + i]);
    return loss;
}

inline Var btl_task_loss_tape(Tape& tape, BTLModel& model, const Task& task) {
    ParamBinding p(tape, model.params);
    Var options = tape.leaf(options_matrix(task.target));
    Var r = mlp_forward(tape, model.net, p, "net", options);
    const size_t n = task.target.size();
    Var diff = tape.sub(tape.slice_rows(r, 0, n), tape.slice_rows(r, n, 2 * n));
    return tape.scale(tape.sum_all(tape.logsigmoid_op(diff)), -1.0);
}

inline double btl_task_loss_eval(const BTLModel& model, const Task& task) {
    const Tensor r = mlp_forward_eval(model.net, model.params, "net", options_matrix(task.target));
    const size_t n = task.target.size();
    double loss = 0.0;
    for (size_t i = 0; i < n; ++i) loss -= log_sigmoid(r.data[i] - r.data[n + i]);
    return loss;
}

inline Var dpl_task_loss_tape(Tape& tape, DPLModel& model, const Task& task) {
    ParamBinding p(tape, model.params);
    Var options = tape.leaf(options_matrix(task.target));
    Var out = mlp_forward(tape, model.net, p, "net", options);
    const size_t n = task.target.size();
    Var mu = tape.slice_cols(out, 0, 1);
    Var sigma = tape.exp_op(tape.slice_cols(out, 1, 2));
    Var mu_d = tape.sub(tape.slice_rows(mu, 0, n), tape.slice_rows(mu, n, 2 * n));
    Var var_sum = tape.add(tape.mul(tape.slice_rows(sigma, 0, n), tape.slice_rows(sigma, 0, n)),
                           tape.mul(tape.slice_rows(sigma, n, 2 * n), tape.slice_rows(sigma, n, 2 * n)));
    Var zscore = tape.div(mu_d, tape.sqrt_op(var_sum));
    Var prob = tape.clamp_min(tape.normal_cdf_op(zscore), 1e-12);
    return tape.scale(tape.sum_all(tape.log_op(prob)), -1.0);
}

inline double dpl_task_loss_eval(const DPLModel& model, const Task& task) {
    const Tensor out = mlp_forward_eval(model.net, model.params, "net", options_matrix(task.target));
    const size_t n = task.target.size();
    double loss = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double mu_w = out.at(i, 0), mu_l = out.at(n + i, 0);
        const double s_w = std::exp(out.at(i, 1)), s_l = std::exp(out.at(n + i, 1));
        loss -= std::log(std::max(dpl_prob(mu_w, s_w, mu_l, s_l), 1e-12));
    }
    return loss;
}

inline std::pair<double, double> dpl_predict(const DPLModel& model, const OptionVec& y) {
    Tensor row = Tensor::zeros(1, y.dim());
    for (size_t j = 0; j < y.dim(); ++j) row.at(0, j) = y.features[j];
    const Tensor out = mlp_forward_eval(model.net, model.params, "net", row);
    return {out.at(0, 0), std::exp(out.at(0, 1))};
}

}  // namespace prefnp
