#pragma once
// Synthetic heterogeneous-preference populations: latent reward families,
// deterministic pair labeling, conflict-rate control, pair pools and
// (context, target) task sampling.

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "io_util.hpp"
#include "rng.hpp"

namespace prefnp {

// thrown when a deterministic choice rule hits an exact reward tie;
// callers resample (ties are measure-zero under every generator here)
struct TieError : std::runtime_error {
    TieError() : std::runtime_error("exact reward tie") {}
};

struct OptionVec {
    std::vector<double> features;

    size_t dim() const { return features.size(); }
};

struct PreferencePair {
    OptionVec winner;
    OptionVec loser;
};

struct LatentGroundTruth {
    enum class Kind { discrete, simplex };
    Kind kind = Kind::discrete;
    size_t mode = 0;               // discrete value
    std::vector<double> weights;   // simplex weights, nonnegative, sum 1

    static LatentGroundTruth discrete(size_t k) { return {Kind::discrete, k, {}}; }
    static LatentGroundTruth simplex(std::vector<double> w) {
        return {Kind::simplex, 0, std::move(w)};
    }
};

enum class RewardFamily { piecewise1d, gaussian2d, kmode, dirichlet };

inline std::string family_name(RewardFamily f) {
    switch (f) {
        case RewardFamily::piecewise1d: return "piecewise1d";
        case RewardFamily::gaussian2d: return "gaussian2d";
        case RewardFamily::kmode: return "kmode";
        case RewardFamily::dirichlet: return "dirichlet";
    }
    return "?";
}

struct LatentDist {
    enum class Kind { bernoulli, uniform_discrete, point, dirichlet };
    Kind kind = Kind::bernoulli;
    double p = 0.5;                // bernoulli
    size_t k = 2;                  // uniform_discrete
    size_t point = 0;              // point mass
    std::vector<double> alpha;     // dirichlet

    LatentGroundTruth sample(RngStream& rng) const {
        switch (kind) {
            case Kind::bernoulli:
                return LatentGroundTruth::discrete(rng.bernoulli(p) ? 1 : 0);
            case Kind::uniform_discrete:
                return LatentGroundTruth::discrete(static_cast<size_t>(rng.below(k)));
            case Kind::point:
                return LatentGroundTruth::discrete(point);
            case Kind::dirichlet:
                return LatentGroundTruth::simplex(rng.dirichlet(alpha));
        }
        throw std::logic_error("LatentDist: bad kind");
    }
};

struct PopulationSpec {
    RewardFamily family = RewardFamily::piecewise1d;
    double rho = 0.0;              // gaussian2d correlation
    size_t k = 2;                  // number of reward modes / simplex dimension
    size_t feature_dim = 2;        // kmode / dirichlet option dimension
    double score_noise = 0.0;      // kmode: feature corruption of the score coords
    LatentDist latent_dist;
    std::optional<double> conflict_filter;
    size_t n_train = 10000;
    size_t n_val = 5000;
    size_t n_test = 5000;

    size_t latent_count() const {
        switch (family) {
            case RewardFamily::piecewise1d:
            case RewardFamily::gaussian2d: return 2;
            case RewardFamily::kmode:
            case RewardFamily::dirichlet: return k;
        }
        return 0;
    }

    size_t option_dim() const {
        switch (family) {
            case RewardFamily::piecewise1d: return 1;
            case RewardFamily::gaussian2d: return 2;
            case RewardFamily::kmode:
            case RewardFamily::dirichlet: return feature_dim;
        }
        return 0;
    }

    void validate() const {
        if (family == RewardFamily::gaussian2d && std::fabs(rho) > 1.0)
            throw std::invalid_argument("PopulationSpec: |rho| must be <= 1");
        if ((family == RewardFamily::kmode || family == RewardFamily::dirichlet) &&
            (k < 2 || feature_dim < k))
            throw std::invalid_argument("PopulationSpec: need k >= 2 and feature_dim >= k");
        if (family == RewardFamily::kmode && k > 3)
            throw std::invalid_argument("PopulationSpec: kmode supports k in {2,3}");
        if (conflict_filter && (*conflict_filter < 0.0 || *conflict_filter > 1.0))
            throw std::invalid_argument("PopulationSpec: conflict_filter must be in [0,1]");
        if (n_train == 0 || n_val == 0 || n_test == 0)
            throw std::invalid_argument("PopulationSpec: pool sizes must be positive");
    }
};

struct TaskConfig {
    size_t nc_min = 0;
    size_t nc_max = 10;
    size_t n_target = 20;

    void validate() const {
        if (!(nc_min <= nc_max && nc_max <= n_target) || n_target == 0)
            throw std::invalid_argument("TaskConfig: need nc_min <= nc_max <= n_target");
    }
};

struct Task {
    LatentGroundTruth user_latent;
    std::vector<PreferencePair> context;   // the first context.size() target pairs
    std::vector<PreferencePair> target;
    std::vector<uint8_t> eval_mask;        // marks target pairs outside the context
    std::vector<uint32_t> target_ids;      // pool record ids, for the task log
};

// ---- reward functions ----

// Example reward with a hidden disagreement region above 0.5: below the
// threshold both user types score the option by its value; above it type 0
// scores 2y and type 1 scores 1-y.
inline double reward_piecewise(const OptionVec& y, size_t z) {
    if (y.dim() != 1 || y.features[0] < -1.0 || y.features[0] > 1.0)
        throw std::invalid_argument("reward_piecewise: option must be 1-dim in [-1,1]");
    if (z > 1) throw std::invalid_argument("reward_piecewise: z must be 0 or 1");
    const double v = y.features[0];
    if (v <= 0.5) return v;
    return z == 0 ? 2.0 * v : 1.0 - v;
}

// Weighted sum of the leading attribute scores; a discrete latent is the
// one-hot special case (a coordinate projection).
inline double reward_linear(const OptionVec& y, const LatentGroundTruth& z) {
    if (z.kind == LatentGroundTruth::Kind::discrete) {
        if (z.mode >= y.dim()) throw std::invalid_argument("reward_linear: mode exceeds feature dim");
        return y.features[z.mode];
    }
    if (z.weights.size() > y.dim())
        throw std::invalid_argument("reward_linear: more weights than features");
    double r = 0.0;
    for (size_t j = 0; j < z.weights.size(); ++j) r += z.weights[j] * y.features[j];
    return r;
}

inline double family_reward(RewardFamily family, const OptionVec& y,
                            const LatentGroundTruth& z) {
    if (family == RewardFamily::piecewise1d) {
        if (z.kind != LatentGroundTruth::Kind::discrete)
            throw std::invalid_argument("family_reward: piecewise needs a discrete latent");
        return reward_piecewise(y, z.mode);
    }
    return reward_linear(y, z);
}

inline PreferencePair label_pair(const OptionVec& y1, const OptionVec& y2,
                                 const LatentGroundTruth& z, RewardFamily family) {
    if (y1.dim() != y2.dim()) throw std::invalid_argument("label_pair: dimension mismatch");
    const double r1 = family_reward(family, y1, z);
    const double r2 = family_reward(family, y2, z);
    if (r1 == r2) throw TieError{};
    return r1 > r2 ? PreferencePair{y1, y2} : PreferencePair{y2, y1};
}

// Definition of a conflicting pair for two reward functions, generalized to
// the family's full reward set: conflicting iff the k modes do not all pick
// the same winner.
inline bool is_conflicting(const std::vector<double>& scores1, const std::vector<double>& scores2,
                           size_t modes) {
    bool first = false;
    for (size_t m = 0; m < modes; ++m) {
        if (scores1[m] == scores2[m]) throw TieError{};
        const bool win1 = scores1[m] > scores2[m];
        if (m == 0)
            first = win1;
        else if (win1 != first)
            return true;
    }
    return false;
}

inline bool is_conflicting(const OptionVec& y1, const OptionVec& y2, size_t mode0, size_t mode1) {
    const bool a = y1.features[mode0] > y2.features[mode0];
    const bool b = y1.features[mode1] > y2.features[mode1];
    if (y1.features[mode0] == y2.features[mode0] || y1.features[mode1] == y2.features[mode1])
        throw TieError{};
    return a != b;
}

// probability that a random bivariate-normal pair is conflicting
inline double conflict_rate_theoretical(double rho) {
    if (std::fabs(rho) > 1.0) throw std::invalid_argument("conflict_rate_theoretical: |rho| > 1");
    return 0.5 - std::asin(rho) / M_PI;
}

// ---- option sampling ----

// Options in [0,1] for the piecewise family (the disagreement region above
// 0.5 then covers half the support, which fixes the 75% no-context ceiling).
inline OptionVec sample_option_piecewise(RngStream& rng) { return {{rng.uniform()}}; }

inline OptionVec sample_option_gaussian2d(double rho, RngStream& rng) {
    const double a = rng.normal();
    const double b = rng.normal();
    return {{a, rho * a + std::sqrt(std::max(0.0, 1.0 - rho * rho)) * b}};
}

inline std::vector<OptionVec> sample_options(const PopulationSpec& spec, size_t n,
                                             RngStream& rng) {
    spec.validate();
    if (n == 0) throw std::invalid_argument("sample_options: n must be >= 1");
    std::vector<OptionVec> out;
    out.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        switch (spec.family) {
            case RewardFamily::piecewise1d:
                out.push_back(sample_option_piecewise(rng));
                break;
            case RewardFamily::gaussian2d:
                out.push_back(sample_option_gaussian2d(spec.rho, rng));
                break;
            case RewardFamily::kmode:
            case RewardFamily::dirichlet: {
                OptionVec y;
                y.features.resize(spec.feature_dim);
                for (double& v : y.features) v = rng.normal();
                out.push_back(std::move(y));
                break;
            }
        }
    }
    return out;
}

// ---- pair pools ----

// Unlabeled option pair. Generating attribute scores are stored only when
// they cannot be read back off the features (kmode with score_noise > 0);
// labeling always uses the generating scores.
struct PairRecord {
    OptionVec y1, y2;
    std::vector<double> s1, s2;

    bool has_scores() const { return !s1.empty(); }
};

struct PairPool {
    PopulationSpec spec;
    std::vector<PairRecord> train, val, test;

    const std::vector<PairRecord>& split(std::string_view name) const {
        if (name == "train") return train;
        if (name == "val") return val;
        if (name == "test") return test;
        throw std::invalid_argument("PairPool: unknown split");
    }
};

inline double record_reward(const PopulationSpec& spec, const PairRecord& rec, bool first,
                            const LatentGroundTruth& z) {
    const OptionVec& y = first ? rec.y1 : rec.y2;
    if (spec.family == RewardFamily::piecewise1d) return reward_piecewise(y, z.mode);
    if (!rec.has_scores()) return reward_linear(y, z);
    const std::vector<double>& s = first ? rec.s1 : rec.s2;
    if (z.kind == LatentGroundTruth::Kind::discrete) return s[z.mode];
    double r = 0.0;
    for (size_t j = 0; j < z.weights.size(); ++j) r += z.weights[j] * s[j];
    return r;
}

inline bool record_conflicting(const PopulationSpec& spec, const PairRecord& rec) {
    const size_t modes = spec.latent_count();
    if (spec.family == RewardFamily::piecewise1d) {
        bool first = false;
        for (size_t m = 0; m < modes; ++m) {
            const double r1 = reward_piecewise(rec.y1, m);
            const double r2 = reward_piecewise(rec.y2, m);
            if (r1 == r2) throw TieError{};
            const bool win1 = r1 > r2;
            if (m == 0)
                first = win1;
            else if (win1 != first)
                return true;
        }
        return false;
    }
    if (rec.has_scores()) return is_conflicting(rec.s1, rec.s2, modes);
    return is_conflicting(rec.y1.features, rec.y2.features, modes);
}

inline PairRecord sample_pair_record(const PopulationSpec& spec, RngStream& rng) {
    PairRecord rec;
    switch (spec.family) {
        case RewardFamily::piecewise1d:
            rec.y1 = sample_option_piecewise(rng);
            rec.y2 = sample_option_piecewise(rng);
            break;
        case RewardFamily::gaussian2d:
            rec.y1 = sample_option_gaussian2d(spec.rho, rng);
            rec.y2 = sample_option_gaussian2d(spec.rho, rng);
            break;
        case RewardFamily::kmode:
        case RewardFamily::dirichlet: {
            for (OptionVec* y : {&rec.y1, &rec.y2}) {
                y->features.resize(spec.feature_dim);
                for (double& v : y->features) v = rng.normal();
            }
            if (spec.score_noise > 0.0) {
                rec.s1.assign(rec.y1.features.begin(), rec.y1.features.begin() + spec.k);
                rec.s2.assign(rec.y2.features.begin(), rec.y2.features.begin() + spec.k);
                for (size_t j = 0; j < spec.k; ++j) {
                    rec.y1.features[j] += spec.score_noise * rng.normal();
                    rec.y2.features[j] += spec.score_noise * rng.normal();
                }
            }
            break;
        }
    }
    return rec;
}

// Draw a record whose conflict status matches `want`; bounded attempts so an
// infeasible filter (e.g. all-conflicting at rho = 1) fails with a message.
inline PairRecord sample_record_with_conflict(const PopulationSpec& spec, bool want,
                                              RngStream& rng) {
    for (int attempt = 0; attempt < 100000; ++attempt) {
        PairRecord rec = sample_pair_record(spec, rng);
        try {
            if (record_conflicting(spec, rec) == want) return rec;
        } catch (const TieError&) {
            continue;
        }
    }
    throw std::invalid_argument(
        "build_pool: conflict_filter infeasible for family " + family_name(spec.family) +
        " (wanted " + (want ? "conflicting" : "non-conflicting") + " pairs)");
}

inline std::vector<PairRecord> build_split(const PopulationSpec& spec, size_t n,
                                           RngStream& rng) {
    std::vector<PairRecord> recs;
    recs.reserve(n);
    if (!spec.conflict_filter) {
        for (size_t i = 0; i < n; ++i) {
            // resample ties so every pooled pair is strictly ordered under
            // every reward mode
            for (;;) {
                PairRecord rec = sample_pair_record(spec, rng);
                try {
                    (void)record_conflicting(spec, rec);
                    recs.push_back(std::move(rec));
                    break;
                } catch (const TieError&) {
                }
            }
        }
        return recs;
    }
    // exact-count construction: round(target * n) conflicting pairs, rest not
    const double target = *spec.conflict_filter;
    const size_t n_conf = static_cast<size_t>(std::llround(target * static_cast<double>(n)));
    for (size_t i = 0; i < n_conf; ++i) recs.push_back(sample_record_with_conflict(spec, true, rng));
    for (size_t i = n_conf; i < n; ++i)
        recs.push_back(sample_record_with_conflict(spec, false, rng));
    // shuffle so task subsets mix both kinds
    for (size_t i = recs.size(); i > 1; --i)
        std::swap(recs[i - 1], recs[rng.below(i)]);
    return recs;
}

inline PairPool build_pool(const PopulationSpec& spec, RngStream& rng) {
    spec.validate();
    PairPool pool;
    pool.spec = spec;
    pool.train = build_split(spec, spec.n_train, rng);
    pool.val = build_split(spec, spec.n_val, rng);
    pool.test = build_split(spec, spec.n_test, rng);
    return pool;
}

// ---- task sampling ----

inline Task sample_task(const std::vector<PairRecord>& split, const PopulationSpec& spec,
                        const TaskConfig& cfg, RngStream& rng,
                        std::optional<size_t> forced_nc = std::nullopt) {
    cfg.validate();
    if (split.size() < cfg.n_target)
        throw std::invalid_argument("sample_task: pool split smaller than n_target");

    Task task;
    task.user_latent = spec.latent_dist.sample(rng);
    const size_t nc = forced_nc ? *forced_nc : static_cast<size_t>(rng.uniform_int(
                                                   static_cast<int64_t>(cfg.nc_min),
                                                   static_cast<int64_t>(cfg.nc_max)));
    if (nc > cfg.n_target) throw std::invalid_argument("sample_task: forced context exceeds n_target");

    std::unordered_set<uint32_t> used;
    task.target.reserve(cfg.n_target);
    task.target_ids.reserve(cfg.n_target);
    while (task.target.size() < cfg.n_target) {
        const auto id = static_cast<uint32_t>(rng.below(split.size()));
        if (used.count(id)) continue;
        const PairRecord& rec = split[id];
        const double r1 = record_reward(spec, rec, true, task.user_latent);
        const double r2 = record_reward(spec, rec, false, task.user_latent);
        if (r1 == r2) {
            used.insert(id);  // tie under this user; resample another pair
            continue;
        }
        used.insert(id);
        task.target_ids.push_back(id);
        task.target.push_back(r1 > r2 ? PreferencePair{rec.y1, rec.y2}
                                      : PreferencePair{rec.y2, rec.y1});
    }
    task.context.assign(task.target.begin(), task.target.begin() + nc);
    task.eval_mask.assign(cfg.n_target, 1);
    for (size_t i = 0; i < nc; ++i) task.eval_mask[i] = 0;
    return task;
}

// ---- pool and task files ----

inline std::string pool_to_text(const PairPool& pool) {
    std::string out = "prefnp-pool v1\n";
    uint32_t id = 0;
    auto emit = [&](const std::vector<PairRecord>& recs, const char* split) {
        for (const PairRecord& r : recs) {
            out += std::to_string(id++);
            out += '\t';
            out += split;
            out += '\t';
            out += join_doubles(r.y1.features);
            out += '\t';
            out += join_doubles(r.y2.features);
            if (r.has_scores()) {
                out += '\t';
                out += join_doubles(r.s1);
                out += '\t';
                out += join_doubles(r.s2);
            }
            out += '\n';
        }
    };
    emit(pool.train, "train");
    emit(pool.val, "val");
    emit(pool.test, "test");
    return out;
}

inline PairPool pool_from_text(const std::string& text, const PopulationSpec& spec) {
    PairPool pool;
    pool.spec = spec;
    const auto lines = split(std::string_view(text), '\n');
    if (lines.empty() || lines[0] != "prefnp-pool v1")
        throw std::runtime_error("pool file: bad header");
    for (size_t li = 1; li < lines.size(); ++li) {
        if (lines[li].empty()) continue;
        const auto cols = split(lines[li], '\t');
        if (cols.size() != 4 && cols.size() != 6)
            throw std::runtime_error("pool file: bad record at line " + std::to_string(li + 1));
        PairRecord rec;
        rec.y1.features = parse_doubles(cols[2]);
        rec.y2.features = parse_doubles(cols[3]);
        if (cols.size() == 6) {
            rec.s1 = parse_doubles(cols[4]);
            rec.s2 = parse_doubles(cols[5]);
        }
        if (cols[1] == "train")
            pool.train.push_back(std::move(rec));
        else if (cols[1] == "val")
            pool.val.push_back(std::move(rec));
        else if (cols[1] == "test")
            pool.test.push_back(std::move(rec));
        else
            throw std::runtime_error("pool file: unknown split at line " + std::to_string(li + 1));
    }
    return pool;
}

inline std::string latent_to_text(const LatentGroundTruth& z) {
    if (z.kind == LatentGroundTruth::Kind::discrete) return std::to_string(z.mode);
    return join_doubles(z.weights);
}

inline std::string tasks_to_text(const std::vector<Task>& tasks) {
    std::string out = "prefnp-tasks v1\n";
    for (size_t i = 0; i < tasks.size(); ++i) {
        const Task& t = tasks[i];
        out += std::to_string(i);
        out += '\t';
        out += latent_to_text(t.user_latent);
        out += '\t';
        std::string ctx, tgt;
        for (size_t j = 0; j < t.target_ids.size(); ++j) {
            if (j < t.context.size()) {
                if (!ctx.empty()) ctx += ',';
                ctx += std::to_string(t.target_ids[j]);
            }
            if (!tgt.empty()) tgt += ',';
            tgt += std::to_string(t.target_ids[j]);
        }
        out += ctx;
        out += '\t';
        out += tgt;
        out += '\n';
    }
    return out;
}

}  // namespace prefnp
