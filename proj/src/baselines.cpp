#include "cfx/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <unordered_map>

#include "cfx/errors.hpp"
#include "cfx/kernels.hpp"

namespace cfx {

namespace {

double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

// ---------------------------------------------------------------------------
// MF influence: analytic Hessian-vector products over a parameter block.
// ---------------------------------------------------------------------------

// Double-precision copy of the MF factors.
struct MfDouble {
    int d = 0;
    std::vector<double> p;   // [U x d]
    std::vector<double> q;   // [I x d]
    std::vector<double> bu;  // [U]
    std::vector<double> bi;  // [I]
    double mu = 0.0;

    static MfDouble from(const RecModel& m) {
        MfDouble out;
        out.d = m.embedding_dim;
        out.p.assign(m.user_embeddings.begin(), m.user_embeddings.end());
        out.q.assign(m.item_embeddings.begin(), m.item_embeddings.end());
        out.bu.assign(m.user_bias.begin(), m.user_bias.end());
        out.bi.assign(m.item_bias.begin(), m.item_bias.end());
        out.mu = static_cast<double>(m.global_bias);
        return out;
    }

    double predict(int32_t u, int32_t i) const {
        const size_t dd = static_cast<size_t>(d);
        return mu + bu[static_cast<size_t>(u)] + bi[static_cast<size_t>(i)] +
               kern::dot_d(p.data() + static_cast<size_t>(u) * dd,
                           q.data() + static_cast<size_t>(i) * dd, dd);
    }
};

// Parameter block: a (d+1)-sized segment per selected user/item plus an
// optional global-bias slot. SIZE_MAX offsets mean "not in scope".
struct ParamBlock {
    int d = 0;
    std::unordered_map<int32_t, size_t> user_offset;
    std::unordered_map<int32_t, size_t> item_offset;
    size_t mu_offset = SIZE_MAX;
    size_t size = 0;

    size_t user_of(int32_t u) const {
        auto it = user_offset.find(u);
        return it == user_offset.end() ? SIZE_MAX : it->second;
    }
    size_t item_of(int32_t i) const {
        auto it = item_offset.find(i);
        return it == item_offset.end() ? SIZE_MAX : it->second;
    }
};

ParamBlock make_block(int d, const std::vector<int32_t>& users, const std::vector<int32_t>& items,
                      bool include_mu) {
    ParamBlock block;
    block.d = d;
    size_t off = 0;
    for (int32_t u : users) {
        if (block.user_offset.try_emplace(u, off).second) off += static_cast<size_t>(d) + 1;
    }
    for (int32_t i : items) {
        if (block.item_offset.try_emplace(i, off).second) off += static_cast<size_t>(d) + 1;
    }
    if (include_mu) {
        block.mu_offset = off;
        off += 1;
    }
    block.size = off;
    return block;
}

// Mean-Hessian-vector product over `sample_rows` of the squared loss with
// per-sample l2: H = (1/n) sum_s [g_s g_s^T - e_s C_s + l2 M_s], where g_s is
// the prediction gradient, C_s the p/q cross curvature of the bilinear term
// and M_s the identity on the sample's own coordinates.
void mf_block_hvp(const MfDouble& mf, const InteractionStore& train,
                  const std::vector<int32_t>& sample_rows, const ParamBlock& block, double l2,
                  const std::vector<double>& v, std::vector<double>& out) {
    const size_t d = static_cast<size_t>(block.d);
    out.assign(block.size, 0.0);
    const auto& rows = train.interactions();
    for (int32_t row_idx : sample_rows) {
        const Interaction& s = rows[static_cast<size_t>(row_idx)];
        const size_t pu = block.user_of(s.user);
        const size_t qi = block.item_of(s.item);
        if (pu == SIZE_MAX && qi == SIZE_MAX && block.mu_offset == SIZE_MAX) continue;
        const double* pu_vec = mf.p.data() + static_cast<size_t>(s.user) * d;
        const double* qi_vec = mf.q.data() + static_cast<size_t>(s.item) * d;
        const double e = static_cast<double>(s.rating) - mf.predict(s.user, s.item);

        // g^T v over the coordinates present in the block.
        double gv = 0.0;
        if (pu != SIZE_MAX) {
            gv += kern::dot_d(qi_vec, v.data() + pu, d);  // df/dp = q
            gv += v[pu + d];                              // df/db_u = 1
        }
        if (qi != SIZE_MAX) {
            gv += kern::dot_d(pu_vec, v.data() + qi, d);  // df/dq = p
            gv += v[qi + d];
        }
        if (block.mu_offset != SIZE_MAX) gv += v[block.mu_offset];

        if (gv != 0.0) {
            if (pu != SIZE_MAX) {
                kern::axpy_d(gv, qi_vec, out.data() + pu, d);
                out[pu + d] += gv;
            }
            if (qi != SIZE_MAX) {
                kern::axpy_d(gv, pu_vec, out.data() + qi, d);
                out[qi + d] += gv;
            }
            if (block.mu_offset != SIZE_MAX) out[block.mu_offset] += gv;
        }
        // Bilinear cross term: d2f/dp dq = I, weighted by -e.
        if (pu != SIZE_MAX && qi != SIZE_MAX && e != 0.0) {
            kern::axpy_d(-e, v.data() + qi, out.data() + pu, d);
            kern::axpy_d(-e, v.data() + pu, out.data() + qi, d);
        }
        // Per-sample l2 on the sample's own coordinates (biases included).
        if (l2 != 0.0) {
            if (pu != SIZE_MAX) {
                kern::axpy_d(l2, v.data() + pu, out.data() + pu, d);
                out[pu + d] += l2 * v[pu + d];
            }
            if (qi != SIZE_MAX) {
                kern::axpy_d(l2, v.data() + qi, out.data() + qi, d);
                out[qi + d] += l2 * v[qi + d];
            }
        }
    }
    const double inv_n = 1.0 / static_cast<double>(train.size());
    for (double& x : out) x *= inv_n;
}

std::vector<std::vector<int32_t>> rows_by_item(const InteractionStore& train) {
    std::vector<std::vector<int32_t>> index(static_cast<size_t>(train.num_items()));
    const auto& rows = train.interactions();
    for (size_t r = 0; r < rows.size(); ++r) {
        index[static_cast<size_t>(rows[r].item)].push_back(static_cast<int32_t>(r));
    }
    return index;
}

// ---------------------------------------------------------------------------
// NCF influence: finite-difference HVPs over the full parameter vector.
// ---------------------------------------------------------------------------

struct NcfDouble {
    int d = 0;
    std::vector<int> dims;  // {2d, hidden..., 1}
    int32_t num_users = 0;
    int32_t num_items = 0;
    size_t layer_base = 0;
    std::vector<double> theta;

    static NcfDouble from(const RecModel& m) {
        NcfDouble out;
        out.d = m.embedding_dim;
        out.num_users = m.num_users;
        out.num_items = m.num_items;
        out.dims.push_back(2 * m.embedding_dim);
        for (const NcfLayer& layer : m.layers) out.dims.push_back(layer.out);
        size_t total = m.user_embeddings.size() + m.item_embeddings.size();
        out.layer_base = total;
        for (const NcfLayer& layer : m.layers) total += layer.weights.size() + layer.bias.size();
        out.theta.reserve(total);
        out.theta.assign(m.user_embeddings.begin(), m.user_embeddings.end());
        out.theta.insert(out.theta.end(), m.item_embeddings.begin(), m.item_embeddings.end());
        for (const NcfLayer& layer : m.layers) {
            out.theta.insert(out.theta.end(), layer.weights.begin(), layer.weights.end());
            out.theta.insert(out.theta.end(), layer.bias.begin(), layer.bias.end());
        }
        return out;
    }

    size_t user_base(int32_t u) const { return static_cast<size_t>(u) * static_cast<size_t>(d); }
    size_t item_base(int32_t i) const {
        return (static_cast<size_t>(num_users) + static_cast<size_t>(i)) * static_cast<size_t>(d);
    }

    // Sigmoid head output; fills activations when requested.
    double forward(const std::vector<double>& params, int32_t u, int32_t i,
                   std::vector<std::vector<double>>* acts) const {
        const size_t dd = static_cast<size_t>(d);
        std::vector<double> x(2 * dd);
        for (size_t k = 0; k < dd; ++k) {
            x[k] = params[user_base(u) + k];
            x[dd + k] = params[item_base(i) + k];
        }
        if (acts) {
            acts->clear();
            acts->push_back(x);
        }
        size_t off = layer_base;
        std::vector<double> cur = std::move(x);
        const size_t layers = dims.size() - 1;
        for (size_t l = 0; l < layers; ++l) {
            const size_t in = static_cast<size_t>(dims[l]);
            const size_t on = static_cast<size_t>(dims[l + 1]);
            std::vector<double> next(on);
            for (size_t o = 0; o < on; ++o) {
                next[o] = kern::dot_d(params.data() + off + o * in, cur.data(), in) +
                          params[off + on * in + o];
                if (l + 1 < layers && next[o] < 0.0) next[o] = 0.0;
            }
            off += on * in + on;
            if (acts) acts->push_back(next);
            cur = std::move(next);
        }
        return 1.0 / (1.0 + std::exp(-cur[0]));
    }

    // Accumulates coef * d(sigma)/d(theta) for the pair (u, i).
    void accumulate_score_grad(const std::vector<double>& params, int32_t u, int32_t i, double coef,
                               std::vector<double>& grad) const {
        std::vector<std::vector<double>> acts;
        double sig = forward(params, u, i, &acts);
        double dz = coef * sig * (1.0 - sig);

        const size_t layers = dims.size() - 1;
        std::vector<double> delta(1, dz);
        size_t off_end = theta.size();
        for (size_t l = layers; l-- > 0;) {
            const size_t in = static_cast<size_t>(dims[l]);
            const size_t on = static_cast<size_t>(dims[l + 1]);
            const size_t off = off_end - (on * in + on);
            std::vector<double> prev(in, 0.0);
            for (size_t o = 0; o < on; ++o) {
                const double g = delta[o];
                if (g != 0.0) {
                    kern::axpy_d(g, acts[l].data(), grad.data() + off + o * in, in);
                    grad[off + on * in + o] += g;
                    kern::axpy_d(g, params.data() + off + o * in, prev.data(), in);
                }
            }
            if (l > 0) {
                for (size_t j = 0; j < in; ++j) {
                    if (acts[l][j] <= 0.0) prev[j] = 0.0;
                }
            }
            delta = std::move(prev);
            off_end = off;
        }
        const size_t dd = static_cast<size_t>(d);
        for (size_t k = 0; k < dd; ++k) {
            grad[user_base(u) + k] += delta[k];
            grad[item_base(i) + k] += delta[dd + k];
        }
    }
};

// Mean gradient of the squared loss over the training set plus a flat ridge
// (the per-batch weight decay of NCF training is approximated by one l2 term).
void ncf_total_grad(const NcfDouble& net, const InteractionStore& train,
                    const std::vector<double>& params, double l2, float rating_min,
                    float rating_max, std::vector<double>& grad) {
    grad.assign(params.size(), 0.0);
    const double denom =
        rating_max > rating_min ? static_cast<double>(rating_max) - static_cast<double>(rating_min)
                                : 1.0;
    for (const Interaction& s : train.interactions()) {
        double target = (static_cast<double>(s.rating) - static_cast<double>(rating_min)) / denom;
        double sig = net.forward(params, s.user, s.item, nullptr);
        net.accumulate_score_grad(params, s.user, s.item, sig - target, grad);
    }
    kern::axpy_d(l2, params.data(), grad.data(), params.size());
}

}  // namespace

Explanation knn_explain(const RecModel& model, const std::vector<int32_t>& history, int32_t user,
                        int32_t item, int e) {
    if (e < 1) fail(ErrorCode::InvalidArgument, "e must be >= 1");
    if (history.size() < static_cast<size_t>(e)) {
        fail(ErrorCode::HistoryTooSmall, "user " + std::to_string(user) + " has " +
                                             std::to_string(history.size()) +
                                             " history items, explanation size is " +
                                             std::to_string(e));
    }
    const double start = now_ms();
    const size_t d = static_cast<size_t>(model.embedding_dim);
    const float* target = model.item_embedding(item);

    std::vector<std::pair<float, int32_t>> by_distance;
    by_distance.reserve(history.size());
    for (int32_t h : history) {
        by_distance.emplace_back(kern::l2_dist_sq(model.item_embedding(h), target, d), h);
    }
    std::sort(by_distance.begin(), by_distance.end());

    Explanation exp;
    exp.user = user;
    exp.item = item;
    exp.method = ExplainMethod::Knn;
    for (int k = 0; k < e; ++k) exp.items.push_back(by_distance[static_cast<size_t>(k)].second);
    std::sort(exp.items.begin(), exp.items.end());
    exp.predicted_delta =
        -std::sqrt(static_cast<double>(by_distance[static_cast<size_t>(e - 1)].first));
    exp.elapsed_ms = now_ms() - start;
    return exp;
}

std::vector<double> cg_solve(const HvpFn& hvp, const std::vector<double>& b, double damping,
                             int max_iters, double tol) {
    if (tol <= 0.0) fail(ErrorCode::InvalidArgument, "cg_tol must be > 0");
    const size_t n = b.size();
    std::vector<double> x(n, 0.0), r = b, p = b, ap(n);
    double rr = kern::dot_d(r.data(), r.data(), n);
    const double b_norm = std::sqrt(rr);
    if (b_norm == 0.0) return x;
    for (int it = 0; it < max_iters; ++it) {
        hvp(p, ap);
        kern::axpy_d(damping, p.data(), ap.data(), n);
        double pap = kern::dot_d(p.data(), ap.data(), n);
        if (!(pap > 0.0)) {
            fail(ErrorCode::InfluenceCg, "non-positive curvature in CG (increase damping)");
        }
        double alpha = rr / pap;
        kern::axpy_d(alpha, p.data(), x.data(), n);
        kern::axpy_d(-alpha, ap.data(), r.data(), n);
        double rr_new = kern::dot_d(r.data(), r.data(), n);
        if (std::sqrt(rr_new) <= tol * b_norm) return x;
        double beta = rr_new / rr;
        rr = rr_new;
        for (size_t j = 0; j < n; ++j) p[j] = r[j] + beta * p[j];
    }
    fail(ErrorCode::InfluenceCg,
         "no convergence in " + std::to_string(max_iters) + " CG iterations");
}

std::vector<double> influence_scores(const RecModel& model, const InteractionStore& train,
                                     int32_t user, int32_t item,
                                     const std::vector<int32_t>& train_items,
                                     const InfluenceConfig& cfg, std::vector<bool>* ok) {
    std::vector<int32_t> history = train.user_history(user);
    for (int32_t t : train_items) {
        if (!std::binary_search(history.begin(), history.end(), t)) {
            fail(ErrorCode::InvalidArgument, "(" + std::to_string(user) + "," + std::to_string(t) +
                                                 ") is not a training interaction");
        }
    }
    if (ok) ok->assign(train_items.size(), true);
    auto per_item_failure = [&](size_t t, const Error& err) {
        if (!ok || err.code() != ErrorCode::InfluenceCg) throw err;
        (*ok)[t] = false;
    };
    const double n = static_cast<double>(train.size());
    const double l2 = static_cast<double>(model.config.l2_reg);
    std::vector<double> scores(train_items.size(), 0.0);

    if (model.kind == ModelKind::MF) {
        const MfDouble mf = MfDouble::from(model);
        const size_t d = static_cast<size_t>(mf.d);
        const bool full = cfg.param_scope == InfluenceConfig::ParamScope::Full;
        auto item_index = rows_by_item(train);

        // Rating of each probe item by this user.
        std::unordered_map<int32_t, double> rating_of;
        for (int32_t row : train.user_rows(user)) {
            rating_of[train.interactions()[static_cast<size_t>(row)].item] =
                static_cast<double>(train.interactions()[static_cast<size_t>(row)].rating);
        }

        for (size_t t = 0; t < train_items.size(); ++t) {
            const int32_t probe = train_items[t];
            ParamBlock block;
            std::vector<int32_t> sample_rows;
            if (full) {
                std::vector<int32_t> users(static_cast<size_t>(train.num_users()));
                std::vector<int32_t> items(static_cast<size_t>(train.num_items()));
                for (int32_t u2 = 0; u2 < train.num_users(); ++u2) users[static_cast<size_t>(u2)] = u2;
                for (int32_t i2 = 0; i2 < train.num_items(); ++i2) items[static_cast<size_t>(i2)] = i2;
                block = make_block(mf.d, users, items, true);
                sample_rows.resize(train.size());
                for (size_t r = 0; r < train.size(); ++r) sample_rows[r] = static_cast<int32_t>(r);
            } else {
                block = make_block(mf.d, {user}, {item, probe}, false);
                sample_rows = train.user_rows(user);
                for (int32_t r : item_index[static_cast<size_t>(item)]) sample_rows.push_back(r);
                if (probe != item) {
                    for (int32_t r : item_index[static_cast<size_t>(probe)]) sample_rows.push_back(r);
                }
                std::sort(sample_rows.begin(), sample_rows.end());
                sample_rows.erase(std::unique(sample_rows.begin(), sample_rows.end()),
                                  sample_rows.end());
            }

            // grad of f(u, item).
            std::vector<double> grad_f(block.size, 0.0);
            {
                const size_t pu = block.user_of(user);
                const size_t qi = block.item_of(item);
                for (size_t k = 0; k < d; ++k) {
                    grad_f[pu + k] = mf.q[static_cast<size_t>(item) * d + k];
                    grad_f[qi + k] = mf.p[static_cast<size_t>(user) * d + k];
                }
                grad_f[pu + d] = 1.0;
                grad_f[qi + d] = 1.0;
                if (block.mu_offset != SIZE_MAX) grad_f[block.mu_offset] = 1.0;
            }
            // grad of the training loss on (user, probe).
            std::vector<double> grad_l(block.size, 0.0);
            {
                const double err = rating_of.at(probe) - mf.predict(user, probe);
                const size_t pu = block.user_of(user);
                const size_t qp = block.item_of(probe);
                for (size_t k = 0; k < d; ++k) {
                    grad_l[pu + k] = -err * mf.q[static_cast<size_t>(probe) * d + k] +
                                     l2 * mf.p[static_cast<size_t>(user) * d + k];
                    grad_l[qp + k] = -err * mf.p[static_cast<size_t>(user) * d + k] +
                                     l2 * mf.q[static_cast<size_t>(probe) * d + k];
                }
                grad_l[pu + d] = -err + l2 * mf.bu[static_cast<size_t>(user)];
                grad_l[qp + d] = -err + l2 * mf.bi[static_cast<size_t>(probe)];
                if (block.mu_offset != SIZE_MAX) grad_l[block.mu_offset] = -err;
            }

            HvpFn hvp = [&](const std::vector<double>& v, std::vector<double>& out) {
                mf_block_hvp(mf, train, sample_rows, block, l2, v, out);
            };
            try {
                std::vector<double> x =
                    cg_solve(hvp, grad_l, cfg.damping, cfg.cg_max_iters, cfg.cg_tol);
                scores[t] = kern::dot_d(grad_f.data(), x.data(), block.size) / n;
            } catch (const Error& err) {
                per_item_failure(t, err);
            }
        }
        return scores;
    }

    // NCF: full parameter scope with finite-difference HVPs.
    const NcfDouble net = NcfDouble::from(model);
    std::vector<double> grad_f(net.theta.size(), 0.0);
    net.accumulate_score_grad(net.theta, user, item, 1.0, grad_f);

    const double denom = model.rating_max > model.rating_min
                             ? static_cast<double>(model.rating_max - model.rating_min)
                             : 1.0;
    std::unordered_map<int32_t, double> rating_of;
    for (int32_t row : train.user_rows(user)) {
        rating_of[train.interactions()[static_cast<size_t>(row)].item] =
            static_cast<double>(train.interactions()[static_cast<size_t>(row)].rating);
    }

    std::vector<double> grad_plus, grad_minus, shifted;
    HvpFn hvp = [&](const std::vector<double>& v, std::vector<double>& out) {
        double v_norm = std::sqrt(kern::dot_d(v.data(), v.data(), v.size()));
        double theta_norm = std::sqrt(kern::dot_d(net.theta.data(), net.theta.data(), net.theta.size()));
        double eps = 1e-5 * (1.0 + theta_norm) / std::max(v_norm, 1e-12);
        shifted = net.theta;
        kern::axpy_d(eps, v.data(), shifted.data(), shifted.size());
        ncf_total_grad(net, train, shifted, l2, model.rating_min, model.rating_max, grad_plus);
        shifted = net.theta;
        kern::axpy_d(-eps, v.data(), shifted.data(), shifted.size());
        ncf_total_grad(net, train, shifted, l2, model.rating_min, model.rating_max, grad_minus);
        out.assign(v.size(), 0.0);
        const double scale = 1.0 / (2.0 * eps * n);
        for (size_t j = 0; j < out.size(); ++j) out[j] = (grad_plus[j] - grad_minus[j]) * scale;
    };

    for (size_t t = 0; t < train_items.size(); ++t) {
        const int32_t probe = train_items[t];
        double target = (rating_of.at(probe) - static_cast<double>(model.rating_min)) / denom;
        double sig = net.forward(net.theta, user, probe, nullptr);
        std::vector<double> grad_l(net.theta.size(), 0.0);
        net.accumulate_score_grad(net.theta, user, probe, sig - target, grad_l);
        const size_t dd = static_cast<size_t>(net.d);
        for (size_t k = 0; k < dd; ++k) {
            grad_l[net.user_base(user) + k] += l2 * net.theta[net.user_base(user) + k];
            grad_l[net.item_base(probe) + k] += l2 * net.theta[net.item_base(probe) + k];
        }
        try {
            std::vector<double> x = cg_solve(hvp, grad_l, cfg.damping, cfg.cg_max_iters, cfg.cg_tol);
            scores[t] = kern::dot_d(grad_f.data(), x.data(), x.size()) / n;
        } catch (const Error& err) {
            per_item_failure(t, err);
        }
    }
    return scores;
}

double influence(const RecModel& model, const InteractionStore& train, int32_t user, int32_t item,
                 int32_t train_item, const InfluenceConfig& cfg) {
    return influence_scores(model, train, user, item, {train_item}, cfg)[0];
}

Explanation influence_explain(const RecModel& model, const InteractionStore& train, int32_t user,
                              int32_t item, int e, const InfluenceConfig& cfg) {
    std::vector<int32_t> history = train.user_history(user);
    if (e < 1) fail(ErrorCode::InvalidArgument, "e must be >= 1");
    if (history.size() < static_cast<size_t>(e)) {
        fail(ErrorCode::HistoryTooSmall, "user " + std::to_string(user) + " has " +
                                             std::to_string(history.size()) +
                                             " history items, explanation size is " +
                                             std::to_string(e));
    }
    const double start = now_ms();
    std::vector<bool> ok;
    std::vector<double> scores = influence_scores(model, train, user, item, history, cfg, &ok);
    size_t failures = 0;
    // Predicted score drop per item is -Infl; see the sign note in the header.
    std::vector<std::pair<double, int32_t>> drops;
    for (size_t t = 0; t < history.size(); ++t) {
        if (!ok[t]) {
            ++failures;
            continue;
        }
        drops.emplace_back(-scores[t], history[t]);
    }
    if (failures * 2 > history.size()) {
        fail(ErrorCode::InfluenceCg, "influence failed for " + std::to_string(failures) + " of " +
                                         std::to_string(history.size()) + " history items");
    }
    if (drops.size() < static_cast<size_t>(e)) {
        fail(ErrorCode::InfluenceCg, "not enough scored items after failures");
    }
    std::sort(drops.begin(), drops.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });

    Explanation exp;
    exp.user = user;
    exp.item = item;
    exp.method = ExplainMethod::Influence;
    double sum = 0.0;
    for (int k = 0; k < e; ++k) {
        exp.items.push_back(drops[static_cast<size_t>(k)].second);
        sum += drops[static_cast<size_t>(k)].first;
    }
    std::sort(exp.items.begin(), exp.items.end());
    exp.predicted_delta = sum;
    exp.elapsed_ms = now_ms() - start;
    return exp;
}

}  // namespace cfx
