#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "cfx/dataset.hpp"
#include "cfx/explain.hpp"
#include "cfx/recmodel.hpp"

namespace cfx {

struct InfluenceConfig {
    enum class ParamScope { UserBlock, Full };

    double damping = 0.01;
    int cg_max_iters = 200;
    double cg_tol = 1e-8;
    ParamScope param_scope = ParamScope::UserBlock;
};

// The e history items nearest to the target item in item-embedding space
// (Euclidean), ties by ascending item id. predicted_delta is the negative
// distance of the worst selected item.
Explanation knn_explain(const RecModel& model, const std::vector<int32_t>& history, int32_t user,
                        int32_t item, int e);

using HvpFn = std::function<void(const std::vector<double>& v, std::vector<double>& out)>;

// Conjugate gradient for (H + damping I) x = b given Hessian-vector products.
// Throws when the relative residual misses cg_tol within max_iters or when
// non-positive curvature shows up.
std::vector<double> cg_solve(const HvpFn& hvp, const std::vector<double>& b, double damping,
                             int max_iters, double tol);

// Infl(u, i, train_item) = (1/n) grad_f^T (H + damping I)^{-1} grad_L with H
// the mean training Hessian over the selected parameter scope.
//
// Sign convention (verified against exhaustive leave-one-out retraining in
// the tests): Infl approximates the CHANGE of f(u, i) caused by REMOVING
// train_item, so a negative value predicts a score drop. Explanation
// selection therefore ranks by -Infl.
double influence(const RecModel& model, const InteractionStore& train, int32_t user, int32_t item,
                 int32_t train_item, const InfluenceConfig& cfg);

// Infl for every entry of `train_items` in one pass (shared item index and
// factorizations). Same values as calling influence() per item. With a
// non-null `ok`, per-item CG failures score 0 and flag ok[t] = false instead
// of throwing.
std::vector<double> influence_scores(const RecModel& model, const InteractionStore& train,
                                     int32_t user, int32_t item,
                                     const std::vector<int32_t>& train_items,
                                     const InfluenceConfig& cfg, std::vector<bool>* ok = nullptr);

// Top-e history items by predicted score drop (-Infl), ties by ascending id.
// Per-item failures are skipped; more than half failing aborts.
Explanation influence_explain(const RecModel& model, const InteractionStore& train, int32_t user,
                              int32_t item, int e, const InfluenceConfig& cfg);

}  // namespace cfx
