#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cfx/baselines.hpp"
#include "cfx/dataset.hpp"
#include "cfx/explain.hpp"
#include "cfx/recmodel.hpp"
#include "cfx/surrogate.hpp"

namespace cfx {

struct VerifyResult {
    bool valid = false;
    int32_t cf_rank = 0;
};

// Ground-truth check: retrain with the explanation masked (original seed and
// config), rank over the frozen candidate set, valid iff the target item's
// counterfactual rank is strictly greater than K.
VerifyResult verify(const InteractionStore& train, const TrainConfig& config, ModelKind kind,
                    const Explanation& exp, int k);

struct ValidityCell {
    std::string method;
    int k = 0;
    double validity_pct = 0.0;
    size_t n = 0;
};

struct ValidityResult {
    std::vector<ValidityCell> cells;
    // Input explanations annotated with their counterfactual rank; the
    // verified flag carries the largest K at which each stayed valid.
    std::vector<Explanation> annotated;

    std::string to_csv() const;  // method,K,validity_pct,n
    double pct(const std::string& method, int k) const;
};

// One retrain per distinct (user, deleted set); all K values reuse it.
ValidityResult validity_at_k(const InteractionStore& train, const TrainConfig& config,
                             ModelKind kind, const std::vector<Explanation>& exps,
                             const std::vector<int>& ks, int workers = 1);

// Algorithm-1-style exhaustive search: subsets by increasing size then
// lexicographic order, first one satisfying the validity definition wins.
// The retrain budget sum_{s<=max_size} C(|I_u|, s) is capped.
std::optional<std::vector<int32_t>> exhaustive_oracle(const InteractionStore& train,
                                                      const TrainConfig& config, ModelKind kind,
                                                      int32_t user, int32_t item, int k,
                                                      int max_size, uint64_t budget_cap = 4096);

struct CorrelationRow {
    std::vector<int32_t> items;
    double mean_distance = 0.0;   // mean item-embedding distance to the target
    double influence_sum = 0.0;   // summed predicted score drop (-Infl)
    double surrogate_pred = 0.0;  // filled when a surrogate is supplied
    double gt_decrease = 0.0;     // score(orig) - score(retrained)
};

struct CorrelationReport {
    int32_t user = 0;
    int32_t target_item = 0;
    double pearson_knn = 0.0;  // corr(-mean_distance, gt_decrease)
    double pearson_if = 0.0;   // corr(influence_sum, gt_decrease)
    double pearson_surrogate = 0.0;
    bool has_surrogate = false;
    bool degenerate = false;
    std::vector<CorrelationRow> rows;

    std::string to_csv() const;
};

// Samples e-subsets of one user's history, retrains for each to get the
// ground-truth score decrease of the top-1 item, and correlates it with the
// two baseline signals (and optionally with surrogate predictions).
CorrelationReport correlation_report(const InteractionStore& train, const TrainConfig& config,
                                     ModelKind kind, int32_t user, int n_samples, int e,
                                     uint64_t seed, const InfluenceConfig& icfg = {},
                                     const Surrogate* surrogate = nullptr, int workers = 1);

struct TimingRow {
    std::string method;
    double mean_seconds = 0.0;
    size_t n = 0;
};

// Mean wall-clock seconds per explanation, grouped by method, methods sorted
// by name. Methods without explanations are omitted.
std::vector<TimingRow> timing_report(const std::vector<Explanation>& exps);
std::string timing_to_csv(const std::vector<TimingRow>& rows);

// Pearson correlation; 0 when either side has (near-)zero variance.
double pearson(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace cfx
