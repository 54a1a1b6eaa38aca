#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cfx/dataset.hpp"
#include "cfx/recmodel.hpp"

namespace cfx {

// What to simulate: which users, how many deletions per user, the deletion
// size (fixed count or fraction of history), and how many top items of the
// original ranking get a record per retrain.
struct SimPlan {
    std::vector<int32_t> users;
    int deletions_per_user = 0;
    int deletion_size = 0;                    // fixed-size mode
    std::optional<double> deletion_fraction;  // ablation mode, overrides size
    int top_n = 20;
    uint64_t seed = 0;
};

// One simulated counterfactual outcome for (user, deleted subset, item).
struct CfRecord {
    int32_t user = 0;
    std::vector<int32_t> deleted;  // sorted
    int32_t item = 0;
    double delta_reg = 0.0;
    int delta_clf = 0;       // sgn of rank change: +1 ranked lower, -1 higher
    int64_t delta_rank = 0;  // cf_rank - orig_rank
    double delta_cross = 0.0;
    int32_t orig_rank = 0;
    int32_t cf_rank = 0;
};

struct SimProvenance {
    SimPlan plan;
    std::string model_kind;
    TrainConfig config;
    uint64_t dataset_hash = 0;
    std::vector<std::string> failed_jobs;  // "user:deletion_index" per diverged retrain
};

struct CfDataset {
    std::vector<CfRecord> records;
    SimProvenance provenance;
};

using ScoreFn = std::function<float(int32_t user, int32_t item)>;

// Distinct e-subsets of history, sampled uniformly. Returns every subset
// when C(|history|, e) <= count. Each subset is sorted; the list order is
// deterministic given the seed.
std::vector<std::vector<int32_t>> sample_deletions(const std::vector<int32_t>& history, int count,
                                                   int size, uint64_t seed);

// Score gap between the benchmark item (the item at i's original rank in the
// counterfactual list) and i itself, both scored by the counterfactual model.
double delta_reg(const RankingList& orig, const RankingList& cf, const ScoreFn& cf_scores,
                 int32_t user, int32_t item);

// Sign of the rank change of i between the two lists.
int delta_clf(const RankingList& orig, const RankingList& cf, int32_t item);

int64_t delta_rank(const RankingList& orig, const RankingList& cf, int32_t item);

// Top-1-normalized score of i in the original list minus the same quantity
// in the counterfactual list.
double delta_cross(const RankingList& orig, const RankingList& cf, const ScoreFn& orig_scores,
                   const ScoreFn& cf_scores, int32_t user, int32_t item);

// Runs the retraining farm: one retrain per (user, deletion), records for the
// top-N items of the user's original ranking. Diverged retrains are recorded
// and skipped; more than 10% failures aborts. Output is canonically ordered
// (plan user order, deletion index, original rank), independent of workers.
CfDataset simulate(const InteractionStore& train, const RecModel& base_model, const SimPlan& plan,
                   const TrainConfig& config, int workers = 1);

void save_cf(const CfDataset& dataset, const std::string& path);

struct LoadCfResult {
    CfDataset dataset;
    bool provenance_hash_matches = true;
};

LoadCfResult load_cf(const std::string& path,
                     std::optional<uint64_t> current_dataset_hash = std::nullopt);

}  // namespace cfx
