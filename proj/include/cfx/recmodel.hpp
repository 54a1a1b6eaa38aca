#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfx/dataset.hpp"

namespace cfx {

enum class ModelKind { MF, NCF };

const char* model_kind_name(ModelKind kind);
ModelKind model_kind_from_name(const std::string& name);

struct TrainConfig {
    int embedding_dim = 32;
    int epochs = 30;
    float learning_rate = 0.01f;
    float l2_reg = 0.05f;
    int batch_size = 256;             // NCF only
    std::vector<int> hidden_dims;     // NCF only
    uint64_t seed = 0;

    static TrainConfig mf_defaults();
    static TrainConfig ncf_defaults();
};

struct RankingEntry {
    int32_t item = 0;
    float score = 0.0f;
};

// Ranking over the frozen candidate set (all items outside the user's
// original history), scores non-increasing, ties broken by ascending item id.
class RankingList {
public:
    RankingList() = default;
    RankingList(int32_t user, std::vector<RankingEntry> entries, int32_t num_items);

    int32_t user() const { return user_; }
    const std::vector<RankingEntry>& entries() const { return entries_; }

    bool contains(int32_t item) const;
    // 1-based rank; throws ItemNotRanked when the item is not a candidate.
    int32_t rank_of(int32_t item) const;
    // Item occupying a 1-based rank.
    int32_t item_at(int32_t rank) const;
    float score_at(int32_t rank) const;

private:
    int32_t user_ = -1;
    std::vector<RankingEntry> entries_;
    std::vector<int32_t> rank_by_item_;  // item -> 1-based rank, 0 if absent
};

struct NcfLayer {
    int in = 0;
    int out = 0;
    std::vector<float> weights;  // row-major [out x in]
    std::vector<float> bias;     // [out]
};

// Trained recommender. Weights are float32; a checkpoint round-trip is
// bit-exact. Immutable once trained, safe to share across threads.
struct RecModel {
    ModelKind kind = ModelKind::MF;
    int embedding_dim = 0;
    int32_t num_users = 0;
    int32_t num_items = 0;
    float rating_min = 0.0f;
    float rating_max = 0.0f;
    uint64_t train_seed = 0;
    TrainConfig config;
    double final_train_rmse = 0.0;

    std::vector<float> user_embeddings;  // [num_users x d]
    std::vector<float> item_embeddings;  // [num_items x d]
    // MF extras
    std::vector<float> user_bias;
    std::vector<float> item_bias;
    float global_bias = 0.0f;
    // NCF extras
    std::vector<NcfLayer> layers;

    const float* user_embedding(int32_t u) const;
    const float* item_embedding(int32_t i) const;

    // MF: mu + b_u + b_i + <p_u, q_i> on the raw rating scale.
    // NCF: sigmoid head output in [0,1].
    float raw_score(int32_t u, int32_t i) const;

    // Normalized score in [0,1]. MF clamps the min-max normalized raw score;
    // NCF is already in range.
    float score(int32_t u, int32_t i) const;

    RankingList rank(int32_t u, const std::vector<int32_t>& original_history) const;
};

RecModel train(const InteractionStore& store, ModelKind kind, const TrainConfig& config);

// train() on the masked store with the original model's config and seed, so
// the null deletion reproduces the original model exactly.
RecModel retrain_counterfactual(const InteractionStore& store, const DeletionMask& mask,
                                ModelKind kind, const TrainConfig& config);

// RMSE of raw-scale predictions against the store's ratings.
double rmse(const RecModel& model, const InteractionStore& store);

void save_model(const RecModel& model, const std::string& path);
RecModel load_model(const std::string& path);
RecModel load_model(const std::string& path, ModelKind expected_kind);

uint64_t model_weights_hash(const RecModel& model);

}  // namespace cfx
