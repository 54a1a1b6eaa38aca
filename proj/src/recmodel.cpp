#include "cfx/recmodel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "cfx/errors.hpp"
#include "cfx/kernels.hpp"
#include "cfx/rng.hpp"

namespace cfx {

using json = nlohmann::ordered_json;

namespace {

constexpr float kEmbeddingInitSd = 0.1f;
constexpr char kCheckpointMagic[8] = {'C', 'F', 'X', 'M', 'O', 'D', 'L', '1'};

float norm_denominator(float rating_min, float rating_max) {
    float denom = rating_max - rating_min;
    return denom > 0.0f ? denom : 1.0f;
}

float sigmoid(float z) { return 1.0f / (1.0f + std::exp(-z)); }

void fill_gaussian(std::vector<float>& v, Rng& rng, float sd) {
    for (float& x : v) x = static_cast<float>(rng.next_gaussian()) * sd;
}

std::vector<uint32_t> epoch_order(size_t n, uint64_t seed, int epoch) {
    std::vector<uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    Rng rng(derive_seed(seed, 0xE0u, static_cast<uint64_t>(epoch)));
    rng.shuffle(order);
    return order;
}

void check_config(ModelKind kind, const TrainConfig& config) {
    if (config.embedding_dim <= 0 || config.epochs <= 0 || !(config.learning_rate > 0.0f) ||
        config.l2_reg < 0.0f) {
        fail(ErrorCode::InvalidArgument, "train config fields must be positive");
    }
    if (kind == ModelKind::NCF && (config.hidden_dims.empty() || config.batch_size <= 0)) {
        fail(ErrorCode::InvalidArgument, "ncf requires non-empty hidden_dims and batch_size > 0");
    }
}

RecModel init_model(const InteractionStore& store, ModelKind kind, const TrainConfig& config) {
    RecModel m;
    m.kind = kind;
    m.embedding_dim = config.embedding_dim;
    m.num_users = store.num_users();
    m.num_items = store.num_items();
    m.rating_min = store.rating_min();
    m.rating_max = store.rating_max();
    m.train_seed = config.seed;
    m.config = config;

    const size_t d = static_cast<size_t>(config.embedding_dim);
    // Initialization depends only on (counts, d, seed), never on the rows, so
    // masked retrains start from the same weights as the original model.
    Rng rng(derive_seed(config.seed, 0x1717u));
    m.user_embeddings.resize(static_cast<size_t>(m.num_users) * d);
    m.item_embeddings.resize(static_cast<size_t>(m.num_items) * d);
    fill_gaussian(m.user_embeddings, rng, kEmbeddingInitSd);
    fill_gaussian(m.item_embeddings, rng, kEmbeddingInitSd);

    if (kind == ModelKind::MF) {
        m.user_bias.assign(static_cast<size_t>(m.num_users), 0.0f);
        m.item_bias.assign(static_cast<size_t>(m.num_items), 0.0f);
        double sum = 0.0;
        for (const Interaction& row : store.interactions()) sum += row.rating;
        m.global_bias = store.empty() ? 0.0f
                                      : static_cast<float>(sum / static_cast<double>(store.size()));
    } else {
        int in_dim = 2 * config.embedding_dim;
        for (int out_dim : config.hidden_dims) {
            NcfLayer layer;
            layer.in = in_dim;
            layer.out = out_dim;
            layer.weights.resize(static_cast<size_t>(out_dim) * static_cast<size_t>(in_dim));
            layer.bias.assign(static_cast<size_t>(out_dim), 0.0f);
            fill_gaussian(layer.weights, rng, std::sqrt(2.0f / static_cast<float>(in_dim)));
            m.layers.push_back(std::move(layer));
            in_dim = out_dim;
        }
        NcfLayer head;
        head.in = in_dim;
        head.out = 1;
        head.weights.resize(static_cast<size_t>(in_dim));
        head.bias.assign(1, 0.0f);
        fill_gaussian(head.weights, rng, std::sqrt(2.0f / static_cast<float>(in_dim)));
        m.layers.push_back(std::move(head));
    }
    return m;
}

void train_mf(RecModel& m, const InteractionStore& store) {
    const auto& rows = store.interactions();
    const size_t d = static_cast<size_t>(m.embedding_dim);
    const float lr = m.config.learning_rate;
    const float l2 = m.config.l2_reg;

    for (int epoch = 0; epoch < m.config.epochs; ++epoch) {
        std::vector<uint32_t> order = epoch_order(rows.size(), m.train_seed, epoch);
        double sq_err = 0.0;
        for (uint32_t idx : order) {
            const Interaction& s = rows[idx];
            float* p = m.user_embeddings.data() + static_cast<size_t>(s.user) * d;
            float* q = m.item_embeddings.data() + static_cast<size_t>(s.item) * d;
            float pred = m.global_bias + m.user_bias[static_cast<size_t>(s.user)] +
                         m.item_bias[static_cast<size_t>(s.item)] + kern::dot(p, q, d);
            float err = s.rating - pred;
            sq_err += static_cast<double>(err) * static_cast<double>(err);
            m.global_bias += lr * err;
            m.user_bias[static_cast<size_t>(s.user)] +=
                lr * (err - l2 * m.user_bias[static_cast<size_t>(s.user)]);
            m.item_bias[static_cast<size_t>(s.item)] +=
                lr * (err - l2 * m.item_bias[static_cast<size_t>(s.item)]);
            kern::sgd_pair_update(p, q, d, lr, err, l2);
        }
        if (!std::isfinite(sq_err)) {
            fail(ErrorCode::TrainingDiverged, "mf loss non-finite at epoch " + std::to_string(epoch));
        }
    }
}

struct NcfScratch {
    std::vector<std::vector<float>> activations;  // post-ReLU per layer input
    std::vector<std::vector<float>> deltas;
};

float ncf_forward(const RecModel& m, int32_t u, int32_t i, NcfScratch* scratch) {
    const size_t d = static_cast<size_t>(m.embedding_dim);
    std::vector<float> x(2 * d);
    std::memcpy(x.data(), m.user_embeddings.data() + static_cast<size_t>(u) * d, d * sizeof(float));
    std::memcpy(x.data() + d, m.item_embeddings.data() + static_cast<size_t>(i) * d,
                d * sizeof(float));
    if (scratch) {
        scratch->activations.clear();
        scratch->activations.push_back(x);
    }
    std::vector<float> cur = std::move(x);
    for (size_t l = 0; l < m.layers.size(); ++l) {
        const NcfLayer& layer = m.layers[l];
        std::vector<float> next(static_cast<size_t>(layer.out));
        kern::matvec_rows(layer.weights.data(), static_cast<size_t>(layer.out),
                          static_cast<size_t>(layer.in), cur.data(), next.data());
        for (int o = 0; o < layer.out; ++o) next[static_cast<size_t>(o)] += layer.bias[static_cast<size_t>(o)];
        if (l + 1 < m.layers.size()) {
            for (float& v : next) v = v > 0.0f ? v : 0.0f;
        }
        if (scratch) scratch->activations.push_back(next);
        cur = std::move(next);
    }
    return sigmoid(cur[0]);
}

void train_ncf(RecModel& m, const InteractionStore& store) {
    const auto& rows = store.interactions();
    const size_t d = static_cast<size_t>(m.embedding_dim);
    const float lr = m.config.learning_rate;
    const float l2 = m.config.l2_reg;
    const float denom = norm_denominator(m.rating_min, m.rating_max);
    const size_t batch_size = static_cast<size_t>(m.config.batch_size);

    std::vector<std::vector<float>> grad_w(m.layers.size());
    std::vector<std::vector<float>> grad_b(m.layers.size());
    for (size_t l = 0; l < m.layers.size(); ++l) {
        grad_w[l].assign(m.layers[l].weights.size(), 0.0f);
        grad_b[l].assign(m.layers[l].bias.size(), 0.0f);
    }
    std::vector<float> grad_user(m.user_embeddings.size(), 0.0f);
    std::vector<float> grad_item(m.item_embeddings.size(), 0.0f);
    std::vector<int32_t> touched_users, touched_items;
    NcfScratch scratch;

    for (int epoch = 0; epoch < m.config.epochs; ++epoch) {
        std::vector<uint32_t> order = epoch_order(rows.size(), m.train_seed, epoch);
        double sq_err = 0.0;
        for (size_t start = 0; start < order.size(); start += batch_size) {
            const size_t end = std::min(order.size(), start + batch_size);
            const float inv_b = 1.0f / static_cast<float>(end - start);
            touched_users.clear();
            touched_items.clear();

            for (size_t k = start; k < end; ++k) {
                const Interaction& s = rows[order[k]];
                float out = ncf_forward(m, s.user, s.item, &scratch);
                float target = (s.rating - m.rating_min) / denom;
                float err = out - target;
                sq_err += static_cast<double>(err) * static_cast<double>(err);

                // dL/dz at the sigmoid head for squared loss.
                float dz = 2.0f * err * out * (1.0f - out);
                std::vector<float> delta(1, dz);
                for (size_t l = m.layers.size(); l-- > 0;) {
                    const NcfLayer& layer = m.layers[l];
                    const std::vector<float>& input = scratch.activations[l];
                    for (int o = 0; o < layer.out; ++o) {
                        float g = delta[static_cast<size_t>(o)];
                        if (g == 0.0f) continue;
                        kern::axpy(g * inv_b, input.data(),
                                   grad_w[l].data() + static_cast<size_t>(o) * static_cast<size_t>(layer.in),
                                   static_cast<size_t>(layer.in));
                        grad_b[l][static_cast<size_t>(o)] += g * inv_b;
                    }
                    if (l == 0) {
                        // Propagate into the embedding concat.
                        std::vector<float> dx(static_cast<size_t>(layer.in), 0.0f);
                        for (int o = 0; o < layer.out; ++o) {
                            float g = delta[static_cast<size_t>(o)];
                            if (g == 0.0f) continue;
                            kern::axpy(g, layer.weights.data() + static_cast<size_t>(o) * static_cast<size_t>(layer.in),
                                       dx.data(), static_cast<size_t>(layer.in));
                        }
                        kern::axpy(inv_b, dx.data(),
                                   grad_user.data() + static_cast<size_t>(s.user) * d, d);
                        kern::axpy(inv_b, dx.data() + d,
                                   grad_item.data() + static_cast<size_t>(s.item) * d, d);
                        touched_users.push_back(s.user);
                        touched_items.push_back(s.item);
                    } else {
                        const std::vector<float>& prev_act = scratch.activations[l];
                        std::vector<float> next_delta(static_cast<size_t>(layer.in), 0.0f);
                        for (int o = 0; o < layer.out; ++o) {
                            float g = delta[static_cast<size_t>(o)];
                            if (g == 0.0f) continue;
                            kern::axpy(g, layer.weights.data() + static_cast<size_t>(o) * static_cast<size_t>(layer.in),
                                       next_delta.data(), static_cast<size_t>(layer.in));
                        }
                        // ReLU mask of the layer input.
                        for (int j = 0; j < layer.in; ++j) {
                            if (prev_act[static_cast<size_t>(j)] <= 0.0f) next_delta[static_cast<size_t>(j)] = 0.0f;
                        }
                        delta = std::move(next_delta);
                    }
                }
            }

            for (size_t l = 0; l < m.layers.size(); ++l) {
                NcfLayer& layer = m.layers[l];
                for (size_t j = 0; j < layer.weights.size(); ++j) {
                    layer.weights[j] -= lr * (grad_w[l][j] + l2 * layer.weights[j]);
                    grad_w[l][j] = 0.0f;
                }
                for (size_t j = 0; j < layer.bias.size(); ++j) {
                    layer.bias[j] -= lr * grad_b[l][j];
                    grad_b[l][j] = 0.0f;
                }
            }
            std::sort(touched_users.begin(), touched_users.end());
            touched_users.erase(std::unique(touched_users.begin(), touched_users.end()),
                                touched_users.end());
            std::sort(touched_items.begin(), touched_items.end());
            touched_items.erase(std::unique(touched_items.begin(), touched_items.end()),
                                touched_items.end());
            for (int32_t u : touched_users) {
                float* row = m.user_embeddings.data() + static_cast<size_t>(u) * d;
                float* g = grad_user.data() + static_cast<size_t>(u) * d;
                for (size_t j = 0; j < d; ++j) {
                    row[j] -= lr * (g[j] + l2 * row[j]);
                    g[j] = 0.0f;
                }
            }
            for (int32_t i : touched_items) {
                float* row = m.item_embeddings.data() + static_cast<size_t>(i) * d;
                float* g = grad_item.data() + static_cast<size_t>(i) * d;
                for (size_t j = 0; j < d; ++j) {
                    row[j] -= lr * (g[j] + l2 * row[j]);
                    g[j] = 0.0f;
                }
            }
        }
        if (!std::isfinite(sq_err)) {
            fail(ErrorCode::TrainingDiverged, "ncf loss non-finite at epoch " + std::to_string(epoch));
        }
    }
}

json config_to_json(const TrainConfig& c) {
    return json{{"embedding_dim", c.embedding_dim},
                {"epochs", c.epochs},
                {"learning_rate", c.learning_rate},
                {"l2_reg", c.l2_reg},
                {"batch_size", c.batch_size},
                {"hidden_dims", c.hidden_dims},
                {"seed", c.seed}};
}

TrainConfig config_from_json(const json& j) {
    TrainConfig c;
    c.embedding_dim = j.at("embedding_dim").get<int>();
    c.epochs = j.at("epochs").get<int>();
    c.learning_rate = j.at("learning_rate").get<float>();
    c.l2_reg = j.at("l2_reg").get<float>();
    c.batch_size = j.at("batch_size").get<int>();
    c.hidden_dims = j.at("hidden_dims").get<std::vector<int>>();
    c.seed = j.at("seed").get<uint64_t>();
    return c;
}

struct NamedArray {
    std::string name;
    std::vector<size_t> shape;
    const std::vector<float>* data;
};

std::vector<NamedArray> checkpoint_arrays(const RecModel& m) {
    const size_t d = static_cast<size_t>(m.embedding_dim);
    std::vector<NamedArray> arrays;
    arrays.push_back({"user_embeddings", {static_cast<size_t>(m.num_users), d}, &m.user_embeddings});
    arrays.push_back({"item_embeddings", {static_cast<size_t>(m.num_items), d}, &m.item_embeddings});
    if (m.kind == ModelKind::MF) {
        arrays.push_back({"user_bias", {static_cast<size_t>(m.num_users)}, &m.user_bias});
        arrays.push_back({"item_bias", {static_cast<size_t>(m.num_items)}, &m.item_bias});
    } else {
        for (size_t l = 0; l < m.layers.size(); ++l) {
            arrays.push_back({"layer" + std::to_string(l) + ".weights",
                              {static_cast<size_t>(m.layers[l].out), static_cast<size_t>(m.layers[l].in)},
                              &m.layers[l].weights});
            arrays.push_back({"layer" + std::to_string(l) + ".bias",
                              {static_cast<size_t>(m.layers[l].out)}, &m.layers[l].bias});
        }
    }
    return arrays;
}

}  // namespace

const char* model_kind_name(ModelKind kind) { return kind == ModelKind::MF ? "mf" : "ncf"; }

ModelKind model_kind_from_name(const std::string& name) {
    if (name == "mf") return ModelKind::MF;
    if (name == "ncf") return ModelKind::NCF;
    fail(ErrorCode::InvalidArgument, "unknown model kind '" + name + "'");
}

TrainConfig TrainConfig::mf_defaults() {
    TrainConfig c;
    c.embedding_dim = 32;
    c.epochs = 30;
    c.learning_rate = 0.01f;
    c.l2_reg = 0.05f;
    return c;
}

TrainConfig TrainConfig::ncf_defaults() {
    TrainConfig c;
    c.embedding_dim = 16;
    c.epochs = 20;
    c.learning_rate = 0.05f;
    c.l2_reg = 0.01f;
    c.batch_size = 256;
    c.hidden_dims = {32, 16, 8};
    return c;
}

RankingList::RankingList(int32_t user, std::vector<RankingEntry> entries, int32_t num_items)
    : user_(user), entries_(std::move(entries)), rank_by_item_(static_cast<size_t>(num_items), 0) {
    for (size_t k = 0; k < entries_.size(); ++k) {
        rank_by_item_[static_cast<size_t>(entries_[k].item)] = static_cast<int32_t>(k + 1);
    }
}

bool RankingList::contains(int32_t item) const {
    return item >= 0 && static_cast<size_t>(item) < rank_by_item_.size() &&
           rank_by_item_[static_cast<size_t>(item)] != 0;
}

int32_t RankingList::rank_of(int32_t item) const {
    if (!contains(item)) {
        fail(ErrorCode::ItemNotRanked,
             "item " + std::to_string(item) + " not in ranking of user " + std::to_string(user_));
    }
    return rank_by_item_[static_cast<size_t>(item)];
}

int32_t RankingList::item_at(int32_t rank) const {
    if (rank < 1 || static_cast<size_t>(rank) > entries_.size()) {
        fail(ErrorCode::ItemNotRanked, "rank " + std::to_string(rank) + " out of range");
    }
    return entries_[static_cast<size_t>(rank - 1)].item;
}

float RankingList::score_at(int32_t rank) const {
    if (rank < 1 || static_cast<size_t>(rank) > entries_.size()) {
        fail(ErrorCode::ItemNotRanked, "rank " + std::to_string(rank) + " out of range");
    }
    return entries_[static_cast<size_t>(rank - 1)].score;
}

const float* RecModel::user_embedding(int32_t u) const {
    if (u < 0 || u >= num_users) fail(ErrorCode::InvalidId, "user " + std::to_string(u));
    return user_embeddings.data() + static_cast<size_t>(u) * static_cast<size_t>(embedding_dim);
}

const float* RecModel::item_embedding(int32_t i) const {
    if (i < 0 || i >= num_items) fail(ErrorCode::InvalidId, "item " + std::to_string(i));
    return item_embeddings.data() + static_cast<size_t>(i) * static_cast<size_t>(embedding_dim);
}

float RecModel::raw_score(int32_t u, int32_t i) const {
    const size_t d = static_cast<size_t>(embedding_dim);
    if (kind == ModelKind::MF) {
        return global_bias + user_bias[static_cast<size_t>(u)] + item_bias[static_cast<size_t>(i)] +
               kern::dot(user_embedding(u), item_embedding(i), d);
    }
    return ncf_forward(*this, u, i, nullptr);
}

float RecModel::score(int32_t u, int32_t i) const {
    if (u < 0 || u >= num_users || i < 0 || i >= num_items) {
        fail(ErrorCode::InvalidId,
             "(" + std::to_string(u) + "," + std::to_string(i) + ") outside model");
    }
    if (kind == ModelKind::NCF) return raw_score(u, i);
    float normalized = (raw_score(u, i) - rating_min) / norm_denominator(rating_min, rating_max);
    return std::clamp(normalized, 0.0f, 1.0f);
}

RankingList RecModel::rank(int32_t u, const std::vector<int32_t>& original_history) const {
    if (u < 0 || u >= num_users) fail(ErrorCode::InvalidId, "user " + std::to_string(u));
    std::vector<RankingEntry> entries;
    entries.reserve(static_cast<size_t>(num_items));

    if (kind == ModelKind::MF) {
        const size_t d = static_cast<size_t>(embedding_dim);
        std::vector<float> dots(static_cast<size_t>(num_items));
        kern::matvec_rows(item_embeddings.data(), static_cast<size_t>(num_items), d,
                          user_embedding(u), dots.data());
        const float base = global_bias + user_bias[static_cast<size_t>(u)];
        const float denom = norm_denominator(rating_min, rating_max);
        for (int32_t i = 0; i < num_items; ++i) {
            if (std::binary_search(original_history.begin(), original_history.end(), i)) continue;
            float raw = base + item_bias[static_cast<size_t>(i)] + dots[static_cast<size_t>(i)];
            float s = std::clamp((raw - rating_min) / denom, 0.0f, 1.0f);
            entries.push_back({i, s});
        }
    } else {
        for (int32_t i = 0; i < num_items; ++i) {
            if (std::binary_search(original_history.begin(), original_history.end(), i)) continue;
            entries.push_back({i, raw_score(u, i)});
        }
    }
    if (entries.empty()) {
        fail(ErrorCode::EmptyCandidates, "user " + std::to_string(u) + " has no candidate items");
    }
    std::stable_sort(entries.begin(), entries.end(), [](const RankingEntry& a, const RankingEntry& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.item < b.item;
    });
    return RankingList(u, std::move(entries), num_items);
}

RecModel train(const InteractionStore& store, ModelKind kind, const TrainConfig& config) {
    if (store.empty()) fail(ErrorCode::EmptyInput, "training store is empty");
    check_config(kind, config);
    RecModel m = init_model(store, kind, config);
    if (kind == ModelKind::MF) {
        train_mf(m, store);
    } else {
        train_ncf(m, store);
    }
    m.final_train_rmse = rmse(m, store);
    if (!std::isfinite(m.final_train_rmse)) {
        fail(ErrorCode::TrainingDiverged, "final rmse non-finite");
    }
    return m;
}

RecModel retrain_counterfactual(const InteractionStore& store, const DeletionMask& mask,
                                ModelKind kind, const TrainConfig& config) {
    return train(store.masked_view(mask), kind, config);
}

double rmse(const RecModel& model, const InteractionStore& store) {
    if (store.empty()) return 0.0;
    const float denom = norm_denominator(model.rating_min, model.rating_max);
    double acc = 0.0;
    for (const Interaction& row : store.interactions()) {
        double pred = model.kind == ModelKind::MF
                          ? static_cast<double>(model.raw_score(row.user, row.item))
                          : static_cast<double>(model.rating_min) +
                                static_cast<double>(model.raw_score(row.user, row.item)) *
                                    static_cast<double>(denom);
        double err = static_cast<double>(row.rating) - pred;
        acc += err * err;
    }
    return std::sqrt(acc / static_cast<double>(store.size()));
}

void save_model(const RecModel& m, const std::string& path) {
    json manifest;
    manifest["kind"] = model_kind_name(m.kind);
    manifest["embedding_dim"] = m.embedding_dim;
    manifest["num_users"] = m.num_users;
    manifest["num_items"] = m.num_items;
    manifest["rating_min"] = m.rating_min;
    manifest["rating_max"] = m.rating_max;
    manifest["train_seed"] = m.train_seed;
    manifest["final_train_rmse"] = m.final_train_rmse;
    manifest["config"] = config_to_json(m.config);
    manifest["global_bias"] = m.global_bias;
    json arrays = json::array();
    for (const NamedArray& a : checkpoint_arrays(m)) {
        arrays.push_back(json{{"name", a.name}, {"shape", a.shape}});
    }
    manifest["arrays"] = arrays;

    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::Io, "cannot write " + path);
    std::string text = manifest.dump();
    uint32_t len = static_cast<uint32_t>(text.size());
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const NamedArray& a : checkpoint_arrays(m)) {
        out.write(reinterpret_cast<const char*>(a.data->data()),
                  static_cast<std::streamsize>(a.data->size() * sizeof(float)));
    }
    if (!out) fail(ErrorCode::Io, "write failed for " + path);
}

RecModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::Io, "cannot open " + path);
    char magic[8];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
        fail(ErrorCode::Checkpoint, path + ": bad magic");
    }
    uint32_t len = 0;
    if (!in.read(reinterpret_cast<char*>(&len), sizeof(len))) {
        fail(ErrorCode::Checkpoint, path + ": truncated manifest length");
    }
    std::string text(len, '\0');
    if (!in.read(text.data(), len)) fail(ErrorCode::Checkpoint, path + ": truncated manifest");
    json manifest;
    try {
        manifest = json::parse(text);
    } catch (const json::exception& e) {
        fail(ErrorCode::Checkpoint, path + ": manifest parse failed: " + e.what());
    }

    RecModel m;
    try {
        m.kind = model_kind_from_name(manifest.at("kind").get<std::string>());
        m.embedding_dim = manifest.at("embedding_dim").get<int>();
        m.num_users = manifest.at("num_users").get<int32_t>();
        m.num_items = manifest.at("num_items").get<int32_t>();
        m.rating_min = manifest.at("rating_min").get<float>();
        m.rating_max = manifest.at("rating_max").get<float>();
        m.train_seed = manifest.at("train_seed").get<uint64_t>();
        m.final_train_rmse = manifest.at("final_train_rmse").get<double>();
        m.config = config_from_json(manifest.at("config"));
        m.global_bias = manifest.at("global_bias").get<float>();
    } catch (const json::exception& e) {
        fail(ErrorCode::Checkpoint, path + ": manifest field error: " + e.what());
    }
    if (m.kind == ModelKind::NCF) {
        int in_dim = 2 * m.embedding_dim;
        for (int out_dim : m.config.hidden_dims) {
            NcfLayer layer;
            layer.in = in_dim;
            layer.out = out_dim;
            m.layers.push_back(std::move(layer));
            in_dim = out_dim;
        }
        NcfLayer head;
        head.in = in_dim;
        head.out = 1;
        m.layers.push_back(std::move(head));
    }

    std::vector<std::pair<std::string, std::vector<size_t>>> declared;
    for (const auto& a : manifest.at("arrays")) {
        declared.emplace_back(a.at("name").get<std::string>(),
                              a.at("shape").get<std::vector<size_t>>());
    }
    auto expected = checkpoint_arrays(m);
    if (declared.size() != expected.size()) {
        fail(ErrorCode::Checkpoint, path + ": array list mismatch for kind " +
                                        std::string(model_kind_name(m.kind)));
    }
    for (size_t a = 0; a < expected.size(); ++a) {
        if (declared[a].first != expected[a].name || declared[a].second != expected[a].shape) {
            fail(ErrorCode::Checkpoint, path + ": array '" + declared[a].first +
                                            "' does not match expected '" + expected[a].name + "'");
        }
        size_t count = 1;
        for (size_t s : declared[a].second) count *= s;
        auto* dst = const_cast<std::vector<float>*>(expected[a].data);
        dst->resize(count);
        if (!in.read(reinterpret_cast<char*>(dst->data()),
                     static_cast<std::streamsize>(count * sizeof(float)))) {
            fail(ErrorCode::Checkpoint, path + ": truncated array '" + expected[a].name + "'");
        }
    }
    char extra;
    if (in.read(&extra, 1)) fail(ErrorCode::Checkpoint, path + ": trailing bytes");
    return m;
}

RecModel load_model(const std::string& path, ModelKind expected_kind) {
    RecModel m = load_model(path);
    if (m.kind != expected_kind) {
        fail(ErrorCode::Checkpoint, path + ": checkpoint kind " +
                                        std::string(model_kind_name(m.kind)) + ", expected " +
                                        std::string(model_kind_name(expected_kind)));
    }
    return m;
}

uint64_t model_weights_hash(const RecModel& m) {
    uint64_t h = 0xcbf29ce484222325ULL;
    auto mix_bytes = [&h](const void* data, size_t bytes) {
        const unsigned char* p = static_cast<const unsigned char*>(data);
        for (size_t i = 0; i < bytes; ++i) {
            h ^= p[i];
            h *= 0x100000001b3ULL;
        }
    };
    mix_bytes(&m.kind, sizeof(m.kind));
    mix_bytes(&m.embedding_dim, sizeof(m.embedding_dim));
    mix_bytes(m.user_embeddings.data(), m.user_embeddings.size() * sizeof(float));
    mix_bytes(m.item_embeddings.data(), m.item_embeddings.size() * sizeof(float));
    mix_bytes(m.user_bias.data(), m.user_bias.size() * sizeof(float));
    mix_bytes(m.item_bias.data(), m.item_bias.size() * sizeof(float));
    mix_bytes(&m.global_bias, sizeof(m.global_bias));
    for (const NcfLayer& layer : m.layers) {
        mix_bytes(layer.weights.data(), layer.weights.size() * sizeof(float));
        mix_bytes(layer.bias.data(), layer.bias.size() * sizeof(float));
    }
    return h;
}

}  // namespace cfx
