#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfx/cfsim.hpp"
#include "cfx/recmodel.hpp"

namespace cfx {

enum class SurrogateFamily { LinearReg, MlpReg, LinearClf, MlpClf };
enum class SurrogateTarget { Reg, Clf, Rank, Cross };

const char* surrogate_family_name(SurrogateFamily family);
SurrogateFamily surrogate_family_from_name(const std::string& name);
const char* surrogate_target_name(SurrogateTarget target);
SurrogateTarget surrogate_target_from_name(const std::string& name);

// [user embedding | summed deleted-item embeddings | target-item embedding],
// all taken from the original recommendation model. Length 3d.
struct FeatureVector {
    std::vector<float> values;
};

FeatureVector featurize(const RecModel& model, int32_t user, const std::vector<int32_t>& deleted,
                        int32_t item);

// Small dense net used by the MLP families: dims = {in, 64, 32, out}, ReLU
// hidden units, linear output (logits for classification). Parameters live in
// one flat double vector so finite-difference checks can poke single entries.
struct MlpSpec {
    std::vector<int> dims;
    double l2 = 1e-5;
};

size_t mlp_param_count(const MlpSpec& spec);
void mlp_init_params(const MlpSpec& spec, uint64_t seed, std::vector<double>& theta);
void mlp_forward(const MlpSpec& spec, const std::vector<double>& theta, const double* x,
                 double* out);

// Mean squared error over the batch plus l2/2 * ||W||^2; returns the loss and
// fills grad (same layout as theta).
double mlp_loss_and_grad_reg(const MlpSpec& spec, const std::vector<double>& theta, const double* x,
                             const double* y, size_t n, size_t p, std::vector<double>& grad);

// Class-weighted softmax cross entropy plus the same l2 term. labels index
// into class_weights.
double mlp_loss_and_grad_clf(const MlpSpec& spec, const std::vector<double>& theta, const double* x,
                             const int* labels, const double* class_weights, size_t n, size_t p,
                             std::vector<double>& grad);

struct Surrogate {
    SurrogateFamily family = SurrogateFamily::LinearReg;
    SurrogateTarget target = SurrogateTarget::Reg;
    int feature_dim = 0;

    // Per-dimension z-score statistics from the fitting data.
    std::vector<float> feat_mean;
    std::vector<float> feat_std;

    // linear-reg
    std::vector<float> linear_weights;
    float intercept = 0.0f;
    double lasso_lambda = 0.0;

    // linear-clf: rows ordered by class {-1, 0, +1}
    std::vector<float> clf_weights;  // [3 x feature_dim]
    std::vector<float> clf_bias;     // [3]
    double clf_l2 = 0.0;

    // mlp families
    MlpSpec mlp_spec;
    std::vector<float> mlp_theta;

    double validation_metric = 0.0;  // CV MSE (reg) or CV accuracy (clf)
    uint64_t embedding_hash = 0;
    std::vector<int32_t> training_users;
};

// Grid searched by cross validation for the lasso / logistic penalty.
std::vector<double> surrogate_lambda_grid();

// Fits one surrogate family against one delta definition. Linear families
// select their penalty by group-aware k-fold CV; MLP families use a held-out
// fold for early stopping. Embeddings come from `model` and stay frozen.
Surrogate fit(const CfDataset& cf, SurrogateFamily family, SurrogateTarget target,
              const RecModel& model, int cv_folds, uint64_t seed);

// Regression families return the predicted delta; classification families
// return the class +1 logit, which is the search score.
double predict(const Surrogate& s, const RecModel& model, int32_t user,
               const std::vector<int32_t>& deleted, int32_t item);

void save_surrogate(const Surrogate& s, const std::string& path);
Surrogate load_surrogate(const std::string& path);

}  // namespace cfx
