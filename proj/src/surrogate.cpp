#include "cfx/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "cfx/errors.hpp"
#include "cfx/kernels.hpp"
#include "cfx/rng.hpp"

namespace cfx {

using json = nlohmann::ordered_json;

namespace {

constexpr char kSurrogateMagic[8] = {'C', 'F', 'X', 'S', 'U', 'R', 'R', '1'};
constexpr double kStdFloor = 1e-12;

bool is_linear(SurrogateFamily f) {
    return f == SurrogateFamily::LinearReg || f == SurrogateFamily::LinearClf;
}

bool is_classification(SurrogateFamily f) {
    return f == SurrogateFamily::LinearClf || f == SurrogateFamily::MlpClf;
}

int class_index_of(int delta_clf) { return delta_clf + 1; }  // {-1,0,+1} -> {0,1,2}

double target_value(const CfRecord& r, SurrogateTarget t) {
    switch (t) {
        case SurrogateTarget::Reg: return r.delta_reg;
        case SurrogateTarget::Rank: return static_cast<double>(r.delta_rank);
        case SurrogateTarget::Cross: return r.delta_cross;
        case SurrogateTarget::Clf: return static_cast<double>(r.delta_clf);
    }
    return 0.0;
}

struct FitData {
    size_t n = 0;
    size_t p = 0;
    std::vector<double> x;       // row-major [n x p]
    std::vector<double> y;       // regression targets
    std::vector<int> labels;     // classification labels
    std::vector<int> group_of;   // record -> (user, deletion) group
    size_t num_groups = 0;
};

FitData build_fit_data(const CfDataset& cf, SurrogateTarget target, bool classification,
                       const RecModel& model) {
    FitData data;
    data.n = cf.records.size();
    data.p = 3 * static_cast<size_t>(model.embedding_dim);
    data.x.resize(data.n * data.p);
    if (classification) {
        data.labels.resize(data.n);
    } else {
        data.y.resize(data.n);
    }
    data.group_of.resize(data.n);

    std::unordered_map<std::string, int> group_ids;
    for (size_t s = 0; s < data.n; ++s) {
        const CfRecord& r = cf.records[s];
        FeatureVector fv = featurize(model, r.user, r.deleted, r.item);
        for (size_t j = 0; j < data.p; ++j) {
            data.x[s * data.p + j] = static_cast<double>(fv.values[j]);
        }
        if (classification) {
            data.labels[s] = class_index_of(r.delta_clf);
        } else {
            data.y[s] = target_value(r, target);
        }
        std::string key = std::to_string(r.user);
        for (int32_t d : r.deleted) key += "," + std::to_string(d);
        auto [it, inserted] = group_ids.try_emplace(key, static_cast<int>(group_ids.size()));
        data.group_of[s] = it->second;
    }
    data.num_groups = group_ids.size();
    return data;
}

// Fold id per group: permute groups with the seed, deal them round-robin.
std::vector<int> assign_group_folds(size_t num_groups, int folds, uint64_t seed) {
    std::vector<int> order(num_groups);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, 0xF01Du));
    rng.shuffle(order);
    std::vector<int> fold_of(num_groups, 0);
    for (size_t pos = 0; pos < order.size(); ++pos) {
        fold_of[static_cast<size_t>(order[pos])] = static_cast<int>(pos % static_cast<size_t>(folds));
    }
    return fold_of;
}

struct Standardization {
    std::vector<double> mean;
    std::vector<double> std;
};

Standardization compute_stats(const double* x, const std::vector<size_t>& rows, size_t p) {
    Standardization st;
    st.mean.assign(p, 0.0);
    st.std.assign(p, 0.0);
    const double n = static_cast<double>(rows.size());
    for (size_t r : rows) {
        for (size_t j = 0; j < p; ++j) st.mean[j] += x[r * p + j];
    }
    for (size_t j = 0; j < p; ++j) st.mean[j] /= n;
    for (size_t r : rows) {
        for (size_t j = 0; j < p; ++j) {
            double d = x[r * p + j] - st.mean[j];
            st.std[j] += d * d;
        }
    }
    for (size_t j = 0; j < p; ++j) {
        st.std[j] = std::sqrt(st.std[j] / n);
        if (st.std[j] < kStdFloor) st.std[j] = 1.0;
    }
    return st;
}

// Column-major standardized copy of the selected rows.
std::vector<double> standardized_columns(const double* x, const std::vector<size_t>& rows, size_t p,
                                         const Standardization& st) {
    std::vector<double> cols(rows.size() * p);
    for (size_t k = 0; k < rows.size(); ++k) {
        const double* src = x + rows[k] * p;
        for (size_t j = 0; j < p; ++j) {
            cols[j * rows.size() + k] = (src[j] - st.mean[j]) / st.std[j];
        }
    }
    return cols;
}

// Coordinate descent for (1/2n)||y - Xw||^2 + lambda * ||w||_1 on
// standardized columns; w and the residual are carried across lambda values
// for warm starts.
void lasso_cd(const std::vector<double>& cols, size_t n, size_t p, double lambda,
              std::vector<double>& w, std::vector<double>& residual,
              const std::vector<double>& col_sq) {
    constexpr int kMaxSweeps = 1000;
    constexpr double kTol = 1e-7;
    const double threshold = lambda * static_cast<double>(n);
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        double max_delta = 0.0;
        double max_w = 0.0;
        for (size_t j = 0; j < p; ++j) {
            if (col_sq[j] == 0.0) continue;
            const double* xj = cols.data() + j * n;
            double rho = kern::dot_d(xj, residual.data(), n) + w[j] * col_sq[j];
            double w_new = 0.0;
            if (rho > threshold) {
                w_new = (rho - threshold) / col_sq[j];
            } else if (rho < -threshold) {
                w_new = (rho + threshold) / col_sq[j];
            }
            double delta = w_new - w[j];
            if (delta != 0.0) {
                kern::axpy_d(-delta, xj, residual.data(), n);
                w[j] = w_new;
            }
            max_delta = std::max(max_delta, std::fabs(delta));
            max_w = std::max(max_w, std::fabs(w_new));
        }
        if (max_delta < kTol * (1.0 + max_w)) break;
    }
}

struct LinearRegFit {
    std::vector<double> w;
    double intercept = 0.0;
    double lambda = 0.0;
    double cv_mse = 0.0;
    Standardization stats;
};

LinearRegFit fit_linear_reg(const FitData& data, int folds, uint64_t seed) {
    const std::vector<double> grid = surrogate_lambda_grid();
    std::vector<int> fold_of_group = assign_group_folds(data.num_groups, folds, seed);
    std::vector<double> cv_mse(grid.size(), 0.0);
    std::vector<size_t> cv_count(grid.size(), 0);

    for (int f = 0; f < folds; ++f) {
        std::vector<size_t> train_rows, val_rows;
        for (size_t s = 0; s < data.n; ++s) {
            if (fold_of_group[static_cast<size_t>(data.group_of[s])] == f) {
                val_rows.push_back(s);
            } else {
                train_rows.push_back(s);
            }
        }
        if (train_rows.empty() || val_rows.empty()) continue;
        Standardization st = compute_stats(data.x.data(), train_rows, data.p);
        std::vector<double> cols = standardized_columns(data.x.data(), train_rows, data.p, st);
        const size_t n = train_rows.size();
        double y_mean = 0.0;
        for (size_t r : train_rows) y_mean += data.y[r];
        y_mean /= static_cast<double>(n);

        std::vector<double> col_sq(data.p, 0.0);
        for (size_t j = 0; j < data.p; ++j) {
            col_sq[j] = kern::dot_d(cols.data() + j * n, cols.data() + j * n, n);
        }
        std::vector<double> w(data.p, 0.0);
        std::vector<double> residual(n);
        for (size_t k = 0; k < n; ++k) residual[k] = data.y[train_rows[k]] - y_mean;

        // Largest penalty first so warm starts shrink monotonically.
        for (size_t g = grid.size(); g-- > 0;) {
            lasso_cd(cols, n, data.p, grid[g], w, residual, col_sq);
            double mse = 0.0;
            for (size_t r : val_rows) {
                double pred = y_mean;
                for (size_t j = 0; j < data.p; ++j) {
                    pred += w[j] * (data.x[r * data.p + j] - st.mean[j]) / st.std[j];
                }
                double err = data.y[r] - pred;
                mse += err * err;
            }
            cv_mse[g] += mse;
            cv_count[g] += val_rows.size();
        }
    }

    size_t best = grid.size() - 1;  // ties resolve to the larger penalty
    double best_mse = std::numeric_limits<double>::infinity();
    for (size_t g = grid.size(); g-- > 0;) {
        if (cv_count[g] == 0) continue;
        double mse = cv_mse[g] / static_cast<double>(cv_count[g]);
        if (mse < best_mse) {
            best_mse = mse;
            best = g;
        }
    }

    // Refit on everything at the selected penalty.
    std::vector<size_t> all_rows(data.n);
    std::iota(all_rows.begin(), all_rows.end(), static_cast<size_t>(0));
    LinearRegFit fit;
    fit.stats = compute_stats(data.x.data(), all_rows, data.p);
    std::vector<double> cols = standardized_columns(data.x.data(), all_rows, data.p, fit.stats);
    double y_mean = std::accumulate(data.y.begin(), data.y.end(), 0.0) /
                    static_cast<double>(data.n);
    std::vector<double> col_sq(data.p, 0.0);
    for (size_t j = 0; j < data.p; ++j) {
        col_sq[j] = kern::dot_d(cols.data() + j * data.n, cols.data() + j * data.n, data.n);
    }
    fit.w.assign(data.p, 0.0);
    std::vector<double> residual(data.n);
    for (size_t k = 0; k < data.n; ++k) residual[k] = data.y[k] - y_mean;
    for (size_t g = grid.size(); g-- > best;) {
        lasso_cd(cols, data.n, data.p, grid[g], fit.w, residual, col_sq);
    }
    fit.intercept = y_mean;
    fit.lambda = grid[best];
    fit.cv_mse = std::isfinite(best_mse) ? best_mse : 0.0;
    return fit;
}

std::vector<double> class_weights_for(const std::vector<int>& labels,
                                      const std::vector<size_t>& rows) {
    std::vector<double> counts(3, 0.0);
    for (size_t r : rows) counts[static_cast<size_t>(labels[r])] += 1.0;
    int present = 0;
    for (double c : counts) present += c > 0.0 ? 1 : 0;
    std::vector<double> weights(3, 0.0);
    const double n = static_cast<double>(rows.size());
    for (size_t c = 0; c < 3; ++c) {
        if (counts[c] > 0.0) weights[c] = n / (static_cast<double>(present) * counts[c]);
    }
    return weights;
}

int count_present_classes(const std::vector<int>& labels) {
    bool seen[3] = {false, false, false};
    for (int l : labels) seen[static_cast<size_t>(l)] = true;
    return (seen[0] ? 1 : 0) + (seen[1] ? 1 : 0) + (seen[2] ? 1 : 0);
}

// Multinomial logistic loss with class weights and l2 on the weights.
// x is row-major standardized [n x p]; W is [3 x p], b is [3].
double logistic_loss_and_grad(const std::vector<double>& x, const std::vector<int>& labels,
                              const std::vector<size_t>& rows, size_t p,
                              const std::vector<double>& class_weights, double l2,
                              const std::vector<double>& wb, std::vector<double>& grad) {
    const size_t n = rows.size();
    const double* w = wb.data();
    const double* b = wb.data() + 3 * p;
    grad.assign(wb.size(), 0.0);
    double* gw = grad.data();
    double* gb = grad.data() + 3 * p;
    double loss = 0.0;
    const double inv_n = 1.0 / static_cast<double>(n);

    for (size_t k = 0; k < n; ++k) {
        const double* xi = x.data() + rows[k] * p;
        double logits[3];
        for (size_t c = 0; c < 3; ++c) logits[c] = kern::dot_d(w + c * p, xi, p) + b[c];
        double max_logit = std::max({logits[0], logits[1], logits[2]});
        double sum = 0.0;
        double probs[3];
        for (size_t c = 0; c < 3; ++c) {
            probs[c] = std::exp(logits[c] - max_logit);
            sum += probs[c];
        }
        for (size_t c = 0; c < 3; ++c) probs[c] /= sum;
        const int label = labels[rows[k]];
        const double cw = class_weights[static_cast<size_t>(label)];
        loss -= cw * std::log(std::max(probs[label], 1e-300)) * inv_n;
        for (size_t c = 0; c < 3; ++c) {
            double coeff = cw * (probs[c] - (static_cast<int>(c) == label ? 1.0 : 0.0)) * inv_n;
            if (coeff != 0.0) {
                kern::axpy_d(coeff, xi, gw + c * p, p);
                gb[c] += coeff;
            }
        }
    }
    for (size_t j = 0; j < 3 * p; ++j) {
        loss += 0.5 * l2 * w[j] * w[j];
        gw[j] += l2 * w[j];
    }
    return loss;
}

// Deterministic full-batch gradient descent with backtracking.
void logistic_train(const std::vector<double>& x, const std::vector<int>& labels,
                    const std::vector<size_t>& rows, size_t p,
                    const std::vector<double>& class_weights, double l2,
                    std::vector<double>& wb) {
    constexpr int kMaxIters = 400;
    std::vector<double> grad, trial;
    double step = 1.0;
    double loss = logistic_loss_and_grad(x, labels, rows, p, class_weights, l2, wb, grad);
    for (int it = 0; it < kMaxIters; ++it) {
        double grad_sq = kern::dot_d(grad.data(), grad.data(), grad.size());
        if (grad_sq < 1e-18) break;
        trial.resize(wb.size());
        double trial_loss = 0.0;
        bool accepted = false;
        for (int bt = 0; bt < 40; ++bt) {
            for (size_t j = 0; j < wb.size(); ++j) trial[j] = wb[j] - step * grad[j];
            std::vector<double> trial_grad;
            trial_loss =
                logistic_loss_and_grad(x, labels, rows, p, class_weights, l2, trial, trial_grad);
            if (trial_loss <= loss - 1e-4 * step * grad_sq) {
                wb.swap(trial);
                grad.swap(trial_grad);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
        if (loss - trial_loss < 1e-10 * (1.0 + std::fabs(loss))) {
            loss = trial_loss;
            break;
        }
        loss = trial_loss;
        step *= 1.5;
    }
}

struct LinearClfFit {
    std::vector<double> wb;  // [3 x p] weights then [3] biases
    double lambda = 0.0;
    double cv_accuracy = 0.0;
    Standardization stats;
};

LinearClfFit fit_linear_clf(const FitData& data, int folds, uint64_t seed) {
    const std::vector<double> grid = surrogate_lambda_grid();
    std::vector<int> fold_of_group = assign_group_folds(data.num_groups, folds, seed);
    std::vector<double> cv_correct(grid.size(), 0.0);
    std::vector<size_t> cv_count(grid.size(), 0);

    for (int f = 0; f < folds; ++f) {
        std::vector<size_t> train_rows, val_rows;
        for (size_t s = 0; s < data.n; ++s) {
            if (fold_of_group[static_cast<size_t>(data.group_of[s])] == f) {
                val_rows.push_back(s);
            } else {
                train_rows.push_back(s);
            }
        }
        if (train_rows.empty() || val_rows.empty()) continue;
        Standardization st = compute_stats(data.x.data(), train_rows, data.p);
        std::vector<double> xz(data.n * data.p);
        for (size_t s = 0; s < data.n; ++s) {
            for (size_t j = 0; j < data.p; ++j) {
                xz[s * data.p + j] = (data.x[s * data.p + j] - st.mean[j]) / st.std[j];
            }
        }
        std::vector<double> cw = class_weights_for(data.labels, train_rows);
        std::vector<double> wb(3 * data.p + 3, 0.0);
        for (size_t g = grid.size(); g-- > 0;) {
            logistic_train(xz, data.labels, train_rows, data.p, cw, grid[g], wb);
            size_t correct = 0;
            for (size_t r : val_rows) {
                const double* xi = xz.data() + r * data.p;
                double best_logit = -std::numeric_limits<double>::infinity();
                int best_c = 0;
                for (size_t c = 0; c < 3; ++c) {
                    double logit = kern::dot_d(wb.data() + c * data.p, xi, data.p) + wb[3 * data.p + c];
                    if (logit > best_logit) {
                        best_logit = logit;
                        best_c = static_cast<int>(c);
                    }
                }
                if (best_c == data.labels[r]) ++correct;
            }
            cv_correct[g] += static_cast<double>(correct);
            cv_count[g] += val_rows.size();
        }
    }

    size_t best = grid.size() - 1;
    double best_acc = -1.0;
    for (size_t g = grid.size(); g-- > 0;) {
        if (cv_count[g] == 0) continue;
        double acc = cv_correct[g] / static_cast<double>(cv_count[g]);
        if (acc > best_acc + 1e-12) {
            best_acc = acc;
            best = g;
        }
    }

    std::vector<size_t> all_rows(data.n);
    std::iota(all_rows.begin(), all_rows.end(), static_cast<size_t>(0));
    LinearClfFit fit;
    fit.stats = compute_stats(data.x.data(), all_rows, data.p);
    std::vector<double> xz(data.n * data.p);
    for (size_t s = 0; s < data.n; ++s) {
        for (size_t j = 0; j < data.p; ++j) {
            xz[s * data.p + j] = (data.x[s * data.p + j] - fit.stats.mean[j]) / fit.stats.std[j];
        }
    }
    std::vector<double> cw = class_weights_for(data.labels, all_rows);
    fit.wb.assign(3 * data.p + 3, 0.0);
    for (size_t g = grid.size(); g-- > best;) {
        logistic_train(xz, data.labels, all_rows, data.p, cw, grid[g], fit.wb);
    }
    fit.lambda = grid[best];
    fit.cv_accuracy = std::max(best_acc, 0.0);
    return fit;
}

struct MlpFit {
    std::vector<double> theta;
    MlpSpec spec;
    double val_metric = 0.0;
    Standardization stats;
};

// Adam on minibatches with early stopping on the held-out fold.
MlpFit fit_mlp(const FitData& data, bool classification, int folds, uint64_t seed) {
    MlpFit fit;
    fit.spec.dims = {static_cast<int>(data.p), 64, 32, classification ? 3 : 1};
    fit.spec.l2 = 1e-5;

    std::vector<int> fold_of_group = assign_group_folds(data.num_groups, folds, seed);
    const int held = folds - 1;
    std::vector<size_t> train_rows, val_rows;
    for (size_t s = 0; s < data.n; ++s) {
        if (fold_of_group[static_cast<size_t>(data.group_of[s])] == held) {
            val_rows.push_back(s);
        } else {
            train_rows.push_back(s);
        }
    }
    if (train_rows.empty() || val_rows.empty()) {
        train_rows.resize(data.n);
        std::iota(train_rows.begin(), train_rows.end(), static_cast<size_t>(0));
        val_rows = train_rows;
    }

    fit.stats = compute_stats(data.x.data(), train_rows, data.p);
    std::vector<double> xz(data.n * data.p);
    for (size_t s = 0; s < data.n; ++s) {
        for (size_t j = 0; j < data.p; ++j) {
            xz[s * data.p + j] = (data.x[s * data.p + j] - fit.stats.mean[j]) / fit.stats.std[j];
        }
    }
    std::vector<double> cw =
        classification ? class_weights_for(data.labels, train_rows) : std::vector<double>();

    mlp_init_params(fit.spec, derive_seed(seed, 0x317u), fit.theta);
    const size_t param_count = fit.theta.size();
    std::vector<double> m(param_count, 0.0), v(param_count, 0.0), grad;

    const size_t batch = 256;
    // Epoch budget shrinks with data size; early stopping usually exits first.
    const int max_epochs = static_cast<int>(
        std::clamp<size_t>(3000000 / std::max<size_t>(data.n, 1), 30, 300));
    constexpr double kLr = 1e-3;
    constexpr int kPatience = 20;

    auto val_loss = [&]() {
        std::vector<double> batch_x(val_rows.size() * data.p);
        for (size_t k = 0; k < val_rows.size(); ++k) {
            std::memcpy(batch_x.data() + k * data.p, xz.data() + val_rows[k] * data.p,
                        data.p * sizeof(double));
        }
        std::vector<double> g;
        if (classification) {
            std::vector<int> batch_labels(val_rows.size());
            for (size_t k = 0; k < val_rows.size(); ++k) batch_labels[k] = data.labels[val_rows[k]];
            return mlp_loss_and_grad_clf(fit.spec, fit.theta, batch_x.data(), batch_labels.data(),
                                         cw.data(), val_rows.size(), data.p, g);
        }
        std::vector<double> batch_y(val_rows.size());
        for (size_t k = 0; k < val_rows.size(); ++k) batch_y[k] = data.y[val_rows[k]];
        return mlp_loss_and_grad_reg(fit.spec, fit.theta, batch_x.data(), batch_y.data(),
                                     val_rows.size(), data.p, g);
    };

    std::vector<double> best_theta = fit.theta;
    double best_val = val_loss();
    int bad_epochs = 0;
    size_t adam_t = 0;

    std::vector<double> batch_x(batch * data.p);
    std::vector<double> batch_y(batch);
    std::vector<int> batch_labels(batch);

    for (int epoch = 0; epoch < max_epochs; ++epoch) {
        std::vector<size_t> order = train_rows;
        Rng rng(derive_seed(seed, 0xADA0u, static_cast<uint64_t>(epoch)));
        rng.shuffle(order);
        for (size_t start = 0; start < order.size(); start += batch) {
            const size_t end = std::min(order.size(), start + batch);
            const size_t bn = end - start;
            for (size_t k = 0; k < bn; ++k) {
                std::memcpy(batch_x.data() + k * data.p, xz.data() + order[start + k] * data.p,
                            data.p * sizeof(double));
                if (classification) {
                    batch_labels[k] = data.labels[order[start + k]];
                } else {
                    batch_y[k] = data.y[order[start + k]];
                }
            }
            double loss =
                classification
                    ? mlp_loss_and_grad_clf(fit.spec, fit.theta, batch_x.data(), batch_labels.data(),
                                            cw.data(), bn, data.p, grad)
                    : mlp_loss_and_grad_reg(fit.spec, fit.theta, batch_x.data(), batch_y.data(), bn,
                                            data.p, grad);
            if (!std::isfinite(loss)) {
                fail(ErrorCode::TrainingDiverged, "mlp surrogate loss non-finite");
            }
            ++adam_t;
            const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
            const double bc1 = 1.0 - std::pow(b1, static_cast<double>(adam_t));
            const double bc2 = 1.0 - std::pow(b2, static_cast<double>(adam_t));
            for (size_t j = 0; j < param_count; ++j) {
                m[j] = b1 * m[j] + (1.0 - b1) * grad[j];
                v[j] = b2 * v[j] + (1.0 - b2) * grad[j] * grad[j];
                fit.theta[j] -= kLr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps);
            }
        }
        double vl = val_loss();
        if (vl < best_val - 1e-12) {
            best_val = vl;
            best_theta = fit.theta;
            bad_epochs = 0;
        } else if (++bad_epochs >= kPatience) {
            break;
        }
    }
    fit.theta = best_theta;

    if (classification) {
        // Report plain accuracy on the held-out fold.
        size_t correct = 0;
        std::vector<double> out(3);
        for (size_t r : val_rows) {
            mlp_forward(fit.spec, fit.theta, xz.data() + r * data.p, out.data());
            int best_c = 0;
            for (int c = 1; c < 3; ++c) {
                if (out[static_cast<size_t>(c)] > out[static_cast<size_t>(best_c)]) best_c = c;
            }
            if (best_c == data.labels[r]) ++correct;
        }
        fit.val_metric = static_cast<double>(correct) / static_cast<double>(val_rows.size());
    } else {
        double mse = 0.0;
        double out;
        for (size_t r : val_rows) {
            mlp_forward(fit.spec, fit.theta, xz.data() + r * data.p, &out);
            double err = out - data.y[r];
            mse += err * err;
        }
        fit.val_metric = mse / static_cast<double>(val_rows.size());
    }
    return fit;
}

void standardize_input(const Surrogate& s, const FeatureVector& fv, std::vector<double>& z) {
    z.resize(fv.values.size());
    for (size_t j = 0; j < z.size(); ++j) {
        z[j] = (static_cast<double>(fv.values[j]) - static_cast<double>(s.feat_mean[j])) /
               static_cast<double>(s.feat_std[j]);
    }
}

}  // namespace

const char* surrogate_family_name(SurrogateFamily family) {
    switch (family) {
        case SurrogateFamily::LinearReg: return "linear-reg";
        case SurrogateFamily::MlpReg: return "mlp-reg";
        case SurrogateFamily::LinearClf: return "linear-clf";
        case SurrogateFamily::MlpClf: return "mlp-clf";
    }
    return "linear-reg";
}

SurrogateFamily surrogate_family_from_name(const std::string& name) {
    if (name == "linear-reg") return SurrogateFamily::LinearReg;
    if (name == "mlp-reg") return SurrogateFamily::MlpReg;
    if (name == "linear-clf") return SurrogateFamily::LinearClf;
    if (name == "mlp-clf") return SurrogateFamily::MlpClf;
    fail(ErrorCode::InvalidArgument, "unknown surrogate family '" + name + "'");
}

const char* surrogate_target_name(SurrogateTarget target) {
    switch (target) {
        case SurrogateTarget::Reg: return "reg";
        case SurrogateTarget::Clf: return "clf";
        case SurrogateTarget::Rank: return "rank";
        case SurrogateTarget::Cross: return "cross";
    }
    return "reg";
}

SurrogateTarget surrogate_target_from_name(const std::string& name) {
    if (name == "reg") return SurrogateTarget::Reg;
    if (name == "clf") return SurrogateTarget::Clf;
    if (name == "rank") return SurrogateTarget::Rank;
    if (name == "cross") return SurrogateTarget::Cross;
    fail(ErrorCode::InvalidArgument, "unknown surrogate target '" + name + "'");
}

FeatureVector featurize(const RecModel& model, int32_t user, const std::vector<int32_t>& deleted,
                        int32_t item) {
    if (deleted.empty()) fail(ErrorCode::InvalidArgument, "deleted set is empty");
    const size_t d = static_cast<size_t>(model.embedding_dim);
    FeatureVector fv;
    fv.values.assign(3 * d, 0.0f);
    std::memcpy(fv.values.data(), model.user_embedding(user), d * sizeof(float));

    // Canonical ascending order makes the sum independent of caller order.
    std::vector<int32_t> sorted = deleted;
    std::sort(sorted.begin(), sorted.end());
    for (size_t k = 0; k + 1 < sorted.size(); ++k) {
        if (sorted[k] == sorted[k + 1]) {
            fail(ErrorCode::InvalidArgument, "duplicate item in deleted set");
        }
    }
    float* mid = fv.values.data() + d;
    for (int32_t it : sorted) kern::axpy(1.0f, model.item_embedding(it), mid, d);
    std::memcpy(fv.values.data() + 2 * d, model.item_embedding(item), d * sizeof(float));
    return fv;
}

size_t mlp_param_count(const MlpSpec& spec) {
    size_t count = 0;
    for (size_t l = 0; l + 1 < spec.dims.size(); ++l) {
        count += static_cast<size_t>(spec.dims[l + 1]) * static_cast<size_t>(spec.dims[l]) +
                 static_cast<size_t>(spec.dims[l + 1]);
    }
    return count;
}

void mlp_init_params(const MlpSpec& spec, uint64_t seed, std::vector<double>& theta) {
    theta.assign(mlp_param_count(spec), 0.0);
    Rng rng(seed);
    size_t off = 0;
    for (size_t l = 0; l + 1 < spec.dims.size(); ++l) {
        const size_t in = static_cast<size_t>(spec.dims[l]);
        const size_t out = static_cast<size_t>(spec.dims[l + 1]);
        const double a = std::sqrt(6.0 / static_cast<double>(in + out));
        for (size_t j = 0; j < out * in; ++j) theta[off + j] = (2.0 * rng.next_double() - 1.0) * a;
        off += out * in + out;  // biases stay zero
    }
}

namespace {

// Forward pass keeping activations; returns layer input/output buffers.
void mlp_forward_impl(const MlpSpec& spec, const std::vector<double>& theta, const double* x,
                      std::vector<std::vector<double>>& acts) {
    const size_t layers = spec.dims.size() - 1;
    acts.assign(layers + 1, {});
    acts[0].assign(x, x + spec.dims[0]);
    size_t off = 0;
    for (size_t l = 0; l < layers; ++l) {
        const size_t in = static_cast<size_t>(spec.dims[l]);
        const size_t out = static_cast<size_t>(spec.dims[l + 1]);
        acts[l + 1].assign(out, 0.0);
        const double* w = theta.data() + off;
        const double* b = theta.data() + off + out * in;
        for (size_t o = 0; o < out; ++o) {
            double z = kern::dot_d(w + o * in, acts[l].data(), in) + b[o];
            acts[l + 1][o] = (l + 1 < layers && z < 0.0) ? 0.0 : z;
        }
        off += out * in + out;
    }
}

// Backprop of dL/d(output) through the net, accumulating into grad.
void mlp_backward_impl(const MlpSpec& spec, const std::vector<double>& theta,
                       const std::vector<std::vector<double>>& acts, std::vector<double>& delta,
                       std::vector<double>& grad) {
    const size_t layers = spec.dims.size() - 1;
    size_t off_end = mlp_param_count(spec);
    for (size_t l = layers; l-- > 0;) {
        const size_t in = static_cast<size_t>(spec.dims[l]);
        const size_t out = static_cast<size_t>(spec.dims[l + 1]);
        const size_t off = off_end - (out * in + out);
        const double* w = theta.data() + off;
        double* gw = grad.data() + off;
        double* gb = grad.data() + off + out * in;
        std::vector<double> prev_delta(in, 0.0);
        for (size_t o = 0; o < out; ++o) {
            const double g = delta[o];
            if (g != 0.0) {
                kern::axpy_d(g, acts[l].data(), gw + o * in, in);
                gb[o] += g;
                kern::axpy_d(g, w + o * in, prev_delta.data(), in);
            }
        }
        if (l > 0) {
            for (size_t j = 0; j < in; ++j) {
                if (acts[l][j] <= 0.0) prev_delta[j] = 0.0;
            }
        }
        delta = std::move(prev_delta);
        off_end = off;
    }
}

}  // namespace

void mlp_forward(const MlpSpec& spec, const std::vector<double>& theta, const double* x,
                 double* out) {
    std::vector<std::vector<double>> acts;
    mlp_forward_impl(spec, theta, x, acts);
    const std::vector<double>& last = acts.back();
    std::memcpy(out, last.data(), last.size() * sizeof(double));
}

double mlp_loss_and_grad_reg(const MlpSpec& spec, const std::vector<double>& theta, const double* x,
                             const double* y, size_t n, size_t p, std::vector<double>& grad) {
    grad.assign(theta.size(), 0.0);
    std::vector<std::vector<double>> acts;
    double loss = 0.0;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (size_t s = 0; s < n; ++s) {
        mlp_forward_impl(spec, theta, x + s * p, acts);
        double err = acts.back()[0] - y[s];
        loss += err * err * inv_n;
        std::vector<double> delta(1, 2.0 * err * inv_n);
        mlp_backward_impl(spec, theta, acts, delta, grad);
    }
    // l2 on weight matrices only.
    size_t off = 0;
    for (size_t l = 0; l + 1 < spec.dims.size(); ++l) {
        const size_t in = static_cast<size_t>(spec.dims[l]);
        const size_t out = static_cast<size_t>(spec.dims[l + 1]);
        for (size_t j = 0; j < out * in; ++j) {
            loss += 0.5 * spec.l2 * theta[off + j] * theta[off + j];
            grad[off + j] += spec.l2 * theta[off + j];
        }
        off += out * in + out;
    }
    return loss;
}

double mlp_loss_and_grad_clf(const MlpSpec& spec, const std::vector<double>& theta, const double* x,
                             const int* labels, const double* class_weights, size_t n, size_t p,
                             std::vector<double>& grad) {
    grad.assign(theta.size(), 0.0);
    const size_t classes = static_cast<size_t>(spec.dims.back());
    std::vector<std::vector<double>> acts;
    double loss = 0.0;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (size_t s = 0; s < n; ++s) {
        mlp_forward_impl(spec, theta, x + s * p, acts);
        const std::vector<double>& logits = acts.back();
        double max_logit = *std::max_element(logits.begin(), logits.end());
        double sum = 0.0;
        std::vector<double> probs(classes);
        for (size_t c = 0; c < classes; ++c) {
            probs[c] = std::exp(logits[c] - max_logit);
            sum += probs[c];
        }
        for (size_t c = 0; c < classes; ++c) probs[c] /= sum;
        const int label = labels[s];
        const double cw = class_weights[static_cast<size_t>(label)];
        loss -= cw * std::log(std::max(probs[static_cast<size_t>(label)], 1e-300)) * inv_n;
        std::vector<double> delta(classes);
        for (size_t c = 0; c < classes; ++c) {
            delta[c] = cw * (probs[c] - (static_cast<int>(c) == label ? 1.0 : 0.0)) * inv_n;
        }
        mlp_backward_impl(spec, theta, acts, delta, grad);
    }
    size_t off = 0;
    for (size_t l = 0; l + 1 < spec.dims.size(); ++l) {
        const size_t in = static_cast<size_t>(spec.dims[l]);
        const size_t out = static_cast<size_t>(spec.dims[l + 1]);
        for (size_t j = 0; j < out * in; ++j) {
            loss += 0.5 * spec.l2 * theta[off + j] * theta[off + j];
            grad[off + j] += spec.l2 * theta[off + j];
        }
        off += out * in + out;
    }
    return loss;
}

std::vector<double> surrogate_lambda_grid() {
    std::vector<double> grid(8);
    for (int j = 0; j < 8; ++j) {
        grid[static_cast<size_t>(j)] = std::pow(10.0, -4.0 + 4.0 * static_cast<double>(j) / 7.0);
    }
    return grid;
}

Surrogate fit(const CfDataset& cf, SurrogateFamily family, SurrogateTarget target,
              const RecModel& model, int cv_folds, uint64_t seed) {
    if (cf.records.empty()) fail(ErrorCode::EmptyInput, "counterfactual dataset is empty");
    const bool classification = is_classification(family);
    if (classification != (target == SurrogateTarget::Clf)) {
        fail(ErrorCode::InvalidArgument,
             std::string("family ") + surrogate_family_name(family) + " cannot train on target " +
                 surrogate_target_name(target));
    }
    if (cv_folds < 2) fail(ErrorCode::InvalidArgument, "cv_folds must be >= 2");

    FitData data = build_fit_data(cf, target, classification, model);
    if (classification && count_present_classes(data.labels) < 2) {
        fail(ErrorCode::DegenerateTarget, "classification targets contain a single class");
    }
    int folds = std::min<int>(cv_folds, static_cast<int>(data.num_groups));
    folds = std::max(folds, 2);

    Surrogate s;
    s.family = family;
    s.target = target;
    s.feature_dim = static_cast<int>(data.p);
    s.embedding_hash = model_weights_hash(model);
    {
        std::vector<int32_t> users;
        for (const CfRecord& r : cf.records) users.push_back(r.user);
        std::sort(users.begin(), users.end());
        users.erase(std::unique(users.begin(), users.end()), users.end());
        s.training_users = std::move(users);
    }

    auto store_stats = [&s](const Standardization& st) {
        s.feat_mean.assign(st.mean.begin(), st.mean.end());
        s.feat_std.assign(st.std.begin(), st.std.end());
    };

    switch (family) {
        case SurrogateFamily::LinearReg: {
            LinearRegFit fit_result = fit_linear_reg(data, folds, seed);
            store_stats(fit_result.stats);
            s.linear_weights.assign(fit_result.w.begin(), fit_result.w.end());
            s.intercept = static_cast<float>(fit_result.intercept);
            s.lasso_lambda = fit_result.lambda;
            s.validation_metric = fit_result.cv_mse;
            break;
        }
        case SurrogateFamily::LinearClf: {
            LinearClfFit fit_result = fit_linear_clf(data, folds, seed);
            store_stats(fit_result.stats);
            s.clf_weights.assign(fit_result.wb.begin(), fit_result.wb.begin() + 3 * data.p);
            s.clf_bias.assign(fit_result.wb.begin() + 3 * data.p, fit_result.wb.end());
            s.clf_l2 = fit_result.lambda;
            s.validation_metric = fit_result.cv_accuracy;
            break;
        }
        case SurrogateFamily::MlpReg:
        case SurrogateFamily::MlpClf: {
            MlpFit fit_result = fit_mlp(data, classification, folds, seed);
            store_stats(fit_result.stats);
            s.mlp_spec = fit_result.spec;
            s.mlp_theta.assign(fit_result.theta.begin(), fit_result.theta.end());
            s.validation_metric = fit_result.val_metric;
            break;
        }
    }
    return s;
}

double predict(const Surrogate& s, const RecModel& model, int32_t user,
               const std::vector<int32_t>& deleted, int32_t item) {
    if (s.feature_dim != 3 * model.embedding_dim) {
        fail(ErrorCode::IncompatibleEmbedding,
             "surrogate expects feature_dim " + std::to_string(s.feature_dim) + ", model yields " +
                 std::to_string(3 * model.embedding_dim));
    }
    FeatureVector fv = featurize(model, user, deleted, item);
    std::vector<double> z;
    standardize_input(s, fv, z);

    switch (s.family) {
        case SurrogateFamily::LinearReg: {
            double pred = static_cast<double>(s.intercept);
            for (size_t j = 0; j < z.size(); ++j) {
                pred += static_cast<double>(s.linear_weights[j]) * z[j];
            }
            return pred;
        }
        case SurrogateFamily::LinearClf: {
            // Class +1 sits in row 2.
            const size_t p = z.size();
            double logit = static_cast<double>(s.clf_bias[2]);
            for (size_t j = 0; j < p; ++j) {
                logit += static_cast<double>(s.clf_weights[2 * p + j]) * z[j];
            }
            return logit;
        }
        case SurrogateFamily::MlpReg: {
            std::vector<double> theta(s.mlp_theta.begin(), s.mlp_theta.end());
            double out;
            mlp_forward(s.mlp_spec, theta, z.data(), &out);
            return out;
        }
        case SurrogateFamily::MlpClf: {
            std::vector<double> theta(s.mlp_theta.begin(), s.mlp_theta.end());
            double out[3];
            mlp_forward(s.mlp_spec, theta, z.data(), out);
            return out[2];
        }
    }
    return 0.0;
}

void save_surrogate(const Surrogate& s, const std::string& path) {
    json manifest;
    manifest["family"] = surrogate_family_name(s.family);
    manifest["target"] = surrogate_target_name(s.target);
    manifest["feature_dim"] = s.feature_dim;
    manifest["lasso_lambda"] = s.lasso_lambda;
    manifest["clf_l2"] = s.clf_l2;
    manifest["intercept"] = s.intercept;
    manifest["mlp_dims"] = s.mlp_spec.dims;
    manifest["mlp_l2"] = s.mlp_spec.l2;
    manifest["validation_metric"] = s.validation_metric;
    manifest["embedding_hash"] = s.embedding_hash;
    manifest["training_users"] = s.training_users;

    std::vector<std::pair<std::string, const std::vector<float>*>> arrays = {
        {"feat_mean", &s.feat_mean},   {"feat_std", &s.feat_std},
        {"linear_weights", &s.linear_weights}, {"clf_weights", &s.clf_weights},
        {"clf_bias", &s.clf_bias},     {"mlp_theta", &s.mlp_theta},
    };
    json arr_meta = json::array();
    for (const auto& [name, vec] : arrays) {
        arr_meta.push_back(json{{"name", name}, {"size", vec->size()}});
    }
    manifest["arrays"] = arr_meta;

    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::Io, "cannot write " + path);
    std::string text = manifest.dump();
    uint32_t len = static_cast<uint32_t>(text.size());
    out.write(kSurrogateMagic, sizeof(kSurrogateMagic));
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, vec] : arrays) {
        out.write(reinterpret_cast<const char*>(vec->data()),
                  static_cast<std::streamsize>(vec->size() * sizeof(float)));
    }
    if (!out) fail(ErrorCode::Io, "write failed for " + path);
}

Surrogate load_surrogate(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::Io, "cannot open " + path);
    char magic[8];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kSurrogateMagic, 8) != 0) {
        fail(ErrorCode::Checkpoint, path + ": bad magic");
    }
    uint32_t len = 0;
    if (!in.read(reinterpret_cast<char*>(&len), sizeof(len))) {
        fail(ErrorCode::Checkpoint, path + ": truncated manifest length");
    }
    std::string text(len, '\0');
    if (!in.read(text.data(), len)) fail(ErrorCode::Checkpoint, path + ": truncated manifest");

    Surrogate s;
    std::vector<std::pair<std::string, size_t>> declared;
    try {
        json manifest = json::parse(text);
        s.family = surrogate_family_from_name(manifest.at("family").get<std::string>());
        s.target = surrogate_target_from_name(manifest.at("target").get<std::string>());
        s.feature_dim = manifest.at("feature_dim").get<int>();
        s.lasso_lambda = manifest.at("lasso_lambda").get<double>();
        s.clf_l2 = manifest.at("clf_l2").get<double>();
        s.intercept = manifest.at("intercept").get<float>();
        s.mlp_spec.dims = manifest.at("mlp_dims").get<std::vector<int>>();
        s.mlp_spec.l2 = manifest.at("mlp_l2").get<double>();
        s.validation_metric = manifest.at("validation_metric").get<double>();
        s.embedding_hash = manifest.at("embedding_hash").get<uint64_t>();
        s.training_users = manifest.at("training_users").get<std::vector<int32_t>>();
        for (const auto& a : manifest.at("arrays")) {
            declared.emplace_back(a.at("name").get<std::string>(), a.at("size").get<size_t>());
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::Checkpoint, path + ": manifest error: " + e.what());
    }

    std::vector<std::pair<std::string, std::vector<float>*>> arrays = {
        {"feat_mean", &s.feat_mean},   {"feat_std", &s.feat_std},
        {"linear_weights", &s.linear_weights}, {"clf_weights", &s.clf_weights},
        {"clf_bias", &s.clf_bias},     {"mlp_theta", &s.mlp_theta},
    };
    if (declared.size() != arrays.size()) fail(ErrorCode::Checkpoint, path + ": array list mismatch");
    for (size_t a = 0; a < arrays.size(); ++a) {
        if (declared[a].first != arrays[a].first) {
            fail(ErrorCode::Checkpoint, path + ": unexpected array '" + declared[a].first + "'");
        }
        arrays[a].second->resize(declared[a].second);
        if (!in.read(reinterpret_cast<char*>(arrays[a].second->data()),
                     static_cast<std::streamsize>(declared[a].second * sizeof(float)))) {
            fail(ErrorCode::Checkpoint, path + ": truncated array '" + declared[a].first + "'");
        }
    }
    char extra;
    if (in.read(&extra, 1)) fail(ErrorCode::Checkpoint, path + ": trailing bytes");
    return s;
}

}  // namespace cfx
