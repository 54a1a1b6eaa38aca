#include "cfx/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>
#include <unordered_map>

#include "cfx/errors.hpp"
#include "cfx/kernels.hpp"
#include "cfx/pool.hpp"
#include "cfx/rng.hpp"
#include "cfx/subsets.hpp"

namespace cfx {

namespace {

std::string format_double(double v) {
    char buf[40];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

std::string deletion_key(int32_t user, const std::vector<int32_t>& items) {
    std::string key = std::to_string(user);
    for (int32_t i : items) key += ":" + std::to_string(i);
    return key;
}

}  // namespace

VerifyResult verify(const InteractionStore& train, const TrainConfig& config, ModelKind kind,
                    const Explanation& exp, int k) {
    DeletionMask mask{exp.user, exp.items};
    RecModel cf_model = retrain_counterfactual(train, mask, kind, config);
    std::vector<int32_t> history = train.user_history(exp.user);
    RankingList cf_ranking = cf_model.rank(exp.user, history);
    VerifyResult result;
    result.cf_rank = cf_ranking.rank_of(exp.item);
    result.valid = result.cf_rank > k;
    return result;
}

std::string ValidityResult::to_csv() const {
    std::string out = "method,K,validity_pct,n\n";
    for (const ValidityCell& cell : cells) {
        out += cell.method + "," + std::to_string(cell.k) + "," + format_double(cell.validity_pct) +
               "," + std::to_string(cell.n) + "\n";
    }
    return out;
}

double ValidityResult::pct(const std::string& method, int k) const {
    for (const ValidityCell& cell : cells) {
        if (cell.method == method && cell.k == k) return cell.validity_pct;
    }
    fail(ErrorCode::InvalidArgument, "no validity cell for " + method + "@" + std::to_string(k));
}

ValidityResult validity_at_k(const InteractionStore& train, const TrainConfig& config,
                             ModelKind kind, const std::vector<Explanation>& exps,
                             const std::vector<int>& ks, int workers) {
    if (ks.empty()) fail(ErrorCode::InvalidArgument, "no K values given");

    // One retrain per distinct (user, deleted set).
    std::vector<std::pair<int32_t, std::vector<int32_t>>> jobs;
    std::unordered_map<std::string, size_t> job_of_key;
    std::vector<size_t> job_of_exp(exps.size());
    for (size_t x = 0; x < exps.size(); ++x) {
        std::string key = deletion_key(exps[x].user, exps[x].items);
        auto [it, inserted] = job_of_key.try_emplace(key, jobs.size());
        if (inserted) jobs.emplace_back(exps[x].user, exps[x].items);
        job_of_exp[x] = it->second;
    }

    struct JobOut {
        std::unordered_map<int32_t, int32_t> cf_rank_of_item;
    };
    std::vector<JobOut> outs(jobs.size());
    parallel_for_indexed(jobs.size(), workers, [&](size_t j) {
        DeletionMask mask{jobs[j].first, jobs[j].second};
        RecModel cf_model = retrain_counterfactual(train, mask, kind, config);
        std::vector<int32_t> history = train.user_history(jobs[j].first);
        RankingList cf_ranking = cf_model.rank(jobs[j].first, history);
        // Record ranks for every target item evaluated against this retrain.
        for (size_t x = 0; x < exps.size(); ++x) {
            if (job_of_exp[x] != j) continue;
            outs[j].cf_rank_of_item[exps[x].item] = cf_ranking.rank_of(exps[x].item);
        }
    });

    ValidityResult result;
    result.annotated = exps;
    std::map<std::string, std::vector<size_t>> by_method;
    for (size_t x = 0; x < exps.size(); ++x) {
        int32_t cf_rank = outs[job_of_exp[x]].cf_rank_of_item.at(exps[x].item);
        Verification v;
        v.cf_rank = cf_rank;
        // Annotate with the largest K in the table the explanation survives.
        v.k = 0;
        v.valid = false;
        for (int k : ks) {
            if (cf_rank > k && k > v.k) {
                v.k = k;
                v.valid = true;
            }
        }
        if (!v.valid) v.k = *std::min_element(ks.begin(), ks.end());
        result.annotated[x].verified = v;
        by_method[explain_method_name(exps[x].method)].push_back(x);
    }

    std::vector<int> sorted_ks = ks;
    std::sort(sorted_ks.begin(), sorted_ks.end());
    for (const auto& [method, indices] : by_method) {
        for (int k : sorted_ks) {
            size_t valid = 0;
            for (size_t x : indices) {
                if (outs[job_of_exp[x]].cf_rank_of_item.at(exps[x].item) > k) ++valid;
            }
            ValidityCell cell;
            cell.method = method;
            cell.k = k;
            cell.n = indices.size();
            cell.validity_pct =
                100.0 * static_cast<double>(valid) / static_cast<double>(indices.size());
            result.cells.push_back(cell);
        }
    }
    return result;
}

std::optional<std::vector<int32_t>> exhaustive_oracle(const InteractionStore& train,
                                                      const TrainConfig& config, ModelKind kind,
                                                      int32_t user, int32_t item, int k,
                                                      int max_size, uint64_t budget_cap) {
    if (max_size <= 0) return std::nullopt;
    std::vector<int32_t> history = train.user_history(user);
    if (history.empty()) return std::nullopt;
    max_size = std::min<int>(max_size, static_cast<int>(history.size()));

    uint64_t budget = 0;
    for (int s = 1; s <= max_size; ++s) {
        budget += binomial_capped(history.size(), static_cast<uint64_t>(s), budget_cap + 1);
        if (budget > budget_cap) {
            fail(ErrorCode::OracleTooLarge,
                 "exhaustive search needs more than " + std::to_string(budget_cap) + " retrains");
        }
    }

    for (int s = 1; s <= max_size; ++s) {
        std::vector<int> idx(static_cast<size_t>(s));
        for (int j = 0; j < s; ++j) idx[static_cast<size_t>(j)] = j;
        do {
            std::vector<int32_t> subset(static_cast<size_t>(s));
            for (int j = 0; j < s; ++j) {
                subset[static_cast<size_t>(j)] = history[static_cast<size_t>(idx[static_cast<size_t>(j)])];
            }
            Explanation probe;
            probe.user = user;
            probe.item = item;
            probe.items = subset;
            if (verify(train, config, kind, probe, k).valid) return subset;
        } while (next_combination(idx, static_cast<int>(history.size())));
    }
    return std::nullopt;
}

std::string CorrelationReport::to_csv() const {
    std::string out = "subset_index,items,mean_distance,influence_sum";
    if (has_surrogate) out += ",surrogate_pred";
    out += ",gt_decrease\n";
    for (size_t r = 0; r < rows.size(); ++r) {
        std::string items;
        for (size_t j = 0; j < rows[r].items.size(); ++j) {
            if (j > 0) items += ";";
            items += std::to_string(rows[r].items[j]);
        }
        out += std::to_string(r) + "," + items + "," + format_double(rows[r].mean_distance) + "," +
               format_double(rows[r].influence_sum);
        if (has_surrogate) out += "," + format_double(rows[r].surrogate_pred);
        out += "," + format_double(rows[r].gt_decrease) + "\n";
    }
    return out;
}

CorrelationReport correlation_report(const InteractionStore& train_set, const TrainConfig& config,
                                     ModelKind kind, int32_t user, int n_samples, int e,
                                     uint64_t seed, const InfluenceConfig& icfg,
                                     const Surrogate* surrogate, int workers) {
    if (n_samples < 3) fail(ErrorCode::InsufficientSamples, "need at least 3 sampled subsets");
    std::vector<int32_t> history = train_set.user_history(user);
    if (history.size() < static_cast<size_t>(e)) {
        fail(ErrorCode::HistoryTooSmall, "user " + std::to_string(user) + " has " +
                                             std::to_string(history.size()) + " items, e is " +
                                             std::to_string(e));
    }

    RecModel base = train(train_set, kind, config);
    RankingList ranking = base.rank(user, history);
    const int32_t target = ranking.item_at(1);
    const double base_score = static_cast<double>(base.score(user, target));

    auto subsets = distinct_subsets(history, n_samples, e,
                                    derive_seed(seed, 0xC0881u, static_cast<uint64_t>(user)));

    // Per-item signals shared by all subsets.
    const size_t d = static_cast<size_t>(base.embedding_dim);
    std::unordered_map<int32_t, double> distance_of;
    for (int32_t h : history) {
        distance_of[h] = std::sqrt(static_cast<double>(
            kern::l2_dist_sq(base.item_embedding(h), base.item_embedding(target), d)));
    }
    std::vector<bool> infl_ok;
    std::vector<double> infl =
        influence_scores(base, train_set, user, target, history, icfg, &infl_ok);
    std::unordered_map<int32_t, double> drop_of;
    for (size_t t = 0; t < history.size(); ++t) {
        drop_of[history[t]] = infl_ok[t] ? -infl[t] : 0.0;
    }

    CorrelationReport report;
    report.user = user;
    report.target_item = target;
    report.has_surrogate = surrogate != nullptr;
    report.rows.resize(subsets.size());

    parallel_for_indexed(subsets.size(), workers, [&](size_t sidx) {
        const std::vector<int32_t>& subset = subsets[sidx];
        CorrelationRow& row = report.rows[sidx];
        row.items = subset;
        double dist = 0.0, drop = 0.0;
        for (int32_t it : subset) {
            dist += distance_of.at(it);
            drop += drop_of.at(it);
        }
        row.mean_distance = dist / static_cast<double>(subset.size());
        row.influence_sum = drop;
        if (surrogate) row.surrogate_pred = predict(*surrogate, base, user, subset, target);
        DeletionMask mask{user, subset};
        RecModel cf_model = retrain_counterfactual(train_set, mask, kind, config);
        row.gt_decrease = base_score - static_cast<double>(cf_model.score(user, target));
    });

    std::vector<double> decrease, neg_dist, drops, preds;
    for (const CorrelationRow& row : report.rows) {
        decrease.push_back(row.gt_decrease);
        neg_dist.push_back(-row.mean_distance);
        drops.push_back(row.influence_sum);
        preds.push_back(row.surrogate_pred);
    }
    report.pearson_knn = pearson(neg_dist, decrease);
    report.pearson_if = pearson(drops, decrease);
    if (surrogate) report.pearson_surrogate = pearson(preds, decrease);

    double mean = 0.0, var = 0.0;
    for (double v : decrease) mean += v;
    mean /= static_cast<double>(decrease.size());
    for (double v : decrease) var += (v - mean) * (v - mean);
    report.degenerate = var < 1e-24;
    return report;
}

std::vector<TimingRow> timing_report(const std::vector<Explanation>& exps) {
    std::map<std::string, std::pair<double, size_t>> acc;
    for (const Explanation& e : exps) {
        auto& slot = acc[explain_method_name(e.method)];
        slot.first += e.elapsed_ms / 1000.0;
        slot.second += 1;
    }
    std::vector<TimingRow> rows;
    for (const auto& [method, sum_count] : acc) {
        rows.push_back({method, sum_count.first / static_cast<double>(sum_count.second),
                        sum_count.second});
    }
    return rows;
}

std::string timing_to_csv(const std::vector<TimingRow>& rows) {
    std::string out = "method,mean_seconds,n\n";
    for (const TimingRow& row : rows) {
        out += row.method + "," + format_double(row.mean_seconds) + "," + std::to_string(row.n) + "\n";
    }
    return out;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) return 0.0;
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    if (saa < 1e-24 || sbb < 1e-24) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

}  // namespace cfx
