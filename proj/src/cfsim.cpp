#include "cfx/cfsim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "cfx/errors.hpp"
#include "cfx/pool.hpp"
#include "cfx/rng.hpp"
#include "cfx/subsets.hpp"

namespace cfx {

using json = nlohmann::ordered_json;

namespace {

int resolve_deletion_size(const SimPlan& plan, size_t history_size) {
    if (plan.deletion_fraction.has_value()) {
        double raw = *plan.deletion_fraction * static_cast<double>(history_size);
        return std::max(1, static_cast<int>(std::llround(raw)));
    }
    return plan.deletion_size;
}

json record_to_json(const CfRecord& r) {
    return json{{"user", r.user},       {"deleted", r.deleted},
                {"item", r.item},       {"delta_reg", r.delta_reg},
                {"delta_clf", r.delta_clf}, {"delta_rank", r.delta_rank},
                {"delta_cross", r.delta_cross}, {"orig_rank", r.orig_rank},
                {"cf_rank", r.cf_rank}};
}

CfRecord record_from_json(const json& j) {
    CfRecord r;
    r.user = j.at("user").get<int32_t>();
    r.deleted = j.at("deleted").get<std::vector<int32_t>>();
    r.item = j.at("item").get<int32_t>();
    r.delta_reg = j.at("delta_reg").get<double>();
    r.delta_clf = j.at("delta_clf").get<int>();
    r.delta_rank = j.at("delta_rank").get<int64_t>();
    r.delta_cross = j.at("delta_cross").get<double>();
    r.orig_rank = j.at("orig_rank").get<int32_t>();
    r.cf_rank = j.at("cf_rank").get<int32_t>();
    return r;
}

json plan_to_json(const SimPlan& p) {
    json j{{"users", p.users},
           {"deletions_per_user", p.deletions_per_user},
           {"deletion_size", p.deletion_size},
           {"top_n", p.top_n},
           {"seed", p.seed}};
    if (p.deletion_fraction.has_value()) j["deletion_fraction"] = *p.deletion_fraction;
    return j;
}

SimPlan plan_from_json(const json& j) {
    SimPlan p;
    p.users = j.at("users").get<std::vector<int32_t>>();
    p.deletions_per_user = j.at("deletions_per_user").get<int>();
    p.deletion_size = j.at("deletion_size").get<int>();
    p.top_n = j.at("top_n").get<int>();
    p.seed = j.at("seed").get<uint64_t>();
    if (j.contains("deletion_fraction")) p.deletion_fraction = j.at("deletion_fraction").get<double>();
    return p;
}

}  // namespace

std::vector<std::vector<int32_t>> sample_deletions(const std::vector<int32_t>& history, int count,
                                                   int size, uint64_t seed) {
    return distinct_subsets(history, count, size, derive_seed(seed, 0xDE1u));
}

double delta_reg(const RankingList& orig, const RankingList& cf, const ScoreFn& cf_scores,
                 int32_t user, int32_t item) {
    int32_t k = orig.rank_of(item);
    if (!cf.contains(item)) {
        fail(ErrorCode::ItemNotRanked, "item " + std::to_string(item) + " missing from cf list");
    }
    int32_t benchmark = cf.item_at(k);
    return static_cast<double>(cf_scores(user, benchmark)) -
           static_cast<double>(cf_scores(user, item));
}

int delta_clf(const RankingList& orig, const RankingList& cf, int32_t item) {
    int64_t diff = static_cast<int64_t>(cf.rank_of(item)) - static_cast<int64_t>(orig.rank_of(item));
    return diff > 0 ? 1 : (diff < 0 ? -1 : 0);
}

int64_t delta_rank(const RankingList& orig, const RankingList& cf, int32_t item) {
    return static_cast<int64_t>(cf.rank_of(item)) - static_cast<int64_t>(orig.rank_of(item));
}

double delta_cross(const RankingList& orig, const RankingList& cf, const ScoreFn& orig_scores,
                   const ScoreFn& cf_scores, int32_t user, int32_t item) {
    (void)orig.rank_of(item);
    (void)cf.rank_of(item);
    float orig_top = orig_scores(user, orig.item_at(1));
    float cf_top = cf_scores(user, cf.item_at(1));
    if (orig_top == 0.0f || cf_top == 0.0f) {
        fail(ErrorCode::DegenerateNormalization, "top-1 score is zero for user " + std::to_string(user));
    }
    return static_cast<double>(orig_scores(user, item)) / static_cast<double>(orig_top) -
           static_cast<double>(cf_scores(user, item)) / static_cast<double>(cf_top);
}

CfDataset simulate(const InteractionStore& train, const RecModel& base_model, const SimPlan& plan,
                   const TrainConfig& config, int workers) {
    if (plan.users.empty() || plan.deletions_per_user < 1 || plan.top_n < 1) {
        fail(ErrorCode::InvalidArgument, "simulation plan needs users, deletions and top_n >= 1");
    }
    if (plan.deletion_fraction.has_value() == (plan.deletion_size >= 1)) {
        fail(ErrorCode::InvalidArgument,
             "exactly one of deletion_size / deletion_fraction must be set");
    }

    struct Job {
        int32_t user;
        int user_index;
        int deletion_index;
        std::vector<int32_t> deleted;
    };
    struct JobResult {
        std::vector<CfRecord> records;
        bool failed = false;
        std::string label;
    };

    // Per-user original rankings and sampled deletions, all seed-derived so
    // worker scheduling cannot change them.
    std::vector<Job> jobs;
    std::vector<RankingList> orig_rankings(plan.users.size());
    std::vector<std::vector<int32_t>> histories(plan.users.size());
    for (size_t ui = 0; ui < plan.users.size(); ++ui) {
        int32_t u = plan.users[ui];
        histories[ui] = train.user_history(u);
        int size = resolve_deletion_size(plan, histories[ui].size());
        if (histories[ui].size() < static_cast<size_t>(size)) {
            fail(ErrorCode::HistoryTooSmall, "user " + std::to_string(u) + " has " +
                                                 std::to_string(histories[ui].size()) +
                                                 " items, deletion size is " + std::to_string(size));
        }
        orig_rankings[ui] = base_model.rank(u, histories[ui]);
        auto deletions = sample_deletions(histories[ui], plan.deletions_per_user, size,
                                          derive_seed(plan.seed, 0xD0u, static_cast<uint64_t>(u)));
        for (size_t di = 0; di < deletions.size(); ++di) {
            jobs.push_back(Job{u, static_cast<int>(ui), static_cast<int>(di), deletions[di]});
        }
    }

    std::vector<JobResult> results(jobs.size());
    parallel_for_indexed(jobs.size(), workers, [&](size_t j) {
        const Job& job = jobs[j];
        JobResult& out = results[j];
        out.label = std::to_string(job.user) + ":" + std::to_string(job.deletion_index);
        DeletionMask mask{job.user, job.deleted};
        RecModel cf_model;
        try {
            cf_model = retrain_counterfactual(train, mask, base_model.kind, config);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::TrainingDiverged) {
                out.failed = true;
                return;
            }
            throw;
        }
        const RankingList& orig = orig_rankings[static_cast<size_t>(job.user_index)];
        RankingList cf = cf_model.rank(job.user, histories[static_cast<size_t>(job.user_index)]);
        ScoreFn orig_scores = [&base_model](int32_t u, int32_t i) { return base_model.score(u, i); };
        ScoreFn cf_scores = [&cf_model](int32_t u, int32_t i) { return cf_model.score(u, i); };

        const int top_n = std::min<int>(plan.top_n, static_cast<int>(orig.entries().size()));
        out.records.reserve(static_cast<size_t>(top_n));
        for (int rank_pos = 1; rank_pos <= top_n; ++rank_pos) {
            int32_t item = orig.item_at(rank_pos);
            CfRecord r;
            r.user = job.user;
            r.deleted = job.deleted;
            r.item = item;
            r.orig_rank = rank_pos;
            r.cf_rank = cf.rank_of(item);
            r.delta_reg = delta_reg(orig, cf, cf_scores, job.user, item);
            r.delta_clf = delta_clf(orig, cf, item);
            r.delta_rank = delta_rank(orig, cf, item);
            r.delta_cross = delta_cross(orig, cf, orig_scores, cf_scores, job.user, item);
            out.records.push_back(std::move(r));
        }
    });

    CfDataset dataset;
    size_t failures = 0;
    for (JobResult& r : results) {
        if (r.failed) {
            ++failures;
            dataset.provenance.failed_jobs.push_back(r.label);
            continue;
        }
        for (CfRecord& rec : r.records) dataset.records.push_back(std::move(rec));
    }
    if (failures * 10 > jobs.size()) {
        fail(ErrorCode::SimulationFailed, std::to_string(failures) + " of " +
                                              std::to_string(jobs.size()) + " retrains diverged");
    }
    dataset.provenance.plan = plan;
    dataset.provenance.model_kind = model_kind_name(base_model.kind);
    dataset.provenance.config = config;
    dataset.provenance.dataset_hash = train.content_hash();
    return dataset;
}

void save_cf(const CfDataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::Io, "cannot write " + path);
    json header;
    header["provenance"] = json{{"plan", plan_to_json(dataset.provenance.plan)},
                                {"model_kind", dataset.provenance.model_kind},
                                {"config",
                                 json{{"embedding_dim", dataset.provenance.config.embedding_dim},
                                      {"epochs", dataset.provenance.config.epochs},
                                      {"learning_rate", dataset.provenance.config.learning_rate},
                                      {"l2_reg", dataset.provenance.config.l2_reg},
                                      {"batch_size", dataset.provenance.config.batch_size},
                                      {"hidden_dims", dataset.provenance.config.hidden_dims},
                                      {"seed", dataset.provenance.config.seed}}},
                                {"dataset_hash", dataset.provenance.dataset_hash},
                                {"failed_jobs", dataset.provenance.failed_jobs}};
    out << header.dump() << '\n';
    for (const CfRecord& r : dataset.records) out << record_to_json(r).dump() << '\n';
    if (!out) fail(ErrorCode::Io, "write failed for " + path);
}

LoadCfResult load_cf(const std::string& path, std::optional<uint64_t> current_dataset_hash) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::Io, "cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) fail(ErrorCode::EmptyInput, path + " is empty");

    LoadCfResult result;
    try {
        json header = json::parse(line);
        const json& prov = header.at("provenance");
        result.dataset.provenance.plan = plan_from_json(prov.at("plan"));
        result.dataset.provenance.model_kind = prov.at("model_kind").get<std::string>();
        const json& cfg = prov.at("config");
        result.dataset.provenance.config.embedding_dim = cfg.at("embedding_dim").get<int>();
        result.dataset.provenance.config.epochs = cfg.at("epochs").get<int>();
        result.dataset.provenance.config.learning_rate = cfg.at("learning_rate").get<float>();
        result.dataset.provenance.config.l2_reg = cfg.at("l2_reg").get<float>();
        result.dataset.provenance.config.batch_size = cfg.at("batch_size").get<int>();
        result.dataset.provenance.config.hidden_dims = cfg.at("hidden_dims").get<std::vector<int>>();
        result.dataset.provenance.config.seed = cfg.at("seed").get<uint64_t>();
        result.dataset.provenance.dataset_hash = prov.at("dataset_hash").get<uint64_t>();
        result.dataset.provenance.failed_jobs =
            prov.at("failed_jobs").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        fail(ErrorCode::ParseError, path + " line 1: bad provenance header: " + e.what());
    }

    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            result.dataset.records.push_back(record_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            fail(ErrorCode::ParseError,
                 path + " line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (current_dataset_hash.has_value()) {
        result.provenance_hash_matches =
            (*current_dataset_hash == result.dataset.provenance.dataset_hash);
    }
    return result;
}

}  // namespace cfx
