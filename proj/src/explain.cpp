#include "cfx/explain.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>

#include <nlohmann/json.hpp>

#include "cfx/errors.hpp"
#include "cfx/rng.hpp"
#include "cfx/subsets.hpp"

namespace cfx {

using json = nlohmann::ordered_json;

namespace {

double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

}  // namespace

const char* explain_method_name(ExplainMethod method) {
    switch (method) {
        case ExplainMethod::Surrogate: return "surrogate";
        case ExplainMethod::Knn: return "knn";
        case ExplainMethod::Influence: return "influence";
    }
    return "surrogate";
}

ExplainMethod explain_method_from_name(const std::string& name) {
    if (name == "surrogate") return ExplainMethod::Surrogate;
    if (name == "knn") return ExplainMethod::Knn;
    if (name == "influence") return ExplainMethod::Influence;
    fail(ErrorCode::InvalidArgument, "unknown explanation method '" + name + "'");
}

Explanation generate(const Surrogate& s, const RecModel& model,
                     const std::vector<int32_t>& history, int32_t user, int32_t item, int e,
                     int max_candidates, uint64_t seed) {
    if (e < 1 || max_candidates < 1) {
        fail(ErrorCode::InvalidArgument, "e and max_candidates must be >= 1");
    }
    if (history.size() < static_cast<size_t>(e)) {
        fail(ErrorCode::HistoryTooSmall, "user " + std::to_string(user) + " has " +
                                             std::to_string(history.size()) +
                                             " history items, explanation size is " +
                                             std::to_string(e));
    }
    std::vector<int32_t> sorted_history = history;
    std::sort(sorted_history.begin(), sorted_history.end());
    if (std::binary_search(sorted_history.begin(), sorted_history.end(), item)) {
        fail(ErrorCode::TargetInHistory,
             "item " + std::to_string(item) + " is in the history of user " + std::to_string(user));
    }

    const double start = now_ms();
    auto candidates = distinct_subsets(sorted_history, max_candidates, e,
                                       derive_seed(seed, 0xCA9Du, static_cast<uint64_t>(user)));

    Explanation best;
    best.user = user;
    best.item = item;
    best.method = ExplainMethod::Surrogate;
    bool have_best = false;
    for (const auto& subset : candidates) {
        double pred = predict(s, model, user, subset, item);
        if (!have_best || pred > best.predicted_delta ||
            (pred == best.predicted_delta && subset < best.items)) {
            best.items = subset;
            best.predicted_delta = pred;
            have_best = true;
        }
    }
    best.elapsed_ms = now_ms() - start;
    return best;
}

BatchResult generate_batch(const Surrogate& s, const RecModel& model, const InteractionStore& store,
                           const std::vector<int32_t>& users, int e, int max_candidates,
                           uint64_t seed) {
    BatchResult result;
    for (int32_t u : users) {
        std::vector<int32_t> history = store.user_history(u);
        if (history.size() < static_cast<size_t>(e)) {
            result.skipped_users.push_back(u);
            continue;
        }
        RankingList ranking;
        try {
            ranking = model.rank(u, history);
        } catch (const Error&) {
            result.skipped_users.push_back(u);
            continue;
        }
        int32_t target = ranking.item_at(1);
        try {
            result.explanations.push_back(
                generate(s, model, history, u, target, e, max_candidates, seed));
        } catch (const Error&) {
            result.skipped_users.push_back(u);
        }
    }
    return result;
}

void save_explanations(const std::string& path, const std::vector<Explanation>& explanations) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::Io, "cannot write " + path);
    for (const Explanation& e : explanations) {
        json j{{"user", e.user},
               {"item", e.item},
               {"items", e.items},
               {"predicted_delta", e.predicted_delta},
               {"method", explain_method_name(e.method)},
               {"elapsed_ms", e.elapsed_ms}};
        if (e.verified.has_value()) {
            j["verified"] = json{{"valid", e.verified->valid},
                                 {"k", e.verified->k},
                                 {"cf_rank", e.verified->cf_rank}};
        }
        out << j.dump() << '\n';
    }
    if (!out) fail(ErrorCode::Io, "write failed for " + path);
}

std::vector<Explanation> load_explanations(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::Io, "cannot open " + path);
    std::vector<Explanation> explanations;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            json j = json::parse(line);
            Explanation e;
            e.user = j.at("user").get<int32_t>();
            e.item = j.at("item").get<int32_t>();
            e.items = j.at("items").get<std::vector<int32_t>>();
            e.predicted_delta = j.at("predicted_delta").get<double>();
            e.method = explain_method_from_name(j.at("method").get<std::string>());
            e.elapsed_ms = j.at("elapsed_ms").get<double>();
            if (j.contains("verified")) {
                Verification v;
                v.valid = j.at("verified").at("valid").get<bool>();
                v.k = j.at("verified").at("k").get<int>();
                v.cf_rank = j.at("verified").at("cf_rank").get<int32_t>();
                e.verified = v;
            }
            explanations.push_back(std::move(e));
        } catch (const json::exception& ex) {
            fail(ErrorCode::ParseError, path + " line " + std::to_string(line_no) + ": " + ex.what());
        }
    }
    return explanations;
}

}  // namespace cfx
