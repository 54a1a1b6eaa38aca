#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cfx/dataset.hpp"
#include "cfx/recmodel.hpp"
#include "cfx/surrogate.hpp"

namespace cfx {

enum class ExplainMethod { Surrogate, Knn, Influence };

const char* explain_method_name(ExplainMethod method);
ExplainMethod explain_method_from_name(const std::string& name);

struct Verification {
    bool valid = false;
    int k = 0;
    int32_t cf_rank = 0;
};

// Fixed-size deletion proposed to remove item from user's recommendations.
struct Explanation {
    int32_t user = 0;
    int32_t item = 0;
    std::vector<int32_t> items;  // sorted, |items| = e
    double predicted_delta = 0.0;
    ExplainMethod method = ExplainMethod::Surrogate;
    std::optional<Verification> verified;
    double elapsed_ms = 0.0;
};

// Searches sampled (or fully enumerated, when they fit the budget) e-subsets
// of the history for the maximal surrogate prediction. Ties break to the
// lexicographically smallest sorted subset.
Explanation generate(const Surrogate& s, const RecModel& model,
                     const std::vector<int32_t>& history, int32_t user, int32_t item, int e,
                     int max_candidates, uint64_t seed);

// One explanation per user against the top-1 item of the user's original
// ranking; users failing generate's preconditions are skipped and reported.
struct BatchResult {
    std::vector<Explanation> explanations;
    std::vector<int32_t> skipped_users;
};

BatchResult generate_batch(const Surrogate& s, const RecModel& model, const InteractionStore& store,
                           const std::vector<int32_t>& users, int e, int max_candidates,
                           uint64_t seed);

void save_explanations(const std::string& path, const std::vector<Explanation>& explanations);
std::vector<Explanation> load_explanations(const std::string& path);

}  // namespace cfx
