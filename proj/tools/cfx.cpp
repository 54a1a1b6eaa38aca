// cfx: counterfactual explanation pipeline for recommenders.
//
// Subcommands: ingest, train, simulate, fit-surrogate, explain, baseline,
// evaluate, report. All stochastic steps take --seed; every artifact is a
// file. Exit codes: 0 ok, 1 pipeline error, 2 usage error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cfx/baselines.hpp"
#include "cfx/cfsim.hpp"
#include "cfx/dataset.hpp"
#include "cfx/errors.hpp"
#include "cfx/eval.hpp"
#include "cfx/explain.hpp"
#include "cfx/kernels.hpp"
#include "cfx/pool.hpp"
#include "cfx/recmodel.hpp"
#include "cfx/rng.hpp"
#include "cfx/surrogate.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// Config file: `key = value` lines, '#' comments. Dotted keys select the
// section (train.epochs, sim.top_n, surrogate.family, eval.ks).
// ---------------------------------------------------------------------------

std::unordered_map<std::string, std::string> load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) cfx::fail(cfx::ErrorCode::Io, "cannot open config " + path);
    std::unordered_map<std::string, std::string> kv;
    std::string line;
    size_t line_no = 0;
    auto trim = [](std::string s) {
        size_t a = s.find_first_not_of(" \t\r");
        size_t b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    while (std::getline(in, line)) {
        ++line_no;
        std::string stripped = trim(line.substr(0, line.find('#')));
        if (stripped.empty()) continue;
        size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            cfx::fail(cfx::ErrorCode::ParseError,
                      path + " line " + std::to_string(line_no) + ": expected key = value");
        }
        kv[trim(stripped.substr(0, eq))] = trim(stripped.substr(eq + 1));
    }
    return kv;
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) out.push_back(std::stoi(tok));
    }
    return out;
}

std::vector<int32_t> parse_id_list(const std::string& text) {
    std::vector<int32_t> out;
    for (int v : parse_int_list(text)) out.push_back(static_cast<int32_t>(v));
    return out;
}

int resolve_workers(int workers_flag) {
    if (workers_flag > 0) return workers_flag;
    if (const char* env = std::getenv("CFX_WORKERS")) {
        int env_workers = std::atoi(env);
        if (env_workers > 0) return env_workers;
    }
    return cfx::default_workers();
}

// ---------------------------------------------------------------------------
// Data directory written by `ingest`: meta.json + dense triples files.
// ---------------------------------------------------------------------------

struct DataDir {
    int32_t num_users = 0;
    int32_t num_items = 0;
    float rating_min = 0.0f;
    float rating_max = 0.0f;
    fs::path root;

    cfx::InteractionStore load(const std::string& name) const {
        return cfx::load_dense_triples((root / name).string(), num_users, num_items, rating_min,
                                       rating_max);
    }
};

DataDir open_data_dir(const std::string& dir) {
    DataDir d;
    d.root = dir;
    std::ifstream in(d.root / "meta.json");
    if (!in) cfx::fail(cfx::ErrorCode::Io, "cannot open " + (d.root / "meta.json").string());
    json meta;
    try {
        in >> meta;
        d.num_users = meta.at("num_users").get<int32_t>();
        d.num_items = meta.at("num_items").get<int32_t>();
        d.rating_min = meta.at("rating_min").get<float>();
        d.rating_max = meta.at("rating_max").get<float>();
    } catch (const json::exception& e) {
        cfx::fail(cfx::ErrorCode::ParseError, "meta.json: " + std::string(e.what()));
    }
    return d;
}

cfx::TrainConfig config_from_options(cfx::ModelKind kind,
                                     const std::unordered_map<std::string, std::string>& file_kv,
                                     std::optional<int> d, std::optional<int> epochs,
                                     std::optional<double> lr, std::optional<double> l2,
                                     std::optional<int> batch_size,
                                     const std::string& hidden_dims, uint64_t seed) {
    cfx::TrainConfig cfg = kind == cfx::ModelKind::MF ? cfx::TrainConfig::mf_defaults()
                                                      : cfx::TrainConfig::ncf_defaults();
    auto kv = [&](const char* key) -> std::optional<std::string> {
        auto it = file_kv.find(key);
        if (it == file_kv.end()) return std::nullopt;
        return it->second;
    };
    if (auto v = kv("train.d")) cfg.embedding_dim = std::stoi(*v);
    if (auto v = kv("train.epochs")) cfg.epochs = std::stoi(*v);
    if (auto v = kv("train.learning_rate")) cfg.learning_rate = std::stof(*v);
    if (auto v = kv("train.l2_reg")) cfg.l2_reg = std::stof(*v);
    if (auto v = kv("train.batch_size")) cfg.batch_size = std::stoi(*v);
    if (auto v = kv("train.hidden_dims")) cfg.hidden_dims = parse_int_list(*v);
    if (d) cfg.embedding_dim = *d;
    if (epochs) cfg.epochs = *epochs;
    if (lr) cfg.learning_rate = static_cast<float>(*lr);
    if (l2) cfg.l2_reg = static_cast<float>(*l2);
    if (batch_size) cfg.batch_size = *batch_size;
    if (!hidden_dims.empty()) cfg.hidden_dims = parse_int_list(hidden_dims);
    cfg.seed = seed;
    return cfg;
}

// Seeded sample of users eligible for explanation work: enough history and a
// non-empty candidate ranking. `excluded` enforces train/test disjointness.
std::vector<int32_t> sample_users(const cfx::InteractionStore& store, int num_users, int min_history,
                                  uint64_t seed, const std::unordered_set<int32_t>& excluded) {
    std::vector<int32_t> eligible;
    for (int32_t u = 0; u < store.num_users(); ++u) {
        if (excluded.count(u) != 0) continue;
        std::vector<int32_t> history = store.user_history(u);
        if (history.size() < static_cast<size_t>(min_history)) continue;
        if (history.size() >= static_cast<size_t>(store.num_items())) continue;
        eligible.push_back(u);
    }
    if (eligible.size() <= static_cast<size_t>(num_users)) return eligible;
    cfx::Rng rng(cfx::derive_seed(seed, 0x05e7u));
    rng.shuffle(eligible);
    eligible.resize(static_cast<size_t>(num_users));
    std::sort(eligible.begin(), eligible.end());
    return eligible;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) cfx::fail(cfx::ErrorCode::Io, "cannot write " + path);
    out << text;
    if (!out) cfx::fail(cfx::ErrorCode::Io, "write failed for " + path);
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_ingest(const std::string& input, const std::string& format, const std::string& outdir,
               double train_fraction, uint64_t seed) {
    cfx::DatasetFormat fmt = format == "movielens-tsv" ? cfx::DatasetFormat::MovielensTsv
                                                       : cfx::DatasetFormat::TriplesCsv;
    cfx::IngestResult result = cfx::load_interactions(input, fmt);
    fs::create_directories(outdir);
    fs::path root(outdir);

    auto [train_store, test_store] = cfx::split(result.store, train_fraction, seed);
    cfx::save_triples_csv((root / "store.csv").string(), result.store);
    cfx::save_triples_csv((root / "train.csv").string(), train_store);
    cfx::save_triples_csv((root / "test.csv").string(), test_store);
    cfx::save_id_map((root / "user_idmap.csv").string(), result.user_ids);
    cfx::save_id_map((root / "item_idmap.csv").string(), result.item_ids);

    json meta{{"num_users", result.store.num_users()},
              {"num_items", result.store.num_items()},
              {"rating_min", result.store.rating_min()},
              {"rating_max", result.store.rating_max()},
              {"source", input},
              {"format", format},
              {"train_fraction", train_fraction},
              {"seed", seed}};
    write_text((root / "meta.json").string(), meta.dump(2) + "\n");

    std::cout << "ingested " << result.store.size() << " interactions, "
              << result.store.num_users() << " users, " << result.store.num_items() << " items\n"
              << "train " << train_store.size() << " rows, test " << test_store.size() << " rows\n";
    return 0;
}

int cmd_train(const std::string& data_dir, const std::string& kind_name, const std::string& out,
              const cfx::TrainConfig& cfg) {
    DataDir data = open_data_dir(data_dir);
    cfx::InteractionStore train_store = data.load("train.csv");
    cfx::ModelKind kind = cfx::model_kind_from_name(kind_name);
    cfx::RecModel model = cfx::train(train_store, kind, cfg);
    cfx::save_model(model, out);
    std::cout << "trained " << kind_name << " d=" << cfg.embedding_dim
              << " train_rmse=" << model.final_train_rmse;
    if (fs::exists(fs::path(data_dir) / "test.csv")) {
        cfx::InteractionStore test_store = data.load("test.csv");
        if (!test_store.empty()) std::cout << " test_rmse=" << cfx::rmse(model, test_store);
    }
    std::cout << " kernels=" << cfx::kern::backend_name() << "\n";
    return 0;
}

int cmd_simulate(const std::string& data_dir, const std::string& model_path, const std::string& out,
                 const std::string& users_list, int num_users, int deletions_per_user,
                 int deletion_size, std::optional<double> deletion_fraction, int top_n,
                 uint64_t seed, int workers) {
    DataDir data = open_data_dir(data_dir);
    cfx::InteractionStore train_store = data.load("train.csv");
    cfx::RecModel model = cfx::load_model(model_path);

    cfx::SimPlan plan;
    plan.deletions_per_user = deletions_per_user;
    plan.deletion_size = deletion_fraction ? 0 : deletion_size;
    plan.deletion_fraction = deletion_fraction;
    plan.top_n = top_n;
    plan.seed = seed;
    if (!users_list.empty()) {
        plan.users = parse_id_list(users_list);
    } else {
        int min_history = deletion_fraction ? 1 : deletion_size;
        plan.users = sample_users(train_store, num_users, std::max(min_history, 1), seed, {});
    }

    cfx::CfDataset dataset = cfx::simulate(train_store, model, plan, model.config, workers);
    cfx::save_cf(dataset, out);
    std::cout << "simulated " << dataset.records.size() << " records over " << plan.users.size()
              << " users (" << dataset.provenance.failed_jobs.size() << " failed retrains)\n";
    return 0;
}

int cmd_fit_surrogate(const std::string& cf_path, const std::string& model_path,
                      const std::string& data_dir, const std::string& family_name,
                      const std::string& target_name, const std::string& out, int cv_folds,
                      uint64_t seed) {
    cfx::RecModel model = cfx::load_model(model_path);
    std::optional<uint64_t> expected_hash;
    if (!data_dir.empty()) {
        DataDir data = open_data_dir(data_dir);
        expected_hash = data.load("train.csv").content_hash();
    }
    cfx::LoadCfResult loaded = cfx::load_cf(cf_path, expected_hash);
    if (!loaded.provenance_hash_matches) {
        std::cerr << "warning: counterfactual dataset provenance hash does not match "
                  << data_dir << "/train.csv\n";
    }
    cfx::Surrogate s = cfx::fit(loaded.dataset, cfx::surrogate_family_from_name(family_name),
                                cfx::surrogate_target_from_name(target_name), model, cv_folds, seed);
    cfx::save_surrogate(s, out);
    const bool classification = family_name == "linear-clf" || family_name == "mlp-clf";
    std::cout << "fitted " << family_name << " on " << loaded.dataset.records.size() << " records, "
              << (classification ? "cv_accuracy=" : "cv_mse=") << s.validation_metric << "\n";
    return 0;
}

int cmd_explain(const std::string& data_dir, const std::string& model_path,
                const std::string& surrogate_path, const std::string& out,
                const std::string& users_list, int num_users, int e, int max_candidates,
                uint64_t seed) {
    DataDir data = open_data_dir(data_dir);
    cfx::InteractionStore train_store = data.load("train.csv");
    cfx::RecModel model = cfx::load_model(model_path);
    cfx::Surrogate s = cfx::load_surrogate(surrogate_path);
    if (s.embedding_hash != cfx::model_weights_hash(model)) {
        std::cerr << "warning: surrogate was fitted against a different model checkpoint\n";
    }

    std::vector<int32_t> users;
    if (!users_list.empty()) {
        users = parse_id_list(users_list);
    } else {
        std::unordered_set<int32_t> excluded(s.training_users.begin(), s.training_users.end());
        users = sample_users(train_store, num_users, e, seed, excluded);
    }

    cfx::BatchResult batch = cfx::generate_batch(s, model, train_store, users, e, max_candidates, seed);
    cfx::save_explanations(out, batch.explanations);
    std::cout << "generated " << batch.explanations.size() << " explanations ("
              << batch.skipped_users.size() << " users skipped)\n";
    return 0;
}

int cmd_baseline(const std::string& data_dir, const std::string& model_path,
                 const std::string& method_name, const std::string& out,
                 const std::string& users_list, int num_users, int e, const std::string& avoid,
                 uint64_t seed, const cfx::InfluenceConfig& icfg) {
    DataDir data = open_data_dir(data_dir);
    cfx::InteractionStore train_store = data.load("train.csv");
    cfx::RecModel model = cfx::load_model(model_path);
    cfx::ExplainMethod method = cfx::explain_method_from_name(method_name);

    std::unordered_set<int32_t> excluded;
    if (!avoid.empty()) {
        cfx::Surrogate s = cfx::load_surrogate(avoid);
        excluded.insert(s.training_users.begin(), s.training_users.end());
    }
    std::vector<int32_t> users;
    if (!users_list.empty()) {
        users = parse_id_list(users_list);
    } else {
        users = sample_users(train_store, num_users, e, seed, excluded);
    }

    std::vector<cfx::Explanation> explanations;
    size_t skipped = 0;
    for (int32_t u : users) {
        std::vector<int32_t> history = train_store.user_history(u);
        if (history.size() < static_cast<size_t>(e)) {
            ++skipped;
            continue;
        }
        try {
            cfx::RankingList ranking = model.rank(u, history);
            int32_t target = ranking.item_at(1);
            if (method == cfx::ExplainMethod::Knn) {
                explanations.push_back(cfx::knn_explain(model, history, u, target, e));
            } else {
                explanations.push_back(
                    cfx::influence_explain(model, train_store, u, target, e, icfg));
            }
        } catch (const cfx::Error&) {
            ++skipped;
        }
    }
    cfx::save_explanations(out, explanations);
    std::cout << "generated " << explanations.size() << " " << method_name << " explanations ("
              << skipped << " users skipped)\n";
    return 0;
}

int cmd_evaluate(const std::string& data_dir, const std::string& model_path,
                 const std::vector<std::string>& exp_paths, const std::string& ks_text,
                 const std::string& out, const std::string& annotated_out, int workers) {
    DataDir data = open_data_dir(data_dir);
    cfx::InteractionStore train_store = data.load("train.csv");
    cfx::RecModel model = cfx::load_model(model_path);

    std::vector<cfx::Explanation> exps;
    for (const std::string& path : exp_paths) {
        std::vector<cfx::Explanation> part = cfx::load_explanations(path);
        exps.insert(exps.end(), part.begin(), part.end());
    }
    std::vector<int> ks = parse_int_list(ks_text);
    cfx::ValidityResult result =
        cfx::validity_at_k(train_store, model.config, model.kind, exps, ks, workers);
    write_text(out, result.to_csv());
    if (!annotated_out.empty()) cfx::save_explanations(annotated_out, result.annotated);
    std::cout << result.to_csv();
    return 0;
}

int cmd_report_timing(const std::vector<std::string>& exp_paths, const std::string& out) {
    std::vector<cfx::Explanation> exps;
    for (const std::string& path : exp_paths) {
        std::vector<cfx::Explanation> part = cfx::load_explanations(path);
        exps.insert(exps.end(), part.begin(), part.end());
    }
    std::string csv = cfx::timing_to_csv(cfx::timing_report(exps));
    if (!out.empty()) write_text(out, csv);
    std::cout << csv;
    return 0;
}

int cmd_report_correlation(const std::string& data_dir, const std::string& model_path,
                           int32_t user, int n_samples, int e, uint64_t seed,
                           const std::string& surrogate_path, const std::string& out, int workers) {
    DataDir data = open_data_dir(data_dir);
    cfx::InteractionStore train_store = data.load("train.csv");
    cfx::RecModel model = cfx::load_model(model_path);

    std::optional<cfx::Surrogate> s;
    if (!surrogate_path.empty()) s = cfx::load_surrogate(surrogate_path);
    cfx::CorrelationReport report =
        cfx::correlation_report(train_store, model.config, model.kind, user, n_samples, e, seed,
                                cfx::InfluenceConfig{}, s ? &*s : nullptr, workers);
    if (!out.empty()) write_text(out, report.to_csv());
    std::cout << "target_item=" << report.target_item << " pearson_knn=" << report.pearson_knn
              << " pearson_if=" << report.pearson_if;
    if (report.has_surrogate) std::cout << " pearson_surrogate=" << report.pearson_surrogate;
    if (report.degenerate) std::cout << " (degenerate targets)";
    std::cout << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"counterfactual explanations for recommender systems"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "key = value config file")->expected(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "read rating triples into a data directory");
    std::string in_input, in_format = "movielens-tsv", in_outdir;
    double in_fraction = 0.7;
    uint64_t in_seed = 42;
    ingest->add_option("--input", in_input)->required();
    ingest->add_option("--format", in_format)->check(CLI::IsMember({"movielens-tsv", "triples-csv"}));
    ingest->add_option("--outdir", in_outdir)->required();
    ingest->add_option("--train-fraction", in_fraction);
    ingest->add_option("--seed", in_seed);

    // train
    auto* train_cmd = app.add_subcommand("train", "train a recommendation model");
    std::string tr_data, tr_kind = "mf", tr_out;
    std::optional<int> tr_d, tr_epochs, tr_batch;
    std::optional<double> tr_lr, tr_l2;
    std::string tr_hidden;
    uint64_t tr_seed = 7;
    train_cmd->add_option("--data", tr_data)->required();
    train_cmd->add_option("--kind", tr_kind)->check(CLI::IsMember({"mf", "ncf"}));
    train_cmd->add_option("--out", tr_out)->required();
    train_cmd->add_option("--d", tr_d);
    train_cmd->add_option("--epochs", tr_epochs);
    train_cmd->add_option("--lr", tr_lr);
    train_cmd->add_option("--l2", tr_l2);
    train_cmd->add_option("--batch-size", tr_batch);
    train_cmd->add_option("--hidden", tr_hidden, "comma-separated hidden dims (ncf)");
    train_cmd->add_option("--seed", tr_seed);

    // simulate
    auto* sim = app.add_subcommand("simulate", "run the counterfactual retraining farm");
    std::string sim_data, sim_model, sim_out, sim_users;
    int sim_num_users = 20, sim_dpu = 100, sim_size = 3, sim_topn = 20, sim_workers = 0;
    std::optional<double> sim_fraction;
    uint64_t sim_seed = 11;
    sim->add_option("--data", sim_data)->required();
    sim->add_option("--model", sim_model)->required();
    sim->add_option("--out", sim_out)->required();
    sim->add_option("--users", sim_users, "explicit comma-separated user ids");
    sim->add_option("--num-users", sim_num_users);
    sim->add_option("--deletions-per-user", sim_dpu);
    sim->add_option("--deletion-size", sim_size);
    sim->add_option("--deletion-fraction", sim_fraction);
    sim->add_option("--top-n", sim_topn);
    sim->add_option("--seed", sim_seed);
    sim->add_option("--workers", sim_workers);

    // fit-surrogate
    auto* fit = app.add_subcommand("fit-surrogate", "fit a surrogate on simulated outcomes");
    std::string fit_cf, fit_model, fit_data, fit_family = "linear-reg", fit_target = "reg", fit_out;
    int fit_folds = 5;
    uint64_t fit_seed = 13;
    fit->add_option("--cf", fit_cf)->required();
    fit->add_option("--model", fit_model)->required();
    fit->add_option("--data", fit_data, "data dir for a provenance hash check");
    fit->add_option("--family", fit_family)
        ->check(CLI::IsMember({"linear-reg", "mlp-reg", "linear-clf", "mlp-clf"}));
    fit->add_option("--target", fit_target)->check(CLI::IsMember({"reg", "clf", "rank", "cross"}));
    fit->add_option("--out", fit_out)->required();
    fit->add_option("--cv-folds", fit_folds);
    fit->add_option("--seed", fit_seed);

    // explain
    auto* expl = app.add_subcommand("explain", "generate surrogate explanations");
    std::string ex_data, ex_model, ex_surrogate, ex_out, ex_users;
    int ex_num_users = 200, ex_e = 3, ex_max_candidates = 100000;
    uint64_t ex_seed = 17;
    expl->add_option("--data", ex_data)->required();
    expl->add_option("--model", ex_model)->required();
    expl->add_option("--surrogate", ex_surrogate)->required();
    expl->add_option("--out", ex_out)->required();
    expl->add_option("--users", ex_users);
    expl->add_option("--num-users", ex_num_users);
    expl->add_option("--e", ex_e);
    expl->add_option("--max-candidates", ex_max_candidates);
    expl->add_option("--seed", ex_seed);

    // baseline
    auto* base = app.add_subcommand("baseline", "generate knn / influence explanations");
    std::string bl_data, bl_model, bl_method = "knn", bl_out, bl_users, bl_avoid, bl_scope = "user-block";
    int bl_num_users = 200, bl_e = 3, bl_cg_iters = 200;
    double bl_damping = 0.01, bl_cg_tol = 1e-8;
    uint64_t bl_seed = 17;
    base->add_option("--data", bl_data)->required();
    base->add_option("--model", bl_model)->required();
    base->add_option("--method", bl_method)->check(CLI::IsMember({"knn", "influence"}));
    base->add_option("--out", bl_out)->required();
    base->add_option("--users", bl_users);
    base->add_option("--num-users", bl_num_users);
    base->add_option("--e", bl_e);
    base->add_option("--avoid", bl_avoid, "surrogate checkpoint whose training users to exclude");
    base->add_option("--seed", bl_seed);
    base->add_option("--damping", bl_damping);
    base->add_option("--cg-max-iters", bl_cg_iters);
    base->add_option("--cg-tol", bl_cg_tol);
    base->add_option("--scope", bl_scope)->check(CLI::IsMember({"user-block", "full"}));

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "verify explanations by retraining");
    std::string ev_data, ev_model, ev_ks = "1,3,5", ev_out, ev_annotated;
    std::vector<std::string> ev_exps;
    int ev_workers = 0;
    eval_cmd->add_option("--data", ev_data)->required();
    eval_cmd->add_option("--model", ev_model)->required();
    eval_cmd->add_option("--exps", ev_exps)->required()->delimiter(',');
    eval_cmd->add_option("--k", ev_ks);
    eval_cmd->add_option("--out", ev_out)->required();
    eval_cmd->add_option("--annotated-out", ev_annotated);
    eval_cmd->add_option("--workers", ev_workers);

    // report
    auto* report = app.add_subcommand("report", "timing / correlation reports");
    report->require_subcommand(1);
    auto* rep_timing = report->add_subcommand("timing", "mean generation seconds per method");
    std::vector<std::string> rt_exps;
    std::string rt_out;
    rep_timing->add_option("--exps", rt_exps)->required()->delimiter(',');
    rep_timing->add_option("--out", rt_out);

    auto* rep_corr = report->add_subcommand("correlation", "baseline correlation diagnostic");
    std::string rc_data, rc_model, rc_surrogate, rc_out;
    int32_t rc_user = 0;
    int rc_n = 200, rc_e = 3, rc_workers = 0;
    uint64_t rc_seed = 23;
    rep_corr->add_option("--data", rc_data)->required();
    rep_corr->add_option("--model", rc_model)->required();
    rep_corr->add_option("--user", rc_user)->required();
    rep_corr->add_option("--n", rc_n);
    rep_corr->add_option("--e", rc_e);
    rep_corr->add_option("--seed", rc_seed);
    rep_corr->add_option("--surrogate", rc_surrogate);
    rep_corr->add_option("--out", rc_out);
    rep_corr->add_option("--workers", rc_workers);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        std::unordered_map<std::string, std::string> file_kv;
        if (!config_path.empty()) file_kv = load_config_file(config_path);
        auto cfg_kv = [&](const char* key) -> std::optional<std::string> {
            auto it = file_kv.find(key);
            if (it == file_kv.end()) return std::nullopt;
            return it->second;
        };

        if (*ingest) return cmd_ingest(in_input, in_format, in_outdir, in_fraction, in_seed);
        if (*train_cmd) {
            cfx::TrainConfig cfg =
                config_from_options(cfx::model_kind_from_name(tr_kind), file_kv, tr_d, tr_epochs,
                                    tr_lr, tr_l2, tr_batch, tr_hidden, tr_seed);
            return cmd_train(tr_data, tr_kind, tr_out, cfg);
        }
        if (*sim) {
            if (auto v = cfg_kv("sim.deletions_per_user")) sim_dpu = std::stoi(*v);
            if (auto v = cfg_kv("sim.deletion_size")) sim_size = std::stoi(*v);
            if (auto v = cfg_kv("sim.top_n")) sim_topn = std::stoi(*v);
            if (auto v = cfg_kv("sim.num_users")) sim_num_users = std::stoi(*v);
            return cmd_simulate(sim_data, sim_model, sim_out, sim_users, sim_num_users, sim_dpu,
                                sim_size, sim_fraction, sim_topn, sim_seed,
                                resolve_workers(sim_workers));
        }
        if (*fit) {
            if (auto v = cfg_kv("surrogate.family")) fit_family = *v;
            if (auto v = cfg_kv("surrogate.target")) fit_target = *v;
            if (auto v = cfg_kv("surrogate.cv_folds")) fit_folds = std::stoi(*v);
            return cmd_fit_surrogate(fit_cf, fit_model, fit_data, fit_family, fit_target, fit_out,
                                     fit_folds, fit_seed);
        }
        if (*expl) {
            return cmd_explain(ex_data, ex_model, ex_surrogate, ex_out, ex_users, ex_num_users, ex_e,
                               ex_max_candidates, ex_seed);
        }
        if (*base) {
            cfx::InfluenceConfig icfg;
            icfg.damping = bl_damping;
            icfg.cg_max_iters = bl_cg_iters;
            icfg.cg_tol = bl_cg_tol;
            icfg.param_scope = bl_scope == "full" ? cfx::InfluenceConfig::ParamScope::Full
                                                  : cfx::InfluenceConfig::ParamScope::UserBlock;
            return cmd_baseline(bl_data, bl_model, bl_method, bl_out, bl_users, bl_num_users, bl_e,
                                bl_avoid, bl_seed, icfg);
        }
        if (*eval_cmd) {
            if (auto v = cfg_kv("eval.ks")) ev_ks = *v;
            return cmd_evaluate(ev_data, ev_model, ev_exps, ev_ks, ev_out, ev_annotated,
                                resolve_workers(ev_workers));
        }
        if (*rep_timing) return cmd_report_timing(rt_exps, rt_out);
        if (*rep_corr) {
            return cmd_report_correlation(rc_data, rc_model, rc_user, rc_n, rc_e, rc_seed,
                                          rc_surrogate, rc_out, resolve_workers(rc_workers));
        }
    } catch (const cfx::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
