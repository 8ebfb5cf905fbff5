// gnmr: multi-behavior graph recommender. Subcommands: synth, train, evaluate, ablate.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gnmr/evaluation.hpp"
#include "gnmr/graph.hpp"
#include "gnmr/interactions.hpp"
#include "gnmr/model.hpp"
#include "gnmr/pretrain.hpp"
#include "gnmr/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gnmr;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct RunConfig {
    // data
    std::string data;
    std::string out = "gnmr-out";
    std::vector<std::string> behaviors;  // empty: discover from the event file
    std::string target;                  // empty: "like" > "target" > last name
    std::uint64_t seed = 1;
    // architecture
    std::size_t dim = 16;
    std::size_t mem_dims = 8;
    std::size_t heads = 2;
    std::size_t gate_hidden = 16;
    std::size_t layers = 2;
    std::string residual = "single";
    std::string norm = "sum";
    std::string score = "layer-sum";
    // training
    std::size_t epochs = 150;
    std::size_t batch = 32;
    std::size_t pairs = 4;
    double lr = 1e-3;
    double decay = 0.96;
    double lambda = 1e-2;
    std::string init = "pretrain";
    std::size_t pretrain_epochs = 300;
    bool sampled = false;
    std::size_t cap = 64;
    std::size_t patience = 0;
    bool validate = false;
    // ablation
    bool ablate_be = false;
    bool ablate_ma = false;
    std::string behaviors_use;  // comma-separated names, or "target"
    // evaluation
    std::vector<std::size_t> cutoffs = {1, 3, 5, 7, 9, 10};
    std::string baseline;

    json to_json() const {
        return {{"data", data},
                {"out", out},
                {"behaviors", behaviors},
                {"target", target},
                {"seed", seed},
                {"dim", dim},
                {"mem_dims", mem_dims},
                {"heads", heads},
                {"gate_hidden", gate_hidden},
                {"layers", layers},
                {"residual", residual},
                {"norm", norm},
                {"score", score},
                {"epochs", epochs},
                {"batch", batch},
                {"pairs", pairs},
                {"lr", lr},
                {"decay", decay},
                {"lambda", lambda},
                {"init", init},
                {"pretrain_epochs", pretrain_epochs},
                {"sampled", sampled},
                {"cap", cap},
                {"patience", patience},
                {"validate", validate},
                {"ablate_be", ablate_be},
                {"ablate_ma", ablate_ma},
                {"behaviors_use", behaviors_use},
                {"cutoffs", cutoffs},
                {"baseline", baseline}};
    }

    void overlay(const json& j) {
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
        };
        get("data", data), get("out", out), get("behaviors", behaviors), get("target", target);
        get("seed", seed), get("dim", dim), get("mem_dims", mem_dims), get("heads", heads);
        get("gate_hidden", gate_hidden), get("layers", layers), get("residual", residual);
        get("norm", norm), get("score", score), get("epochs", epochs), get("batch", batch);
        get("pairs", pairs), get("lr", lr), get("decay", decay), get("lambda", lambda);
        get("init", init), get("pretrain_epochs", pretrain_epochs), get("sampled", sampled);
        get("cap", cap), get("patience", patience), get("validate", validate);
        get("ablate_be", ablate_be), get("ablate_ma", ablate_ma);
        get("behaviors_use", behaviors_use), get("cutoffs", cutoffs), get("baseline", baseline);
    }
};

// all configuration problems reported at once
void validate_config(const RunConfig& rc) {
    std::vector<std::string> problems;
    if (rc.dim == 0 || rc.mem_dims == 0 || rc.heads == 0 || rc.gate_hidden == 0)
        problems.push_back("dim, mem-dims, heads and gate-hidden must be positive");
    if (rc.heads != 0 && rc.dim % rc.heads != 0)
        problems.push_back("dim " + std::to_string(rc.dim) + " is not divisible by heads " +
                           std::to_string(rc.heads));
    if (rc.layers > 4) problems.push_back("layers must lie in [0,4]");
    if (rc.residual != "single" && rc.residual != "double")
        problems.push_back("residual must be 'single' or 'double'");
    if (rc.norm != "sum" && rc.norm != "mean") problems.push_back("norm must be 'sum' or 'mean'");
    if (rc.score != "layer-sum" && rc.score != "layer-concat")
        problems.push_back("score must be 'layer-sum' or 'layer-concat'");
    if (rc.lr <= 0 || rc.decay <= 0) problems.push_back("lr and decay must be positive");
    if (rc.lambda < 0) problems.push_back("lambda must be nonnegative");
    if (rc.batch == 0 || rc.pairs == 0) problems.push_back("batch and pairs must be positive");
    if (rc.init != "pretrain" && rc.init != "random")
        problems.push_back("init must be 'pretrain' or 'random'");
    for (std::size_t c : rc.cutoffs)
        if (c == 0 || c > 100) problems.push_back("cutoffs must lie in [1,100]");
    if (!rc.baseline.empty() && rc.baseline != "popularity")
        problems.push_back("unknown baseline '" + rc.baseline + "'");
    if (!problems.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto& p : problems) msg += "\n  - " + p;
        throw config_error(msg);
    }
}

// first-appearance scan of behavior names; '*' lines fall back to the rating schema
BehaviorSchema resolve_schema(const RunConfig& rc) {
    std::vector<std::string> names = rc.behaviors;
    if (names.empty()) {
        std::ifstream in(rc.data);
        if (!in) throw data_error("cannot open event file '" + rc.data + "'");
        std::string line;
        std::set<std::string> seen;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            const auto t1 = line.find('\t');
            const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
            if (t2 == std::string::npos) continue;
            auto t3 = line.find('\t', t2 + 1);
            std::string name = line.substr(t2 + 1, t3 == std::string::npos ? t3 : t3 - t2 - 1);
            if (name.empty() || name == "*") continue;
            if (seen.insert(name).second) names.push_back(name);
        }
        if (names.empty()) return BehaviorSchema::rating_default();
    }

    BehaviorSchema schema;
    schema.names = names;
    auto idx = [&](const std::string& n) { return schema.index_of(n); };
    if (idx("dislike") && idx("neutral") && idx("like")) {
        RatingPartition rp;
        rp.dislike_index = *idx("dislike");
        rp.neutral_index = *idx("neutral");
        rp.like_index = *idx("like");
        schema.rating_partition = rp;
    }
    if (!rc.target.empty()) {
        const auto t = idx(rc.target);
        if (!t) throw config_error("target behavior '" + rc.target + "' is not in the schema");
        schema.target_index = *t;
    } else if (idx("like")) {
        schema.target_index = *idx("like");
    } else if (idx("target")) {
        schema.target_index = *idx("target");
    } else {
        schema.target_index = schema.names.size() - 1;
    }
    schema.validate();
    return schema;
}

HyperParams to_hyper(const RunConfig& rc, std::size_t behavior_count) {
    HyperParams h;
    h.embed_dim = rc.dim;
    h.mem_dims = rc.mem_dims;
    h.heads = rc.heads;
    h.gate_hidden = rc.gate_hidden;
    h.layers = rc.layers;
    h.behavior_count = behavior_count;
    h.neighbor_norm = rc.norm == "mean" ? NeighborNorm::mean : NeighborNorm::sum;
    h.residual = rc.residual == "double" ? ResidualMode::double_add : ResidualMode::single;
    h.score_combine =
        rc.score == "layer-concat" ? ScoreCombine::layer_concat : ScoreCombine::layer_sum;
    return h;
}

AblationFlags to_flags(const RunConfig& rc, const BehaviorSchema& schema) {
    AblationFlags f;
    f.disable_behavior_embedding = rc.ablate_be;
    f.disable_attention = rc.ablate_ma;
    if (!rc.behaviors_use.empty()) {
        if (rc.behaviors_use == "target") {
            f.behavior_mask = {schema.target_index};
        } else {
            std::string rest = rc.behaviors_use;
            while (!rest.empty()) {
                const auto comma = rest.find(',');
                const std::string name = rest.substr(0, comma);
                rest = comma == std::string::npos ? "" : rest.substr(comma + 1);
                const auto k = schema.index_of(name);
                if (!k) throw config_error("behavior '" + name + "' in --behaviors-use is unknown");
                f.behavior_mask.push_back(*k);
            }
        }
    }
    f.validate(schema.behavior_count(), schema.target_index);
    return f;
}

TrainConfig to_train_config(const RunConfig& rc) {
    TrainConfig t;
    t.epochs = rc.epochs;
    t.batch_size = rc.batch;
    t.pairs_per_user = rc.pairs;
    t.lr = rc.lr;
    t.decay = rc.decay;
    t.lambda = rc.lambda;
    t.seed = rc.seed;
    t.sampled = rc.sampled;
    t.neighbor_cap = rc.cap;
    t.patience = rc.patience;
    t.log_to_stderr = true;
    return t;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write '" + path.string() + "'");
    out << text;
}

Model build_model(const RunConfig& rc, const BehaviorSchema& schema,
                  const InteractionTensor& train) {
    Model m;
    m.hyper = to_hyper(rc, schema.behavior_count());
    m.flags = to_flags(rc, schema);
    m.schema = schema;
    m.user_count = train.user_count;
    m.item_count = train.item_count;
    m.params = init_params(m.hyper, m.user_count, m.item_count, rc.seed);
    PretrainConfig pc;
    pc.epochs = rc.pretrain_epochs;
    const InitMode mode = rc.init == "random" ? InitMode::random : InitMode::pretrain;
    auto [hu, hv] = pretrain_init(train, m.hyper.embed_dim, rc.seed, mode, pc);
    m.params.at("H0.user") = hu;
    m.params.at("H0.item") = hv;
    m.validate();
    return m;
}

// ---------------------------------------------------------------------------

int cmd_synth(const RunConfig& rc, const SynthSpec& spec) {
    spec.validate();
    auto r = synth_generate(spec, rc.seed);
    fs::create_directories(rc.out);

    IdMaps ids;
    for (std::size_t u = 0; u < r.tensor.user_count; ++u) ids.users.push_back("u" + std::to_string(u));
    for (std::size_t j = 0; j < r.tensor.item_count; ++j) ids.items.push_back("i" + std::to_string(j));
    write_events((fs::path(rc.out) / "events.tsv").string(), r.tensor, ids, r.schema);

    json manifest = {{"run_config", rc.to_json()},
                     {"generator",
                      {{"users", spec.users},
                       {"items", spec.items},
                       {"behaviors", spec.behaviors},
                       {"latent_dim", spec.latent_dim},
                       {"noise", spec.noise},
                       {"rho", spec.rho},
                       {"target_events_per_user", spec.target_events_per_user},
                       {"aux_events_per_user", spec.aux_events_per_user}}},
                     {"schema", {{"names", r.schema.names}, {"target_index", r.schema.target_index}}},
                     {"events", r.tensor.events.size()},
                     {"density", r.density},
                     {"aux_target_correlation", r.aux_target_correlation}};
    write_text(fs::path(rc.out) / "manifest.json", manifest.dump(2) + "\n");
    std::printf(
        "synth: %zu users x %zu items x %zu behaviors, %zu events (density %.4f, corr %.3f) -> %s\n",
        r.tensor.user_count, r.tensor.item_count, r.tensor.behavior_count, r.tensor.events.size(),
        r.density, r.aux_target_correlation, rc.out.c_str());
    return kExitOk;
}

int cmd_train(const RunConfig& rc) {
    validate_config(rc);
    const BehaviorSchema schema = resolve_schema(rc);
    auto loaded = load_events(rc.data, schema);

    SplitOptions opts;
    opts.with_validation = rc.validate || rc.patience > 0;
    auto split = leave_one_out_split(loaded.tensor, schema.target_index, rc.seed, opts);
    if (split.excluded_users > 0)
        std::fprintf(stderr, "warning: %zu users excluded (fewer than %zu eligible negatives)\n",
                     split.excluded_users, kEvalNegatives);
    auto graph = MultiBehaviorGraph::build(split.train);

    Model model = build_model(rc, schema, split.train);
    auto result = train(split, graph, model, to_train_config(rc));

    fs::create_directories(rc.out);
    save_checkpoint(result.model, (fs::path(rc.out) / "best.ckpt").string(), rc.to_json());
    {
        std::ofstream out(fs::path(rc.out) / "trainlog.csv");
        const json cfg = rc.to_json();
        result.log.write_csv(out, &cfg);
    }
    write_text(fs::path(rc.out) / "split.json",
               json{{"run_config", rc.to_json()}, {"split", split.to_json()}}.dump() + "\n");
    write_text(fs::path(rc.out) / "idmaps.json",
               json{{"run_config", rc.to_json()}, {"ids", loaded.ids.to_json()}}.dump() + "\n");

    if (result.aborted) {
        std::fprintf(stderr, "training aborted: %s\n", result.abort_reason.c_str());
        return kExitNumeric;
    }
    std::printf("train: %zu epochs, final hinge %.5f", result.log.epochs.size(),
                result.log.epochs.back().mean_hinge);
    if (!std::isnan(result.best_val_hr10))
        std::printf(", best val HR@10 %.4f (epoch %zu)", result.best_val_hr10, result.best_epoch);
    std::printf(" -> %s/best.ckpt\n", rc.out.c_str());
    return kExitOk;
}

int cmd_evaluate(const RunConfig& rc, const std::string& ckpt_path, bool seed_overridden) {
    json embedded;
    Model model = load_checkpoint(ckpt_path, &embedded);

    RunConfig eff = rc;  // schema and split seed come from the checkpoint unless overridden
    if (!embedded.is_null()) {
        RunConfig from_ckpt;
        from_ckpt.overlay(embedded);
        if (!seed_overridden) eff.seed = from_ckpt.seed;
    }
    eff.behaviors = model.schema.names;
    eff.target = model.schema.target_name();
    validate_config(eff);

    auto loaded = load_events(eff.data, model.schema);
    auto split = leave_one_out_split(loaded.tensor, model.schema.target_index, eff.seed);
    auto graph = MultiBehaviorGraph::build(split.train);

    const std::string digest = std::to_string(
        splitmix64(std::hash<std::string>{}(model_to_json(model, eff.to_json()).dump())));
    auto report = evaluate(model, graph, split, eff.cutoffs, digest);

    json out = {{"run_config", eff.to_json()}, {"report", report.to_json()}};
    report.write_table(std::cout);
    if (eff.baseline == "popularity") {
        auto pop = popularity_baseline(split, eff.cutoffs);
        out["popularity_baseline"] = pop.to_json();
        std::cout << "popularity baseline:\n";
        pop.write_table(std::cout);
    }
    fs::create_directories(eff.out);
    write_text(fs::path(eff.out) / "report.json", out.dump() + "\n");
    return kExitOk;
}

int cmd_ablate(const RunConfig& rc, std::size_t n_seeds) {
    validate_config(rc);
    if (n_seeds == 0) throw config_error("--seeds must be positive");
    const BehaviorSchema schema = resolve_schema(rc);
    auto loaded = load_events(rc.data, schema);
    auto split = leave_one_out_split(loaded.tensor, schema.target_index, rc.seed);
    auto graph = MultiBehaviorGraph::build(split.train);

    struct Variant {
        std::string name;
        RunConfig rc;
    };
    std::vector<Variant> grid;
    grid.push_back({"full", rc});
    {
        RunConfig v = rc;
        v.ablate_be = true;
        grid.push_back({"-be", v});
    }
    {
        RunConfig v = rc;
        v.ablate_ma = true;
        grid.push_back({"-ma", v});
    }
    for (std::size_t k = 0; k < schema.behavior_count(); ++k) {
        if (k == schema.target_index) continue;
        RunConfig v = rc;
        std::string keep;
        for (std::size_t k2 = 0; k2 < schema.behavior_count(); ++k2) {
            if (k2 == k) continue;
            keep += (keep.empty() ? "" : ",") + schema.names[k2];
        }
        v.behaviors_use = keep;
        grid.push_back({"wo-" + schema.names[k], v});
    }
    if (schema.behavior_count() > 1) {
        RunConfig v = rc;
        v.behaviors_use = "target";
        grid.push_back({"only-target", v});
    }
    for (std::size_t depth = 0; depth <= 3; ++depth) {
        RunConfig v = rc;
        v.layers = depth;
        grid.push_back({"depth-" + std::to_string(depth), v});
    }

    fs::create_directories(rc.out);
    json rows = json::array();
    std::printf("%-14s %8s %8s %6s\n", "variant", "HR@10", "NDCG@10", "seeds");
    for (const auto& variant : grid) {
        double hr_sum = 0, ndcg_sum = 0;
        std::size_t ok = 0;
        std::string error;
        for (std::size_t s = 0; s < n_seeds; ++s) {
            try {
                RunConfig vrc = variant.rc;
                vrc.seed = rc.seed + s;
                Model model = build_model(vrc, schema, split.train);
                auto result = train(split, graph, model, to_train_config(vrc));
                if (result.aborted) throw numeric_error(result.abort_reason);
                const std::string ckpt =
                    (fs::path(rc.out) / (variant.name + "-s" + std::to_string(vrc.seed) + ".ckpt"))
                        .string();
                save_checkpoint(result.model, ckpt, vrc.to_json());
                auto rep = evaluate(result.model, graph, split, {10});
                hr_sum += rep.hr.back();
                ndcg_sum += rep.ndcg.back();
                ok += 1;
            } catch (const std::exception& e) {
                error = e.what();
            }
        }
        json row = {{"variant", variant.name}, {"seeds", ok}};
        if (ok > 0) {
            row["hr10"] = hr_sum / static_cast<double>(ok);
            row["ndcg10"] = ndcg_sum / static_cast<double>(ok);
            std::printf("%-14s %8.4f %8.4f %6zu\n", variant.name.c_str(),
                        hr_sum / static_cast<double>(ok), ndcg_sum / static_cast<double>(ok), ok);
        } else {
            row["error"] = error;
            std::printf("%-14s %8s %8s %6zu  (%s)\n", variant.name.c_str(), "FAILED", "-", ok,
                        error.c_str());
        }
        rows.push_back(std::move(row));
    }
    write_text(fs::path(rc.out) / "ablate.json",
               json{{"run_config", rc.to_json()}, {"rows", rows}}.dump(2) + "\n");
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    RunConfig rc;

    // a JSON config file provides defaults; explicit flags win
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--config") {
            std::ifstream in(argv[i + 1]);
            if (!in) {
                std::fprintf(stderr, "error: cannot open config '%s'\n", argv[i + 1]);
                return kExitConfig;
            }
            try {
                rc.overlay(json::parse(in));
            } catch (const std::exception& e) {
                std::fprintf(stderr, "error: bad config file: %s\n", e.what());
                return kExitConfig;
            }
        }
    }

    CLI::App app{"graph neural multi-behavior recommender"};
    app.require_subcommand(1);
    std::string config_path;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file; explicit flags override it");
        cmd->add_option("--out", rc.out, "output directory")->capture_default_str();
        cmd->add_option("--seed", rc.seed, "master 64-bit seed")->capture_default_str();
    };
    auto add_model_opts = [&](CLI::App* cmd) {
        cmd->add_option("--dim", rc.dim, "embedding dimension d")->capture_default_str();
        cmd->add_option("--mem-dims", rc.mem_dims, "latent dimensions C of the gating unit")
            ->capture_default_str();
        cmd->add_option("--heads", rc.heads, "attention heads (chosen)")->capture_default_str();
        cmd->add_option("--gate-hidden", rc.gate_hidden, "fusion network hidden width (chosen)")
            ->capture_default_str();
        cmd->add_option("--layers", rc.layers, "propagation depth L (chosen)")->capture_default_str();
        cmd->add_option("--residual", rc.residual, "attention residual: single|double (chosen)")
            ->capture_default_str();
        cmd->add_option("--norm", rc.norm, "neighbor aggregation: sum|mean (chosen)")
            ->capture_default_str();
        cmd->add_option("--score", rc.score, "match score: layer-sum|layer-concat (chosen)")
            ->capture_default_str();
        cmd->add_option("--behaviors", rc.behaviors,
                        "comma-separated behavior names (default: discovered from the file)")
            ->delimiter(',');
        cmd->add_option("--target", rc.target, "target behavior name")->capture_default_str();
    };
    auto add_train_opts = [&](CLI::App* cmd) {
        cmd->add_option("--data", rc.data, "event TSV file")->required();
        cmd->add_option("--epochs", rc.epochs, "training epochs (chosen)")->capture_default_str();
        cmd->add_option("--batch", rc.batch, "seed users per step")->capture_default_str();
        cmd->add_option("--pairs", rc.pairs, "positive/negative pairs per user (chosen)")
            ->capture_default_str();
        cmd->add_option("--lr", rc.lr, "base learning rate")->capture_default_str();
        cmd->add_option("--decay", rc.decay, "per-epoch lr decay")->capture_default_str();
        cmd->add_option("--lambda", rc.lambda, "L2 regularization weight (chosen)")
            ->capture_default_str();
        cmd->add_option("--init", rc.init, "0-order embeddings: pretrain|random (chosen)")
            ->capture_default_str();
        cmd->add_option("--pretrain-epochs", rc.pretrain_epochs, "autoencoder epochs (chosen)")
            ->capture_default_str();
        cmd->add_flag("--sampled", rc.sampled, "mini-batch subgraph sampling instead of full-graph");
        cmd->add_option("--cap", rc.cap, "neighbor fan-out cap in sampled mode (chosen)")
            ->capture_default_str();
        cmd->add_option("--patience", rc.patience,
                        "early-stop patience on validation HR@10 (chosen)")
            ->capture_default_str();
        cmd->add_flag("--validate", rc.validate, "hold out a validation event per user");
        cmd->add_flag("--ablate-be", rc.ablate_be, "disable the type-specific behavior embedding");
        cmd->add_flag("--ablate-ma", rc.ablate_ma, "disable the cross-behavior attention");
        cmd->add_option("--behaviors-use", rc.behaviors_use,
                        "behavior subset to use ('target' or comma-separated names)")
            ->capture_default_str();
    };

    // synth
    SynthSpec synth_spec;
    auto* synth = app.add_subcommand("synth", "generate a planted synthetic dataset");
    synth->add_option("--users", synth_spec.users, "user count")->capture_default_str();
    synth->add_option("--items", synth_spec.items, "item count")->capture_default_str();
    synth->add_option("--behaviors", synth_spec.behaviors, "behavior count, target last")
        ->capture_default_str();
    synth->add_option("--latent", synth_spec.latent_dim, "planted latent rank (chosen)")
        ->capture_default_str();
    synth->add_option("--noise", synth_spec.noise, "observation noise (chosen)")
        ->capture_default_str();
    synth->add_option("--rho", synth_spec.rho, "auxiliary-target correlation strength")
        ->capture_default_str();
    synth->add_option("--target-deg", synth_spec.target_events_per_user,
                      "target events per user (chosen)")
        ->capture_default_str();
    synth->add_option("--aux-deg", synth_spec.aux_events_per_user,
                      "events per user per auxiliary behavior (chosen)")
        ->capture_default_str();
    add_common(synth);

    // train
    auto* train_cmd = app.add_subcommand("train", "train a model and write best.ckpt");
    add_train_opts(train_cmd);
    add_model_opts(train_cmd);
    add_common(train_cmd);

    // evaluate
    std::string ckpt_path;
    auto* eval_cmd = app.add_subcommand("evaluate", "rank held-out items for a checkpoint");
    eval_cmd->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
    eval_cmd->add_option("--data", rc.data, "event TSV file")->required();
    eval_cmd->add_option("--cutoffs", rc.cutoffs, "report cutoffs")->delimiter(',');
    eval_cmd->add_option("--baseline", rc.baseline, "add a sanity baseline: popularity");
    auto* eval_seed =
        eval_cmd->add_option("--seed", rc.seed, "split seed (default: the checkpoint's embedded seed)");
    eval_cmd->add_option("--out", rc.out, "output directory")->capture_default_str();
    eval_cmd->add_option("--config", config_path, "JSON config file; explicit flags override it");

    // ablate
    std::size_t n_seeds = 1;
    auto* ablate_cmd =
        app.add_subcommand("ablate", "train and score the component/behavior/depth variant grid");
    add_train_opts(ablate_cmd);
    add_model_opts(ablate_cmd);
    add_common(ablate_cmd);
    ablate_cmd->add_option("--seeds", n_seeds, "seeds per variant (chosen)")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (synth->parsed()) return cmd_synth(rc, synth_spec);
        if (train_cmd->parsed()) return cmd_train(rc);
        if (eval_cmd->parsed()) return cmd_evaluate(rc, ckpt_path, eval_seed->count() > 0);
        if (ablate_cmd->parsed()) return cmd_ablate(rc, n_seeds);
    } catch (const config_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    } catch (const data_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    } catch (const numeric_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    }
    return kExitOk;
}
