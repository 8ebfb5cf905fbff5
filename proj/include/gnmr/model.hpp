#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "gnmr/adam.hpp"
#include "gnmr/autodiff.hpp"
#include "gnmr/graph.hpp"
#include "gnmr/interactions.hpp"

namespace gnmr {

enum class NeighborNorm { sum, mean };
enum class ResidualMode { single, double_add };
enum class ScoreCombine { layer_sum, layer_concat };

struct HyperParams {
    std::size_t embed_dim = 16;    // d
    std::size_t mem_dims = 8;      // C, latent dimensions of the gating unit
    std::size_t heads = 2;         // S
    std::size_t gate_hidden = 16;  // d'
    std::size_t layers = 2;        // L
    std::size_t behavior_count = 0;
    NeighborNorm neighbor_norm = NeighborNorm::sum;
    ResidualMode residual = ResidualMode::single;
    ScoreCombine score_combine = ScoreCombine::layer_sum;

    std::size_t head_dim() const { return embed_dim / heads; }

    void validate() const {
        if (embed_dim == 0 || mem_dims == 0 || heads == 0 || gate_hidden == 0 ||
            behavior_count == 0)
            throw config_error("hyperparameter extents must be positive");
        if (embed_dim % heads != 0)
            throw config_error("embedding dim " + std::to_string(embed_dim) +
                               " is not divisible by head count " + std::to_string(heads));
        if (layers > 4) throw config_error("propagation depth must lie in [0,4]");
    }
};

struct AblationFlags {
    bool disable_behavior_embedding = false;    // plain neighbor sums instead of eta
    bool disable_attention = false;             // bypass the recalibration stage
    std::vector<std::size_t> behavior_mask;     // behaviors in use; empty means all

    std::vector<std::size_t> active_behaviors(std::size_t K) const {
        std::vector<std::size_t> out = behavior_mask;
        if (out.empty())
            for (std::size_t k = 0; k < K; ++k) out.push_back(k);
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    void validate(std::size_t K, std::size_t target) const {
        const auto act = active_behaviors(K);
        if (act.empty()) throw config_error("behavior mask must not be empty");
        for (std::size_t k : act)
            if (k >= K) throw config_error("behavior mask names behavior " + std::to_string(k) +
                                           " outside the schema");
        if (std::find(act.begin(), act.end(), target) == act.end())
            throw config_error("behavior mask must contain the target behavior");
    }
};

struct Model {
    HyperParams hyper;
    AblationFlags flags;
    BehaviorSchema schema;
    std::size_t user_count = 0;
    std::size_t item_count = 0;
    nd::ParamMap params;

    void validate() const {
        hyper.validate();
        schema.validate();
        flags.validate(hyper.behavior_count, schema.target_index);
    }
};

// ---------------------------------------------------------------------------
// Parameter construction
// ---------------------------------------------------------------------------

namespace names {

inline std::string w1(std::size_t k) { return "W1.k" + std::to_string(k); }
inline std::string b1(std::size_t k) { return "b1.k" + std::to_string(k); }
inline std::string w2(std::size_t k, std::size_t c) {
    return "W2.k" + std::to_string(k) + ".c" + std::to_string(c);
}
inline std::string q(std::size_t s) { return "Q.s" + std::to_string(s); }
inline std::string kk(std::size_t s) { return "K.s" + std::to_string(s); }
inline std::string v(std::size_t s) { return "V.s" + std::to_string(s); }

}  // namespace names

inline nd::Tensor gaussian_tensor(nd::Shape shape, double stddev, Rng& rng) {
    nd::Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = stddev * rng.gaussian();
    t.set_requires_grad(true);
    return t;
}

// Parameter tables per the architecture: behavior-specific W1/b1/{W2_c},
// per-head Q/K/V projections, and the gating network W3/w2/b2/b3. One set
// shared by user and item sides and across layers.
inline nd::ParamMap init_params(const HyperParams& h, std::size_t user_count,
                                std::size_t item_count, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "params"));
    const std::size_t d = h.embed_dim, C = h.mem_dims, S = h.heads, dh = h.head_dim(),
                      dp = h.gate_hidden;
    const double wi = 0.03;  // weight init scale; raw-sum aggregation needs small gains
    nd::ParamMap p;
    p.emplace("H0.user", gaussian_tensor({user_count, d}, 0.01, rng));
    p.emplace("H0.item", gaussian_tensor({item_count, d}, 0.01, rng));
    for (std::size_t k = 0; k < h.behavior_count; ++k) {
        p.emplace(names::w1(k), gaussian_tensor({C, d}, wi, rng));
        p.emplace(names::b1(k), nd::Tensor({1, C}, 0.05, true));
        for (std::size_t c = 0; c < C; ++c) {
            // identity-plus-noise: the dimension-weighted transforms start out
            // preserving the embedding space instead of rotating it
            nd::Tensor w2 = gaussian_tensor({d, d}, wi, rng);
            for (std::size_t e = 0; e < d; ++e) w2.at(e, e) += 1.0 / static_cast<double>(C);
            p.emplace(names::w2(k, c), std::move(w2));
        }
    }
    for (std::size_t s = 0; s < S; ++s) {
        p.emplace(names::q(s), gaussian_tensor({dh, d}, wi, rng));
        p.emplace(names::kk(s), gaussian_tensor({dh, d}, wi, rng));
        p.emplace(names::v(s), gaussian_tensor({dh, d}, wi, rng));
    }
    p.emplace("W3", gaussian_tensor({dp, d}, wi, rng));
    p.emplace("w2", gaussian_tensor({1, dp}, wi, rng));
    p.emplace("b2", nd::Tensor({1, dp}, 0.1, true));
    p.emplace("b3", nd::Tensor({1, 1}, 0.0, true));
    return p;
}

// ---------------------------------------------------------------------------
// Graph views: one adjacency interface for full-graph and sampled execution
// ---------------------------------------------------------------------------

struct GraphView {
    std::vector<std::uint32_t> user_ids, item_ids;  // local -> global
    std::vector<std::shared_ptr<const AdjacencyLists>> user_adj, item_adj;
    bool identity = false;  // local ids equal global ids (full graph)

    std::size_t user_count() const { return user_ids.size(); }
    std::size_t item_count() const { return item_ids.size(); }
};

inline GraphView full_view(const MultiBehaviorGraph& g) {
    GraphView v;
    v.identity = true;
    v.user_ids.resize(g.user_count);
    for (std::uint32_t u = 0; u < g.user_count; ++u) v.user_ids[u] = u;
    v.item_ids.resize(g.item_count);
    for (std::uint32_t j = 0; j < g.item_count; ++j) v.item_ids[j] = j;
    v.user_adj = g.user_adj;
    v.item_adj = g.item_adj;
    return v;
}

inline GraphView subgraph_view(const BatchSubgraph& sub) {
    GraphView v;
    v.identity = false;
    v.user_ids = sub.user_ids;
    v.item_ids = sub.item_ids;
    v.user_adj = sub.user_adj;
    v.item_adj = sub.item_adj;
    return v;
}

// ---------------------------------------------------------------------------
// Forward pass
// ---------------------------------------------------------------------------

struct ParamVars {
    std::map<std::string, nd::Var> vars;

    nd::Var at(const std::string& name) const {
        auto it = vars.find(name);
        if (it == vars.end()) throw config_error("unknown parameter '" + name + "'");
        return it->second;
    }
};

inline ParamVars register_params(nd::Tape& tape, const nd::ParamMap& params) {
    ParamVars pv;
    for (const auto& [name, tensor] : params) pv.vars.emplace(name, tape.leaf(tensor));
    return pv;
}

struct EmbeddingVars {
    std::vector<nd::Var> user_layers, item_layers;  // layer 0..L
    nd::Var user_comb, item_comb;                   // layer combination for scoring
};

// transposed projection matrices shared by every node update in a forward pass
struct Projections {
    std::vector<nd::Var> tQ, tK, tV;  // d x (d/S)
    nd::Var tW3;                      // d x d'
    nd::Var tw2;                      // d' x 1
};

inline Projections build_projections(const ParamVars& pv, const HyperParams& h,
                                     bool with_attention) {
    Projections proj;
    if (with_attention) {
        for (std::size_t s = 0; s < h.heads; ++s) {
            proj.tQ.push_back(nd::transpose(pv.at(names::q(s))));
            proj.tK.push_back(nd::transpose(pv.at(names::kk(s))));
            proj.tV.push_back(nd::transpose(pv.at(names::v(s))));
        }
    }
    proj.tW3 = nd::transpose(pv.at("W3"));
    proj.tw2 = nd::transpose(pv.at("w2"));
    return proj;
}

// eta: type-specific messages for every node of one side under behavior k.
// `other_prev` holds the opposite side's layer-l embeddings; row r of the
// result is the message delivered to local node r. Empty neighborhoods give
// zero rows. Under the behavior-embedding ablation the raw neighbor
// aggregate is passed through unchanged.
inline nd::Var behavior_messages(const ParamVars& pv, const Model& model, std::size_t k,
                                 const std::shared_ptr<const AdjacencyLists>& adj,
                                 nd::Var other_prev) {
    const auto& h = model.hyper;
    const std::size_t n_nodes = adj->size();
    nd::Var sum_k = nd::neighbor_sum(other_prev, adj, h.neighbor_norm == NeighborNorm::mean);
    if (model.flags.disable_behavior_embedding) return sum_k;
    nd::Var pre = nd::add(nd::matmul(sum_k, nd::transpose(pv.at(names::w1(k)))),
                          nd::tile_rows(pv.at(names::b1(k)), n_nodes));
    nd::Var alpha = nd::relu(pre);  // n_nodes x C, the per-latent-dimension weights
    nd::Var acc;
    for (std::size_t c = 0; c < h.mem_dims; ++c) {
        nd::Var t = nd::matmul(sum_k, nd::transpose(pv.at(names::w2(k, c))));
        nd::Var term = nd::mul(nd::tile_cols(nd::col(alpha, c), h.embed_dim), t);
        acc = c == 0 ? term : nd::add(acc, term);
    }
    return acc;
}

// xi: scaled dot-product attention across behavior types for one node.
// `messages` is Ka x d (one row per active behavior); output has the same
// shape with the residual applied. Row-softmaxed relevance matrices land in
// `betas` (one per head) when requested. Under the message-aggregation
// ablation the input passes through exactly.
inline nd::Var cross_behavior_attention(const Projections& proj, const Model& model,
                                        nd::Var messages, std::vector<nd::Var>* betas = nullptr) {
    if (model.flags.disable_attention) return messages;
    const auto& h = model.hyper;
    std::vector<nd::Var> heads;
    heads.reserve(h.heads);
    for (std::size_t s = 0; s < h.heads; ++s) {
        nd::Var qm = nd::matmul(messages, proj.tQ[s]);
        nd::Var km = nd::matmul(messages, proj.tK[s]);
        nd::Var beta = nd::scale(nd::matmul(qm, nd::transpose(km)),
                                 1.0 / std::sqrt(static_cast<double>(h.head_dim())));
        nd::Var bsm = nd::softmax_axis(beta, 1);
        if (betas) betas->push_back(bsm);
        heads.push_back(nd::matmul(bsm, nd::matmul(messages, proj.tV[s])));
    }
    nd::Var cat = h.heads == 1 ? heads[0] : nd::concat_cols(heads);
    return h.residual == ResidualMode::single ? nd::add(cat, messages)
                                              : nd::add(cat, nd::scale(messages, 2.0));
}

// psi: softmax-gated fusion of one node's recalibrated Ka x d block into a
// single embedding. Returns (1 x d fused embedding, Ka x 1 gate weights).
inline std::pair<nd::Var, nd::Var> gated_aggregate(const ParamVars& pv, const Projections& proj,
                                                   nd::Var recalibrated) {
    nd::Tape& tape = *recalibrated.tape;
    const std::size_t ka = tape.value(recalibrated).shape()[0];
    nd::Var gate_h =
        nd::relu(nd::add(nd::matmul(recalibrated, proj.tW3), nd::tile_rows(pv.at("b2"), ka)));
    nd::Var gamma = nd::add(nd::matmul(gate_h, proj.tw2), nd::tile_rows(pv.at("b3"), ka));
    nd::Var gate = nd::softmax_axis(gamma, 0);  // Ka x 1
    return {nd::matmul(nd::transpose(gate), recalibrated), gate};
}

// optional inspection of the softmax stages of a forward pass
struct ForwardTrace {
    std::vector<nd::Tensor> betas;  // row-softmaxed Ka x Ka relevance, per node per head
    std::vector<nd::Tensor> gates;  // Ka x 1 fusion weights, per node
};

namespace detail {

inline nd::Var propagate_side(nd::Tape& tape, const ParamVars& pv, const Projections& proj,
                              const Model& model,
                              const std::vector<std::shared_ptr<const AdjacencyLists>>& adj,
                              nd::Var other_prev,
                              const std::vector<std::uint32_t>& local_to_global, const char* side,
                              ForwardTrace* trace) {
    const auto active = model.flags.active_behaviors(model.hyper.behavior_count);
    const std::size_t n_nodes = adj.empty() ? 0 : adj[active.front()]->size();

    std::vector<nd::Var> msgs;
    for (std::size_t k : active) {
        try {
            msgs.push_back(behavior_messages(pv, model, k, adj[k], other_prev));
        } catch (const numeric_error& e) {
            throw numeric_error(std::string(e.what()) + " while constructing behavior-" +
                                std::to_string(k) + " messages on the " + side + " side");
        }
    }

    const std::size_t Ka = active.size();
    std::vector<nd::Var> out_rows;
    out_rows.reserve(n_nodes);
    for (std::size_t n = 0; n < n_nodes; ++n) {
        try {
            std::vector<nd::Var> rows;
            rows.reserve(Ka);
            for (std::size_t a = 0; a < Ka; ++a) rows.push_back(nd::row(msgs[a], n));
            nd::Var M = Ka == 1 ? rows[0] : nd::stack_rows(rows);  // Ka x d

            std::vector<nd::Var> betas;
            nd::Var recal =
                cross_behavior_attention(proj, model, M, trace ? &betas : nullptr);
            auto [fused, gate] = gated_aggregate(pv, proj, recal);
            if (trace) {
                for (nd::Var b : betas) trace->betas.push_back(tape.value(b));
                trace->gates.push_back(tape.value(gate));
            }
            out_rows.push_back(fused);
        } catch (const numeric_error& e) {
            throw numeric_error(std::string(e.what()) + " while updating " + side + " node " +
                                std::to_string(local_to_global[n]));
        }
    }
    return n_nodes == 1 ? out_rows[0] : nd::stack_rows(out_rows);
}

}  // namespace detail

inline EmbeddingVars forward(nd::Tape& tape, const ParamVars& pv, const Model& model,
                             const GraphView& view, ForwardTrace* trace = nullptr) {
    model.validate();
    const auto& h = model.hyper;
    const Projections proj = build_projections(pv, h, !model.flags.disable_attention);

    EmbeddingVars out;
    nd::Var hu = view.identity ? pv.at("H0.user") : nd::gather_rows(pv.at("H0.user"), view.user_ids);
    nd::Var hv = view.identity ? pv.at("H0.item") : nd::gather_rows(pv.at("H0.item"), view.item_ids);
    out.user_layers.push_back(hu);
    out.item_layers.push_back(hv);

    for (std::size_t l = 0; l < h.layers; ++l) {
        nd::Var next_u = detail::propagate_side(tape, pv, proj, model, view.user_adj, hv,
                                                view.user_ids, "user", trace);
        nd::Var next_v = detail::propagate_side(tape, pv, proj, model, view.item_adj, hu,
                                                view.item_ids, "item", trace);
        hu = next_u;
        hv = next_v;
        out.user_layers.push_back(hu);
        out.item_layers.push_back(hv);
    }

    auto combine = [&](const std::vector<nd::Var>& layers) {
        if (layers.size() == 1) return layers[0];
        if (h.score_combine == ScoreCombine::layer_concat) return nd::concat_cols(layers);
        nd::Var acc = layers[0];
        for (std::size_t i = 1; i < layers.size(); ++i) acc = nd::add(acc, layers[i]);
        return acc;
    };
    out.user_comb = combine(out.user_layers);
    out.item_comb = combine(out.item_layers);
    return out;
}

// match score for a (user, item) pair on the tape, local indices
inline nd::Var pair_score(const EmbeddingVars& emb, std::size_t local_user,
                          std::size_t local_item) {
    return nd::dot(nd::row(emb.user_comb, local_user), nd::row(emb.item_comb, local_item));
}

// ---------------------------------------------------------------------------
// Value-level forward for inference/evaluation
// ---------------------------------------------------------------------------

struct Embeddings {
    std::vector<nd::Tensor> user_layers, item_layers;
    nd::Tensor user_comb, item_comb;
};

inline Embeddings forward_values(const Model& model, const GraphView& view) {
    nd::Tape tape;
    nd::ParamMap frozen = model.params;
    for (auto& [name, t] : frozen) t.set_requires_grad(false);
    ParamVars pv = register_params(tape, frozen);
    EmbeddingVars emb = forward(tape, pv, model, view);
    Embeddings out;
    for (nd::Var v : emb.user_layers) out.user_layers.push_back(tape.value(v));
    for (nd::Var v : emb.item_layers) out.item_layers.push_back(tape.value(v));
    out.user_comb = tape.value(emb.user_comb);
    out.item_comb = tape.value(emb.item_comb);
    return out;
}

inline double score(const Embeddings& emb, std::size_t user, std::size_t item) {
    if (user >= emb.user_comb.shape()[0] || item >= emb.item_comb.shape()[0])
        throw data_error("score: unknown user or item id");
    const std::size_t n = emb.user_comb.shape()[1];
    double s = 0.0;
    for (std::size_t c = 0; c < n; ++c) s += emb.user_comb.at(user, c) * emb.item_comb.at(item, c);
    return s;
}

// ---------------------------------------------------------------------------
// Checkpoints: versioned JSON, self-describing
// ---------------------------------------------------------------------------

inline nlohmann::json hyper_to_json(const HyperParams& h) {
    return {{"embed_dim", h.embed_dim},
            {"mem_dims", h.mem_dims},
            {"heads", h.heads},
            {"gate_hidden", h.gate_hidden},
            {"layers", h.layers},
            {"behavior_count", h.behavior_count},
            {"neighbor_norm", h.neighbor_norm == NeighborNorm::sum ? "sum" : "mean"},
            {"residual", h.residual == ResidualMode::single ? "single" : "double"},
            {"score", h.score_combine == ScoreCombine::layer_sum ? "layer-sum" : "layer-concat"}};
}

inline HyperParams hyper_from_json(const nlohmann::json& j) {
    HyperParams h;
    h.embed_dim = j.at("embed_dim").get<std::size_t>();
    h.mem_dims = j.at("mem_dims").get<std::size_t>();
    h.heads = j.at("heads").get<std::size_t>();
    h.gate_hidden = j.at("gate_hidden").get<std::size_t>();
    h.layers = j.at("layers").get<std::size_t>();
    h.behavior_count = j.at("behavior_count").get<std::size_t>();
    h.neighbor_norm = j.at("neighbor_norm") == "mean" ? NeighborNorm::mean : NeighborNorm::sum;
    h.residual = j.at("residual") == "double" ? ResidualMode::double_add : ResidualMode::single;
    h.score_combine =
        j.at("score") == "layer-concat" ? ScoreCombine::layer_concat : ScoreCombine::layer_sum;
    return h;
}

inline nlohmann::json model_to_json(const Model& model, nlohmann::json run_config = {}) {
    nlohmann::json j;
    j["format"] = "gnmr-checkpoint";
    j["version"] = 1;
    j["hyper"] = hyper_to_json(model.hyper);
    j["flags"] = {{"disable_behavior_embedding", model.flags.disable_behavior_embedding},
                  {"disable_attention", model.flags.disable_attention},
                  {"behavior_mask", model.flags.behavior_mask}};
    j["schema"] = {{"names", model.schema.names}, {"target_index", model.schema.target_index}};
    j["user_count"] = model.user_count;
    j["item_count"] = model.item_count;
    nlohmann::json params;
    for (const auto& [name, t] : model.params)
        params[name] = {{"shape", t.shape()}, {"data", t.data()}};
    j["params"] = std::move(params);
    if (!run_config.is_null() && !run_config.empty()) j["run_config"] = std::move(run_config);
    return j;
}

inline Model model_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "gnmr-checkpoint")
        throw data_error("not a gnmr checkpoint");
    if (j.value("version", 0) != 1) throw data_error("unsupported checkpoint version");
    Model m;
    m.hyper = hyper_from_json(j.at("hyper"));
    const auto& f = j.at("flags");
    m.flags.disable_behavior_embedding = f.at("disable_behavior_embedding").get<bool>();
    m.flags.disable_attention = f.at("disable_attention").get<bool>();
    m.flags.behavior_mask = f.at("behavior_mask").get<std::vector<std::size_t>>();
    m.schema.names = j.at("schema").at("names").get<std::vector<std::string>>();
    m.schema.target_index = j.at("schema").at("target_index").get<std::size_t>();
    m.user_count = j.at("user_count").get<std::size_t>();
    m.item_count = j.at("item_count").get<std::size_t>();
    for (const auto& [name, pj] : j.at("params").items()) {
        nd::Tensor t(pj.at("shape").get<nd::Shape>(), pj.at("data").get<std::vector<double>>());
        t.set_requires_grad(true);
        m.params.emplace(name, std::move(t));
    }
    m.validate();
    return m;
}

inline void save_checkpoint(const Model& model, const std::string& path,
                            nlohmann::json run_config = {}) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot open '" + path + "' for writing");
    out << model_to_json(model, std::move(run_config)).dump();
}

inline Model load_checkpoint(const std::string& path, nlohmann::json* run_config = nullptr) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open checkpoint '" + path + "'");
    nlohmann::json j = nlohmann::json::parse(in);
    if (run_config && j.contains("run_config")) *run_config = j.at("run_config");
    return model_from_json(j);
}

}  // namespace gnmr
