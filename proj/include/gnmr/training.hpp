#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gnmr/adam.hpp"
#include "gnmr/evaluation.hpp"
#include "gnmr/graph.hpp"
#include "gnmr/interactions.hpp"
#include "gnmr/model.hpp"

namespace gnmr {

struct TrainConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 32;      // seed users per optimizer step
    std::size_t pairs_per_user = 4;   // S
    double lr = 1e-3;
    double decay = 0.96;              // multiplicative, per epoch
    double lambda = 1e-2;             // L2 weight
    std::uint64_t seed = 1;
    bool sampled = false;             // mini-batch subgraph sampling instead of full-graph
    std::size_t neighbor_cap = 64;    // fan-out cap in sampled mode
    std::size_t patience = 0;         // epochs without validation improvement; 0 = off
    std::size_t validate_every = 1;
    bool log_to_stderr = false;

    void validate() const {
        if (epochs == 0 || batch_size == 0 || pairs_per_user == 0)
            throw config_error("epochs, batch size and pairs per user must be positive");
        if (lr <= 0 || decay <= 0 || lambda < 0) throw config_error("bad optimizer constants");
        if (sampled && neighbor_cap == 0) throw config_error("neighbor cap must be >= 1");
    }
};

struct EpochLog {
    std::size_t epoch = 0;
    double mean_hinge = 0.0;
    double reg = 0.0;       // lambda * ||Theta||_F^2 at epoch end
    double lr = 0.0;
    double val_hr10 = std::nan("");  // NaN when not evaluated
    double seconds = 0.0;
};

struct TrainLog {
    std::vector<EpochLog> epochs;

    void write_csv(std::ostream& os, const nlohmann::json* run_config = nullptr) const {
        if (run_config) os << "# config: " << run_config->dump() << '\n';
        os << "epoch,loss,reg,lr,val_hr10,seconds\n";
        for (const auto& e : epochs) {
            char buf[160];
            if (std::isnan(e.val_hr10))
                std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,,%.3f", e.epoch,
                              e.mean_hinge, e.reg, e.lr, e.seconds);
            else
                std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.6f,%.3f", e.epoch,
                              e.mean_hinge, e.reg, e.lr, e.val_hr10, e.seconds);
            os << buf << '\n';
        }
    }
};

struct TrainResult {
    Model model;  // best validation checkpoint when available, else the final state
    TrainLog log;
    bool aborted = false;
    std::string abort_reason;
    double best_val_hr10 = std::nan("");
    std::size_t best_epoch = 0;
};

inline double hinge_loss(double pos, double neg) { return std::max(0.0, 1.0 - pos + neg); }

// Positive/negative item pairs for one user. Positives come from the user's
// target-behavior training items, without replacement when the degree allows
// and with replacement otherwise. Negatives are uniform over items with no
// target interaction, distinct within the draw when enough exist. A user with
// no positives or no available negatives yields no pairs.
inline std::vector<std::pair<std::uint32_t, std::uint32_t>> sample_pairs(
    const std::vector<std::uint32_t>& user_target_items_sorted, std::size_t item_count,
    std::size_t pairs, Rng& rng) {
    const std::size_t deg = user_target_items_sorted.size();
    if (deg == 0 || item_count <= deg) return {};

    std::vector<std::uint32_t> positives;
    if (deg >= pairs) {
        std::vector<std::uint32_t> pool = user_target_items_sorted;
        for (std::size_t i = 0; i < pairs; ++i) {
            const std::size_t j = i + rng.uniform_index(pool.size() - i);
            std::swap(pool[i], pool[j]);
            positives.push_back(pool[i]);
        }
    } else {
        for (std::size_t i = 0; i < pairs; ++i)
            positives.push_back(user_target_items_sorted[rng.uniform_index(deg)]);
    }

    const std::size_t available = item_count - deg;
    std::vector<std::uint32_t> negatives;
    const bool distinct = available >= pairs;
    while (negatives.size() < pairs) {
        const auto cand = static_cast<std::uint32_t>(rng.uniform_index(item_count));
        if (std::binary_search(user_target_items_sorted.begin(), user_target_items_sorted.end(),
                               cand))
            continue;
        if (distinct && std::find(negatives.begin(), negatives.end(), cand) != negatives.end())
            continue;
        negatives.push_back(cand);
    }

    std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
    out.reserve(pairs);
    for (std::size_t i = 0; i < pairs; ++i) out.push_back({positives[i], negatives[i]});
    return out;
}

inline std::vector<std::pair<std::uint32_t, std::uint32_t>> sample_pairs(const Split& split,
                                                                         std::uint32_t user,
                                                                         std::size_t pairs,
                                                                         std::uint64_t seed) {
    auto items = split.train.per_user_items(split.target_behavior)[user];
    std::sort(items.begin(), items.end());
    Rng rng(seed);
    return sample_pairs(items, split.train.item_count, pairs, rng);
}

// lambda * ||Theta||_F^2 over every parameter tensor, computed directly
inline double regularizer_value(const nd::ParamMap& params, double lambda) {
    double s = 0.0;
    for (const auto& [name, t] : params)
        for (std::size_t i = 0; i < t.size(); ++i) s += t[i] * t[i];
    return lambda * s;
}

// Pairwise-hinge training loop: per step, forward over the graph (full by
// default, sampled subgraph otherwise), sum of hinge terms over the batch
// users' pairs plus the L2 term, reverse pass, Adam update. Learning rate
// decays multiplicatively per epoch; the best validation checkpoint is kept.
inline TrainResult train(const Split& split, const MultiBehaviorGraph& graph, Model model,
                         const TrainConfig& cfg) {
    cfg.validate();
    model.validate();
    if (graph.user_count != split.train.user_count || graph.item_count != split.train.item_count)
        throw data_error("train: graph does not match the split's id space");

    const std::size_t target = split.target_behavior;
    auto user_targets = split.train.per_user_items(target);
    for (auto& v : user_targets) std::sort(v.begin(), v.end());

    std::vector<std::uint32_t> eligible;
    for (std::uint32_t u = 0; u < split.train.user_count; ++u) {
        const std::size_t deg = user_targets[u].size();
        if (deg >= 1 && split.train.item_count > deg) eligible.push_back(u);
    }
    if (eligible.empty()) throw data_error("train: no user has target-behavior training events");

    nd::AdamState opt;
    opt.base_lr = cfg.lr;
    opt.decay_rate = cfg.decay;

    TrainResult result;
    result.model = model;
    nd::ParamMap last_good = model.params;

    const GraphView full = full_view(graph);
    double best_val = -1.0;
    std::size_t epochs_since_best = 0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        opt.epoch = epoch;

        std::vector<std::uint32_t> order = eligible;
        Rng shuffle_rng(splitmix64(derive_seed(cfg.seed, "shuffle") + epoch));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);

        double hinge_sum = 0.0;
        std::size_t pair_count = 0;

        try {
            for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
                const std::size_t stop = std::min(order.size(), start + cfg.batch_size);

                // pairs first so sampled mode can seed the subgraph with them
                std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> batch_pairs;
                std::vector<std::uint32_t> batch_users;
                for (std::size_t b = start; b < stop; ++b) {
                    const std::uint32_t u = order[b];
                    Rng pair_rng(splitmix64(derive_seed(cfg.seed, "pairs") + epoch * 0x9e3779b9ull + u));
                    auto pairs = sample_pairs(user_targets[u], split.train.item_count,
                                              cfg.pairs_per_user, pair_rng);
                    if (pairs.empty()) continue;
                    batch_users.push_back(u);
                    batch_pairs.push_back(std::move(pairs));
                }
                if (batch_users.empty()) continue;

                nd::Tape tape;
                ParamVars pv = register_params(tape, model.params);

                GraphView view;
                std::vector<std::size_t> user_local(graph.user_count), item_local(graph.item_count);
                if (cfg.sampled) {
                    std::vector<std::uint32_t> seed_items;
                    for (const auto& pairs : batch_pairs)
                        for (auto [p, n] : pairs) {
                            seed_items.push_back(p);
                            seed_items.push_back(n);
                        }
                    std::sort(seed_items.begin(), seed_items.end());
                    seed_items.erase(std::unique(seed_items.begin(), seed_items.end()),
                                     seed_items.end());
                    auto sub = sample_batch(graph, batch_users, model.hyper.layers,
                                            cfg.neighbor_cap,
                                            splitmix64(derive_seed(cfg.seed, "subgraph") + epoch),
                                            seed_items);
                    view = subgraph_view(sub);
                    for (std::size_t i = 0; i < view.user_ids.size(); ++i)
                        user_local[view.user_ids[i]] = i;
                    for (std::size_t i = 0; i < view.item_ids.size(); ++i)
                        item_local[view.item_ids[i]] = i;
                } else {
                    view = full;
                    for (std::size_t i = 0; i < graph.user_count; ++i) user_local[i] = i;
                    for (std::size_t i = 0; i < graph.item_count; ++i) item_local[i] = i;
                }

                EmbeddingVars emb = forward(tape, pv, model, view);

                nd::Var one = tape.constant_scalar(1.0);
                nd::Var loss;
                bool have_loss = false;
                for (std::size_t bi = 0; bi < batch_users.size(); ++bi) {
                    const std::uint32_t u = batch_users[bi];
                    for (auto [p, n] : batch_pairs[bi]) {
                        nd::Var pos = pair_score(emb, user_local[u], item_local[p]);
                        nd::Var neg = pair_score(emb, user_local[u], item_local[n]);
                        nd::Var h = nd::relu(nd::sub(one, nd::sub(pos, neg)));
                        hinge_sum += tape.value(h).scalar_value();
                        pair_count += 1;
                        loss = have_loss ? nd::add(loss, h) : h;
                        have_loss = true;
                    }
                }

                // lambda * ||Theta||_F^2 on the tape so it contributes gradient
                nd::Var reg;
                bool have_reg = false;
                for (const auto& [name, var] : pv.vars) {
                    nd::Var term = nd::sum_all(nd::mul(var, var));
                    reg = have_reg ? nd::add(reg, term) : term;
                    have_reg = true;
                }
                loss = nd::add(loss, nd::scale(reg, cfg.lambda));

                auto grads = tape.backward(loss);
                nd::GradMap gm;
                for (const auto& [name, var] : pv.vars) gm.emplace(name, grads.at(var));
                nd::adam_step(model.params, gm, opt);
            }
        } catch (const numeric_error& e) {
            result.aborted = true;
            result.abort_reason = e.what();
            result.model.params = best_val >= 0.0 ? result.model.params : last_good;
            return result;
        }

        EpochLog el;
        el.epoch = epoch;
        el.mean_hinge = pair_count ? hinge_sum / static_cast<double>(pair_count) : 0.0;
        el.reg = regularizer_value(model.params, cfg.lambda);
        el.lr = opt.effective_lr();

        const bool validate_now =
            !split.validation.empty() &&
            (epoch % cfg.validate_every == 0 || epoch + 1 == cfg.epochs);
        if (validate_now) {
            Model probe = result.model;
            probe.params = model.params;
            const Embeddings emb = forward_values(probe, full);
            el.val_hr10 = hit_ratio_at(split.validation, 10, [&](std::uint32_t u, std::uint32_t j) {
                return score(emb, u, j);
            });
            if (el.val_hr10 > best_val) {
                best_val = el.val_hr10;
                result.best_val_hr10 = el.val_hr10;
                result.best_epoch = epoch;
                result.model.params = model.params;
                epochs_since_best = 0;
            } else {
                epochs_since_best += 1;
            }
        }

        el.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.log.epochs.push_back(el);
        if (cfg.log_to_stderr) {
            std::fprintf(stderr, "epoch %zu loss %.5f reg %.5f lr %.3g", epoch, el.mean_hinge,
                         el.reg, el.lr);
            if (!std::isnan(el.val_hr10)) std::fprintf(stderr, " val_hr10 %.4f", el.val_hr10);
            std::fprintf(stderr, " (%.2fs)\n", el.seconds);
        }

        last_good = model.params;
        if (cfg.patience > 0 && !split.validation.empty() && epochs_since_best >= cfg.patience)
            break;
    }

    if (best_val < 0.0) result.model.params = model.params;  // no validation: final state
    return result;
}

}  // namespace gnmr
