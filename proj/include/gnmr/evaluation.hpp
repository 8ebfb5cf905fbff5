#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gnmr/graph.hpp"
#include "gnmr/interactions.hpp"
#include "gnmr/model.hpp"

namespace gnmr {

struct RankRecord {
    std::uint32_t user = 0;
    std::size_t rank = 0;  // 1-indexed among the candidates
    std::vector<double> scores;
};

// rank = 1 + |{c: score(c) > score(pos)}| + |{c: score(c) = score(pos), id(c) < id(pos)}|
inline RankRecord rank_user(const std::vector<double>& scores,
                            const std::vector<std::uint32_t>& candidate_ids,
                            std::uint32_t positive_id) {
    if (scores.size() != candidate_ids.size())
        throw data_error("rank_user: scores and candidates disagree in length");
    std::size_t pos_at = scores.size();
    for (std::size_t i = 0; i < candidate_ids.size(); ++i)
        if (candidate_ids[i] == positive_id) pos_at = i;
    if (pos_at == scores.size()) throw data_error("rank_user: positive missing from candidates");

    const double ps = scores[pos_at];
    std::size_t rank = 1;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (i == pos_at) continue;
        if (scores[i] > ps || (scores[i] == ps && candidate_ids[i] < positive_id)) ++rank;
    }
    RankRecord r;
    r.user = 0;
    r.rank = rank;
    r.scores = scores;
    return r;
}

// HR@n and NDCG@n with the single-relevant-item closed form 1/log2(rank+1)
inline std::pair<double, double> metrics(const std::vector<RankRecord>& records, std::size_t n) {
    if (records.empty()) throw data_error("metrics: no rank records");
    if (n == 0) throw config_error("metrics: cutoff must be >= 1");
    double hits = 0.0, gain = 0.0;
    for (const auto& r : records) {
        if (r.rank <= n) {
            hits += 1.0;
            gain += 1.0 / std::log2(static_cast<double>(r.rank) + 1.0);
        }
    }
    const double m = static_cast<double>(records.size());
    return {hits / m, gain / m};
}

struct EvalReport {
    std::vector<std::size_t> cutoffs;
    std::vector<double> hr, ndcg;
    std::size_t user_count = 0;
    std::string config_digest;

    void check_invariants() const {
        for (std::size_t i = 0; i < cutoffs.size(); ++i) {
            if (!(hr[i] >= 0.0 && hr[i] <= 1.0 && ndcg[i] >= 0.0 && ndcg[i] <= 1.0))
                throw numeric_error("metric out of [0,1]");
            if (ndcg[i] > hr[i] + 1e-12) throw numeric_error("NDCG exceeds HR at the same cutoff");
            if (i > 0 && (hr[i] + 1e-12 < hr[i - 1] || ndcg[i] + 1e-12 < ndcg[i - 1]))
                throw numeric_error("metrics decreased with a larger cutoff");
        }
    }

    double at_cutoff_hr(std::size_t n) const {
        for (std::size_t i = 0; i < cutoffs.size(); ++i)
            if (cutoffs[i] == n) return hr[i];
        throw config_error("cutoff " + std::to_string(n) + " not in report");
    }

    nlohmann::json to_json() const {
        nlohmann::json per;
        for (std::size_t i = 0; i < cutoffs.size(); ++i)
            per.push_back({{"n", cutoffs[i]}, {"hr", hr[i]}, {"ndcg", ndcg[i]}});
        return {{"cutoffs", per}, {"users", user_count}, {"config_digest", config_digest}};
    }

    void write_table(std::ostream& os) const {
        os << std::left << std::setw(8) << "N" << std::setw(12) << "HR@N" << std::setw(12)
           << "NDCG@N" << '\n';
        for (std::size_t i = 0; i < cutoffs.size(); ++i)
            os << std::left << std::setw(8) << cutoffs[i] << std::setw(12) << std::fixed
               << std::setprecision(4) << hr[i] << std::setw(12) << ndcg[i] << '\n';
        os << "users: " << user_count << '\n';
    }
};

inline const std::vector<std::size_t>& default_cutoffs() {
    static const std::vector<std::size_t> c{1, 3, 5, 7, 9, 10};
    return c;
}

inline EvalReport make_report(const std::vector<RankRecord>& records,
                              std::vector<std::size_t> cutoffs, const std::string& digest) {
    std::sort(cutoffs.begin(), cutoffs.end());
    cutoffs.erase(std::unique(cutoffs.begin(), cutoffs.end()), cutoffs.end());
    EvalReport rep;
    rep.cutoffs = std::move(cutoffs);
    rep.user_count = records.size();
    rep.config_digest = digest;
    for (std::size_t n : rep.cutoffs) {
        auto [h, g] = metrics(records, n);
        rep.hr.push_back(h);
        rep.ndcg.push_back(g);
    }
    rep.check_invariants();
    return rep;
}

// rank every held-out positive among its frozen candidate set using an
// arbitrary per-(user, item) scoring function
template <typename ScoreFn>
inline std::vector<RankRecord> rank_holdouts(const std::vector<HeldOut>& holdouts,
                                             ScoreFn&& score_fn) {
    std::vector<RankRecord> records;
    records.reserve(holdouts.size());
    for (const auto& h : holdouts) {
        std::vector<std::uint32_t> cands;
        cands.reserve(h.negatives.size() + 1);
        cands.push_back(h.positive);
        cands.insert(cands.end(), h.negatives.begin(), h.negatives.end());
        std::vector<double> scores;
        scores.reserve(cands.size());
        for (std::uint32_t c : cands) scores.push_back(score_fn(h.user, c));
        RankRecord r = rank_user(scores, cands, h.positive);
        r.user = h.user;
        records.push_back(std::move(r));
    }
    return records;
}

template <typename ScoreFn>
inline double hit_ratio_at(const std::vector<HeldOut>& holdouts, std::size_t n,
                           ScoreFn&& score_fn) {
    if (holdouts.empty()) return 0.0;
    const auto records = rank_holdouts(holdouts, std::forward<ScoreFn>(score_fn));
    return metrics(records, n).first;
}

// one forward pass, then per-user ranking over the frozen candidates
inline EvalReport evaluate(const Model& model, const MultiBehaviorGraph& graph, const Split& split,
                           std::vector<std::size_t> cutoffs = default_cutoffs(),
                           const std::string& digest = "") {
    if (model.user_count != graph.user_count || model.item_count != graph.item_count)
        throw data_error("checkpoint and split id spaces disagree: model " +
                         std::to_string(model.user_count) + "x" + std::to_string(model.item_count) +
                         " vs graph " + std::to_string(graph.user_count) + "x" +
                         std::to_string(graph.item_count));
    const Embeddings emb = forward_values(model, full_view(graph));
    const auto records = rank_holdouts(
        split.test, [&](std::uint32_t u, std::uint32_t j) { return score(emb, u, j); });
    return make_report(records, std::move(cutoffs), digest);
}

// sanity floor: score(item) = target-behavior training frequency
inline EvalReport popularity_baseline(const Split& split,
                                      std::vector<std::size_t> cutoffs = default_cutoffs()) {
    std::vector<double> freq(split.train.item_count, 0.0);
    for (const Event& e : split.train.events)
        if (e.behavior == split.target_behavior) freq[e.item] += 1.0;
    const auto records = rank_holdouts(
        split.test, [&](std::uint32_t, std::uint32_t j) { return freq[j]; });
    return make_report(records, std::move(cutoffs), "popularity");
}

}  // namespace gnmr
