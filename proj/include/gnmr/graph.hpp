#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "gnmr/common.hpp"
#include "gnmr/interactions.hpp"

namespace gnmr {

using AdjacencyLists = std::vector<std::vector<std::uint32_t>>;

// Bipartite multi-behavior graph: per behavior k, user->item and item->user
// adjacency as sorted id lists. Immutable after build.
struct MultiBehaviorGraph {
    std::size_t user_count = 0;
    std::size_t item_count = 0;
    std::size_t behavior_count = 0;
    // shared so propagation ops can hold a reference without copying
    std::vector<std::shared_ptr<const AdjacencyLists>> user_adj;  // [k][user] -> items
    std::vector<std::shared_ptr<const AdjacencyLists>> item_adj;  // [k][item] -> users

    static MultiBehaviorGraph build(const InteractionTensor& x) {
        x.validate();
        MultiBehaviorGraph g;
        g.user_count = x.user_count;
        g.item_count = x.item_count;
        g.behavior_count = x.behavior_count;
        for (std::size_t k = 0; k < x.behavior_count; ++k) {
            auto ua = std::make_shared<AdjacencyLists>(x.user_count);
            auto ia = std::make_shared<AdjacencyLists>(x.item_count);
            for (const Event& e : x.events) {
                if (e.behavior != k) continue;
                (*ua)[e.user].push_back(e.item);
                (*ia)[e.item].push_back(e.user);
            }
            for (auto& v : *ua) std::sort(v.begin(), v.end());
            for (auto& v : *ia) std::sort(v.begin(), v.end());
            g.user_adj.push_back(std::move(ua));
            g.item_adj.push_back(std::move(ia));
        }
        return g;
    }

    const std::vector<std::uint32_t>& items_of(std::size_t k, std::uint32_t user) const {
        return (*user_adj[k])[user];
    }
    const std::vector<std::uint32_t>& users_of(std::size_t k, std::uint32_t item) const {
        return (*item_adj[k])[item];
    }
    std::size_t degree_user(std::size_t k, std::uint32_t user) const { return items_of(k, user).size(); }
    std::size_t degree_item(std::size_t k, std::uint32_t item) const { return users_of(k, item).size(); }

    nlohmann::json to_json() const {
        nlohmann::json j{{"users", user_count}, {"items", item_count}, {"behaviors", behavior_count}};
        j["user_adj"] = nlohmann::json::array();
        for (const auto& a : user_adj) j["user_adj"].push_back(*a);
        j["item_adj"] = nlohmann::json::array();
        for (const auto& a : item_adj) j["item_adj"].push_back(*a);
        return j;
    }
};

constexpr std::size_t kUncapped = static_cast<std::size_t>(-1);

// L-hop sampled subgraph over local (compacted) node indices. Hop sets record
// the nodes added at each expansion step, seeds at hop 0.
struct BatchSubgraph {
    std::vector<std::uint32_t> user_ids;  // local -> global
    std::vector<std::uint32_t> item_ids;
    std::vector<std::vector<std::uint32_t>> user_hops, item_hops;  // global ids per hop
    // local-index adjacency, symmetric by construction
    std::vector<std::shared_ptr<const AdjacencyLists>> user_adj;  // [k][local user] -> local items
    std::vector<std::shared_ptr<const AdjacencyLists>> item_adj;
};

namespace detail {

inline std::vector<std::uint32_t> capped_neighbors(const std::vector<std::uint32_t>& all,
                                                   std::size_t cap, std::uint64_t seed) {
    if (cap == kUncapped || all.size() <= cap) return all;
    // seeded uniform subsample without replacement (partial Fisher-Yates)
    std::vector<std::uint32_t> pool = all;
    Rng rng(seed);
    for (std::size_t i = 0; i < cap; ++i) {
        const std::size_t j = i + rng.uniform_index(pool.size() - i);
        std::swap(pool[i], pool[j]);
    }
    pool.resize(cap);
    std::sort(pool.begin(), pool.end());
    return pool;
}

}  // namespace detail

// Breadth-first closure from seed users (plus optional seed items) across all
// behavior types for `hops` hops. Nodes whose per-behavior degree exceeds
// `cap` contribute a seeded uniform subsample of their neighbors.
inline BatchSubgraph sample_batch(const MultiBehaviorGraph& g,
                                  const std::vector<std::uint32_t>& batch_users, std::size_t hops,
                                  std::size_t cap, std::uint64_t seed,
                                  const std::vector<std::uint32_t>& seed_items = {}) {
    if (batch_users.empty()) throw config_error("sample_batch: no seed users");
    if (cap == 0) throw config_error("sample_batch: cap must be >= 1");
    const std::size_t K = g.behavior_count;

    std::unordered_map<std::uint32_t, std::uint32_t> user_local, item_local;
    BatchSubgraph sub;
    auto add_user = [&](std::uint32_t u) {
        if (user_local.count(u)) return false;
        user_local.emplace(u, static_cast<std::uint32_t>(sub.user_ids.size()));
        sub.user_ids.push_back(u);
        return true;
    };
    auto add_item = [&](std::uint32_t j) {
        if (item_local.count(j)) return false;
        item_local.emplace(j, static_cast<std::uint32_t>(sub.item_ids.size()));
        sub.item_ids.push_back(j);
        return true;
    };

    std::vector<std::uint32_t> ufront, ifront;
    for (std::uint32_t u : batch_users)
        if (add_user(u)) ufront.push_back(u);
    for (std::uint32_t j : seed_items)
        if (add_item(j)) ifront.push_back(j);
    sub.user_hops.push_back(ufront);
    sub.item_hops.push_back(ifront);

    // per-behavior edge lists on global ids
    std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> edges(K);

    for (std::size_t hop = 0; hop < hops; ++hop) {
        std::vector<std::uint32_t> next_users, next_items;
        for (std::uint32_t u : ufront) {
            for (std::size_t k = 0; k < K; ++k) {
                const auto nb = detail::capped_neighbors(
                    g.items_of(k, u), cap,
                    splitmix64(derive_seed(seed, "user-fanout") ^ (std::uint64_t{u} << 20 ^ (k << 4) ^ hop)));
                for (std::uint32_t j : nb) {
                    edges[k].push_back({u, j});
                    if (add_item(j)) next_items.push_back(j);
                }
            }
        }
        for (std::uint32_t j : ifront) {
            for (std::size_t k = 0; k < K; ++k) {
                const auto nb = detail::capped_neighbors(
                    g.users_of(k, j), cap,
                    splitmix64(derive_seed(seed, "item-fanout") ^ (std::uint64_t{j} << 20 ^ (k << 4) ^ hop)));
                for (std::uint32_t u : nb) {
                    edges[k].push_back({u, j});
                    if (add_user(u)) next_users.push_back(u);
                }
            }
        }
        sub.user_hops.push_back(next_users);
        sub.item_hops.push_back(next_items);
        ufront = std::move(next_users);
        ifront = std::move(next_items);
    }

    for (std::size_t k = 0; k < K; ++k) {
        auto ua = std::make_shared<AdjacencyLists>(sub.user_ids.size());
        auto ia = std::make_shared<AdjacencyLists>(sub.item_ids.size());
        for (auto [u, j] : edges[k]) {
            (*ua)[user_local.at(u)].push_back(item_local.at(j));
            (*ia)[item_local.at(j)].push_back(user_local.at(u));
        }
        for (auto& v : *ua) {
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
        }
        for (auto& v : *ia) {
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
        }
        sub.user_adj.push_back(std::move(ua));
        sub.item_adj.push_back(std::move(ia));
    }
    return sub;
}

}  // namespace gnmr
