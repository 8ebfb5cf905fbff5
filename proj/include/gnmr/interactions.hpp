#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "gnmr/common.hpp"

namespace gnmr {

constexpr double kNoTimestamp = -std::numeric_limits<double>::infinity();

// Rating-to-behavior partition: r <= dislike_max -> dislike,
// dislike_max < r < like_min -> neutral, r >= like_min -> like.
struct RatingPartition {
    double dislike_max = 2.0;
    double like_min = 4.0;
    std::size_t dislike_index = 0;
    std::size_t neutral_index = 1;
    std::size_t like_index = 2;
};

struct BehaviorSchema {
    std::vector<std::string> names;
    std::size_t target_index = 0;
    std::optional<RatingPartition> rating_partition;

    std::size_t behavior_count() const { return names.size(); }
    const std::string& target_name() const { return names.at(target_index); }

    std::optional<std::size_t> index_of(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return i;
        return std::nullopt;
    }

    void validate() const {
        if (names.empty() || names.size() > 16)
            throw config_error("behavior schema must name between 1 and 16 behaviors");
        for (std::size_t i = 0; i < names.size(); ++i)
            for (std::size_t j = i + 1; j < names.size(); ++j)
                if (names[i] == names[j])
                    throw config_error("duplicate behavior name '" + names[i] + "'");
        if (target_index >= names.size()) throw config_error("target behavior index out of range");
        if (rating_partition) {
            const auto& rp = *rating_partition;
            if (rp.dislike_index >= names.size() || rp.neutral_index >= names.size() ||
                rp.like_index >= names.size())
                throw config_error("rating partition names a behavior outside the schema");
            if (!(rp.dislike_max < rp.like_min))
                throw config_error("rating thresholds must satisfy dislike_max < like_min");
        }
    }

    // the paper's MovieLens/Yelp mapping: {dislike, neutral, like}, target = like
    static BehaviorSchema rating_default() {
        BehaviorSchema s;
        s.names = {"dislike", "neutral", "like"};
        s.target_index = 2;
        s.rating_partition = RatingPartition{};
        return s;
    }
};

inline std::size_t map_rating_to_behavior(const BehaviorSchema& schema, double rating) {
    if (!std::isfinite(rating)) throw data_error("non-finite rating");
    if (!schema.rating_partition)
        throw config_error("schema has no rating partition but a rating-mapped event was seen");
    const auto& rp = *schema.rating_partition;
    if (rating <= rp.dislike_max) return rp.dislike_index;
    if (rating >= rp.like_min) return rp.like_index;
    return rp.neutral_index;
}

struct Event {
    std::uint32_t user = 0;
    std::uint32_t item = 0;
    std::uint16_t behavior = 0;
    double time = kNoTimestamp;

    friend bool operator<(const Event& a, const Event& b) {
        return std::tie(a.user, a.item, a.behavior) < std::tie(b.user, b.item, b.behavior);
    }
    friend bool operator==(const Event& a, const Event& b) {
        return a.user == b.user && a.item == b.item && a.behavior == b.behavior;
    }
};

// Sparse multi-behavior interaction tensor: events are the x^k_{i,j}=1 entries,
// sorted by (user, item, behavior) and unique.
struct InteractionTensor {
    std::size_t user_count = 0;
    std::size_t item_count = 0;
    std::size_t behavior_count = 0;
    std::vector<Event> events;
    bool has_timestamps = false;

    void canonicalize() {
        std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
            if (a == b) return a.time < b.time;
            return a < b;
        });
        // duplicates collapse to one event carrying the latest timestamp
        std::vector<Event> out;
        out.reserve(events.size());
        for (const Event& e : events) {
            if (!out.empty() && out.back() == e)
                out.back().time = std::max(out.back().time, e.time);
            else
                out.push_back(e);
        }
        events = std::move(out);
        has_timestamps = false;
        for (const Event& e : events)
            if (e.time != kNoTimestamp) has_timestamps = true;
    }

    void validate() const {
        for (std::size_t i = 0; i < events.size(); ++i) {
            const Event& e = events[i];
            if (e.user >= user_count || e.item >= item_count || e.behavior >= behavior_count)
                throw data_error("event index out of range");
            if (i > 0 && !(events[i - 1] < e))
                throw data_error("events are not sorted and unique");
        }
    }

    std::vector<std::vector<std::uint32_t>> per_user_items(std::size_t behavior) const {
        std::vector<std::vector<std::uint32_t>> out(user_count);
        for (const Event& e : events)
            if (e.behavior == behavior) out[e.user].push_back(e.item);
        return out;
    }

    std::vector<std::vector<std::uint32_t>> per_item_users(std::size_t behavior) const {
        std::vector<std::vector<std::uint32_t>> out(item_count);
        for (const Event& e : events)
            if (e.behavior == behavior) out[e.item].push_back(e.user);
        return out;
    }

    std::vector<std::size_t> events_per_behavior() const {
        std::vector<std::size_t> out(behavior_count, 0);
        for (const Event& e : events) out[e.behavior] += 1;
        return out;
    }

    double density() const {
        const double cells = static_cast<double>(user_count) * static_cast<double>(item_count) *
                             static_cast<double>(behavior_count);
        return cells > 0 ? static_cast<double>(events.size()) / cells : 0.0;
    }
};

struct IdMaps {
    std::vector<std::string> users;  // compact id -> raw id
    std::vector<std::string> items;

    nlohmann::json to_json() const { return {{"users", users}, {"items", items}}; }
};

struct LoadResult {
    InteractionTensor tensor;
    IdMaps ids;
    BehaviorSchema schema;
};

// Event file: UTF-8 TSV `user<TAB>item<TAB>behavior[<TAB>timestamp[<TAB>rating]]`.
// `behavior` may be `*` to invoke the schema's rating partition (rating column
// required); `#` starts a comment line.
inline LoadResult load_events(std::istream& in, BehaviorSchema schema) {
    schema.validate();
    std::unordered_map<std::string, std::uint32_t> umap, imap;
    IdMaps ids;
    InteractionTensor x;
    x.behavior_count = schema.behavior_count();

    auto intern = [](std::unordered_map<std::string, std::uint32_t>& m,
                     std::vector<std::string>& names, const std::string& raw) {
        auto [it, fresh] = m.try_emplace(raw, static_cast<std::uint32_t>(names.size()));
        if (fresh) names.push_back(raw);
        return it->second;
    };

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;

        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const std::size_t tab = line.find('\t', start);
            fields.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        auto fail = [&](const std::string& why) {
            throw data_error("line " + std::to_string(lineno) + ": " + why);
        };
        if (fields.size() < 3 || fields.size() > 5) fail("expected 3 to 5 tab-separated fields");
        if (fields[0].empty() || fields[1].empty()) fail("empty user or item id");

        Event e;
        e.user = intern(umap, ids.users, fields[0]);
        e.item = intern(imap, ids.items, fields[1]);

        if (fields.size() >= 4 && !fields[3].empty()) {
            try {
                e.time = std::stod(fields[3]);
            } catch (const std::exception&) {
                fail("bad timestamp '" + fields[3] + "'");
            }
            if (!std::isfinite(e.time)) fail("non-finite timestamp");
        }

        if (fields[2] == "*") {
            if (fields.size() < 5 || fields[4].empty()) fail("rating column required when behavior is '*'");
            double rating = 0.0;
            try {
                rating = std::stod(fields[4]);
            } catch (const std::exception&) {
                fail("bad rating '" + fields[4] + "'");
            }
            try {
                e.behavior = static_cast<std::uint16_t>(map_rating_to_behavior(schema, rating));
            } catch (const data_error& err) {
                fail(err.what());
            }
        } else {
            const auto k = schema.index_of(fields[2]);
            if (!k) fail("unknown behavior name '" + fields[2] + "'");
            e.behavior = static_cast<std::uint16_t>(*k);
        }
        x.events.push_back(e);
    }
    if (x.events.empty()) throw data_error("event file contains no events");

    x.user_count = ids.users.size();
    x.item_count = ids.items.size();
    x.canonicalize();
    x.validate();
    return LoadResult{std::move(x), std::move(ids), std::move(schema)};
}

inline LoadResult load_events(const std::string& path, BehaviorSchema schema) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open event file '" + path + "'");
    return load_events(in, std::move(schema));
}

// canonical form: sorted, deduplicated, behavior by name, timestamp if known
inline void write_events(std::ostream& out, const InteractionTensor& x, const IdMaps& ids,
                         const BehaviorSchema& schema) {
    for (const Event& e : x.events) {
        out << ids.users.at(e.user) << '\t' << ids.items.at(e.item) << '\t'
            << schema.names.at(e.behavior);
        if (e.time != kNoTimestamp) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.17g", e.time);
            out << '\t' << buf;
        }
        out << '\n';
    }
}

inline void write_events(const std::string& path, const InteractionTensor& x, const IdMaps& ids,
                         const BehaviorSchema& schema) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot open '" + path + "' for writing");
    write_events(out, x, ids, schema);
}

// ---------------------------------------------------------------------------
// Leave-one-out split with frozen 99-negative candidate sets.
// ---------------------------------------------------------------------------

constexpr std::size_t kEvalNegatives = 99;

struct HeldOut {
    std::uint32_t user = 0;
    std::uint32_t positive = 0;
    std::vector<std::uint32_t> negatives;  // exactly kEvalNegatives, frozen
};

struct Split {
    InteractionTensor train;
    std::vector<HeldOut> test;
    std::vector<HeldOut> validation;  // empty unless requested
    std::size_t target_behavior = 0;
    std::size_t excluded_users = 0;  // too few target events or too few negatives
    std::uint64_t seed = 0;

    nlohmann::json to_json() const {
        auto held = [](const std::vector<HeldOut>& hs) {
            nlohmann::json a = nlohmann::json::array();
            for (const auto& h : hs)
                a.push_back({{"user", h.user}, {"positive", h.positive}, {"negatives", h.negatives}});
            return a;
        };
        return {{"target_behavior", target_behavior},
                {"excluded_users", excluded_users},
                {"seed", seed},
                {"train_events", train.events.size()},
                {"test", held(test)},
                {"validation", held(validation)}};
    }
};

struct SplitOptions {
    bool with_validation = false;
    // when true, items the user touched under auxiliary behaviors are also
    // barred from the negative pool (the default bars only target interactions)
    bool exclude_aux_from_negatives = false;
};

namespace detail {

inline std::vector<std::uint32_t> sample_negatives(std::size_t item_count,
                                                   const std::vector<std::uint32_t>& barred_sorted,
                                                   std::size_t count, Rng& rng) {
    std::vector<std::uint32_t> out;
    out.reserve(count);
    while (out.size() < count) {
        const auto cand = static_cast<std::uint32_t>(rng.uniform_index(item_count));
        if (std::binary_search(barred_sorted.begin(), barred_sorted.end(), cand)) continue;
        if (std::find(out.begin(), out.end(), cand) != out.end()) continue;
        out.push_back(cand);
    }
    return out;
}

}  // namespace detail

inline Split leave_one_out_split(const InteractionTensor& x, std::size_t target_behavior,
                                 std::uint64_t seed, SplitOptions opts = {}) {
    if (target_behavior >= x.behavior_count) throw config_error("target behavior out of range");
    x.validate();

    const auto user_targets = x.per_user_items(target_behavior);
    auto user_all = opts.exclude_aux_from_negatives
                        ? std::vector<std::vector<std::uint32_t>>(x.user_count)
                        : std::vector<std::vector<std::uint32_t>>{};
    if (opts.exclude_aux_from_negatives) {
        for (const Event& e : x.events) user_all[e.user].push_back(e.item);
        for (auto& v : user_all) {
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
        }
    }

    Split split;
    split.seed = seed;
    split.target_behavior = target_behavior;

    // pick held-out events per user: latest by timestamp when present, else seeded
    std::vector<std::int64_t> test_pick(x.user_count, -1), val_pick(x.user_count, -1);
    for (std::uint32_t u = 0; u < x.user_count; ++u) {
        const auto& items = user_targets[u];
        if (items.size() < 2) continue;  // nothing to hold out
        std::vector<std::uint32_t> barred = items;
        std::sort(barred.begin(), barred.end());
        const std::size_t pool = x.item_count - barred.size();
        if (pool < kEvalNegatives) {
            split.excluded_users += 1;
            continue;
        }

        std::vector<std::pair<double, std::uint32_t>> ranked;  // (time, item)
        for (std::uint32_t it : items) {
            double tstamp = kNoTimestamp;
            if (x.has_timestamps) {
                const Event probe{u, it, static_cast<std::uint16_t>(target_behavior), 0.0};
                const auto pos = std::lower_bound(x.events.begin(), x.events.end(), probe);
                tstamp = pos->time;
            }
            ranked.push_back({tstamp, it});
        }
        Rng rng(splitmix64(derive_seed(seed, "holdout") + u));
        std::size_t pick;
        if (x.has_timestamps) {
            pick = 0;
            for (std::size_t i = 1; i < ranked.size(); ++i)
                if (ranked[i] > ranked[pick]) pick = i;
        } else {
            pick = rng.uniform_index(ranked.size());
        }
        test_pick[u] = ranked[pick].second;

        if (opts.with_validation && items.size() >= 3) {
            std::size_t vpick = pick;
            if (x.has_timestamps) {
                // second-latest
                std::size_t best = ranked.size();
                for (std::size_t i = 0; i < ranked.size(); ++i) {
                    if (i == pick) continue;
                    if (best == ranked.size() || ranked[i] > ranked[best]) best = i;
                }
                vpick = best;
            } else {
                while (vpick == pick) vpick = rng.uniform_index(ranked.size());
            }
            val_pick[u] = ranked[vpick].second;
        }

        const auto& neg_barred = opts.exclude_aux_from_negatives ? user_all[u] : barred;
        Rng neg_rng(splitmix64(derive_seed(seed, "negatives") + u));
        HeldOut test_h{u, static_cast<std::uint32_t>(test_pick[u]),
                       detail::sample_negatives(x.item_count, neg_barred, kEvalNegatives, neg_rng)};
        split.test.push_back(std::move(test_h));
        if (val_pick[u] >= 0) {
            HeldOut val_h{u, static_cast<std::uint32_t>(val_pick[u]),
                          detail::sample_negatives(x.item_count, neg_barred, kEvalNegatives, neg_rng)};
            split.validation.push_back(std::move(val_h));
        }
    }

    split.train.user_count = x.user_count;
    split.train.item_count = x.item_count;
    split.train.behavior_count = x.behavior_count;
    split.train.has_timestamps = x.has_timestamps;
    for (const Event& e : x.events) {
        const bool held = e.behavior == target_behavior &&
                          (test_pick[e.user] == e.item || val_pick[e.user] == e.item);
        if (!held) split.train.events.push_back(e);
    }
    split.train.validate();
    return split;
}

// ---------------------------------------------------------------------------
// Synthetic data: planted low-rank preferences with tunable auxiliary-target
// correlation.
// ---------------------------------------------------------------------------

struct SynthSpec {
    std::size_t users = 200;
    std::size_t items = 150;
    std::size_t behaviors = 3;  // last one is the target
    std::size_t latent_dim = 8;
    double noise = 0.0;  // stddev of the perturbation on planted scores
    double rho = 0.5;    // probability an auxiliary event lands in the user's preferred pool
    std::size_t target_events_per_user = 6;
    std::size_t aux_events_per_user = 10;

    void validate() const {
        if (users == 0 || items == 0 || behaviors == 0 || latent_dim == 0)
            throw config_error("synth extents must be positive");
        if (rho < 0.0 || rho > 1.0) throw config_error("rho must lie in [0,1]");
        if (noise < 0.0) throw config_error("noise must be nonnegative");
        if (target_events_per_user == 0 || target_events_per_user > items)
            throw config_error("infeasible target density: need 1 <= events/user <= items");
        if (aux_events_per_user > items)
            throw config_error("infeasible auxiliary density: events/user exceeds item count");
    }
};

struct SynthResult {
    InteractionTensor tensor;
    BehaviorSchema schema;
    double density = 0.0;
    double aux_target_correlation = 0.0;  // Pearson phi over all (user,item) cells
};

inline SynthResult synth_generate(const SynthSpec& spec, std::uint64_t seed) {
    spec.validate();
    const std::size_t I = spec.users, J = spec.items, K = spec.behaviors;
    const std::size_t target_k = K - 1;

    Rng latent_rng(derive_seed(seed, "synth-latent"));
    auto sphere_rows = [&](std::size_t n, std::size_t d) {
        std::vector<std::vector<double>> rows(n, std::vector<double>(d));
        for (auto& r : rows) {
            double norm2 = 0.0;
            for (double& v : r) {
                v = latent_rng.gaussian();
                norm2 += v * v;
            }
            const double inv = 1.0 / std::sqrt(std::max(norm2, 1e-12));
            for (double& v : r) v *= inv;
        }
        return rows;
    };
    const auto P = sphere_rows(I, spec.latent_dim);
    const auto Q = sphere_rows(J, spec.latent_dim);

    InteractionTensor x;
    x.user_count = I;
    x.item_count = J;
    x.behavior_count = K;

    std::vector<char> is_target(I * J, 0), is_aux(I * J, 0);

    Rng noise_rng(derive_seed(seed, "synth-noise"));
    Rng aux_rng(derive_seed(seed, "synth-aux"));
    const std::size_t pool_size = std::min(J, 2 * spec.target_events_per_user);

    for (std::uint32_t u = 0; u < I; ++u) {
        std::vector<std::pair<double, std::uint32_t>> planted(J), observed(J);
        for (std::uint32_t j = 0; j < J; ++j) {
            double s = 0.0;
            for (std::size_t t = 0; t < spec.latent_dim; ++t) s += P[u][t] * Q[j][t];
            planted[j] = {s, j};
            observed[j] = {s + spec.noise * noise_rng.gaussian(), j};
        }
        auto by_score_desc = [](const auto& a, const auto& b) {
            return a.first != b.first ? a.first > b.first : a.second < b.second;
        };
        std::sort(planted.begin(), planted.end(), by_score_desc);
        std::sort(observed.begin(), observed.end(), by_score_desc);

        for (std::size_t t = 0; t < spec.target_events_per_user; ++t) {
            const std::uint32_t j = observed[t].second;
            x.events.push_back({u, j, static_cast<std::uint16_t>(target_k)});
            is_target[std::size_t{u} * J + j] = 1;
        }

        std::vector<std::uint32_t> pool(pool_size);
        for (std::size_t t = 0; t < pool_size; ++t) pool[t] = planted[t].second;

        for (std::size_t k = 0; k + 1 < K; ++k) {
            std::vector<char> seen(J, 0);
            std::size_t placed = 0, attempts = 0;
            while (placed < spec.aux_events_per_user && attempts < 60 * spec.aux_events_per_user) {
                ++attempts;
                const bool from_pool = aux_rng.uniform() < spec.rho;
                const std::uint32_t j = from_pool
                                            ? pool[aux_rng.uniform_index(pool.size())]
                                            : static_cast<std::uint32_t>(aux_rng.uniform_index(J));
                if (seen[j]) continue;
                seen[j] = 1;
                x.events.push_back({u, j, static_cast<std::uint16_t>(k)});
                is_aux[std::size_t{u} * J + j] = 1;
                ++placed;
            }
        }
    }

    x.canonicalize();
    x.validate();

    SynthResult out;
    out.density = x.density();
    // Pearson correlation between the aux and target indicators over all cells
    if (K > 1) {
        const double n = static_cast<double>(I) * static_cast<double>(J);
        double sa = 0, st = 0, sat = 0;
        for (std::size_t c = 0; c < is_target.size(); ++c) {
            sa += is_aux[c];
            st += is_target[c];
            sat += is_aux[c] && is_target[c];
        }
        const double ma = sa / n, mt = st / n;
        const double cov = sat / n - ma * mt;
        const double denom = std::sqrt(ma * (1 - ma) * mt * (1 - mt));
        out.aux_target_correlation = denom > 0 ? cov / denom : 0.0;
    }
    out.tensor = std::move(x);
    out.schema.names.clear();
    for (std::size_t k = 0; k + 1 < K; ++k) out.schema.names.push_back("aux" + std::to_string(k + 1));
    out.schema.names.push_back("target");
    out.schema.target_index = K - 1;
    out.schema.validate();
    return out;
}

}  // namespace gnmr
