#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "gnmr/adam.hpp"
#include "gnmr/autodiff.hpp"
#include "gnmr/interactions.hpp"

namespace gnmr {

enum class InitMode { pretrain, random };

struct PretrainConfig {
    std::size_t epochs = 300;
    double lr = 1e-2;
};

struct PretrainResult {
    nd::Tensor embeddings;           // rows x d, requires_grad set
    std::vector<double> loss_curve;  // mean squared reconstruction error per epoch
};

namespace detail {

// multi-hot interaction profiles: one row per node, K x other-side blocks
inline nd::Tensor interaction_matrix(const InteractionTensor& x, bool user_side) {
    const std::size_t rows = user_side ? x.user_count : x.item_count;
    const std::size_t block = user_side ? x.item_count : x.user_count;
    nd::Tensor m({rows, x.behavior_count * block});
    for (const Event& e : x.events) {
        const std::size_t r = user_side ? e.user : e.item;
        const std::size_t c = e.behavior * block + (user_side ? e.item : e.user);
        m.at(r, c) = 1.0;
    }
    return m;
}

}  // namespace detail

// One-hidden-layer autoencoder over multi-hot interaction profiles: ReLU
// encoder of width d, linear decoder, squared-error objective. The encoder
// outputs become the 0-order embeddings. Rows with no interactions fall back
// to Gaussian noise (sigma 0.01).
inline PretrainResult pretrain_side(const InteractionTensor& x, bool user_side, std::size_t d,
                                    std::uint64_t seed, const PretrainConfig& cfg = {}) {
    if (d == 0) throw config_error("embedding dim must be positive");
    const nd::Tensor input = detail::interaction_matrix(x, user_side);
    const std::size_t rows = input.shape()[0], in_dim = input.shape()[1];

    Rng rng(derive_seed(seed, user_side ? "pretrain-user" : "pretrain-item"));
    const double s_enc = std::sqrt(2.0 / static_cast<double>(in_dim + d));
    nd::ParamMap params;
    {
        nd::Tensor we({d, in_dim});
        for (std::size_t i = 0; i < we.size(); ++i) we[i] = s_enc * rng.gaussian();
        we.set_requires_grad(true);
        params.emplace("enc.W", std::move(we));
        params.emplace("enc.b", nd::Tensor({1, d}, 0.0, true));
        nd::Tensor wd({d, in_dim});
        for (std::size_t i = 0; i < wd.size(); ++i) wd[i] = s_enc * rng.gaussian();
        wd.set_requires_grad(true);
        params.emplace("dec.W", std::move(wd));
        params.emplace("dec.b", nd::Tensor({1, in_dim}, 0.0, true));
    }

    nd::AdamState opt;
    opt.base_lr = cfg.lr;
    opt.decay_rate = 1.0;

    PretrainResult result;
    const double inv_n = 1.0 / static_cast<double>(rows * in_dim);
    nd::Tensor hidden_values;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        nd::Tape tape;
        std::map<std::string, nd::Var> pv;
        for (const auto& [name, t] : params) pv.emplace(name, tape.leaf(t));
        nd::Var xin = tape.constant(input);
        nd::Var hidden = nd::relu(nd::add(nd::matmul(xin, nd::transpose(pv.at("enc.W"))),
                                          nd::tile_rows(pv.at("enc.b"), rows)));
        nd::Var recon = nd::add(nd::matmul(hidden, pv.at("dec.W")),
                                nd::tile_rows(pv.at("dec.b"), rows));
        nd::Var diff = nd::sub(recon, xin);
        nd::Var loss = nd::scale(nd::sum_all(nd::mul(diff, diff)), inv_n);
        result.loss_curve.push_back(tape.value(loss).scalar_value());
        hidden_values = tape.value(hidden);

        auto grads = tape.backward(loss);
        nd::GradMap gm;
        for (const auto& [name, var] : pv) gm.emplace(name, grads.at(var));
        nd::adam_step(params, gm, opt);
    }

    // after the last update, encode once more so embeddings match final weights
    {
        nd::Tape tape;
        nd::Tensor we = params.at("enc.W");
        we.set_requires_grad(false);
        nd::Var hidden =
            nd::relu(nd::add(nd::matmul(tape.constant(input), nd::transpose(tape.leaf(we))),
                             nd::tile_rows(tape.constant(params.at("enc.b")), rows)));
        hidden_values = tape.value(hidden);
    }

    hidden_values.set_requires_grad(true);
    for (std::size_t r = 0; r < rows; ++r) {
        bool any = false;
        for (std::size_t c = 0; c < in_dim && !any; ++c) any = input.at(r, c) != 0.0;
        if (!any)
            for (std::size_t c = 0; c < d; ++c) hidden_values.at(r, c) = 0.01 * rng.gaussian();
    }
    result.embeddings = std::move(hidden_values);
    return result;
}

// Gaussian fallback (sigma 0.01), also used directly as `random` init mode.
inline nd::Tensor random_embeddings(std::size_t rows, std::size_t d, std::uint64_t seed,
                                    const char* tag) {
    Rng rng(derive_seed(seed, tag));
    nd::Tensor t({rows, d});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = 0.01 * rng.gaussian();
    t.set_requires_grad(true);
    return t;
}

// 0-order embeddings for both sides
inline std::pair<nd::Tensor, nd::Tensor> pretrain_init(const InteractionTensor& x, std::size_t d,
                                                       std::uint64_t seed, InitMode mode,
                                                       const PretrainConfig& cfg = {}) {
    if (mode == InitMode::random)
        return {random_embeddings(x.user_count, d, seed, "init-user"),
                random_embeddings(x.item_count, d, seed, "init-item")};
    return {pretrain_side(x, true, d, seed, cfg).embeddings,
            pretrain_side(x, false, d, seed, cfg).embeddings};
}

}  // namespace gnmr
