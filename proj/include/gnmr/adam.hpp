#pragma once

#include <cmath>
#include <map>
#include <string>

#include "gnmr/tensor.hpp"

namespace gnmr::nd {

using ParamMap = std::map<std::string, Tensor>;
using GradMap = std::map<std::string, Tensor>;

// Adam with bias correction and multiplicative per-epoch learning-rate decay.
struct AdamState {
    double base_lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double decay_rate = 0.96;

    std::size_t step = 0;   // update counter (bias correction)
    std::size_t epoch = 0;  // drives lr decay

    std::map<std::string, Tensor> m1, m2;

    double effective_lr() const { return base_lr * std::pow(decay_rate, static_cast<double>(epoch)); }
};

inline void adam_step(ParamMap& params, const GradMap& grads, AdamState& state) {
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double lr = state.effective_lr();
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);

    for (auto& [name, p] : params) {
        auto git = grads.find(name);
        if (git == grads.end()) throw config_error("adam_step: missing gradient for '" + name + "'");
        const Tensor& g = git->second;
        if (!g.same_shape(p))
            throw shape_error("adam_step: gradient shape " + shape_str(g.shape()) +
                              " does not match parameter '" + name + "' " + shape_str(p.shape()));
        if (!g.all_finite()) throw numeric_error("adam_step: non-finite gradient for '" + name + "'");

        Tensor& m = state.m1.try_emplace(name, Tensor::zeros_like(p)).first->second;
        Tensor& v = state.m2.try_emplace(name, Tensor::zeros_like(p)).first->second;
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            p[i] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
        }
    }
}

}  // namespace gnmr::nd
