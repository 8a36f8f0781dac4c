#include "mapden/adam.hpp"

#include <cmath>

namespace mapden::ad {

void adam_step(const std::vector<Tensor*>& params, AdamState& state, const AdamConfig& cfg) {
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            state.m[i].assign(params[i]->data.size(), 0.0);
            state.v[i].assign(params[i]->data.size(), 0.0);
        }
    }
    if (state.m.size() != params.size()) {
        throw ShapeError("adam state has " + std::to_string(state.m.size()) +
                         " moment arrays for " + std::to_string(params.size()) + " params");
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));

    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        if (!p.requires_grad || p.grad.size() != p.data.size()) {
            throw ShapeError("param " + std::to_string(i) + " has no gradient of shape " +
                             shape_str(p.shape));
        }
        if (state.m[i].size() != p.data.size()) {
            throw ShapeError("adam moment size " + std::to_string(state.m[i].size()) +
                             " vs param size " + std::to_string(p.data.size()));
        }
        double* m = state.m[i].data();
        double* v = state.v[i].data();
        for (std::size_t j = 0; j < p.data.size(); ++j) {
            const double g = p.grad[j];
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g;
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g;
            const double m_hat = m[j] / bc1;
            const double v_hat = v[j] / bc2;
            p.data[j] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
        }
    }
}

} // namespace mapden::ad
