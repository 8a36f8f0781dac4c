#ifndef MAPDEN_ADAM_HPP
#define MAPDEN_ADAM_HPP

#include <cstddef>
#include <vector>

#include "mapden/tensor.hpp"

namespace mapden::ad {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// First/second moment estimates, one pair per parameter tensor.
struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    std::size_t step = 0;
};

/// Bias-corrected Adam update applied in place to params[i]->data from
/// params[i]->grad. State is allocated on first use and shape-checked after.
void adam_step(const std::vector<Tensor*>& params, AdamState& state, const AdamConfig& cfg);

} // namespace mapden::ad

#endif
