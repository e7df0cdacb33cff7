#pragma once

#include <cstdint>

#include "icee/tensor.hpp"

namespace icee {

struct AdamHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Moments for one parameter tensor.
struct AdamState {
    AdamState() = default;
    AdamState(const Shape& shape, AdamHyper hyper) : m(shape), v(shape), hyper(hyper) {}

    Tensor m;
    Tensor v;
    std::uint64_t step = 0;
    AdamHyper hyper;
};

// Bias-corrected Adam update applied to params in place.
void adam_step(Tensor& params, const Tensor& grads, AdamState& state);

}  // namespace icee
