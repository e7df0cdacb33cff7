#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "icee/tensor.hpp"

namespace icee {

// Central finite-difference gradient of a scalar function at x.
inline Tensor finite_difference(const std::function<double(const Tensor&)>& f, const Tensor& x,
                                double h = 1e-5) {
    Tensor grad(x.shape());
    Tensor probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = probe[i];
        probe[i] = saved + h;
        const double up = f(probe);
        probe[i] = saved - h;
        const double down = f(probe);
        probe[i] = saved;
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

// ||a - b|| / max(||a||, ||b||, floor). The floor keeps near-zero gradients
// from reporting spurious large relative errors.
inline double relative_error(const Tensor& a, const Tensor& b, double floor = 1e-8) {
    require_same_shape(a, b, "relative_error");
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

}  // namespace icee
