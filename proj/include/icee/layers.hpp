#pragma once

#include <cstddef>

#include "icee/tensor.hpp"

namespace icee {

struct ConvSpec {
    std::size_t stride = 1;
    std::size_t pad = 0;  // 0 (valid) or 1
};

// input C_in x H x W, kernels C_out x C_in x k x k, bias C_out.
// Output C_out x H' x W' with H' = (H - k + 2 pad) / stride + 1.
Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias, ConvSpec spec);

struct Conv2dGrads {
    Tensor input;
    Tensor kernels;
    Tensor bias;
};

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_output,
                            ConvSpec spec);

Tensor relu(const Tensor& x);
// grad_output masked by (pre_activation > 0).
Tensor relu_backward(const Tensor& pre_activation, const Tensor& grad_output);

// y = W x + b for W (out x in), x (in), b (out).
Tensor affine(const Tensor& weights, const Tensor& bias, const Tensor& x);

struct AffineGrads {
    Tensor input;
    Tensor weights;
    Tensor bias;
};

AffineGrads affine_backward(const Tensor& weights, const Tensor& x, const Tensor& grad_output);

}  // namespace icee
