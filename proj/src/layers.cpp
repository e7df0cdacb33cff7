#include "icee/layers.hpp"

#include <algorithm>
#include <string>

namespace icee {
namespace {

struct ConvGeometry {
    std::size_t c_in, h, w, c_out, k, h_out, w_out;
};

ConvGeometry check_conv(const Tensor& input, const Tensor& kernels, ConvSpec spec) {
    if (input.rank() != 3) throw InvalidInput("conv2d: input must be C x H x W, got " + shape_string(input.shape()));
    if (kernels.rank() != 4 || kernels.dim(2) != kernels.dim(3))
        throw InvalidInput("conv2d: kernels must be C_out x C_in x k x k, got " + shape_string(kernels.shape()));
    if (kernels.dim(1) != input.dim(0))
        throw InvalidInput("conv2d: kernel channels " + std::to_string(kernels.dim(1)) + " != input channels " +
                           std::to_string(input.dim(0)));
    if (spec.stride == 0) throw InvalidInput("conv2d: stride must be positive");
    if (spec.pad > 1) throw InvalidInput("conv2d: only pad 0 or 1 supported");
    ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), kernels.dim(0), kernels.dim(2), 0, 0};
    if (g.k > g.h || g.k > g.w) throw InvalidInput("conv2d: kernel larger than input");
    g.h_out = (g.h + 2 * spec.pad - g.k) / spec.stride + 1;
    g.w_out = (g.w + 2 * spec.pad - g.k) / spec.stride + 1;
    return g;
}

// Output index range [lo, hi) whose tap at offset `kk` lands inside [0, extent).
std::pair<std::size_t, std::size_t> valid_range(std::size_t kk, std::size_t pad, std::size_t stride,
                                                std::size_t extent, std::size_t n_out) {
    // position = o * stride + kk - pad must satisfy 0 <= position < extent
    std::size_t lo = 0;
    if (kk < pad) lo = (pad - kk + stride - 1) / stride;
    std::size_t hi = 0;
    if (extent + pad > kk) hi = std::min(n_out, (extent + pad - kk - 1) / stride + 1);
    return {lo, std::max(lo, hi)};
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias, ConvSpec spec) {
    const auto g = check_conv(input, kernels, spec);
    if (bias.size() != g.c_out) throw InvalidInput("conv2d: bias length != C_out");

    Tensor out({g.c_out, g.h_out, g.w_out});
    const double* in = input.data();
    const double* ker = kernels.data();
    double* o = out.data();
    const std::size_t plane = g.h_out * g.w_out;

    for (std::size_t oc = 0; oc < g.c_out; ++oc) {
        double* op = o + oc * plane;
        std::fill(op, op + plane, bias[oc]);
        for (std::size_t ic = 0; ic < g.c_in; ++ic) {
            const double* ip = in + ic * g.h * g.w;
            for (std::size_t ky = 0; ky < g.k; ++ky) {
                const auto [y0, y1] = valid_range(ky, spec.pad, spec.stride, g.h, g.h_out);
                for (std::size_t kx = 0; kx < g.k; ++kx) {
                    const auto [x0, x1] = valid_range(kx, spec.pad, spec.stride, g.w, g.w_out);
                    const double wv = ker[((oc * g.c_in + ic) * g.k + ky) * g.k + kx];
                    for (std::size_t oy = y0; oy < y1; ++oy) {
                        const double* row = ip + (oy * spec.stride + ky - spec.pad) * g.w;
                        double* orow = op + oy * g.w_out;
                        for (std::size_t ox = x0; ox < x1; ++ox)
                            orow[ox] += wv * row[ox * spec.stride + kx - spec.pad];
                    }
                }
            }
        }
    }
    return out;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_output,
                            ConvSpec spec) {
    const auto g = check_conv(input, kernels, spec);
    if (grad_output.shape() != Shape{g.c_out, g.h_out, g.w_out})
        throw InvalidInput("conv2d_backward: grad_output shape " + shape_string(grad_output.shape()));

    Conv2dGrads grads{Tensor(input.shape()), Tensor(kernels.shape()), Tensor({g.c_out})};
    const double* in = input.data();
    const double* ker = kernels.data();
    const double* go = grad_output.data();
    double* gin = grads.input.data();
    double* gker = grads.kernels.data();
    const std::size_t plane = g.h_out * g.w_out;

    for (std::size_t oc = 0; oc < g.c_out; ++oc) {
        const double* gp = go + oc * plane;
        double sum = 0.0;
        for (std::size_t i = 0; i < plane; ++i) sum += gp[i];
        grads.bias[oc] = sum;
        for (std::size_t ic = 0; ic < g.c_in; ++ic) {
            const double* ip = in + ic * g.h * g.w;
            double* gip = gin + ic * g.h * g.w;
            for (std::size_t ky = 0; ky < g.k; ++ky) {
                const auto [y0, y1] = valid_range(ky, spec.pad, spec.stride, g.h, g.h_out);
                for (std::size_t kx = 0; kx < g.k; ++kx) {
                    const auto [x0, x1] = valid_range(kx, spec.pad, spec.stride, g.w, g.w_out);
                    const std::size_t widx = ((oc * g.c_in + ic) * g.k + ky) * g.k + kx;
                    const double wv = ker[widx];
                    double wgrad = 0.0;
                    for (std::size_t oy = y0; oy < y1; ++oy) {
                        const std::size_t off = (oy * spec.stride + ky - spec.pad) * g.w;
                        const double* row = ip + off;
                        double* grow = gip + off;
                        const double* gorow = gp + oy * g.w_out;
                        for (std::size_t ox = x0; ox < x1; ++ox) {
                            const std::size_t ix = ox * spec.stride + kx - spec.pad;
                            wgrad += gorow[ox] * row[ix];
                            grow[ix] += gorow[ox] * wv;
                        }
                    }
                    gker[widx] += wgrad;
                }
            }
        }
    }
    return grads;
}

Tensor relu(const Tensor& x) {
    Tensor out = x;
    for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
    return out;
}

Tensor relu_backward(const Tensor& pre_activation, const Tensor& grad_output) {
    require_same_shape(pre_activation, grad_output, "relu_backward");
    Tensor out = grad_output;
    for (std::size_t i = 0; i < out.size(); ++i)
        if (!(pre_activation[i] > 0.0)) out[i] = 0.0;
    return out;
}

Tensor affine(const Tensor& weights, const Tensor& bias, const Tensor& x) {
    if (weights.rank() != 2 || weights.dim(1) != x.size() || bias.size() != weights.dim(0))
        throw InvalidInput("affine: W " + shape_string(weights.shape()) + ", x " + shape_string(x.shape()) +
                           ", b " + shape_string(bias.shape()));
    const std::size_t rows = weights.dim(0), cols = weights.dim(1);
    Tensor y({rows});
    for (std::size_t r = 0; r < rows; ++r) {
        double s = bias[r];
        const double* wr = weights.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) s += wr[c] * x[c];
        y[r] = s;
    }
    return y;
}

AffineGrads affine_backward(const Tensor& weights, const Tensor& x, const Tensor& grad_output) {
    if (weights.rank() != 2 || weights.dim(1) != x.size() || grad_output.size() != weights.dim(0))
        throw InvalidInput("affine_backward: shape mismatch");
    const std::size_t rows = weights.dim(0), cols = weights.dim(1);
    AffineGrads g{Tensor({cols}), Tensor(weights.shape()), Tensor({rows})};
    for (std::size_t r = 0; r < rows; ++r) {
        const double gr = grad_output[r];
        g.bias[r] = gr;
        const double* wr = weights.data() + r * cols;
        double* gw = g.weights.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) {
            gw[c] = gr * x[c];
            g.input[c] += gr * wr[c];
        }
    }
    return g;
}

}  // namespace icee
