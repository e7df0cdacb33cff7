#include "icee/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace icee {

std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) throw InvalidInput("softmax: empty logits");
    double peak = logits[0];
    for (double z : logits) {
        if (!std::isfinite(z)) throw InvalidInput("softmax: non-finite logit");
        peak = std::max(peak, z);
    }
    std::vector<double> out(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - peak);
        total += out[i];
    }
    for (double& p : out) p /= total;
    return out;
}

Tensor softmax(const Tensor& logits) {
    if (logits.rank() != 1) throw InvalidInput("softmax: expected a 1-D tensor");
    return Tensor(logits.shape(), softmax(logits.values()));
}

LossAndGrad cross_entropy_with_grad(std::span<const double> logits, std::size_t label) {
    if (label >= logits.size())
        throw InvalidInput("cross_entropy: label " + std::to_string(label) + " out of range");
    LossAndGrad out;
    out.grad = softmax(logits);
    // log-sum-exp form keeps the loss accurate when p[label] underflows.
    const double peak = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (double z : logits) total += std::exp(z - peak);
    out.loss = std::log(total) + peak - logits[label];
    out.grad[label] -= 1.0;
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

Normalized l2_normalize(std::span<const double> v) {
    Normalized out{std::vector<double>(v.size(), 0.0), false};
    const double norm = l2_norm(v);
    if (!(norm > kNormEpsilon)) {
        out.degenerate = true;
        return out;
    }
    for (std::size_t i = 0; i < v.size(); ++i) out.v[i] = v[i] / norm;
    return out;
}

std::size_t argmax(std::span<const double> v) {
    if (v.empty()) throw InvalidInput("argmax: empty input");
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

}  // namespace icee
