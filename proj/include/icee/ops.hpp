#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "icee/tensor.hpp"

namespace icee {

// Max-subtracted softmax. Throws InvalidInput on empty or non-finite logits.
std::vector<double> softmax(std::span<const double> logits);
Tensor softmax(const Tensor& logits);

struct LossAndGrad {
    double loss = 0.0;
    std::vector<double> grad;  // d loss / d logits
};

// -log softmax(logits)[label] with gradient softmax - onehot.
LossAndGrad cross_entropy_with_grad(std::span<const double> logits, std::size_t label);

struct Normalized {
    std::vector<double> v;
    bool degenerate = false;
};

inline constexpr double kNormEpsilon = 1e-12;

// Unit vector, or the zero vector flagged degenerate when the norm is <= 1e-12.
Normalized l2_normalize(std::span<const double> v);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

// Index of the largest entry; ties go to the lower index.
std::size_t argmax(std::span<const double> v);

}  // namespace icee
