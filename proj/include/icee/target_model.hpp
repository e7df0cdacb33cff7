#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "icee/rng.hpp"
#include "icee/synthdata.hpp"
#include "icee/tensor.hpp"

namespace icee::target {

inline constexpr std::size_t kPositions = 16;  // T: 4 x 4 final feature map
inline constexpr std::size_t kFeatures = 64;   // n: channels of the last block
inline constexpr std::size_t kClasses = 4;
inline constexpr std::size_t kGrid = 4;

// Three stride-2 pad-1 3x3 conv blocks (3 -> 16 -> 32 -> 64) with ReLU,
// then global average pooling and a 64 -> 4 linear head.
struct ConvNetParams {
    Tensor conv1_w, conv1_b;
    Tensor conv2_w, conv2_b;
    Tensor conv3_w, conv3_b;
    Tensor head_w, head_b;

    friend bool operator==(const ConvNetParams&, const ConvNetParams&) = default;
};

struct Head {
    Tensor weights;  // 4 x 64
    Tensor bias;     // 4
};

// He-normal initialization from the given stream.
ConvNetParams init_params(RngStream& rng);
Head head_of(const ConvNetParams& params);

// Intermediate values kept for backpropagation and GradCAM.
struct ForwardCache {
    Tensor input;
    Tensor pre1, act1, pre2, act2, pre3, act3;  // act3: 64 x 4 x 4
    Tensor stack;                               // T x n, position-major
    Tensor logits;
};

struct ForwardResult {
    Tensor stack;   // T x n
    Tensor logits;  // 4
};

ForwardCache forward_cached(const ConvNetParams& params, const Tensor& image);
ForwardResult forward(const ConvNetParams& params, const Tensor& image);

// logits = W * mean_over_positions(stack) + b
Tensor head_apply(const Tensor& stack, const Head& head);
Tensor head_apply(const Tensor& stack, const ConvNetParams& params);

// Mean of the stack over positions (the pooled latent feature).
Tensor pool_positions(const Tensor& stack);

// 64 x 4 x 4 feature map <-> T x n stack.
Tensor stack_from_feature_map(const Tensor& fmap);
Tensor feature_map_from_stack(const Tensor& stack);

// d loss / d params given d loss / d logits.
ConvNetParams backward(const ConvNetParams& params, const ForwardCache& cache, const Tensor& grad_logits);
// d (grad_logits . logits) / d act3, the final feature map.
Tensor feature_map_gradient(const ConvNetParams& params, const Tensor& grad_logits);

std::size_t predict(const ConvNetParams& params, const Tensor& image);

struct TrainHyper {
    double lr = 1e-3;
    std::size_t epochs = 10;
    std::size_t batch = 32;
};

struct TrainedTarget {
    ConvNetParams params;
    std::vector<double> epoch_losses;
    double test_accuracy = 0.0;
    std::uint64_t seed = 0;
    TrainHyper hyper;
};

TrainedTarget train_target(const synth::DatasetSplit& split, const TrainHyper& hyper, std::uint64_t seed);

double accuracy(const ConvNetParams& params, std::span<const synth::LabeledImage> images);

void save_target(const std::filesystem::path& dir, const TrainedTarget& model);
TrainedTarget load_target(const std::filesystem::path& dir);

}  // namespace icee::target
