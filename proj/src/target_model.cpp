#include "icee/target_model.hpp"

#include <cmath>
#include <array>
#include <numeric>
#include <utility>

#include "icee/adam.hpp"
#include "icee/checkpoint.hpp"
#include "icee/layers.hpp"
#include "icee/ops.hpp"

namespace icee::target {
namespace {

constexpr ConvSpec kBlock{2, 1};
// Pixels are centered before the first block.
constexpr double kInputOffset = 0.5;

Tensor he_normal(RngStream& rng, Shape shape, std::size_t fan_in) {
    Tensor t(std::move(shape));
    const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (double& v : t.values()) v = sd * rng.normal();
    return t;
}

// Parameter tensors in a fixed order, for optimizers and serialization.
template <typename P>
auto param_list(P& p) {
    return std::array{&p.conv1_w, &p.conv1_b, &p.conv2_w, &p.conv2_b,
                      &p.conv3_w, &p.conv3_b, &p.head_w,  &p.head_b};
}

constexpr std::array<const char*, 8> kParamNames{"conv1_w", "conv1_b", "conv2_w", "conv2_b",
                                                 "conv3_w", "conv3_b", "head_w",  "head_b"};

ConvNetParams zeros_like(const ConvNetParams& p) {
    ConvNetParams z;
    auto src = param_list(p);
    auto dst = param_list(z);
    for (std::size_t i = 0; i < src.size(); ++i) *dst[i] = Tensor(src[i]->shape());
    return z;
}

void check_image(const Tensor& image) {
    if (image.shape() != Shape{synth::kChannels, synth::kCanvas, synth::kCanvas})
        throw InvalidInput("target: image must be 3x32x32, got " + shape_string(image.shape()));
}

}  // namespace

ConvNetParams init_params(RngStream& rng) {
    ConvNetParams p;
    p.conv1_w = he_normal(rng, {16, 3, 3, 3}, 3 * 9);
    p.conv1_b = Tensor({16});
    p.conv2_w = he_normal(rng, {32, 16, 3, 3}, 16 * 9);
    p.conv2_b = Tensor({32});
    p.conv3_w = he_normal(rng, {64, 32, 3, 3}, 32 * 9);
    p.conv3_b = Tensor({64});
    p.head_w = he_normal(rng, {kClasses, kFeatures}, kFeatures);
    p.head_b = Tensor({kClasses});
    return p;
}

Head head_of(const ConvNetParams& params) { return {params.head_w, params.head_b}; }

Tensor stack_from_feature_map(const Tensor& fmap) {
    if (fmap.shape() != Shape{kFeatures, kGrid, kGrid})
        throw InvalidInput("stack_from_feature_map: expected 64x4x4, got " + shape_string(fmap.shape()));
    Tensor stack({kPositions, kFeatures});
    for (std::size_t k = 0; k < kFeatures; ++k)
        for (std::size_t pos = 0; pos < kPositions; ++pos) stack.at(pos, k) = fmap[k * kPositions + pos];
    return stack;
}

Tensor feature_map_from_stack(const Tensor& stack) {
    if (stack.shape() != Shape{kPositions, kFeatures})
        throw InvalidInput("feature_map_from_stack: expected 16x64, got " + shape_string(stack.shape()));
    Tensor fmap({kFeatures, kGrid, kGrid});
    for (std::size_t k = 0; k < kFeatures; ++k)
        for (std::size_t pos = 0; pos < kPositions; ++pos) fmap[k * kPositions + pos] = stack.at(pos, k);
    return fmap;
}

Tensor pool_positions(const Tensor& stack) {
    if (stack.rank() != 2) throw InvalidInput("pool_positions: stack must be T x n");
    const std::size_t t = stack.dim(0), n = stack.dim(1);
    Tensor mean({n});
    for (std::size_t pos = 0; pos < t; ++pos)
        for (std::size_t k = 0; k < n; ++k) mean[k] += stack.at(pos, k);
    for (double& v : mean.values()) v /= static_cast<double>(t);
    return mean;
}

Tensor head_apply(const Tensor& stack, const Head& head) {
    if (stack.rank() != 2 || stack.dim(1) != head.weights.dim(1))
        throw InvalidInput("head_apply: stack " + shape_string(stack.shape()) + " incompatible with head " +
                           shape_string(head.weights.shape()));
    return affine(head.weights, head.bias, pool_positions(stack));
}

Tensor head_apply(const Tensor& stack, const ConvNetParams& params) {
    if (stack.rank() != 2 || stack.dim(1) != params.head_w.dim(1))
        throw InvalidInput("head_apply: stack " + shape_string(stack.shape()) + " incompatible with head");
    return affine(params.head_w, params.head_b, pool_positions(stack));
}

ForwardCache forward_cached(const ConvNetParams& params, const Tensor& image) {
    check_image(image);
    ForwardCache c;
    c.input = image;
    for (double& v : c.input.values()) v -= kInputOffset;
    c.pre1 = conv2d(c.input, params.conv1_w, params.conv1_b, kBlock);
    c.act1 = relu(c.pre1);
    c.pre2 = conv2d(c.act1, params.conv2_w, params.conv2_b, kBlock);
    c.act2 = relu(c.pre2);
    c.pre3 = conv2d(c.act2, params.conv3_w, params.conv3_b, kBlock);
    c.act3 = relu(c.pre3);
    c.stack = stack_from_feature_map(c.act3);
    c.logits = head_apply(c.stack, params);
    return c;
}

ForwardResult forward(const ConvNetParams& params, const Tensor& image) {
    auto c = forward_cached(params, image);
    return {std::move(c.stack), std::move(c.logits)};
}

Tensor feature_map_gradient(const ConvNetParams& params, const Tensor& grad_logits) {
    if (grad_logits.size() != kClasses) throw InvalidInput("feature_map_gradient: expected 4 logit gradients");
    Tensor fmap({kFeatures, kGrid, kGrid});
    const double inv_t = 1.0 / static_cast<double>(kPositions);
    for (std::size_t k = 0; k < kFeatures; ++k) {
        double g = 0.0;
        for (std::size_t c = 0; c < kClasses; ++c) g += params.head_w.at(c, k) * grad_logits[c];
        for (std::size_t pos = 0; pos < kPositions; ++pos) fmap[k * kPositions + pos] = g * inv_t;
    }
    return fmap;
}

ConvNetParams backward(const ConvNetParams& params, const ForwardCache& cache, const Tensor& grad_logits) {
    ConvNetParams g;
    const auto head = affine_backward(params.head_w, pool_positions(cache.stack), grad_logits);
    g.head_w = head.weights;
    g.head_b = head.bias;

    Tensor d3 = relu_backward(cache.pre3, feature_map_gradient(params, grad_logits));
    auto c3 = conv2d_backward(cache.act2, params.conv3_w, d3, kBlock);
    g.conv3_w = std::move(c3.kernels);
    g.conv3_b = std::move(c3.bias);

    Tensor d2 = relu_backward(cache.pre2, c3.input);
    auto c2 = conv2d_backward(cache.act1, params.conv2_w, d2, kBlock);
    g.conv2_w = std::move(c2.kernels);
    g.conv2_b = std::move(c2.bias);

    Tensor d1 = relu_backward(cache.pre1, c2.input);
    auto c1 = conv2d_backward(cache.input, params.conv1_w, d1, kBlock);
    g.conv1_w = std::move(c1.kernels);
    g.conv1_b = std::move(c1.bias);
    return g;
}

std::size_t predict(const ConvNetParams& params, const Tensor& image) {
    return argmax(forward(params, image).logits.values());
}

double accuracy(const ConvNetParams& params, std::span<const synth::LabeledImage> images) {
    if (images.empty()) throw InvalidInput("accuracy: no images");
    std::size_t hits = 0;
    for (const auto& img : images) hits += predict(params, img.pixels) == img.label;
    return static_cast<double>(hits) / static_cast<double>(images.size());
}

TrainedTarget train_target(const synth::DatasetSplit& split, const TrainHyper& hyper, std::uint64_t seed) {
    if (split.train.empty()) throw InvalidInput("train_target: empty training split");
    if (hyper.batch == 0 || hyper.epochs == 0) throw InvalidInput("train_target: batch and epochs must be positive");

    RngStream root(seed);
    RngStream init_rng = root.substream("target/init");
    RngStream order_rng = root.substream("target/order");

    TrainedTarget out;
    out.seed = seed;
    out.hyper = hyper;
    out.params = init_params(init_rng);

    const AdamHyper adam{hyper.lr};
    std::vector<AdamState> states;
    for (const Tensor* t : param_list(std::as_const(out.params))) states.emplace_back(t->shape(), adam);

    std::vector<std::size_t> order(split.train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        order_rng.shuffle(std::span(order));
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += hyper.batch) {
            const std::size_t end = std::min(order.size(), start + hyper.batch);
            ConvNetParams grad_sum = zeros_like(out.params);
            for (std::size_t b = start; b < end; ++b) {
                const auto& img = split.train[order[b]];
                const auto cache = forward_cached(out.params, img.pixels);
                const auto ce = cross_entropy_with_grad(cache.logits.values(), img.label);
                epoch_loss += ce.loss;
                const auto g = backward(out.params, cache, Tensor({kClasses}, ce.grad));
                auto dst = param_list(grad_sum);
                auto src = param_list(g);
                for (std::size_t i = 0; i < dst.size(); ++i)
                    for (std::size_t j = 0; j < dst[i]->size(); ++j) (*dst[i])[j] += (*src[i])[j];
            }
            const double scale = 1.0 / static_cast<double>(end - start);
            auto params = param_list(out.params);
            auto grads = param_list(grad_sum);
            for (std::size_t i = 0; i < params.size(); ++i) {
                for (double& v : grads[i]->values()) v *= scale;
                adam_step(*params[i], *grads[i], states[i]);
            }
        }
        out.epoch_losses.push_back(epoch_loss / static_cast<double>(order.size()));
    }
    out.test_accuracy = split.test.empty() ? 0.0 : accuracy(out.params, split.test);
    return out;
}

void save_target(const std::filesystem::path& dir, const TrainedTarget& model) {
    nlohmann::json header{{"kind", "target"},
                          {"architecture", "conv3x3s2p1[3-16-32-64]+relu,gap,linear[64-4]"},
                          {"positions", kPositions},
                          {"features", kFeatures},
                          {"seed", model.seed},
                          {"lr", model.hyper.lr},
                          {"epochs", model.hyper.epochs},
                          {"batch", model.hyper.batch},
                          {"epoch_losses", model.epoch_losses},
                          {"test_accuracy", model.test_accuracy}};
    std::vector<std::pair<std::string, const Tensor*>> sections;
    auto params = param_list(model.params);
    for (std::size_t i = 0; i < params.size(); ++i) sections.emplace_back(kParamNames[i], params[i]);
    save_checkpoint(dir, header, sections);
}

TrainedTarget load_target(const std::filesystem::path& dir) {
    const auto ck = load_checkpoint(dir);
    if (ck.header.value("kind", "") != "target") throw IoError(dir.string() + " is not a target checkpoint");
    TrainedTarget m;
    auto params = param_list(m.params);
    for (std::size_t i = 0; i < params.size(); ++i) *params[i] = ck.tensor(kParamNames[i]);
    m.seed = ck.header.at("seed").get<std::uint64_t>();
    m.hyper.lr = ck.header.at("lr").get<double>();
    m.hyper.epochs = ck.header.at("epochs").get<std::size_t>();
    m.hyper.batch = ck.header.at("batch").get<std::size_t>();
    m.epoch_losses = ck.header.at("epoch_losses").get<std::vector<double>>();
    m.test_accuracy = ck.header.at("test_accuracy").get<double>();
    return m;
}

}  // namespace icee::target
