#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "icee/target_model.hpp"
#include "icee/tensor.hpp"

namespace icee::explain {

enum class SaliencyNorm { max, min_max, sum };

SaliencyNorm parse_saliency_norm(std::string_view name);
std::string_view to_string(SaliencyNorm norm);

struct Saliency {
    Tensor map;  // H x W, entries in [0, 1]
    std::uint64_t image_id = 0;
    std::size_t explained_class = 0;
    bool degenerate = false;  // map is identically zero
};

inline constexpr double kDegenerateThreshold = 1e-12;

// Half-pixel-center bilinear resize (edge samples clamp to the border).
Tensor bilinear_resize(const Tensor& map, std::size_t out_h, std::size_t out_w);

// GradCAM from a K x h x w feature map and the gradient of the explained
// logit with respect to it: alpha_k = spatial mean of the gradient,
// L = ReLU(sum_k alpha_k A_k), resized to out_h x out_w, then normalized.
Saliency gradcam_from_maps(const Tensor& feature_map, const Tensor& gradient, std::size_t out_h, std::size_t out_w,
                           SaliencyNorm norm = SaliencyNorm::max);

Saliency gradcam(const target::ConvNetParams& params, const Tensor& image, std::size_t cls,
                 SaliencyNorm norm = SaliencyNorm::max);

// out[c, i, j] = image[c, i, j] * saliency[i, j]
Tensor apply_mask(const Tensor& image, const Tensor& saliency);

// <dir>/manifest.json indexes one tensor file per (image id, class).
void save_saliency_cache(const std::filesystem::path& dir, const std::vector<Saliency>& maps);
std::vector<Saliency> load_saliency_cache(const std::filesystem::path& dir);

}  // namespace icee::explain
