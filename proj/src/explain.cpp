#include "icee/explain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include <json.hpp>

#include "icee/checkpoint.hpp"
#include "icee/tensor_io.hpp"

namespace icee::explain {

SaliencyNorm parse_saliency_norm(std::string_view name) {
    if (name == "max") return SaliencyNorm::max;
    if (name == "min_max") return SaliencyNorm::min_max;
    if (name == "sum") return SaliencyNorm::sum;
    throw InvalidInput("unknown saliency normalization '" + std::string(name) + "'");
}

std::string_view to_string(SaliencyNorm norm) {
    switch (norm) {
        case SaliencyNorm::max: return "max";
        case SaliencyNorm::min_max: return "min_max";
        case SaliencyNorm::sum: return "sum";
    }
    return "max";
}

Tensor bilinear_resize(const Tensor& map, std::size_t out_h, std::size_t out_w) {
    if (map.rank() != 2 || map.empty()) throw InvalidInput("bilinear_resize: expected a non-empty 2-D map");
    const std::size_t in_h = map.dim(0), in_w = map.dim(1);
    const double sy = static_cast<double>(in_h) / static_cast<double>(out_h);
    const double sx = static_cast<double>(in_w) / static_cast<double>(out_w);
    auto coord = [](double src, std::size_t extent) {
        src = std::clamp(src, 0.0, static_cast<double>(extent - 1));
        const auto lo = static_cast<std::size_t>(std::floor(src));
        const std::size_t hi = std::min(lo + 1, extent - 1);
        return std::tuple{lo, hi, src - static_cast<double>(lo)};
    };
    Tensor out({out_h, out_w});
    for (std::size_t i = 0; i < out_h; ++i) {
        const auto [y0, y1, fy] = coord((static_cast<double>(i) + 0.5) * sy - 0.5, in_h);
        for (std::size_t j = 0; j < out_w; ++j) {
            const auto [x0, x1, fx] = coord((static_cast<double>(j) + 0.5) * sx - 0.5, in_w);
            const double top = map.at(y0, x0) * (1.0 - fx) + map.at(y0, x1) * fx;
            const double bottom = map.at(y1, x0) * (1.0 - fx) + map.at(y1, x1) * fx;
            out.at(i, j) = top * (1.0 - fy) + bottom * fy;
        }
    }
    return out;
}

Saliency gradcam_from_maps(const Tensor& feature_map, const Tensor& gradient, std::size_t out_h, std::size_t out_w,
                           SaliencyNorm norm) {
    require_same_shape(feature_map, gradient, "gradcam");
    if (feature_map.rank() != 3) throw InvalidInput("gradcam: feature map must be K x h x w");
    const std::size_t k = feature_map.dim(0), h = feature_map.dim(1), w = feature_map.dim(2);
    const std::size_t plane = h * w;

    Tensor cam({h, w});
    for (std::size_t c = 0; c < k; ++c) {
        double alpha = 0.0;
        for (std::size_t p = 0; p < plane; ++p) alpha += gradient[c * plane + p];
        alpha /= static_cast<double>(plane);
        for (std::size_t p = 0; p < plane; ++p) cam[p] += alpha * feature_map[c * plane + p];
    }
    for (double& v : cam.values()) v = std::max(v, 0.0);

    Saliency s;
    s.map = (out_h == h && out_w == w) ? cam : bilinear_resize(cam, out_h, out_w);
    const auto [lo_it, hi_it] = std::minmax_element(s.map.values().begin(), s.map.values().end());
    const double lo = *lo_it, hi = *hi_it;
    if (!(hi > kDegenerateThreshold)) {
        s.map.fill(0.0);
        s.degenerate = true;
        return s;
    }
    switch (norm) {
        case SaliencyNorm::max:
            for (double& v : s.map.values()) v /= hi;
            break;
        case SaliencyNorm::min_max:
            if (hi - lo > kDegenerateThreshold) {
                for (double& v : s.map.values()) v = (v - lo) / (hi - lo);
            } else {
                s.map.fill(1.0);
            }
            break;
        case SaliencyNorm::sum: {
            double total = 0.0;
            for (double v : s.map.values()) total += v;
            for (double& v : s.map.values()) v /= total;
            break;
        }
    }
    return s;
}

Saliency gradcam(const target::ConvNetParams& params, const Tensor& image, std::size_t cls, SaliencyNorm norm) {
    if (cls >= target::kClasses) throw InvalidInput("gradcam: class " + std::to_string(cls) + " out of range");
    const auto cache = target::forward_cached(params, image);
    Tensor onehot({target::kClasses});
    onehot[cls] = 1.0;
    auto s = gradcam_from_maps(cache.act3, target::feature_map_gradient(params, onehot), image.dim(1), image.dim(2),
                               norm);
    s.explained_class = cls;
    return s;
}

Tensor apply_mask(const Tensor& image, const Tensor& saliency) {
    if (image.rank() != 3 || saliency.rank() != 2 || image.dim(1) != saliency.dim(0) ||
        image.dim(2) != saliency.dim(1))
        throw InvalidInput("apply_mask: image " + shape_string(image.shape()) + " vs saliency " +
                           shape_string(saliency.shape()));
    Tensor out = image;
    const std::size_t plane = saliency.size();
    for (std::size_t c = 0; c < image.dim(0); ++c)
        for (std::size_t p = 0; p < plane; ++p) out[c * plane + p] *= saliency[p];
    return out;
}

void save_saliency_cache(const std::filesystem::path& dir, const std::vector<Saliency>& maps) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    auto& entries = manifest["entries"] = nlohmann::json::array();
    for (const auto& s : maps) {
        const std::string file = std::to_string(s.image_id) + "_c" + std::to_string(s.explained_class) + ".icee";
        entries.push_back(
            {{"image_id", s.image_id}, {"class", s.explained_class}, {"degenerate", s.degenerate}, {"file", file}});
        save_tensor(dir / file, s.map);
    }
    write_text_file(dir / "manifest.json", manifest.dump(1) + "\n");
}

std::vector<Saliency> load_saliency_cache(const std::filesystem::path& dir) {
    std::ifstream is(dir / "manifest.json");
    if (!is) throw ArtifactMissing("missing saliency cache in " + dir.string());
    const auto manifest = nlohmann::json::parse(is);
    std::vector<Saliency> maps;
    for (const auto& e : manifest.at("entries")) {
        Saliency s;
        s.image_id = e.at("image_id").get<std::uint64_t>();
        s.explained_class = e.at("class").get<std::size_t>();
        s.degenerate = e.at("degenerate").get<bool>();
        s.map = load_tensor(dir / e.at("file").get<std::string>());
        maps.push_back(std::move(s));
    }
    return maps;
}

}  // namespace icee::explain
