#include "icee/synthdata.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "icee/checkpoint.hpp"
#include "icee/tensor_io.hpp"

namespace icee::synth {
namespace {

// Narrow size range: circle and square silhouettes stay distinct at 32 px.
constexpr double kMinScale = 9.0;
constexpr double kMaxScale = 10.0;
constexpr std::size_t kSubsamples = 4;

// `scale` is the circumradius of either shape.
double half_side(const ShapeSpec& spec) { return spec.scale / std::numbers::sqrt2; }

// Half-width of the axis-aligned box around the shape.
double extent(const ShapeSpec& spec) {
    if (spec.shape == ShapeKind::cylinder) return spec.scale;
    return half_side(spec) * (std::abs(std::cos(spec.rotation)) + std::abs(std::sin(spec.rotation)));
}

bool inside(const ShapeSpec& spec, double x, double y) {
    const double dx = x - spec.cx;
    const double dy = y - spec.cy;
    if (spec.shape == ShapeKind::cylinder) return dx * dx + dy * dy <= spec.scale * spec.scale;
    const double c = std::cos(spec.rotation), s = std::sin(spec.rotation);
    const double u = dx * c + dy * s;
    const double v = -dx * s + dy * c;
    return std::abs(u) <= half_side(spec) && std::abs(v) <= half_side(spec);
}

nlohmann::json spec_to_json(const ShapeSpec& s) {
    return {{"shape", to_string(s.shape)}, {"color", to_string(s.color)}, {"cx", s.cx},
            {"cy", s.cy},  {"scale", s.scale},          {"rotation", s.rotation}, {"background", s.background}};
}

ShapeSpec spec_from_json(const nlohmann::json& j) {
    ShapeSpec s;
    s.shape = j.at("shape").get<std::string>() == "cube" ? ShapeKind::cube : ShapeKind::cylinder;
    s.color = j.at("color").get<std::string>() == "orange" ? Color::orange : Color::red;
    s.cx = j.at("cx").get<double>();
    s.cy = j.at("cy").get<double>();
    s.scale = j.at("scale").get<double>();
    s.rotation = j.at("rotation").get<double>();
    s.background = j.at("background").get<int>();
    return s;
}

}  // namespace

std::size_t class_label(Color color, ShapeKind shape) {
    return 2 * static_cast<std::size_t>(color == Color::orange) + static_cast<std::size_t>(shape == ShapeKind::cube);
}

std::size_t class_label(const ShapeSpec& spec) { return class_label(spec.color, spec.shape); }

Color class_color(std::size_t label) { return label >= 2 ? Color::orange : Color::red; }
ShapeKind class_shape(std::size_t label) { return label % 2 == 1 ? ShapeKind::cube : ShapeKind::cylinder; }

std::size_t user_class(std::size_t label, UserKind kind) {
    if (label >= kNumClasses) throw InvalidInput("user_class: label out of range");
    if (kind == UserKind::color_user) return class_label(class_color(label), ShapeKind::cylinder);
    return class_label(Color::red, class_shape(label));
}

std::size_t user_label(const ShapeSpec& spec, UserKind kind) { return user_class(class_label(spec), kind); }

std::string_view to_string(UserKind kind) { return kind == UserKind::color_user ? "color_user" : "shape_user"; }
std::string_view to_string(ShapeKind shape) { return shape == ShapeKind::cube ? "cube" : "cylinder"; }
std::string_view to_string(Color color) { return color == Color::orange ? "orange" : "red"; }

UserKind parse_user_kind(std::string_view name) {
    if (name == "color_user" || name == "color") return UserKind::color_user;
    if (name == "shape_user" || name == "shape") return UserKind::shape_user;
    throw InvalidInput("unknown user kind '" + std::string(name) + "'");
}

bool is_valid(const ShapeSpec& spec) {
    if (spec.background < 0 || spec.background >= static_cast<int>(kNumBackgrounds)) return false;
    if (!(spec.scale > 0.0)) return false;
    const double e = extent(spec);
    const double size = static_cast<double>(kCanvas);
    return spec.cx - e >= 0.0 && spec.cx + e <= size && spec.cy - e >= 0.0 && spec.cy + e <= size;
}

Tensor render(const ShapeSpec& spec) {
    if (!is_valid(spec)) throw InvalidInput("render: shape spec outside the canvas");
    const Rgb& fg = spec.color == Color::red ? kRed : kOrange;
    const Rgb& bg = kBackgrounds[static_cast<std::size_t>(spec.background)];
    Tensor img({kChannels, kCanvas, kCanvas});
    for (std::size_t i = 0; i < kCanvas; ++i) {
        for (std::size_t j = 0; j < kCanvas; ++j) {
            // Coverage from a regular sub-pixel grid; row i is y, column j is x.
            std::size_t hits = 0;
            for (std::size_t sy = 0; sy < kSubsamples; ++sy)
                for (std::size_t sx = 0; sx < kSubsamples; ++sx)
                    hits += inside(spec, static_cast<double>(j) + (static_cast<double>(sx) + 0.5) / kSubsamples,
                                   static_cast<double>(i) + (static_cast<double>(sy) + 0.5) / kSubsamples);
            const double cover = static_cast<double>(hits) / (kSubsamples * kSubsamples);
            for (std::size_t ch = 0; ch < kChannels; ++ch)
                img.at(ch, i, j) = hits == kSubsamples * kSubsamples ? fg[ch]
                                   : hits == 0                       ? bg[ch]
                                                                     : cover * fg[ch] + (1.0 - cover) * bg[ch];
        }
    }
    return img;
}

ShapeSpec sample_spec(RngStream& rng, ShapeKind shape, Color color) {
    ShapeSpec s;
    s.shape = shape;
    s.color = color;
    s.scale = rng.uniform(kMinScale, kMaxScale);
    s.rotation = rng.uniform(0.0, std::numbers::pi / 2.0);
    s.background = static_cast<int>(rng.uniform_index(kNumBackgrounds));
    // The circumscribed circle stays inside the canvas for either shape.
    s.cx = rng.uniform(s.scale, static_cast<double>(kCanvas) - s.scale);
    s.cy = rng.uniform(s.scale, static_cast<double>(kCanvas) - s.scale);
    return s;
}

DatasetSplit generate_dataset(std::uint64_t seed, std::size_t n_per_class) {
    if (n_per_class < 5) throw InvalidInput("generate_dataset: n_per_class must be >= 5");
    RngStream rng = RngStream(seed).substream("synthdata");
    DatasetSplit split;
    split.seed = seed;
    split.n_per_class = n_per_class;
    const std::size_t n_train = n_per_class * 4 / 5;
    std::uint64_t next_id = 0;
    for (std::size_t k = 0; k < n_per_class; ++k) {
        for (std::size_t label = 0; label < kNumClasses; ++label) {
            LabeledImage img;
            img.spec = sample_spec(rng, class_shape(label), class_color(label));
            img.label = class_label(img.spec);
            img.pixels = render(img.spec);
            img.id = next_id++;
            (k < n_train ? split.train : split.test).push_back(std::move(img));
        }
    }
    return split;
}

void save_dataset(const std::filesystem::path& dir, const DatasetSplit& split) {
    std::filesystem::create_directories(dir / "images");
    nlohmann::json manifest;
    manifest["seed"] = split.seed;
    manifest["n_per_class"] = split.n_per_class;
    manifest["canvas"] = kCanvas;
    auto& images = manifest["images"] = nlohmann::json::array();
    for (const auto* part : {&split.train, &split.test}) {
        const bool is_train = part == &split.train;
        for (const auto& img : *part) {
            const std::string file = "images/" + std::to_string(img.id) + ".icee";
            images.push_back({{"id", img.id},
                              {"label", img.label},
                              {"split", is_train ? "train" : "test"},
                              {"file", file},
                              {"spec", spec_to_json(img.spec)}});
            save_tensor(dir / file, img.pixels);
        }
    }
    std::ofstream os(dir / "manifest.json", std::ios::trunc);
    if (!os) throw IoError("cannot write " + (dir / "manifest.json").string());
    os << manifest.dump(1) << '\n';
}

DatasetSplit load_dataset(const std::filesystem::path& dir) {
    std::ifstream is(dir / "manifest.json");
    if (!is) throw ArtifactMissing("missing dataset manifest in " + dir.string());
    const auto manifest = nlohmann::json::parse(is);
    DatasetSplit split;
    split.seed = manifest.at("seed").get<std::uint64_t>();
    split.n_per_class = manifest.at("n_per_class").get<std::size_t>();
    for (const auto& entry : manifest.at("images")) {
        LabeledImage img;
        img.id = entry.at("id").get<std::uint64_t>();
        img.label = entry.at("label").get<std::size_t>();
        img.spec = spec_from_json(entry.at("spec"));
        img.pixels = load_tensor(dir / entry.at("file").get<std::string>());
        if (img.pixels.shape() != Shape{kChannels, kCanvas, kCanvas})
            throw IoError("dataset image " + std::to_string(img.id) + " has shape " + shape_string(img.pixels.shape()));
        (entry.at("split").get<std::string>() == "train" ? split.train : split.test).push_back(std::move(img));
    }
    return split;
}

}  // namespace icee::synth
