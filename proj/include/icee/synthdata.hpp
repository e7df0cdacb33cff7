#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "icee/rng.hpp"
#include "icee/tensor.hpp"

namespace icee::synth {

inline constexpr std::size_t kCanvas = 32;
inline constexpr std::size_t kChannels = 3;
inline constexpr std::size_t kNumClasses = 4;
inline constexpr std::size_t kNumBackgrounds = 6;

enum class ShapeKind { cylinder, cube };
enum class Color { red, orange };
enum class UserKind { color_user, shape_user };

using Rgb = std::array<double, 3>;

inline constexpr Rgb kRed{0.85, 0.10, 0.10};
inline constexpr Rgb kOrange{0.95, 0.55, 0.10};
// Hues kept away from red/orange so that color stays the only color cue.
inline constexpr std::array<Rgb, kNumBackgrounds> kBackgrounds{{
    {0.20, 0.35, 0.80},
    {0.20, 0.65, 0.30},
    {0.55, 0.30, 0.70},
    {0.50, 0.50, 0.50},
    {0.15, 0.60, 0.65},
    {0.90, 0.90, 0.90},
}};

struct ShapeSpec {
    ShapeKind shape = ShapeKind::cylinder;
    Color color = Color::red;
    double cx = 16.0;
    double cy = 16.0;
    double scale = 9.0;     // circumradius: circle radius, square half-diagonal
    double rotation = 0.0;  // radians, only visible on cubes
    int background = 0;

    friend bool operator==(const ShapeSpec&, const ShapeSpec&) = default;
};

struct LabeledImage {
    Tensor pixels;  // 3 x 32 x 32 in [0, 1]
    std::size_t label = 0;
    ShapeSpec spec;
    std::uint64_t id = 0;
};

struct DatasetSplit {
    std::vector<LabeledImage> train;
    std::vector<LabeledImage> test;
    std::uint64_t seed = 0;
    std::size_t n_per_class = 0;
};

// 2 * (color == orange) + (shape == cube)
std::size_t class_label(const ShapeSpec& spec);
std::size_t class_label(Color color, ShapeKind shape);
Color class_color(std::size_t label);
ShapeKind class_shape(std::size_t label);

// Color users collapse shapes onto the cylinder class of that color; shape
// users collapse colors onto the red class of that shape.
std::size_t user_class(std::size_t label, UserKind kind);
std::size_t user_label(const ShapeSpec& spec, UserKind kind);

std::string_view to_string(UserKind kind);
std::string_view to_string(ShapeKind shape);
std::string_view to_string(Color color);
UserKind parse_user_kind(std::string_view name);

// True when the shape lies entirely inside the canvas.
bool is_valid(const ShapeSpec& spec);

Tensor render(const ShapeSpec& spec);

// Uniform nuisance draw (center, scale, rotation, background) for a fixed class.
ShapeSpec sample_spec(RngStream& rng, ShapeKind shape, Color color);

DatasetSplit generate_dataset(std::uint64_t seed, std::size_t n_per_class = 300);

// manifest.json + images/<id>.icee
void save_dataset(const std::filesystem::path& dir, const DatasetSplit& split);
DatasetSplit load_dataset(const std::filesystem::path& dir);

}  // namespace icee::synth
