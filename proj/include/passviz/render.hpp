#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "passviz/embed.hpp"
#include "passviz/features.hpp"

namespace passviz {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  std::string hex() const;
  static Rgb from_hex(std::string_view hex);
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

namespace palette {
/// 12-colour qualitative cycle (ColorBrewer "Paired").
extern const std::array<Rgb, 12> kCategorical;
inline constexpr Rgb kGrey{0xc0, 0xc0, 0xc0};
inline constexpr Rgb kDarkRed{0x8b, 0x00, 0x00};
inline constexpr Rgb kDarkGreen{0x00, 0x64, 0x00};
inline constexpr Rgb kLightBlue{0xad, 0xd8, 0xe6};
inline constexpr Rgb kDarkBlue{0x00, 0x00, 0x8b};
inline constexpr Rgb kRed{0xe3, 0x1a, 0x1c};
inline constexpr Rgb kBlue{0x1f, 0x78, 0xb4};
inline constexpr Rgb kPink{0xf7, 0x81, 0xbf};
inline constexpr Rgb kPurple{0x6a, 0x3d, 0x9a};
inline constexpr Rgb kWhite{0xff, 0xff, 0xff};
}  // namespace palette

/// Linear interpolation between two colours in CIELAB, t clamped to [0, 1].
Rgb lab_ramp(Rgb from, Rgb to, double t);

/// Lengths >= 15 share the "15+" bucket.
inline constexpr std::size_t kLengthBucketCap = 15;
Rgb length_colour(std::size_t length);
std::string length_bucket_label(std::size_t length);

Rgb cluster_colour(int label);

enum class ColorMode { length, digit_ratio, digit_position, highlight, cluster };
ColorMode parse_color_mode(std::string_view name);
std::string_view color_mode_name(ColorMode m) noexcept;

/// A predicate over point indices plus the colour it paints.
struct HighlightRule {
  std::string description;
  Rgb colour;
  std::function<bool(std::size_t)> matches;
};

struct RenderSpec {
  ColorMode color_mode = ColorMode::length;
  /// Later rules override earlier ones on the same point.
  std::vector<HighlightRule> highlight_rules;
  double point_size = 2.0;  // radius in pixels
  int width = 1000;
  int height = 800;
  bool annotate_majority_length = false;
  /// Per-point cluster labels (-1 noise) for cluster mode and annotations.
  std::vector<int> cluster_labels;
  Rgb background = palette::kWhite;
  std::string title;
};

/// Fill colour of every point under `spec`. Throws DomainError if sizes
/// disagree or highlight mode has no rules.
std::vector<Rgb> point_colours(std::span<const PasswordFeatures> f, const RenderSpec& spec);

std::string render_svg(std::span<const Point2> coords, std::span<const PasswordFeatures> f, const RenderSpec& spec);
std::string render_png(std::span<const Point2> coords, std::span<const PasswordFeatures> f, const RenderSpec& spec);

/// Grouped bar chart of two per-decile share vectors (percent).
std::string render_profile_svg(const std::array<double, 11>& share_a, const std::array<double, 11>& share_b,
                               const std::string& name_a, const std::string& name_b, int width = 800,
                               int height = 400);

/// Writes .svg or .png by extension (UsageError otherwise) atomically.
void render_scatter(const Embedding& e, std::span<const PasswordFeatures> f, const RenderSpec& spec,
                    const std::filesystem::path& out);

}  // namespace passviz
