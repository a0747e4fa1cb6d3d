#include "passviz/render.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>

#include "passviz/error.hpp"
#include "passviz/io.hpp"

namespace passviz {

namespace palette {
const std::array<Rgb, 12> kCategorical = {
    Rgb{0xa6, 0xce, 0xe3}, Rgb{0x1f, 0x78, 0xb4}, Rgb{0xb2, 0xdf, 0x8a}, Rgb{0x33, 0xa0, 0x2c},
    Rgb{0xfb, 0x9a, 0x99}, Rgb{0xe3, 0x1a, 0x1c}, Rgb{0xfd, 0xbf, 0x6f}, Rgb{0xff, 0x7f, 0x00},
    Rgb{0xca, 0xb2, 0xd6}, Rgb{0x6a, 0x3d, 0x9a}, Rgb{0xff, 0xff, 0x99}, Rgb{0xb1, 0x59, 0x28},
};
}  // namespace palette

namespace {

struct Lab {
  double l, a, b;
};

double srgb_to_linear(double c) { return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4); }
double linear_to_srgb(double c) { return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055; }

constexpr double kXn = 0.95047, kYn = 1.0, kZn = 1.08883;
constexpr double kEpsilon = 216.0 / 24389.0, kKappa = 24389.0 / 27.0;

Lab to_lab(Rgb c) {
  const double r = srgb_to_linear(c.r / 255.0), g = srgb_to_linear(c.g / 255.0), b = srgb_to_linear(c.b / 255.0);
  const double x = (0.4124564 * r + 0.3575761 * g + 0.1804375 * b) / kXn;
  const double y = (0.2126729 * r + 0.7151522 * g + 0.0721750 * b) / kYn;
  const double z = (0.0193339 * r + 0.1191920 * g + 0.9503041 * b) / kZn;
  auto f = [](double t) { return t > kEpsilon ? std::cbrt(t) : (kKappa * t + 16.0) / 116.0; };
  const double fx = f(x), fy = f(y), fz = f(z);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

Rgb from_lab(Lab lab) {
  const double fy = (lab.l + 16.0) / 116.0;
  const double fx = fy + lab.a / 500.0;
  const double fz = fy - lab.b / 200.0;
  auto finv = [](double f) {
    const double f3 = f * f * f;
    return f3 > kEpsilon ? f3 : (116.0 * f - 16.0) / kKappa;
  };
  const double x = finv(fx) * kXn, y = finv(fy) * kYn, z = finv(fz) * kZn;
  const double r = 3.2404542 * x - 1.5371385 * y - 0.4985314 * z;
  const double g = -0.9692660 * x + 1.8760108 * y + 0.0415560 * z;
  const double b = 0.0556434 * x - 0.2040259 * y + 1.0572252 * z;
  auto to8 = [](double c) {
    const double v = std::clamp(linear_to_srgb(std::clamp(c, 0.0, 1.0)), 0.0, 1.0);
    return static_cast<std::uint8_t>(std::lround(v * 255.0));
  };
  return {to8(r), to8(g), to8(b)};
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out.push_back(c);
    }
  }
  return out;
}

struct LegendEntry {
  Rgb colour;
  std::string label;
};

std::vector<LegendEntry> legend_for(std::span<const PasswordFeatures> f, const RenderSpec& spec) {
  std::vector<LegendEntry> out;
  switch (spec.color_mode) {
    case ColorMode::length: {
      std::set<std::size_t> buckets;
      for (const auto& pf : f) buckets.insert(std::min(pf.length, kLengthBucketCap));
      for (auto b : buckets) out.push_back({length_colour(b), length_bucket_label(b)});
      break;
    }
    case ColorMode::digit_ratio:
      for (int i = 0; i <= 4; ++i) {
        out.push_back({lab_ramp(palette::kDarkRed, palette::kDarkGreen, i / 4.0), std::to_string(i * 25) + "% digits"});
      }
      break;
    case ColorMode::digit_position:
      for (int i = 0; i <= 4; ++i) {
        out.push_back({lab_ramp(palette::kLightBlue, palette::kDarkBlue, i / 4.0), "position " + fmt(i / 4.0)});
      }
      break;
    case ColorMode::highlight:
      out.push_back({palette::kGrey, "other"});
      for (const auto& r : spec.highlight_rules) out.push_back({r.colour, r.description});
      break;
    case ColorMode::cluster: {
      std::set<int> labels(spec.cluster_labels.begin(), spec.cluster_labels.end());
      std::size_t shown = 0;
      for (int l : labels) {
        if (l < 0) continue;
        if (++shown > 12) {
          out.push_back({palette::kGrey, "..."});
          break;
        }
        out.push_back({cluster_colour(l), "cluster " + std::to_string(l)});
      }
      if (labels.contains(-1)) out.push_back({palette::kGrey, "noise"});
      break;
    }
  }
  return out;
}

struct Annotation {
  Point2 at;
  std::string text;
};

std::vector<Annotation> majority_annotations(std::span<const Point2> coords, std::span<const PasswordFeatures> f,
                                             const RenderSpec& spec) {
  std::vector<Annotation> out;
  if (!spec.annotate_majority_length || spec.cluster_labels.empty()) return out;
  std::map<int, std::map<std::size_t, std::size_t>> hist;
  std::map<int, std::pair<Point2, std::size_t>> sums;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const int l = spec.cluster_labels[i];
    if (l < 0) continue;
    ++hist[l][f[i].length];
    auto& s = sums[l];
    s.first.x += coords[i].x;
    s.first.y += coords[i].y;
    ++s.second;
  }
  for (const auto& [label, lengths] : hist) {
    std::size_t best_len = 0, best = 0;
    for (const auto& [len, count] : lengths) {
      if (count > best) {
        best = count;
        best_len = len;
      }
    }
    const auto& [sum, n] = sums[label];
    out.push_back({{sum.x / static_cast<double>(n), sum.y / static_cast<double>(n)}, std::to_string(best_len)});
  }
  return out;
}

// Maps data coordinates into the plot area, preserving aspect ratio.
struct Viewport {
  double scale = 1, midx = 0, midy = 0, cx = 0, cy = 0;

  Viewport(std::span<const Point2> coords, double left, double top, double right, double bottom) {
    double minx = std::numeric_limits<double>::infinity(), miny = minx, maxx = -minx, maxy = -minx;
    for (const auto& p : coords) {
      minx = std::min(minx, p.x);
      maxx = std::max(maxx, p.x);
      miny = std::min(miny, p.y);
      maxy = std::max(maxy, p.y);
    }
    if (coords.empty()) minx = maxx = miny = maxy = 0;
    const double w = maxx - minx, h = maxy - miny;
    const double pw = right - left, ph = bottom - top;
    if (w > 0 && h > 0) {
      scale = std::min(pw / w, ph / h);
    } else if (w > 0) {
      scale = pw / w;
    } else if (h > 0) {
      scale = ph / h;
    }
    midx = (minx + maxx) / 2;
    midy = (miny + maxy) / 2;
    cx = (left + right) / 2;
    cy = (top + bottom) / 2;
  }
  double px(double x) const { return cx + (x - midx) * scale; }
  double py(double y) const { return cy - (y - midy) * scale; }
};

constexpr double kMargin = 20.0;
constexpr double kLegendWidth = 170.0;

// Background points first so highlighted/coloured ones stay visible; each
// point is still drawn exactly once.
std::vector<std::size_t> draw_order(const std::vector<Rgb>& colours, const RenderSpec& spec) {
  std::vector<std::size_t> order;
  order.reserve(colours.size());
  const bool layered = spec.color_mode == ColorMode::highlight || spec.color_mode == ColorMode::cluster;
  if (layered) {
    for (std::size_t i = 0; i < colours.size(); ++i) {
      if (colours[i] == palette::kGrey) order.push_back(i);
    }
    for (std::size_t i = 0; i < colours.size(); ++i) {
      if (colours[i] != palette::kGrey) order.push_back(i);
    }
  } else {
    for (std::size_t i = 0; i < colours.size(); ++i) order.push_back(i);
  }
  return order;
}

void check_sizes(std::span<const Point2> coords, std::span<const PasswordFeatures> f, const RenderSpec& spec) {
  if (coords.size() != f.size()) {
    throw DomainError("render: embedding has " + std::to_string(coords.size()) + " points but feature table has " +
                      std::to_string(f.size()));
  }
  if ((spec.color_mode == ColorMode::cluster || spec.annotate_majority_length) &&
      spec.cluster_labels.size() != coords.size()) {
    throw DomainError("render: cluster labels do not match the number of points");
  }
  if (spec.width <= 0 || spec.height <= 0) throw DomainError("render: image size must be positive");
}

void png_append(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), len);
}

}  // namespace

std::string Rgb::hex() const {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

Rgb Rgb::from_hex(std::string_view hex) {
  if (hex.size() == 7 && hex[0] == '#') hex.remove_prefix(1);
  if (hex.size() != 6) throw UsageError("colour must be #rrggbb, got '" + std::string(hex) + "'");
  auto byte = [&](std::size_t i) {
    unsigned v = 0;
    for (std::size_t k = i; k < i + 2; ++k) {
      const char c = hex[k];
      v <<= 4;
      if (c >= '0' && c <= '9') v |= static_cast<unsigned>(c - '0');
      else if (c >= 'a' && c <= 'f') v |= static_cast<unsigned>(c - 'a' + 10);
      else if (c >= 'A' && c <= 'F') v |= static_cast<unsigned>(c - 'A' + 10);
      else throw UsageError("colour must be #rrggbb, got '" + std::string(hex) + "'");
    }
    return static_cast<std::uint8_t>(v);
  };
  return {byte(0), byte(2), byte(4)};
}

Rgb lab_ramp(Rgb from, Rgb to, double t) {
  if (!(t > 0)) return from;
  if (t >= 1) return to;
  const Lab a = to_lab(from), b = to_lab(to);
  return from_lab({a.l + (b.l - a.l) * t, a.a + (b.a - a.a) * t, a.b + (b.b - a.b) * t});
}

Rgb length_colour(std::size_t length) {
  const std::size_t bucket = std::min(length, kLengthBucketCap);
  // Buckets 4..15 get distinct colours; 1..3 reuse the cycle.
  return palette::kCategorical[(bucket + 12 - 4) % 12];
}

std::string length_bucket_label(std::size_t length) {
  return length >= kLengthBucketCap ? std::to_string(kLengthBucketCap) + "+" : std::to_string(length);
}

Rgb cluster_colour(int label) {
  if (label < 0) return palette::kGrey;
  return palette::kCategorical[static_cast<std::size_t>(label) % 12];
}

ColorMode parse_color_mode(std::string_view name) {
  if (name == "length") return ColorMode::length;
  if (name == "digit_ratio") return ColorMode::digit_ratio;
  if (name == "digit_position") return ColorMode::digit_position;
  if (name == "highlight") return ColorMode::highlight;
  if (name == "cluster") return ColorMode::cluster;
  throw UsageError("unknown colour mode '" + std::string(name) +
                   "' (expected length, digit_ratio, digit_position, highlight or cluster)");
}

std::string_view color_mode_name(ColorMode m) noexcept {
  switch (m) {
    case ColorMode::length:
      return "length";
    case ColorMode::digit_ratio:
      return "digit_ratio";
    case ColorMode::digit_position:
      return "digit_position";
    case ColorMode::highlight:
      return "highlight";
    case ColorMode::cluster:
      return "cluster";
  }
  return "unknown";
}

std::vector<Rgb> point_colours(std::span<const PasswordFeatures> f, const RenderSpec& spec) {
  std::vector<Rgb> out(f.size(), palette::kGrey);
  switch (spec.color_mode) {
    case ColorMode::length:
      for (std::size_t i = 0; i < f.size(); ++i) out[i] = length_colour(f[i].length);
      break;
    case ColorMode::digit_ratio:
      for (std::size_t i = 0; i < f.size(); ++i) {
        out[i] = lab_ramp(palette::kDarkRed, palette::kDarkGreen, f[i].digit_ratio);
      }
      break;
    case ColorMode::digit_position:
      for (std::size_t i = 0; i < f.size(); ++i) {
        out[i] = lab_ramp(palette::kLightBlue, palette::kDarkBlue, f[i].digit_position_ratio);
      }
      break;
    case ColorMode::highlight:
      if (spec.highlight_rules.empty()) throw DomainError("highlight mode needs at least one rule");
      for (std::size_t i = 0; i < f.size(); ++i) {
        for (const auto& rule : spec.highlight_rules) {
          if (rule.matches(i)) out[i] = rule.colour;
        }
      }
      break;
    case ColorMode::cluster:
      if (spec.cluster_labels.size() != f.size()) throw DomainError("cluster mode needs one label per point");
      for (std::size_t i = 0; i < f.size(); ++i) out[i] = cluster_colour(spec.cluster_labels[i]);
      break;
  }
  return out;
}

std::string render_svg(std::span<const Point2> coords, std::span<const PasswordFeatures> f, const RenderSpec& spec) {
  check_sizes(coords, f, spec);
  const auto colours = point_colours(f, spec);
  const double w = spec.width, h = spec.height;
  const double top = kMargin + (spec.title.empty() ? 0 : 20);
  const Viewport vp(coords, kMargin + spec.point_size, top + spec.point_size,
                    w - kLegendWidth - kMargin - spec.point_size, h - kMargin - spec.point_size);

  std::string s;
  s.reserve(coords.size() * 80 + 1024);
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(spec.width) + "\" height=\"" +
       std::to_string(spec.height) + "\" viewBox=\"0 0 " + std::to_string(spec.width) + " " +
       std::to_string(spec.height) + "\" data-mode=\"" + std::string(color_mode_name(spec.color_mode)) + "\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(spec.width) + "\" height=\"" + std::to_string(spec.height) +
       "\" fill=\"" + spec.background.hex() + "\"/>\n";
  if (!spec.title.empty()) {
    s += "<text class=\"title\" x=\"" + fmt(kMargin) + "\" y=\"" + fmt(kMargin + 8) +
         "\" font-family=\"sans-serif\" font-size=\"14\" fill=\"#000000\">" + xml_escape(spec.title) + "</text>\n";
  }
  s += "<g class=\"points\">\n";
  const std::string radius = fmt(spec.point_size);
  for (std::size_t i : draw_order(colours, spec)) {
    s += "<circle class=\"pt\" data-i=\"" + std::to_string(i) + "\" cx=\"" + fmt(vp.px(coords[i].x)) + "\" cy=\"" +
         fmt(vp.py(coords[i].y)) + "\" r=\"" + radius + "\" fill=\"" + colours[i].hex() + "\"/>\n";
  }
  s += "</g>\n";

  const auto notes = majority_annotations(coords, f, spec);
  if (!notes.empty()) {
    s += "<g class=\"annotations\">\n";
    for (const auto& a : notes) {
      s += "<text class=\"majority-length\" x=\"" + fmt(vp.px(a.at.x)) + "\" y=\"" + fmt(vp.py(a.at.y)) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\" font-weight=\"bold\" "
           "fill=\"#000000\">" +
           xml_escape(a.text) + "</text>\n";
    }
    s += "</g>\n";
  }

  s += "<g class=\"legend\">\n";
  double ly = top + 10;
  const double lx = w - kLegendWidth;
  for (const auto& e : legend_for(f, spec)) {
    s += "<rect class=\"swatch\" x=\"" + fmt(lx) + "\" y=\"" + fmt(ly - 9) + "\" width=\"12\" height=\"12\" fill=\"" +
         e.colour.hex() + "\"/>";
    s += "<text class=\"legend-label\" x=\"" + fmt(lx + 18) + "\" y=\"" + fmt(ly + 1) +
         "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#000000\">" + xml_escape(e.label) + "</text>\n";
    ly += 18;
  }
  s += "</g>\n</svg>\n";
  return s;
}

std::string render_png(std::span<const Point2> coords, std::span<const PasswordFeatures> f, const RenderSpec& spec) {
  check_sizes(coords, f, spec);
  const auto colours = point_colours(f, spec);
  const int w = spec.width, h = spec.height;
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3);
  for (std::size_t i = 0; i < pixels.size(); i += 3) {
    pixels[i] = spec.background.r;
    pixels[i + 1] = spec.background.g;
    pixels[i + 2] = spec.background.b;
  }
  auto disc = [&](double cx, double cy, double r, Rgb c) {
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - r)));
    const int x1 = std::min(w - 1, static_cast<int>(std::ceil(cx + r)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - r)));
    const int y1 = std::min(h - 1, static_cast<int>(std::ceil(cy + r)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
        if (dx * dx + dy * dy > r * r) continue;
        auto* px = &pixels[(static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)) * 3];
        px[0] = c.r;
        px[1] = c.g;
        px[2] = c.b;
      }
    }
  };
  const double top = kMargin;
  const Viewport vp(coords, kMargin + spec.point_size, top + spec.point_size,
                    w - kLegendWidth - kMargin - spec.point_size, h - kMargin - spec.point_size);
  for (std::size_t i : draw_order(colours, spec)) {
    disc(vp.px(coords[i].x), vp.py(coords[i].y), std::max(spec.point_size, 0.75), colours[i]);
  }
  // Legend swatches only; text labels are an SVG feature.
  double ly = top + 10;
  for (const auto& e : legend_for(f, spec)) {
    for (int y = 0; y < 12; ++y) {
      for (int x = 0; x < 12; ++x) {
        const int px = static_cast<int>(w - kLegendWidth) + x, py = static_cast<int>(ly) - 9 + y;
        if (px < 0 || px >= w || py < 0 || py >= h) continue;
        auto* p = &pixels[(static_cast<std::size_t>(py) * static_cast<std::size_t>(w) + static_cast<std::size_t>(px)) * 3];
        p[0] = e.colour.r;
        p[1] = e.colour.g;
        p[2] = e.colour.b;
      }
    }
    ly += 18;
  }

  std::string out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("PNG encoding failed");
  }
  png_set_write_fn(png, &out, png_append, nullptr);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < h; ++y) {
    png_write_row(png, &pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) * 3]);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

std::string render_profile_svg(const std::array<double, 11>& share_a, const std::array<double, 11>& share_b,
                               const std::string& name_a, const std::string& name_b, int width, int height) {
  const double left = 50, right = width - 20.0, top = 40, bottom = height - 40.0;
  double peak = 1.0;
  for (std::size_t d = 0; d < 11; ++d) peak = std::max({peak, share_a[d], share_b[d]});
  const double group = (right - left) / 11.0, bar = group * 0.4;
  auto bar_rect = [&](double x, double v, Rgb c, const std::string& cls, std::size_t d) {
    const double hgt = (bottom - top) * v / peak;
    return "<rect class=\"" + cls + "\" data-decile=\"" + std::to_string(d * 10) + "\" x=\"" + fmt(x) +
           "\" y=\"" + fmt(bottom - hgt) + "\" width=\"" + fmt(bar) + "\" height=\"" + fmt(hgt) + "\" fill=\"" +
           c.hex() + "\"/>\n";
  };
  std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
       std::to_string(height) + "\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(width) + "\" height=\"" + std::to_string(height) +
       "\" fill=\"#ffffff\"/>\n";
  s += "<line x1=\"" + fmt(left) + "\" y1=\"" + fmt(bottom) + "\" x2=\"" + fmt(right) + "\" y2=\"" + fmt(bottom) +
       "\" stroke=\"#000000\"/>\n";
  for (std::size_t d = 0; d < 11; ++d) {
    const double x0 = left + group * static_cast<double>(d) + group * 0.1;
    s += bar_rect(x0, share_a[d], palette::kBlue, "bar-a", d);
    s += bar_rect(x0 + bar, share_b[d], palette::kRed, "bar-b", d);
    s += "<text x=\"" + fmt(x0 + bar) + "\" y=\"" + fmt(bottom + 16) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#000000\">" +
         std::to_string(d * 10) + "%</text>\n";
  }
  s += "<rect x=\"" + fmt(left) + "\" y=\"12\" width=\"12\" height=\"12\" fill=\"" + palette::kBlue.hex() +
       "\"/><text x=\"" + fmt(left + 18) + "\" y=\"22\" font-family=\"sans-serif\" font-size=\"12\">" +
       xml_escape(name_a) + "</text>\n";
  s += "<rect x=\"" + fmt(left + 200) + "\" y=\"12\" width=\"12\" height=\"12\" fill=\"" + palette::kRed.hex() +
       "\"/><text x=\"" + fmt(left + 218) + "\" y=\"22\" font-family=\"sans-serif\" font-size=\"12\">" +
       xml_escape(name_b) + "</text>\n";
  s += "</svg>\n";
  return s;
}

void render_scatter(const Embedding& e, std::span<const PasswordFeatures> f, const RenderSpec& spec,
                    const std::filesystem::path& out) {
  const auto ext = out.extension().string();
  if (ext == ".svg") {
    write_file_atomic(out, render_svg(e.coords, f, spec));
  } else if (ext == ".png") {
    write_file_atomic(out, render_png(e.coords, f, spec));
  } else {
    throw UsageError("unsupported image extension '" + ext + "' (expected .svg or .png)");
  }
}

}  // namespace passviz
