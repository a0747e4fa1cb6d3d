#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "passviz/corpus.hpp"
#include "passviz/error.hpp"
#include "passviz/features.hpp"
#include "passviz/render.hpp"
#include "synthetic.hpp"

using namespace passviz;

namespace {

struct Circle {
  std::size_t index;
  std::string fill;
};

std::vector<Circle> circles(const std::string& svg) {
  static const std::regex re(R"re(<circle class="pt" data-i="(\d+)"[^>]*fill="(#[0-9a-f]{6})")re");
  std::vector<Circle> out;
  for (std::sregex_iterator it(svg.begin(), svg.end(), re), end; it != end; ++it) {
    out.push_back({std::stoul((*it)[1]), (*it)[2]});
  }
  return out;
}

std::vector<std::string> legend_labels(const std::string& svg) {
  static const std::regex re(R"re(<text class="legend-label"[^>]*>([^<]*)</text>)re");
  std::vector<std::string> out;
  for (std::sregex_iterator it(svg.begin(), svg.end(), re), end; it != end; ++it) out.push_back((*it)[1]);
  return out;
}

std::map<std::size_t, std::string> fill_by_index(const std::string& svg) {
  std::map<std::size_t, std::string> m;
  for (const auto& c : circles(svg)) m[c.index] = c.fill;
  return m;
}

struct Fixture {
  Corpus corpus;
  std::vector<PasswordFeatures> features;
  std::vector<Point2> coords;
};

Fixture fixture(const std::vector<std::string>& pw) {
  Fixture f{make_corpus("fx", pw), {}, {}};
  f.features = feature_table(f.corpus);
  for (std::size_t i = 0; i < pw.size(); ++i) {
    f.coords.push_back({static_cast<double>(i), static_cast<double>((i * 7) % 5)});
  }
  return f;
}

// Independent sRGB -> CIELAB (D65) for checking ramp midpoints.
std::array<double, 3> to_lab(Rgb c) {
  auto lin = [](std::uint8_t v) {
    const double s = v / 255.0;
    return s <= 0.04045 ? s / 12.92 : std::pow((s + 0.055) / 1.055, 2.4);
  };
  const double r = lin(c.r), g = lin(c.g), b = lin(c.b);
  const double x = (0.4124564 * r + 0.3575761 * g + 0.1804375 * b) / 0.95047;
  const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
  const double z = (0.0193339 * r + 0.1191920 * g + 0.9503041 * b) / 1.08883;
  auto f = [](double t) { return t > 216.0 / 24389.0 ? std::cbrt(t) : (24389.0 / 27.0 * t + 16.0) / 116.0; };
  return {116 * f(y) - 16, 500 * (f(x) - f(y)), 200 * (f(y) - f(z))};
}

}  // namespace

TEST_CASE("hex conversion") {
  CHECK(Rgb{0x1f, 0x78, 0xb4}.hex() == "#1f78b4");
  CHECK(Rgb::from_hex("#6a3d9a") == palette::kPurple);
  CHECK(Rgb::from_hex("6A3D9A") == palette::kPurple);
  CHECK_THROWS(Rgb::from_hex("#6a3d9"));
  CHECK_THROWS(Rgb::from_hex("#6a3d9z"));
}

TEST_CASE("lab ramp endpoints and midpoint") {
  CHECK(lab_ramp(palette::kDarkRed, palette::kDarkGreen, 0.0) == palette::kDarkRed);
  CHECK(lab_ramp(palette::kDarkRed, palette::kDarkGreen, 1.0) == palette::kDarkGreen);
  CHECK(lab_ramp(palette::kDarkRed, palette::kDarkGreen, -3.0) == palette::kDarkRed);
  CHECK(lab_ramp(palette::kDarkRed, palette::kDarkGreen, 7.0) == palette::kDarkGreen);

  const auto a = to_lab(palette::kLightBlue), b = to_lab(palette::kDarkBlue);
  const auto mid = to_lab(lab_ramp(palette::kLightBlue, palette::kDarkBlue, 0.5));
  for (int k = 0; k < 3; ++k) CHECK(mid[k] == doctest::Approx((a[k] + b[k]) / 2).epsilon(0.02).scale(1));

  double last_l = 200;
  for (int i = 0; i <= 10; ++i) {
    const double l = to_lab(lab_ramp(palette::kLightBlue, palette::kDarkBlue, i / 10.0))[0];
    CHECK(l < last_l + 0.5);
    last_l = l;
  }
}

TEST_CASE("length buckets") {
  CHECK(length_bucket_label(8) == "8");
  CHECK(length_bucket_label(15) == "15+");
  CHECK(length_bucket_label(40) == "15+");
  CHECK(length_colour(15) == length_colour(22));
  std::set<std::string> distinct;
  for (std::size_t l = 4; l <= 15; ++l) distinct.insert(length_colour(l).hex());
  CHECK(distinct.size() == 12);
}

TEST_CASE("three points in length mode") {
  const auto fx = fixture({"abc", "abcdefgh", "abcdefghijklmnopq"});
  RenderSpec spec;
  const auto svg = render_svg(fx.coords, fx.features, spec);
  const auto c = circles(svg);
  REQUIRE(c.size() == 3);
  CHECK(legend_labels(svg) == std::vector<std::string>{"3", "8", "15+"});
  const auto fills = fill_by_index(svg);
  CHECK(fills.at(0) == length_colour(3).hex());
  CHECK(fills.at(2) == length_colour(17).hex());
  CHECK(svg.find("data-mode=\"length\"") != std::string::npos);
}

TEST_CASE("highlight precedence on the second-letter and last-digit rules") {
  const auto fx = fixture({"password1", "apple", "sample1"});
  RenderSpec spec;
  spec.color_mode = ColorMode::highlight;
  const auto& c = fx.corpus;
  spec.highlight_rules.push_back(
      {"second letter a", palette::kBlue, [&](std::size_t i) { return char_at(c[i].text, 1, U'a'); }});
  spec.highlight_rules.push_back(
      {"last letter 1", palette::kPink, [&](std::size_t i) { return char_at(c[i].text, -1, U'1'); }});
  spec.highlight_rules.push_back({"both", palette::kPurple, [&](std::size_t i) {
                                    return char_at(c[i].text, 1, U'a') && char_at(c[i].text, -1, U'1');
                                  }});
  const auto fills = fill_by_index(render_svg(fx.coords, fx.features, spec));
  REQUIRE(fills.size() == 3);
  CHECK(fills.at(0) == palette::kPurple.hex());
  CHECK(fills.at(1) == palette::kGrey.hex());  // "apple": second letter is 'p'
  CHECK(fills.at(2) == palette::kPurple.hex());

  SUBCASE("order decides, not specificity") {
    std::swap(spec.highlight_rules[0], spec.highlight_rules[2]);
    const auto f2 = fill_by_index(render_svg(fx.coords, fx.features, spec));
    CHECK(f2.at(0) == palette::kBlue.hex());
    CHECK(f2.at(2) == palette::kBlue.hex());
  }
}

TEST_CASE("highlight with no rules is rejected") {
  const auto fx = fixture({"a1", "b2"});
  RenderSpec spec;
  spec.color_mode = ColorMode::highlight;
  CHECK_THROWS_AS(point_colours(fx.features, spec), DomainError);
}

TEST_CASE("digit ratio endpoints") {
  const auto fx = fixture({"0000", "aaaa", "aa00"});
  RenderSpec spec;
  spec.color_mode = ColorMode::digit_ratio;
  const auto fills = fill_by_index(render_svg(fx.coords, fx.features, spec));
  CHECK(fills.at(0) == palette::kDarkGreen.hex());
  CHECK(fills.at(1) == palette::kDarkRed.hex());
  CHECK(fills.at(2) == lab_ramp(palette::kDarkRed, palette::kDarkGreen, 0.5).hex());
}

TEST_CASE("digit position ramp") {
  const auto fx = fixture({"12abcd", "abcd12"});
  RenderSpec spec;
  spec.color_mode = ColorMode::digit_position;
  const auto col = point_colours(fx.features, spec);
  CHECK(col[0] == lab_ramp(palette::kLightBlue, palette::kDarkBlue, 0.1));
  CHECK(col[1] == lab_ramp(palette::kLightBlue, palette::kDarkBlue, 0.9));
}

TEST_CASE("cluster mode and majority annotations") {
  const auto fx = fixture({"aaaaaaaa", "bbbbbbbb", "ccccccccc", "dd", "eeeee"});
  RenderSpec spec;
  spec.color_mode = ColorMode::cluster;
  spec.cluster_labels = {0, 0, 0, -1, 1};
  spec.annotate_majority_length = true;
  const auto svg = render_svg(fx.coords, fx.features, spec);
  const auto fills = fill_by_index(svg);
  CHECK(fills.at(3) == palette::kGrey.hex());
  CHECK(fills.at(0) == cluster_colour(0).hex());
  CHECK(fills.at(4) == cluster_colour(1).hex());
  CHECK(svg.find(">8</text>") != std::string::npos);
  CHECK(svg.find(">5</text>") != std::string::npos);

  spec.cluster_labels.pop_back();
  CHECK_THROWS_AS(render_svg(fx.coords, fx.features, spec), DomainError);
}

TEST_CASE("every point drawn exactly once in every mode") {
  const auto pw = testing::synthetic_passwords(300, 8);
  const auto fx = fixture(pw);
  std::vector<int> labels(pw.size());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 4) - 1;
  for (auto mode : {ColorMode::length, ColorMode::digit_ratio, ColorMode::digit_position, ColorMode::highlight,
                    ColorMode::cluster}) {
    RenderSpec spec;
    spec.color_mode = mode;
    spec.cluster_labels = labels;
    spec.highlight_rules.push_back({"even", palette::kRed, [](std::size_t i) { return i % 2 == 0; }});
    const auto c = circles(render_svg(fx.coords, fx.features, spec));
    std::vector<std::size_t> idx;
    for (const auto& x : c) idx.push_back(x.index);
    std::sort(idx.begin(), idx.end());
    std::vector<std::size_t> want(pw.size());
    for (std::size_t i = 0; i < want.size(); ++i) want[i] = i;
    CHECK_MESSAGE(idx == want, color_mode_name(mode));
  }
}

TEST_CASE("svg output is deterministic and escapes text") {
  const auto fx = fixture({"<b>&", "x\"y"});
  RenderSpec spec;
  spec.title = "a < b & c";
  const auto a = render_svg(fx.coords, fx.features, spec);
  CHECK(a == render_svg(fx.coords, fx.features, spec));
  CHECK(a.find("a &lt; b &amp; c") != std::string::npos);
  CHECK(a.find("a < b") == std::string::npos);
}

TEST_CASE("mismatched sizes") {
  const auto fx = fixture({"a", "b", "c"});
  RenderSpec spec;
  std::vector<Point2> two(fx.coords.begin(), fx.coords.begin() + 2);
  CHECK_THROWS_AS(render_svg(two, fx.features, spec), DomainError);
}

TEST_CASE("render_scatter by extension") {
  const auto fx = fixture({"abc", "abcd1", "999999"});
  Embedding e;
  e.coords = fx.coords;
  const auto dir = testing::temp_dir("render");
  RenderSpec spec;
  render_scatter(e, fx.features, spec, dir / "a.svg");
  render_scatter(e, fx.features, spec, dir / "a.png");
  CHECK_THROWS_AS(render_scatter(e, fx.features, spec, dir / "a.jpg"), UsageError);
  CHECK_FALSE(std::filesystem::exists(dir / "a.jpg"));

  std::ifstream png(dir / "a.png", std::ios::binary);
  std::string head(8, '\0');
  png.read(head.data(), 8);
  CHECK(head == std::string("\x89PNG\r\n\x1a\n", 8));
  std::ifstream svg(dir / "a.svg");
  std::stringstream ss;
  ss << svg.rdbuf();
  CHECK(circles(ss.str()).size() == 3);
  std::filesystem::remove_all(dir);
}

TEST_CASE("png is deterministic") {
  const auto fx = fixture(testing::synthetic_passwords(50, 1));
  RenderSpec spec;
  spec.width = 300;
  spec.height = 200;
  CHECK(render_png(fx.coords, fx.features, spec) == render_png(fx.coords, fx.features, spec));
}

TEST_CASE("profile chart has a bar pair per decile") {
  std::array<double, 11> a{}, b{};
  a[10] = 100;
  b[0] = 100;
  const auto svg = render_profile_svg(a, b, "A", "B");
  std::size_t bars_a = 0, bars_b = 0;
  for (std::size_t p = 0; (p = svg.find("class=\"bar-a\"", p)) != std::string::npos; ++p) ++bars_a;
  for (std::size_t p = 0; (p = svg.find("class=\"bar-b\"", p)) != std::string::npos; ++p) ++bars_b;
  CHECK(bars_a == 11);
  CHECK(bars_b == 11);
}
