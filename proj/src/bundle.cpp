#include "passviz/bundle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "passviz/error.hpp"
#include "passviz/io.hpp"

namespace passviz {

using nlohmann::json;

namespace {

template <typename T>
T get_field(const json& j, const char* key) {
  if (!j.contains(key)) throw VersionError(std::string("bundle: missing field '") + key + "'");
  return j.at(key).get<T>();
}

json point_to_json(const BundlePoint& p) {
  json j = {{"i", p.index},
            {"x", p.x},
            {"y", p.y},
            {"count", p.count},
            {"length", p.length},
            {"digit_ratio", p.digit_ratio},
            {"digit_ratio_decile", p.digit_ratio_decile},
            {"digit_position_ratio", p.digit_position_ratio},
            {"flags",
             {{"years", p.years},
              {"numeric_sequence", p.numeric_sequence},
              {"keyboard_sequence", p.keyboard_sequence},
              {"highlights", p.highlights}}}};
  if (p.text) j["text"] = *p.text;
  if (p.cluster) j["cluster"] = *p.cluster;
  return j;
}

BundlePoint point_from_json(const json& j) {
  BundlePoint p;
  p.index = get_field<std::size_t>(j, "i");
  p.x = get_field<double>(j, "x");
  p.y = get_field<double>(j, "y");
  p.count = get_field<std::uint64_t>(j, "count");
  p.length = get_field<std::size_t>(j, "length");
  p.digit_ratio = get_field<double>(j, "digit_ratio");
  p.digit_ratio_decile = get_field<int>(j, "digit_ratio_decile");
  p.digit_position_ratio = get_field<double>(j, "digit_position_ratio");
  const auto& flags = j.at("flags");
  p.years = get_field<std::vector<int>>(flags, "years");
  p.numeric_sequence = get_field<bool>(flags, "numeric_sequence");
  p.keyboard_sequence = get_field<bool>(flags, "keyboard_sequence");
  p.highlights = get_field<std::vector<std::size_t>>(flags, "highlights");
  if (j.contains("text")) p.text = j.at("text").get<std::string>();
  if (j.contains("cluster")) p.cluster = j.at("cluster").get<int>();
  return p;
}

json cluster_to_json(const BundleCluster& c) {
  json j = {{"label", c.label},
            {"centroid", {c.cx, c.cy}},
            {"size", c.size},
            {"center_index", c.center_index},
            {"majority_length", c.majority_length},
            {"majority_share", c.majority_share}};
  if (c.center_password) j["center_password"] = *c.center_password;
  return j;
}

BundleCluster cluster_from_json(const json& j) {
  BundleCluster c;
  c.label = get_field<int>(j, "label");
  const auto centroid = get_field<std::vector<double>>(j, "centroid");
  if (centroid.size() != 2) throw VersionError("bundle: cluster centroid must have two coordinates");
  c.cx = centroid[0];
  c.cy = centroid[1];
  c.size = get_field<std::size_t>(j, "size");
  c.center_index = get_field<std::size_t>(j, "center_index");
  c.majority_length = get_field<std::size_t>(j, "majority_length");
  c.majority_share = get_field<double>(j, "majority_share");
  if (j.contains("center_password")) c.center_password = j.at("center_password").get<std::string>();
  return c;
}

// Uniform double in (0, 1) from 53 random bits; never returns 0.
double open_unit(std::mt19937_64& gen) { return (static_cast<double>(gen() >> 11) + 0.5) * 0x1.0p-53; }

}  // namespace

json params_to_json(const TsneParams& p) {
  json lr = p.learning_rate ? json(*p.learning_rate) : json("auto");
  return {{"perplexity", p.perplexity},
          {"iterations", p.iterations},
          {"early_exaggeration_factor", p.early_exaggeration_factor},
          {"early_exaggeration_iters", p.early_exaggeration_iters},
          {"learning_rate", lr},
          {"momentum_initial", p.momentum_initial},
          {"momentum_final", p.momentum_final},
          {"seed", p.seed},
          {"theta", p.theta}};
}

TsneParams params_from_json(const json& j) {
  TsneParams p;
  p.perplexity = j.at("perplexity").get<double>();
  p.iterations = j.at("iterations").get<int>();
  p.early_exaggeration_factor = j.at("early_exaggeration_factor").get<double>();
  p.early_exaggeration_iters = j.at("early_exaggeration_iters").get<int>();
  if (const auto& lr = j.at("learning_rate"); lr.is_number()) p.learning_rate = lr.get<double>();
  p.momentum_initial = j.at("momentum_initial").get<double>();
  p.momentum_final = j.at("momentum_final").get<double>();
  p.seed = j.at("seed").get<std::uint64_t>();
  p.theta = j.at("theta").get<double>();
  return p;
}

std::vector<std::size_t> weighted_sample_indices(std::span<const std::uint64_t> weights, std::size_t k,
                                                 std::uint64_t seed) {
  const std::size_t n = weights.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (k >= n) return idx;
  // Efraimidis-Spirakis: keep the k largest u^(1/w), compared as log(u)/w.
  std::mt19937_64 gen(seed);
  std::vector<double> key(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = open_unit(gen);
    key[i] = weights[i] == 0 ? -std::numeric_limits<double>::infinity()
                             : std::log(u) / static_cast<double>(weights[i]);
  }
  auto larger = [&](std::size_t a, std::size_t b) { return key[a] != key[b] ? key[a] > key[b] : a < b; };
  std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), larger);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

ExportBundle make_bundle(const Embedding& e, std::span<const PasswordFeatures> f, const Corpus& c,
                         const BundleOptions& opts) {
  const std::size_t m = c.size();
  if (e.coords.size() != m || f.size() != m) {
    throw DomainError("bundle: corpus, embedding and feature table sizes differ (" + std::to_string(m) + ", " +
                      std::to_string(e.coords.size()) + ", " + std::to_string(f.size()) + ")");
  }
  if (opts.clusters && opts.clusters->labels.size() != m) {
    throw DomainError("bundle: cluster labels do not match the corpus size");
  }
  for (const auto& p : e.coords) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw DomainError("bundle: embedding has non-finite coordinates");
  }

  ExportBundle b;
  b.corpus_name = c.name;
  b.corpus_size = m;
  b.privacy = opts.privacy;
  for (const auto& r : opts.highlights) b.highlights.push_back({r.description, r.colour.hex()});

  std::vector<std::size_t> keep;
  if (opts.max_points != 0 && m > opts.max_points) {
    std::vector<std::uint64_t> weights(m);
    for (std::size_t i = 0; i < m; ++i) weights[i] = c[i].count;
    keep = weighted_sample_indices(weights, opts.max_points, opts.sample_seed);
    b.downsampled = true;
  } else {
    keep.resize(m);
    std::iota(keep.begin(), keep.end(), std::size_t{0});
  }

  b.points.reserve(keep.size());
  for (std::size_t i : keep) {
    BundlePoint p;
    p.index = i;
    if (!opts.privacy) p.text = c[i].utf8;
    p.x = e.coords[i].x;
    p.y = e.coords[i].y;
    p.count = c[i].count;
    p.length = f[i].length;
    p.digit_ratio = f[i].digit_ratio;
    p.digit_ratio_decile = f[i].digit_ratio_decile;
    p.digit_position_ratio = f[i].digit_position_ratio;
    p.years = f[i].years_1900s;
    p.years.insert(p.years.end(), f[i].years_2000s.begin(), f[i].years_2000s.end());
    std::sort(p.years.begin(), p.years.end());
    p.numeric_sequence = f[i].has_numeric_sequence;
    p.keyboard_sequence = f[i].has_keyboard_sequence;
    for (std::size_t r = 0; r < opts.highlights.size(); ++r) {
      if (opts.highlights[r].matches(i)) p.highlights.push_back(r);
    }
    if (opts.clusters) p.cluster = opts.clusters->labels[i];
    b.points.push_back(std::move(p));
  }

  if (opts.clusters) {
    const auto& a = *opts.clusters;
    b.cluster_method = std::string(method_name(a.method));
    const auto centers = center_passwords(a, e.coords, c);
    const auto majority = majority_length_labels(a, c);
    std::vector<std::size_t> sizes(a.num_clusters(), 0);
    for (int l : a.labels) {
      if (l >= 0) ++sizes[static_cast<std::size_t>(l)];
    }
    for (std::size_t k = 0; k < a.num_clusters(); ++k) {
      BundleCluster bc;
      bc.label = static_cast<int>(k);
      bc.cx = a.centroids[k].x;
      bc.cy = a.centroids[k].y;
      bc.size = sizes[k];
      for (const auto& ctr : centers) {
        if (ctr.label != bc.label) continue;
        bc.center_index = ctr.index;
        if (!opts.privacy) bc.center_password = ctr.password;
      }
      for (const auto& ml : majority) {
        if (ml.label != bc.label) continue;
        bc.majority_length = ml.length;
        bc.majority_share = ml.share;
      }
      b.clusters.push_back(std::move(bc));
    }
  }

  b.provenance = {{"tsne", params_to_json(e.params)},
                  {"anchor_hash", to_hex(e.anchor_hash)},
                  {"corpus_digest", to_hex(corpus_digest(c))},
                  {"kl_start", e.kl_start},
                  {"kl_final", e.kl_final},
                  {"sample_seed", opts.sample_seed},
                  {"max_points", opts.max_points}};
  for (const auto& [k, v] : opts.extra_provenance.items()) b.provenance[k] = v;
  return b;
}

json bundle_to_json(const ExportBundle& b) {
  json points = json::array();
  for (const auto& p : b.points) points.push_back(point_to_json(p));
  json highlights = json::array();
  for (const auto& h : b.highlights) highlights.push_back({{"description", h.description}, {"colour", h.colour}});
  json j = {{"schema_version", b.schema_version},
            {"corpus", {{"name", b.corpus_name}, {"size", b.corpus_size}}},
            {"privacy", b.privacy},
            {"downsampled", b.downsampled},
            {"highlights", highlights},
            {"points", points},
            {"provenance", b.provenance}};
  if (b.cluster_method) {
    json clusters = json::array();
    for (const auto& c : b.clusters) clusters.push_back(cluster_to_json(c));
    j["clusters"] = {{"method", *b.cluster_method}, {"items", clusters}};
  }
  return j;
}

ExportBundle bundle_from_json(const json& j) {
  if (!j.is_object() || !j.contains("schema_version") || !j.at("schema_version").is_number_integer()) {
    throw VersionError("bundle: missing schema_version");
  }
  const int version = j.at("schema_version").get<int>();
  if (version != kBundleSchemaVersion) {
    throw VersionError("bundle: unsupported schema_version " + std::to_string(version) + " (expected " +
                       std::to_string(kBundleSchemaVersion) + ")");
  }
  try {
    ExportBundle b;
    b.schema_version = version;
    const auto& corpus = j.at("corpus");
    b.corpus_name = get_field<std::string>(corpus, "name");
    b.corpus_size = get_field<std::size_t>(corpus, "size");
    b.privacy = get_field<bool>(j, "privacy");
    b.downsampled = get_field<bool>(j, "downsampled");
    for (const auto& h : j.at("highlights")) {
      b.highlights.push_back({get_field<std::string>(h, "description"), get_field<std::string>(h, "colour")});
    }
    for (const auto& p : j.at("points")) b.points.push_back(point_from_json(p));
    if (j.contains("clusters")) {
      const auto& cl = j.at("clusters");
      b.cluster_method = get_field<std::string>(cl, "method");
      for (const auto& c : cl.at("items")) b.clusters.push_back(cluster_from_json(c));
    }
    b.provenance = j.at("provenance");
    return b;
  } catch (const json::exception& ex) {
    throw VersionError(std::string("bundle: malformed document: ") + ex.what());
  }
}

std::string serialize_bundle(const ExportBundle& b) {
  return bundle_to_json(b).dump(-1, ' ', false, json::error_handler_t::strict) + "\n";
}

ExportBundle parse_bundle(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& ex) {
    throw VersionError(std::string("bundle: not valid JSON: ") + ex.what());
  }
  return bundle_from_json(j);
}

void write_bundle(const std::filesystem::path& path, const ExportBundle& b) {
  write_file_atomic(path, serialize_bundle(b));
}

ExportBundle read_bundle(const std::filesystem::path& path) { return parse_bundle(read_file(path)); }

}  // namespace passviz
