#include "passviz/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>

#include "passviz/bundle.hpp"
#include "passviz/cluster.hpp"
#include "passviz/compare.hpp"
#include "passviz/corpus.hpp"
#include "passviz/embed.hpp"
#include "passviz/error.hpp"
#include "passviz/features.hpp"
#include "passviz/io.hpp"
#include "passviz/metric.hpp"
#include "passviz/parallel.hpp"
#include "passviz/render.hpp"
#include "passviz/unicode.hpp"

namespace passviz {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kProvenanceFile = "provenance.json";
constexpr const char* kMatrixFile = "matrix.pvdm";
constexpr const char* kEmbeddingFile = "embedding.pvem";

unsigned resolve_workers(unsigned flag) { return flag > 0 ? flag : default_workers(); }

fs::path sidecar(const fs::path& artefact) { return fs::path(artefact.string() + ".provenance.json"); }

json provenance_header(const std::string& command, const std::vector<std::string>& args) {
  return {{"tool", "passviz"},
          {"version", std::string(kVersion)},
          {"command", command},
          {"argv", args},
          {"cwd", fs::current_path().string()}};
}

void write_json(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError(dir.string(), "cannot create directory");
}

json read_json(const fs::path& path) {
  const auto text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw VersionError(path.string() + ": not valid JSON: " + e.what());
  }
}

// A finished embed run: its corpus (reloaded and checked against the
// recorded digest) and the embedding.
struct Run {
  fs::path dir;
  json provenance;
  Corpus corpus;
  Embedding embedding;
};

Run load_run(const fs::path& dir) {
  Run r;
  r.dir = dir;
  r.provenance = read_json(dir / kProvenanceFile);
  try {
    const auto& cfg = r.provenance.at("config");
    r.corpus = load_corpus(cfg.at("input_abs").get<std::string>(), parse_input_format(cfg.at("format").get<std::string>()),
                           cfg.at("name").get<std::string>());
    if (const auto k = cfg.at("sample").get<std::size_t>(); k > 0) {
      r.corpus = sample_corpus(r.corpus, k, cfg.at("sample_seed").get<std::uint64_t>());
    }
    if (to_hex(corpus_digest(r.corpus)) != r.provenance.at("corpus_digest").get<std::string>()) {
      throw DomainError("input " + cfg.at("input_abs").get<std::string>() + " changed since the embed run in " +
                        dir.string());
    }
  } catch (const json::exception& e) {
    throw VersionError((dir / kProvenanceFile).string() + ": " + e.what());
  }
  r.embedding = read_embedding(dir / kEmbeddingFile);
  if (r.embedding.coords.size() != r.corpus.size()) {
    throw DomainError("embedding in " + dir.string() + " does not match its corpus");
  }
  return r;
}

json assignment_to_json(const ClusterAssignment& a, const Run& run, bool privacy) {
  json centroids = json::array();
  for (const auto& c : a.centroids) centroids.push_back({c.x, c.y});
  json centers = json::array();
  for (const auto& c : center_passwords(a, run.embedding.coords, run.corpus)) {
    json item = {{"label", c.label}, {"index", c.index}};
    if (!privacy) item["password"] = c.password;
    centers.push_back(item);
  }
  json majority = json::array();
  for (const auto& m : majority_length_labels(a, run.corpus)) {
    majority.push_back({{"label", m.label}, {"length", m.length}, {"share", m.share}});
  }
  return {{"method", std::string(method_name(a.method))},
          {"num_clusters", a.num_clusters()},
          {"noise", a.noise_count()},
          {"labels", a.labels},
          {"centroids", centroids},
          {"centers", centers},
          {"majority_length", majority},
          {"params_used", a.params_used}};
}

ClusterAssignment assignment_from_file(const fs::path& path, std::size_t expected_points) {
  const json j = read_json(path);
  ClusterAssignment a;
  try {
    a.method = parse_cluster_method(j.at("method").get<std::string>());
    a.labels = j.at("labels").get<std::vector<int>>();
    for (const auto& c : j.at("centroids")) a.centroids.push_back({c.at(0).get<double>(), c.at(1).get<double>()});
    a.params_used = j.at("params_used");
  } catch (const json::exception& e) {
    throw VersionError(path.string() + ": not a cluster assignment: " + e.what());
  }
  if (a.labels.size() != expected_points) {
    throw DomainError(path.string() + ": " + std::to_string(a.labels.size()) + " labels for " +
                      std::to_string(expected_points) + " points");
  }
  for (int l : a.labels) {
    if (l < kNoise || l >= static_cast<int>(a.centroids.size())) {
      throw DomainError(path.string() + ": label " + std::to_string(l) + " out of range");
    }
  }
  return a;
}

struct CharAtSpec {
  long position;
  char32_t ch;
};

CharAtSpec parse_char_at(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos || colon == 0) throw UsageError("--char-at expects POS:CHAR, got '" + spec + "'");
  long pos = 0;
  const char* first = spec.data();
  const char* last = spec.data() + colon;
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, pos);
  if (ec != std::errc{} || ptr != last) throw UsageError("--char-at position must be an integer, got '" + spec + "'");
  const auto ch = decode_utf8(std::string_view(spec).substr(colon + 1));
  if (!ch || ch->size() != 1) throw UsageError("--char-at expects exactly one character after ':', got '" + spec + "'");
  return {pos, (*ch)[0]};
}

struct HighlightFlags {
  std::vector<std::string> contains;
  std::vector<std::string> regex;
  std::vector<std::string> char_at;
  bool years = false;
  bool sequences = false;
  std::string shared_with;
  std::string shared_format = "plain";

  bool any() const {
    return !contains.empty() || !regex.empty() || !char_at.empty() || years || sequences || !shared_with.empty();
  }

  void add_to(CLI::App* app) {
    app->add_option("--contains,--highlight-contains", contains, "Highlight passwords containing this substring");
    app->add_option("--regex", regex, "Highlight passwords matching this regular expression (Perl syntax)");
    app->add_option("--char-at", char_at,
                    "Highlight passwords with CHAR at POS (POS:CHAR; negative POS counts from the end, "
                    "write --char-at=-1:x)");
    app->add_flag("--highlight-years", years, "Highlight years 1900-1999 (red) and 2000-2099 (blue)");
    app->add_flag("--highlight-sequences", sequences, "Highlight numeric (red) and keyboard (blue) sequences");
    app->add_option("--shared-with", shared_with, "Highlight passwords that also occur in this dump (red)");
    app->add_option("--shared-format", shared_format, "Format of the --shared-with dump");
  }

  json to_json() const {
    return {{"contains", contains},   {"regex", regex},          {"char_at", char_at},
            {"years", years},         {"sequences", sequences},  {"shared_with", shared_with},
            {"shared_format", shared_format}};
  }
};

// Rules are evaluated once per point up front; the predicates only index
// into the precomputed masks.
HighlightRule mask_rule(std::string description, Rgb colour, std::vector<bool> mask) {
  auto shared = std::make_shared<const std::vector<bool>>(std::move(mask));
  return {std::move(description), colour, [shared](std::size_t i) { return (*shared)[i]; }};
}

std::vector<HighlightRule> build_highlights(const HighlightFlags& h, const Corpus& c,
                                            std::span<const PasswordFeatures> f) {
  static constexpr std::array<Rgb, 6> kCycle = {palette::kBlue,       palette::kPink,
                                                palette::kRed,        palette::kDarkGreen,
                                                Rgb{0xff, 0x7f, 0x00}, Rgb{0xb1, 0x59, 0x28}};
  std::vector<HighlightRule> rules;
  std::size_t next = 0;
  const std::size_t m = c.size();

  for (const auto& s : h.contains) {
    const auto needle = decode_utf8(s);
    if (!needle || needle->empty()) throw UsageError("--contains needs a non-empty UTF-8 string");
    std::vector<bool> mask(m);
    for (std::size_t i = 0; i < m; ++i) mask[i] = c[i].text.find(*needle) != std::u32string::npos;
    rules.push_back(mask_rule("contains '" + s + "'", kCycle[next++ % kCycle.size()], std::move(mask)));
  }
  for (const auto& s : h.regex) {
    const PasswordPattern pattern(s);
    std::vector<bool> mask(m);
    for (std::size_t i = 0; i < m; ++i) mask[i] = pattern.search(c[i].utf8);
    rules.push_back(mask_rule("matches /" + s + "/", kCycle[next++ % kCycle.size()], std::move(mask)));
  }
  if (!h.char_at.empty()) {
    std::vector<bool> all(m, true);
    for (const auto& s : h.char_at) {
      const auto spec = parse_char_at(s);
      std::vector<bool> mask(m);
      for (std::size_t i = 0; i < m; ++i) {
        mask[i] = char_at(c[i].text, spec.position, spec.ch);
        all[i] = all[i] && mask[i];
      }
      const auto ch = spec.position < 0 ? "character " + std::to_string(-spec.position) + " from the end"
                                        : "character " + std::to_string(spec.position);
      rules.push_back(mask_rule(ch + " is '" + encode_utf8(std::u32string(1, spec.ch)) + "'",
                                kCycle[next++ % kCycle.size()], std::move(mask)));
    }
    if (h.char_at.size() > 1) rules.push_back(mask_rule("all character rules", palette::kPurple, std::move(all)));
  }
  if (h.years) {
    std::vector<bool> old(m), recent(m);
    for (std::size_t i = 0; i < m; ++i) {
      old[i] = !f[i].years_1900s.empty();
      recent[i] = !f[i].years_2000s.empty();
    }
    rules.push_back(mask_rule("year 1900-1999", palette::kRed, std::move(old)));
    rules.push_back(mask_rule("year 2000-2099", palette::kBlue, std::move(recent)));
  }
  if (h.sequences) {
    std::vector<bool> numeric(m), keyboard(m);
    for (std::size_t i = 0; i < m; ++i) {
      numeric[i] = f[i].has_numeric_sequence;
      keyboard[i] = f[i].has_keyboard_sequence;
    }
    rules.push_back(mask_rule("numeric sequence", palette::kRed, std::move(numeric)));
    rules.push_back(mask_rule("keyboard sequence", palette::kBlue, std::move(keyboard)));
  }
  if (!h.shared_with.empty()) {
    const auto other = load_corpus(h.shared_with, parse_input_format(h.shared_format));
    rules.push_back(mask_rule("shared with " + other.name, palette::kRed, mark_membership(c, other)));
  }
  return rules;
}

struct TsneFlags {
  CLI::Option* perplexity_opt = nullptr;
  CLI::Option* iterations_opt = nullptr;
  CLI::Option* theta_opt = nullptr;
  CLI::Option* lr_opt = nullptr;
  CLI::Option* ee_factor_opt = nullptr;
  CLI::Option* ee_iters_opt = nullptr;
  double perplexity = 30;
  int iterations = 1000;
  double theta = 0;
  double learning_rate = 0;
  double ee_factor = 12;
  int ee_iters = 250;

  void add_to(CLI::App* app) {
    perplexity_opt = app->add_option("--perplexity", perplexity, "t-SNE perplexity (default 30)");
    iterations_opt = app->add_option("--iterations", iterations, "t-SNE iterations (default 1000)");
    theta_opt = app->add_option("--theta", theta, "Barnes-Hut accuracy; 0 = exact (default 0.5 above 5000 points)");
    lr_opt = app->add_option("--learning-rate", learning_rate, "Learning rate (default max(M/12, 50))");
    ee_factor_opt = app->add_option("--early-exaggeration", ee_factor, "Early exaggeration factor (default 12)");
    ee_iters_opt = app->add_option("--early-exaggeration-iters", ee_iters,
                                   "Early exaggeration iterations and momentum switch (default 250)");
  }

  TsneParams resolve(std::size_t m, std::uint64_t seed) const {
    TsneParams p = TsneParams::defaults_for(m);
    p.seed = seed;
    if (perplexity_opt->count()) p.perplexity = perplexity;
    if (iterations_opt->count()) p.iterations = iterations;
    if (theta_opt->count()) p.theta = theta;
    if (lr_opt->count()) p.learning_rate = learning_rate;
    if (ee_factor_opt->count()) p.early_exaggeration_factor = ee_factor;
    if (ee_iters_opt->count()) p.early_exaggeration_iters = ee_iters;
    return p;
  }
};

// ---- stats ---------------------------------------------------------------

struct StatsCmd {
  std::string input, format = "plain", name, out;
  unsigned workers = 0;
};

int do_stats(const StatsCmd& o, const std::vector<std::string>& args, std::ostream& out) {
  const auto c = load_corpus(o.input, parse_input_format(o.format), o.name);
  const auto s = corpus_stats(c);
  const auto f = feature_table(c, resolve_workers(o.workers));
  const auto deciles = decile_histogram(f);
  json hist = json::object();
  for (const auto& [len, n] : s.length_histogram) hist[std::to_string(len)] = n;
  json dec = json::array();
  for (std::size_t d = 0; d < 11; ++d) {
    dec.push_back({{"decile", d * 10},
                   {"count", deciles[d]},
                   {"share", c.empty() ? 0.0 : 100.0 * static_cast<double>(deciles[d]) / static_cast<double>(c.size())}});
  }
  std::size_t y19 = 0, y20 = 0, numeric = 0, keyboard = 0;
  for (const auto& pf : f) {
    y19 += pf.years_1900s.empty() ? 0 : 1;
    y20 += pf.years_2000s.empty() ? 0 : 1;
    numeric += pf.has_numeric_sequence ? 1 : 0;
    keyboard += pf.has_keyboard_sequence ? 1 : 0;
  }
  const json report = {{"name", c.name},
                       {"unique", s.unique},
                       {"raw_total", s.raw_total},
                       {"skipped", s.skipped},
                       {"min_length", s.min_length},
                       {"max_length", s.max_length},
                       {"length_histogram", hist},
                       {"digit_deciles", dec},
                       {"with_year_1900s", y19},
                       {"with_year_2000s", y20},
                       {"with_numeric_sequence", numeric},
                       {"with_keyboard_sequence", keyboard},
                       {"corpus_digest", to_hex(corpus_digest(c))}};
  if (o.out.empty()) {
    out << report.dump(2) << "\n";
  } else {
    write_json(o.out, report);
    json prov = provenance_header("stats", args);
    prov["config"] = {{"input", o.input}, {"format", o.format}, {"name", c.name}};
    prov["outputs"] = {{fs::path(o.out).filename().string(), to_hex(sha256(report.dump(2) + "\n"))}};
    write_json(sidecar(o.out), prov);
  }
  return 0;
}

// ---- embed ---------------------------------------------------------------

struct EmbedCmd {
  std::string input, format = "plain", name, out;
  std::size_t anchors = 2000;
  std::uint64_t seed = 0;
  std::size_t sample = 0;
  std::string anchor_weighting = "uniform";
  std::size_t batch_rows = 4096;
  unsigned workers = 0;
  TsneFlags tsne;
};

int do_embed(const EmbedCmd& o, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  AnchorWeighting weighting;
  if (o.anchor_weighting == "uniform") {
    weighting = AnchorWeighting::uniform;
  } else if (o.anchor_weighting == "count") {
    weighting = AnchorWeighting::count;
  } else {
    throw UsageError("--anchor-weighting must be uniform or count");
  }
  const unsigned workers = resolve_workers(o.workers);
  const fs::path out_dir = o.out;

  Corpus c = load_corpus(o.input, parse_input_format(o.format), o.name);
  if (o.sample > 0) c = sample_corpus(c, o.sample, o.seed);
  if (c.empty()) throw DomainError(o.input + ": no usable passwords");
  if (o.anchors > c.size()) {
    err << "warning: " << o.anchors << " anchors requested but the corpus has " << c.size()
        << " unique passwords; using all of them\n";
  }
  const TsneParams params = o.tsne.resolve(c.size(), o.seed);
  params.validate(c.size());

  err << "corpus " << c.name << ": " << c.size() << " unique passwords\n";
  const AnchorSet anchors = select_anchors(c, o.anchors, o.seed, weighting);
  const DistanceMatrix matrix = build_distance_matrix(c, anchors, {workers, o.batch_rows});
  err << "distance matrix " << matrix.rows << " x " << matrix.cols << "\n";
  const Embedding e = tsne_embed(matrix, params, workers);
  err << "t-SNE KL " << e.kl_start << " -> " << e.kl_final << "\n";

  const std::string matrix_bytes = serialize_distance_matrix(matrix);
  const std::string embedding_bytes = serialize_embedding(e);

  json prov = provenance_header("embed", args);
  prov["config"] = {{"input", o.input},
                    {"input_abs", fs::absolute(o.input).lexically_normal().string()},
                    {"format", o.format},
                    {"name", c.name},
                    {"sample", o.sample},
                    {"sample_seed", o.seed},
                    {"anchors_requested", o.anchors},
                    {"anchors_used", anchors.size()},
                    {"anchor_weighting", o.anchor_weighting},
                    {"anchor_seed", o.seed},
                    {"batch_rows", o.batch_rows},
                    {"workers", workers},
                    {"tsne", params_to_json(params)},
                    {"learning_rate_resolved", params.resolved_learning_rate(c.size())}};
  prov["corpus_digest"] = to_hex(corpus_digest(c));
  prov["anchor_hash"] = to_hex(anchors.content_hash);
  prov["points"] = c.size();
  prov["kl_start"] = e.kl_start;
  prov["kl_final"] = e.kl_final;
  prov["outputs"] = {{kMatrixFile, to_hex(sha256(matrix_bytes))}, {kEmbeddingFile, to_hex(sha256(embedding_bytes))}};

  ensure_directory(out_dir);
  write_file_atomic(out_dir / kMatrixFile, matrix_bytes);
  write_file_atomic(out_dir / kEmbeddingFile, embedding_bytes);
  write_json(out_dir / kProvenanceFile, prov);
  out << (out_dir / kEmbeddingFile).string() << "\n";
  return 0;
}

// ---- plot ----------------------------------------------------------------

struct ViewFlags {
  int width = 1000, height = 800;
  double point_size = 2.0;
  std::string title;

  void add_to(CLI::App* app) {
    app->add_option("--width", width, "Image width in pixels");
    app->add_option("--height", height, "Image height in pixels");
    app->add_option("--point-size", point_size, "Point radius in pixels");
    app->add_option("--title", title, "Title drawn above the plot");
  }
};

struct PlotCmd {
  std::string run, out, clusters;
  std::vector<std::string> color_by;
  bool annotate = false;
  unsigned workers = 0;
  HighlightFlags highlight;
  ViewFlags view;
};

fs::path with_mode_suffix(const fs::path& p, std::string_view mode) {
  return p.parent_path() / (p.stem().string() + "_" + std::string(mode) + p.extension().string());
}

int do_plot(const PlotCmd& o, const std::vector<std::string>& args, std::ostream& out) {
  const Run run = load_run(o.run);
  const auto f = feature_table(run.corpus, resolve_workers(o.workers));

  std::vector<ColorMode> modes;
  for (const auto& m : o.color_by) modes.push_back(parse_color_mode(m));
  if (modes.empty()) modes.push_back(o.highlight.any() ? ColorMode::highlight : ColorMode::length);

  RenderSpec base;
  base.width = o.view.width;
  base.height = o.view.height;
  base.point_size = o.view.point_size;
  base.title = o.view.title;
  base.highlight_rules = build_highlights(o.highlight, run.corpus, f);
  if (!o.clusters.empty()) base.cluster_labels = assignment_from_file(o.clusters, run.corpus.size()).labels;
  base.annotate_majority_length = o.annotate;
  if (o.annotate && o.clusters.empty()) throw UsageError("--annotate needs --clusters");

  const fs::path target = o.out;
  const auto ext = target.extension().string();
  if (ext != ".svg" && ext != ".png") throw UsageError("unsupported image extension '" + ext + "' (expected .svg or .png)");

  struct Image {
    fs::path path;
    ColorMode mode;
    std::string bytes;
  };
  std::vector<Image> images;
  for (const auto mode : modes) {
    if (mode == ColorMode::cluster && base.cluster_labels.empty()) throw UsageError("--color-by cluster needs --clusters");
    RenderSpec spec = base;
    spec.color_mode = mode;
    const fs::path path = modes.size() == 1 ? target : with_mode_suffix(target, color_mode_name(mode));
    images.push_back({path, mode,
                      ext == ".svg" ? render_svg(run.embedding.coords, f, spec)
                                    : render_png(run.embedding.coords, f, spec)});
  }
  for (const auto& [path, mode, bytes] : images) {
    json prov = provenance_header("plot", args);
    prov["config"] = {{"run", o.run},
                      {"color_mode", std::string(color_mode_name(mode))},
                      {"highlight", o.highlight.to_json()},
                      {"clusters", o.clusters},
                      {"annotate", o.annotate},
                      {"width", o.view.width},
                      {"height", o.view.height},
                      {"point_size", o.view.point_size},
                      {"title", o.view.title}};
    prov["run_outputs"] = run.provenance.at("outputs");
    json rules = json::array();
    for (const auto& r : base.highlight_rules) rules.push_back({{"description", r.description}, {"colour", r.colour.hex()}});
    prov["highlight_rules"] = rules;
    prov["outputs"] = {{path.filename().string(), to_hex(sha256(bytes))}};
    write_file_atomic(path, bytes);
    write_json(sidecar(path), prov);
    out << path.string() << "\n";
  }
  return 0;
}

// ---- cluster -------------------------------------------------------------

struct ClusterCmd {
  std::string run, out, method = "kmeans", extraction = "xi";
  CLI::Option* k_opt = nullptr;
  CLI::Option* eps_opt = nullptr;
  std::size_t k = 0;
  double eps = 0;
  std::size_t min_pts = 5;
  double xi = 0.05;
  std::size_t min_cluster_size = 0;
  std::uint64_t seed = 0;
  bool privacy = false;
  ViewFlags view;
};

int do_cluster(const ClusterCmd& o, const std::vector<std::string>& args, std::ostream& out) {
  const Run run = load_run(o.run);
  const auto& pts = run.embedding.coords;
  const ClusterMethod method = parse_cluster_method(o.method);
  ClusterAssignment a;
  switch (method) {
    case ClusterMethod::kmeans:
      if (!o.k_opt->count()) throw UsageError("--method kmeans needs --k");
      a = kmeans(pts, o.k, o.seed);
      break;
    case ClusterMethod::dbscan:
      if (!o.eps_opt->count()) throw UsageError("--method dbscan needs --eps");
      a = dbscan(pts, o.eps, o.min_pts);
      break;
    case ClusterMethod::optics: {
      OpticsOptions opts;
      opts.min_pts = o.min_pts;
      opts.xi = o.xi;
      opts.min_cluster_size = o.min_cluster_size;
      if (o.extraction == "eps") {
        if (!o.eps_opt->count()) throw UsageError("--extraction eps needs --eps");
        opts.extraction = OpticsExtraction::eps_cut;
        opts.cut_eps = o.eps;
      } else if (o.extraction != "xi") {
        throw UsageError("--extraction must be xi or eps");
      }
      a = optics(pts, opts);
      break;
    }
  }

  const json assignment = assignment_to_json(a, run, o.privacy);
  const auto f = feature_table(run.corpus, 1);
  RenderSpec spec;
  spec.color_mode = ColorMode::cluster;
  spec.cluster_labels = a.labels;
  spec.annotate_majority_length = true;
  spec.width = o.view.width;
  spec.height = o.view.height;
  spec.point_size = o.view.point_size;
  spec.title = o.view.title;
  const std::string svg = render_svg(pts, f, spec);
  const std::string assignment_text = assignment.dump(2) + "\n";

  json prov = provenance_header("cluster", args);
  prov["config"] = {{"run", o.run},       {"method", o.method},   {"k", o.k},
                    {"eps", o.eps},       {"min_pts", o.min_pts}, {"xi", o.xi},
                    {"extraction", o.extraction}, {"min_cluster_size", o.min_cluster_size},
                    {"seed", o.seed},     {"privacy", o.privacy}};
  prov["run_outputs"] = run.provenance.at("outputs");
  prov["outputs"] = {{"assignment.json", to_hex(sha256(assignment_text))}, {"clusters.svg", to_hex(sha256(svg))}};

  const fs::path dir = o.out;
  ensure_directory(dir);
  write_file_atomic(dir / "assignment.json", assignment_text);
  write_file_atomic(dir / "clusters.svg", svg);
  write_json(dir / kProvenanceFile, prov);
  out << a.num_clusters() << " clusters, " << a.noise_count() << " noise points\n";
  return 0;
}

// ---- compare -------------------------------------------------------------

struct CompareCmd {
  std::vector<std::string> inputs;
  std::string format = "plain", format_b, out, run;
  bool include_shared = false;
  ViewFlags view;
};

int do_compare(const CompareCmd& o, const std::vector<std::string>& args, std::ostream& out) {
  const Corpus a = load_corpus(o.inputs.at(0), parse_input_format(o.format));
  const Corpus b = load_corpus(o.inputs.at(1), parse_input_format(o.format_b.empty() ? o.format : o.format_b));
  const auto report = intersect(a, b);
  const auto profile = compare_digit_profiles(a, b);
  json doc = report_to_json(report, a, b, o.include_shared);
  doc["digit_profile"] = profile_to_json(profile);
  const std::string report_text = doc.dump(2) + "\n";
  const std::string profile_svg = render_profile_svg(profile.share_a, profile.share_b, a.name, b.name);

  std::vector<std::pair<std::string, std::string>> files = {{"report.json", report_text},
                                                            {"digit_profile.svg", profile_svg}};
  if (!o.run.empty()) {
    const Run run = load_run(o.run);
    const auto f = feature_table(run.corpus, 1);
    RenderSpec spec;
    spec.color_mode = ColorMode::highlight;
    spec.highlight_rules.push_back(mask_rule("shared with " + b.name, palette::kRed, mark_membership(run.corpus, b)));
    spec.width = o.view.width;
    spec.height = o.view.height;
    spec.point_size = o.view.point_size;
    spec.title = o.view.title;
    files.emplace_back("shared.svg", render_svg(run.embedding.coords, f, spec));
  }
  if (o.include_shared) {
    std::string lines;
    for (const auto& s : report.shared) lines += s + "\n";
    files.emplace_back("intersection.txt", lines);
  }

  json prov = provenance_header("compare", args);
  prov["config"] = {{"inputs", o.inputs},
                    {"format", o.format},
                    {"format_b", o.format_b},
                    {"run", o.run},
                    {"include_shared", o.include_shared}};
  prov["corpus_digests"] = {to_hex(corpus_digest(a)), to_hex(corpus_digest(b))};
  json outputs = json::object();
  for (const auto& [name, bytes] : files) outputs[name] = to_hex(sha256(bytes));
  prov["outputs"] = outputs;

  const fs::path dir = o.out;
  ensure_directory(dir);
  for (const auto& [name, bytes] : files) write_file_atomic(dir / name, bytes);
  write_json(dir / kProvenanceFile, prov);
  out << report.count << " shared passwords (" << report.pct_of_a << "% of " << a.name << ", " << report.pct_of_b
      << "% of " << b.name << ")\n";
  return 0;
}

// ---- export --------------------------------------------------------------

struct ExportCmd {
  std::string run, out, clusters;
  bool privacy = false, full = false;
  std::size_t max_points = kDefaultBundleCap;
  std::uint64_t sample_seed = 0;
  HighlightFlags highlight;
};

int do_export(const ExportCmd& o, const std::vector<std::string>& args, std::ostream& out) {
  const Run run = load_run(o.run);
  const auto f = feature_table(run.corpus, 1);
  std::optional<ClusterAssignment> assignment;
  if (!o.clusters.empty()) assignment = assignment_from_file(o.clusters, run.corpus.size());

  BundleOptions opts;
  opts.privacy = o.privacy;
  opts.max_points = o.full ? 0 : o.max_points;
  opts.sample_seed = o.sample_seed;
  opts.clusters = assignment ? &*assignment : nullptr;
  opts.highlights = build_highlights(o.highlight, run.corpus, f);
  opts.extra_provenance = {{"run_outputs", run.provenance.at("outputs")},
                           {"corpus_digest_run", run.provenance.at("corpus_digest")}};
  const ExportBundle bundle = make_bundle(run.embedding, f, run.corpus, opts);
  const std::string text = serialize_bundle(bundle);

  json prov = provenance_header("export", args);
  prov["config"] = {{"run", o.run},
                    {"clusters", o.clusters},
                    {"privacy", o.privacy},
                    {"max_points", opts.max_points},
                    {"sample_seed", o.sample_seed},
                    {"highlight", o.highlight.to_json()}};
  prov["outputs"] = {{fs::path(o.out).filename().string(), to_hex(sha256(text))}};
  write_file_atomic(o.out, text);
  write_json(sidecar(o.out), prov);
  out << bundle.points.size() << " points written to " << o.out << (bundle.downsampled ? " (downsampled)" : "")
      << "\n";
  return 0;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// ---- rerun ---------------------------------------------------------------

int do_rerun(const std::string& provenance_path, std::ostream& out, std::ostream& err) {
  const json prov = read_json(provenance_path);
  std::vector<std::string> argv;
  fs::path cwd;
  try {
    argv = prov.at("argv").get<std::vector<std::string>>();
    cwd = prov.at("cwd").get<std::string>();
  } catch (const json::exception& e) {
    throw VersionError(provenance_path + ": not a provenance record: " + e.what());
  }
  if (!argv.empty() && argv.front() == "rerun") throw UsageError("refusing to rerun a rerun record");
  const fs::path here = fs::current_path();
  std::error_code ec;
  fs::current_path(cwd, ec);
  if (ec) throw IoError(cwd.string(), "cannot enter recorded working directory");
  struct Restore {
    fs::path dir;
    ~Restore() {
      std::error_code ignored;
      fs::current_path(dir, ignored);
    }
  } restore{here};
  return dispatch(argv, out, err);
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"passviz: embed and explore password corpora", "passviz"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  app.fallthrough(false);

  StatsCmd stats;
  auto* s = app.add_subcommand("stats", "Corpus statistics as JSON");
  s->add_option("--input", stats.input, "Password dump")->required();
  s->add_option("--format", stats.format, "plain or user-colon-password");
  s->add_option("--name", stats.name, "Corpus name (default: file stem)");
  s->add_option("--out", stats.out, "Write the report here instead of stdout");
  s->add_option("--workers", stats.workers, "Worker threads (default PASSVIZ_WORKERS or all cores)");

  EmbedCmd embed;
  auto* e = app.add_subcommand("embed", "Anchor distance matrix and t-SNE embedding");
  e->add_option("--input", embed.input, "Password dump")->required();
  e->add_option("--format", embed.format, "plain or user-colon-password");
  e->add_option("--name", embed.name, "Corpus name (default: file stem)");
  e->add_option("--anchors", embed.anchors, "Number of anchor passwords (default 2000)")
      ->check(CLI::PositiveNumber);
  e->add_option("--seed", embed.seed, "Seed for sampling, anchors and t-SNE");
  e->add_option("--sample", embed.sample, "Embed a seeded uniform sample of this many passwords");
  e->add_option("--anchor-weighting", embed.anchor_weighting, "uniform (default) or count");
  e->add_option("--batch-rows", embed.batch_rows, "Rows per distance-matrix work unit")->check(CLI::PositiveNumber);
  e->add_option("--workers", embed.workers, "Worker threads (default PASSVIZ_WORKERS or all cores)");
  e->add_option("--out", embed.out, "Output directory")->required();
  embed.tsne.add_to(e);

  PlotCmd plot;
  auto* p = app.add_subcommand("plot", "Scatter plot of an embedding");
  p->add_option("--run", plot.run, "Directory written by embed")->required();
  p->add_option("--out", plot.out, "Image path (.svg or .png)")->required();
  p->add_option("--color-by", plot.color_by,
                "length, digit_ratio, digit_position, highlight or cluster (repeat for several images)");
  p->add_option("--clusters", plot.clusters, "assignment.json written by cluster");
  p->add_flag("--annotate", plot.annotate, "Write the majority length over each cluster");
  p->add_option("--workers", plot.workers, "Worker threads");
  plot.highlight.add_to(p);
  plot.view.add_to(p);

  ClusterCmd cluster;
  auto* c = app.add_subcommand("cluster", "Cluster the 2-D embedding");
  c->add_option("--run", cluster.run, "Directory written by embed")->required();
  c->add_option("--out", cluster.out, "Output directory")->required();
  c->add_option("--method", cluster.method, "kmeans, dbscan or optics");
  cluster.k_opt = c->add_option("--k", cluster.k, "Number of k-means clusters")->check(CLI::PositiveNumber);
  cluster.eps_opt = c->add_option("--eps", cluster.eps, "DBSCAN radius / OPTICS cut threshold");
  c->add_option("--min-pts", cluster.min_pts, "Density threshold (default 5)")->check(CLI::PositiveNumber);
  c->add_option("--xi", cluster.xi, "OPTICS steepness (default 0.05)");
  c->add_option("--extraction", cluster.extraction, "OPTICS extraction: xi (default) or eps");
  c->add_option("--min-cluster-size", cluster.min_cluster_size, "OPTICS minimum cluster size (default min-pts)");
  c->add_option("--seed", cluster.seed, "k-means seed");
  c->add_flag("--privacy", cluster.privacy, "Omit centre passwords from the assignment");
  cluster.view.add_to(c);

  CompareCmd compare;
  auto* m = app.add_subcommand("compare", "Intersection and digit profiles of two dumps");
  m->add_option("--input", compare.inputs, "The two dumps (A then B)")->required()->expected(2);
  m->add_option("--format", compare.format, "Format of A (and of B unless --format-b)");
  m->add_option("--format-b", compare.format_b, "Format of B");
  m->add_option("--run", compare.run, "embed run of A; adds shared.svg with shared passwords in red");
  m->add_flag("--include-shared", compare.include_shared, "List the shared passwords in the report");
  m->add_option("--out", compare.out, "Output directory")->required();
  compare.view.add_to(m);

  ExportCmd exp;
  auto* x = app.add_subcommand("export", "JSON bundle for the viewer");
  x->add_option("--run", exp.run, "Directory written by embed")->required();
  x->add_option("--out", exp.out, "Bundle path")->required();
  x->add_option("--clusters", exp.clusters, "assignment.json written by cluster");
  x->add_flag("--privacy", exp.privacy, "Omit password texts");
  x->add_option("--max-points", exp.max_points, "Downsample above this many points (default 50000)")
      ->check(CLI::PositiveNumber);
  x->add_flag("--full", exp.full, "Never downsample");
  x->add_option("--sample-seed", exp.sample_seed, "Seed for downsampling");
  exp.highlight.add_to(x);

  std::string rerun_path;
  auto* r = app.add_subcommand("rerun", "Repeat the command recorded in a provenance file");
  r->add_option("provenance", rerun_path, "provenance JSON")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? 0 : exit_code_for(ErrorKind::usage);
  }

  if (*s) return do_stats(stats, args, out);
  if (*e) return do_embed(embed, args, out, err);
  if (*p) return do_plot(plot, args, out);
  if (*c) return do_cluster(cluster, args, out);
  if (*m) return do_compare(compare, args, out);
  if (*x) return do_export(exp, args, out);
  if (*r) return do_rerun(rerun_path, out, err);
  return exit_code_for(ErrorKind::usage);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(args, out, err);
  } catch (const Error& ex) {
    err << "passviz: " << ex.what() << "\n";
    return exit_code_for(ex.kind());
  } catch (const std::exception& ex) {
    err << "passviz: " << ex.what() << "\n";
    return 1;
  }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, out, err);
}

}  // namespace passviz
