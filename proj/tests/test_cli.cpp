#include <doctest.h>

#include <fstream>
#include <random>
#include <regex>
#include <set>
#include <sstream>

#include <json.hpp>

#include "passviz/bundle.hpp"
#include "passviz/cli.hpp"
#include "passviz/embed.hpp"
#include "synthetic.hpp"

using namespace passviz;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

// Three password families that are far apart in edit distance.
std::vector<std::string> three_families() {
  std::vector<std::string> pw;
  std::mt19937_64 gen(5);
  for (int i = 0; i < 40; ++i) {
    std::string d;
    for (int k = 0; k < 10; ++k) d.push_back(static_cast<char>('0' + gen() % 10));
    pw.push_back(d);
    pw.push_back("hello" + std::to_string(i));
    std::string s = "QWERTY!";
    s.push_back(static_cast<char>('A' + i % 26));
    s.push_back(static_cast<char>('a' + i / 26));
    pw.push_back(s);
  }
  return pw;
}

struct Workspace {
  fs::path dir = testing::temp_dir("cli");
  fs::path input = dir / "pw.txt";
  Workspace() { testing::write_lines(input, three_families()); }
  ~Workspace() { fs::remove_all(dir); }
  std::string p(const std::string& leaf) const { return (dir / leaf).string(); }

  Result embed(const std::string& out) const {
    return run({"embed", "--input", input.string(), "--anchors", "25", "--seed", "1", "--perplexity", "10",
                "--iterations", "300", "--workers", "2", "--out", p(out)});
  }
};

}  // namespace

TEST_CASE("embed writes matrix, embedding and provenance deterministically") {
  Workspace w;
  REQUIRE(w.embed("r1").code == 0);
  REQUIRE(w.embed("r2").code == 0);
  for (const char* f : {"matrix.pvdm", "embedding.pvem"}) {
    CHECK_MESSAGE(slurp(w.dir / "r1" / f) == slurp(w.dir / "r2" / f), f);
  }
  const auto e = read_embedding(w.dir / "r1" / "embedding.pvem");
  CHECK(e.coords.size() == 120);
  const auto prov = read_json(w.dir / "r1" / "provenance.json");
  CHECK(prov.contains("argv"));
  CHECK(prov.contains("anchor_hash"));
  CHECK(prov.contains("corpus_digest"));
}

TEST_CASE("anchor count above the corpus size is clamped with a warning") {
  Workspace w;
  const auto r = run({"embed", "--input", w.input.string(), "--anchors", "5000", "--iterations", "260", "--perplexity",
                      "10", "--out", w.p("r")});
  REQUIRE(r.code == 0);
  CHECK(r.err.find("warning") != std::string::npos);
  CHECK(read_json(w.dir / "r" / "provenance.json").dump().find("5000") != std::string::npos);
}

TEST_CASE("plot output is deterministic and highlights only matches") {
  Workspace w;
  REQUIRE(w.embed("r").code == 0);
  REQUIRE(run({"plot", "--run", w.p("r"), "--out", w.p("a.svg"), "--highlight-contains", "hello"}).code == 0);
  REQUIRE(run({"plot", "--run", w.p("r"), "--out", w.p("b.svg"), "--highlight-contains", "hello"}).code == 0);
  const auto svg = slurp(w.dir / "a.svg");
  CHECK(svg == slurp(w.dir / "b.svg"));
  CHECK(fs::exists(w.dir / "a.svg.provenance.json"));

  // Corpus order is family-interleaved: digits, hello, QWERTY.
  static const std::regex re(R"re(data-i="(\d+)"[^>]*fill="(#[0-9a-f]{6})")re");
  std::size_t grey = 0, coloured = 0;
  for (std::sregex_iterator it(svg.begin(), svg.end(), re), end; it != end; ++it) {
    const auto i = std::stoul((*it)[1]);
    const bool hello = i % 3 == 1;
    const bool is_grey = (*it)[2] == "#c0c0c0";
    CHECK(hello != is_grey);
    (is_grey ? grey : coloured)++;
  }
  CHECK(coloured == 40);
  CHECK(grey == 80);
}

TEST_CASE("plot colour modes") {
  Workspace w;
  REQUIRE(w.embed("r").code == 0);
  REQUIRE(run({"plot", "--run", w.p("r"), "--out", w.p("d.svg"), "--color-by", "digit_ratio"}).code == 0);
  CHECK(slurp(w.dir / "d.svg").find("data-mode=\"digit_ratio\"") != std::string::npos);
  REQUIRE(run({"plot", "--run", w.p("r"), "--out", w.p("y.png"), "--highlight-years"}).code == 0);
  CHECK(fs::file_size(w.dir / "y.png") > 100);
  CHECK(run({"plot", "--run", w.p("r"), "--out", w.p("z.svg"), "--color-by", "rainbow"}).code == 1);
  CHECK(run({"plot", "--run", w.p("r"), "--out", w.p("z.gif")}).code == 1);
  CHECK(run({"plot", "--run", w.p("r"), "--out", w.p("z.svg"), "--regex", "(unclosed"}).code == 1);
  CHECK_FALSE(fs::exists(w.dir / "z.svg"));
  CHECK_FALSE(fs::exists(w.dir / "z.gif"));
}

TEST_CASE("cluster kmeans k=3 records three clusters") {
  Workspace w;
  REQUIRE(w.embed("r").code == 0);
  REQUIRE(run({"cluster", "--run", w.p("r"), "--method", "kmeans", "--k", "3", "--seed", "2", "--out", w.p("c")})
              .code == 0);
  const auto a = read_json(w.dir / "c" / "assignment.json");
  CHECK(a["method"] == "kmeans");
  CHECK(a["num_clusters"] == 3);
  CHECK(a["labels"].size() == 120);
  CHECK(a["centroids"].size() == 3);
  CHECK(fs::exists(w.dir / "c" / "clusters.svg"));
  CHECK(fs::exists(w.dir / "c" / "provenance.json"));
  for (const auto& c : a["centers"]) CHECK(c.contains("password"));
  REQUIRE(run({"cluster", "--run", w.p("r"), "--method", "kmeans", "--k", "3", "--privacy", "--out", w.p("cp")})
              .code == 0);
  for (const auto& c : read_json(w.dir / "cp" / "assignment.json")["centers"]) CHECK_FALSE(c.contains("password"));

  CHECK(run({"cluster", "--run", w.p("r"), "--method", "kmeans", "--out", w.p("c2")}).code == 1);
  CHECK(run({"cluster", "--run", w.p("r"), "--method", "dbscan", "--out", w.p("c3")}).code == 1);
  CHECK(run({"cluster", "--run", w.p("r"), "--method", "optics", "--min-pts", "4", "--out", w.p("c4")}).code == 0);
  CHECK(read_json(w.dir / "c4" / "assignment.json")["params_used"].contains("reachability"));
}

TEST_CASE("compare of a corpus with itself is a full intersection") {
  Workspace w;
  REQUIRE(run({"compare", "--input", w.input.string(), "--input", w.input.string(), "--out", w.p("cmp")}).code == 0);
  const auto r = read_json(w.dir / "cmp" / "report.json");
  CHECK(r["count"] == 120);
  CHECK(r["pct_of_a"] == 100.0);
  CHECK(r["pct_of_b"] == 100.0);
  CHECK_FALSE(r.contains("shared"));
  CHECK(fs::exists(w.dir / "cmp" / "digit_profile.svg"));
  CHECK(run({"compare", "--input", w.input.string(), "--out", w.p("cmp2")}).code == 1);
}

TEST_CASE("export with and without privacy") {
  Workspace w;
  REQUIRE(w.embed("r").code == 0);
  REQUIRE(run({"export", "--run", w.p("r"), "--out", w.p("open.json")}).code == 0);
  REQUIRE(run({"export", "--run", w.p("r"), "--out", w.p("private.json"), "--privacy"}).code == 0);
  const auto open = read_bundle(w.dir / "open.json");
  const auto priv = read_bundle(w.dir / "private.json");
  REQUIRE(priv.points.size() == 120);
  for (const auto& p : priv.points) CHECK_FALSE(p.text.has_value());
  std::size_t with_text = 0;
  for (const auto& p : open.points) with_text += p.text.has_value();
  CHECK(with_text == 120);
  CHECK(slurp(w.dir / "private.json").find("hello1") == std::string::npos);
}

TEST_CASE("rerun reproduces an embed from its provenance") {
  Workspace w;
  REQUIRE(w.embed("r").code == 0);
  const auto before = slurp(w.dir / "r" / "embedding.pvem");
  fs::remove(w.dir / "r" / "embedding.pvem");
  const auto cwd = fs::current_path();
  const auto r = run({"rerun", w.p("r/provenance.json")});
  fs::current_path(cwd);
  REQUIRE(r.code == 0);
  CHECK(slurp(w.dir / "r" / "embedding.pvem") == before);
}

TEST_CASE("exit codes") {
  Workspace w;
  CHECK(run({}).code == 1);
  CHECK(run({"frobnicate"}).code == 1);
  CHECK(run({"--help"}).code == 0);
  CHECK(run({"embed", "--input", w.p("missing.txt"), "--out", w.p("x")}).code == 2);
  CHECK_FALSE(fs::exists(w.dir / "x"));
  CHECK(run({"embed", "--input", w.input.string(), "--perplexity", "500", "--out", w.p("y")}).code == 1);
  CHECK(run({"embed", "--input", w.input.string(), "--learning-rate", "1e308", "--iterations", "260", "--perplexity",
             "10", "--out", w.p("z")})
            .code == 3);
  CHECK_FALSE(fs::exists(w.dir / "z" / "embedding.pvem"));
  CHECK(run({"plot", "--run", w.p("nothing-here"), "--out", w.p("a.svg")}).code == 2);
}

TEST_CASE("stats report") {
  Workspace w;
  const auto r = run({"stats", "--input", w.input.string(), "--out", w.p("s.json")});
  REQUIRE(r.code == 0);
  const auto j = read_json(w.dir / "s.json");
  CHECK(j.dump().find("120") != std::string::npos);
  CHECK(fs::exists(w.dir / "s.json.provenance.json"));
}
