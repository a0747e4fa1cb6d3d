#include <doctest.h>

#include <random>
#include <set>

#include "passviz/corpus.hpp"
#include "passviz/error.hpp"
#include "passviz/metric.hpp"
#include "synthetic.hpp"

using namespace passviz;
using testing::u32;

TEST_CASE("example pairs") {
  CHECK(levenshtein_utf8("romans56", "blahblah") == 8);
  CHECK(levenshtein_utf8("bahamut24ritter", "Bonito12") == 13);
  CHECK(levenshtein_utf8("rahasia23", "abhilash298471") == 11);
  CHECK(levenshtein_utf8("anfield", "cutlass") == 7);
  CHECK(levenshtein_utf8("anfield", "denire") == 6);
  CHECK(levenshtein_utf8("anfield", "anfield") == 0);
  CHECK(levenshtein_utf8("", "abc") == 3);
  CHECK(levenshtein_utf8("abc", "") == 3);
  CHECK(levenshtein_utf8("hello123", "hello12") == 1);
}

TEST_CASE("rotated digits cost three deletions and three insertions") {
  // Moving "123" from the end to the front: no alignment beats 6 edits.
  CHECK(levenshtein_utf8("hello123", "123hello") == 6);
  CHECK(testing::oracle_levenshtein(u32("hello123"), u32("123hello")) == 6);
}

TEST_CASE("ten-password matrix agrees with the recurrence") {
  const auto& pw = testing::kTenPasswords;
  for (std::size_t i = 0; i < pw.size(); ++i) {
    for (std::size_t j = 0; j < pw.size(); ++j) {
      const auto got = levenshtein_utf8(pw[i], pw[j]);
      CHECK(got == testing::oracle_levenshtein(u32(pw[i]), u32(pw[j])));
      // The printed table differs from the recurrence only at denire/nathalie.
      const bool disputed = (pw[i] == "denire" && pw[j] == "nathalie") || (pw[i] == "nathalie" && pw[j] == "denire");
      if (!disputed) CHECK(got == static_cast<std::size_t>(testing::kTenPasswordMatrix[i][j]));
    }
  }
  CHECK(levenshtein_utf8("denire", "nathalie") == 7);
}

TEST_CASE("code points, not bytes") {
  CHECK(levenshtein_utf8("caf\xC3\xA9", "cafe") == 1);
  CHECK(levenshtein_utf8("\xF0\x9F\x94\x91", "") == 1);
  // Combining sequences are not normalised: e + U+0301 vs U+00E9.
  CHECK(levenshtein_utf8("e\xCC\x81", "\xC3\xA9") == 2);
}

TEST_CASE("exhaustive agreement with the naive recursion on short strings") {
  // Lengths 0..5 over {a,b,1} here; the acceptance run covers up to 8.
  const std::u32string alphabet = U"ab1";
  std::vector<std::u32string> all = {U""};
  for (std::size_t len = 1, begin = 0; len <= 5; ++len) {
    const std::size_t end = all.size();
    for (std::size_t i = begin; i < end; ++i) {
      for (char32_t c : alphabet) all.push_back(all[i] + c);
    }
    begin = end;
  }
  std::size_t mismatches = 0;
  for (const auto& a : all) {
    for (const auto& b : all) {
      if (levenshtein(a, b) != testing::oracle_levenshtein(a, b)) ++mismatches;
    }
  }
  CHECK(mismatches == 0);
  CHECK(levenshtein(U"ab1ab", U"1ba") == testing::naive_levenshtein(U"ab1ab", U"1ba"));
}

TEST_CASE("metric axioms and bounds on random pairs") {
  const auto s = testing::random_strings(3000, 0, 14, U"abcde12", 77);
  for (std::size_t i = 0; i + 2 < s.size(); i += 3) {
    const auto &a = s[i], &b = s[i + 1], &c = s[i + 2];
    const auto ab = levenshtein(a, b), bc = levenshtein(b, c), ac = levenshtein(a, c);
    CHECK(levenshtein(a, a) == 0);
    CHECK(ab == levenshtein(b, a));
    CHECK(ac <= ab + bc);
    CHECK(ab <= std::max(a.size(), b.size()));
    CHECK(ab >= (a.size() > b.size() ? a.size() - b.size() : b.size() - a.size()));
  }
}

TEST_CASE("anchor selection") {
  const auto c = make_corpus("c", testing::synthetic_passwords(50, 1));
  const auto all = select_anchors(c, 50, 3);
  CHECK(all.size() == 50);
  std::set<std::u32string> got(all.anchors.begin(), all.anchors.end());
  CHECK(got.size() == 50);

  const auto a1 = select_anchors(c, 20, 7);
  const auto a2 = select_anchors(c, 20, 7);
  CHECK(a1.anchors == a2.anchors);
  CHECK(a1.content_hash == a2.content_hash);
  const auto b = select_anchors(c, 20, 2);
  CHECK(b.size() == 20);
  CHECK(b.anchors != a1.anchors);
  CHECK(b.content_hash != a1.content_hash);

  CHECK(select_anchors(c, 500, 1).size() == 50);
  CHECK_THROWS_AS(select_anchors(Corpus{}, 5, 1), DomainError);
  CHECK(select_anchors(c, 20, 7, AnchorWeighting::count).size() == 20);
}

TEST_CASE("content hash follows the ordered anchor list") {
  const auto a = make_anchor_set({U"x", U"y"});
  const auto b = make_anchor_set({U"y", U"x"});
  const auto c = make_anchor_set({U"x", U"y"}, 99, "other");
  CHECK(a.content_hash != b.content_hash);
  CHECK(a.content_hash == c.content_hash);
  CHECK_THROWS_AS(make_anchor_set({U"x", U"x"}), DomainError);
  CHECK_THROWS_AS(make_anchor_set({}), DomainError);
}

TEST_CASE("matrix of the ten passwords against themselves") {
  const auto c = make_corpus("ten", testing::kTenPasswords);
  std::vector<std::u32string> texts;
  for (const auto& r : c.records) texts.push_back(r.text);
  const auto m = build_distance_matrix(c, make_anchor_set(texts));
  REQUIRE(m.rows == 10);
  REQUIRE(m.cols == 10);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(m.at(i, i) == 0);
    for (std::size_t j = 0; j < 10; ++j) CHECK(m.at(i, j) == m.at(j, i));
  }
}

TEST_CASE("50 x 20 matrix equals the oracle") {
  const auto c = make_corpus("c", testing::synthetic_passwords(50, 5));
  const auto s = select_anchors(c, 20, 5);
  const auto m = build_distance_matrix(c, s);
  for (std::size_t i = 0; i < 50; ++i) {
    for (std::size_t j = 0; j < 20; ++j) {
      CHECK(m.at(i, j) == testing::oracle_levenshtein(c[i].text, s.anchors[j]));
    }
  }
  CHECK(m.anchor_hash == s.content_hash);
  CHECK(m.anchors_utf8.size() == 20);
}

TEST_CASE("matrix is independent of worker count and batch size") {
  const auto c = make_corpus("c", testing::synthetic_passwords(700, 6));
  const auto s = select_anchors(c, 40, 1);
  const auto m1 = build_distance_matrix(c, s, {1, 4096});
  CHECK(build_distance_matrix(c, s, {4, 7}) == m1);
  CHECK(build_distance_matrix(c, s, {8, 1}) == m1);
  CHECK(serialize_distance_matrix(build_distance_matrix(c, s, {3, 64})) == serialize_distance_matrix(m1));
}

TEST_CASE("anchor rows") {
  const auto c = make_corpus("c", testing::synthetic_passwords(60, 8));
  const auto s = select_anchors(c, 15, 4);
  const auto m = build_distance_matrix(c, s);
  for (std::size_t j = 0; j < s.size(); ++j) CHECK(anchor_row(s.anchors[j], s)[j] == 0);
  for (std::size_t i = 0; i < c.size(); ++i) {
    const auto row = anchor_row(c[i].text, s);
    CHECK(std::equal(row.begin(), row.end(), m.row(i).begin()));
  }
  const auto p = anchor_row(U"hello123", s), q = anchor_row(U"hello12", s);
  for (std::size_t j = 0; j < s.size(); ++j) CHECK(std::abs(int(p[j]) - int(q[j])) <= 1);
}

TEST_CASE("row differences are bounded by the distance between the passwords") {
  const auto c = make_corpus("c", testing::synthetic_passwords(40, 12));
  const auto s = select_anchors(c, 25, 2);
  const auto words = testing::random_strings(60, 1, 12, U"abc123!", 5);
  for (std::size_t i = 0; i + 1 < words.size(); i += 2) {
    const auto d = static_cast<int>(levenshtein(words[i], words[i + 1]));
    const auto p = anchor_row(words[i], s), q = anchor_row(words[i + 1], s);
    for (std::size_t j = 0; j < s.size(); ++j) CHECK(std::abs(int(p[j]) - int(q[j])) <= d);
  }
}

TEST_CASE("values respect the length bounds") {
  const auto c = make_corpus("c", testing::synthetic_passwords(100, 13));
  const auto s = select_anchors(c, 30, 3);
  const auto m = build_distance_matrix(c, s);
  for (std::size_t i = 0; i < c.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      const auto la = c[i].length(), lb = s.anchors[j].size();
      CHECK(m.at(i, j) <= std::max(la, lb));
      CHECK(m.at(i, j) >= (la > lb ? la - lb : lb - la));
    }
  }
}

TEST_CASE("passwords beyond 16-bit distances are rejected") {
  std::string long_pw(70000, 'a');
  const auto c = make_corpus("c", std::vector<std::string>{long_pw, "b"});
  CHECK_THROWS_AS(build_distance_matrix(c, make_anchor_set({U"b"})), DomainError);
}

TEST_CASE("PVDM round trip and validation") {
  const auto c = make_corpus("c", testing::synthetic_passwords(30, 2));
  const auto m = build_distance_matrix(c, select_anchors(c, 7, 2));
  const auto bytes = serialize_distance_matrix(m);
  CHECK(bytes.substr(0, 4) == "PVDM");
  CHECK(bytes.size() > 18 + 30 * 7 * 2 + 32);
  CHECK(deserialize_distance_matrix(bytes) == m);

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(deserialize_distance_matrix(bad_magic), VersionError);
  auto bad_version = bytes;
  bad_version[4] = 9;
  CHECK_THROWS_AS(deserialize_distance_matrix(bad_version), VersionError);
  CHECK_THROWS_AS(deserialize_distance_matrix(bytes.substr(0, bytes.size() - 1)), VersionError);
  CHECK_THROWS_AS(deserialize_distance_matrix(bytes + "x"), VersionError);

  const auto dir = testing::temp_dir("pvdm");
  write_distance_matrix(dir / "m.pvdm", m);
  CHECK(read_distance_matrix(dir / "m.pvdm") == m);
  std::filesystem::remove_all(dir);
}

TEST_CASE("independent anchor sets give correlated geometry") {
  // Three families of passwords; row-space distances should agree across
  // two disjoint draws of anchors.
  std::mt19937_64 gen(21);
  std::vector<std::string> pw;
  const std::vector<std::string> stems = {"sunshine", "qwe", "1987"};
  for (const auto& stem : stems) {
    for (int i = 0; i < 40; ++i) {
      std::string p = stem;
      for (int k = 0; k < 1 + static_cast<int>(gen() % 3); ++k) p.push_back("xyz"[gen() % 3]);
      p += std::to_string(gen() % 100);
      pw.push_back(p);
    }
  }
  const auto c = make_corpus("c", pw);
  const auto m1 = build_distance_matrix(c, select_anchors(c, 15, 1));
  const auto m2 = build_distance_matrix(c, select_anchors(c, 15, 2));
  auto condensed = [&](const DistanceMatrix& m) {
    std::vector<double> d;
    for (std::size_t i = 0; i < m.rows; ++i) {
      for (std::size_t j = i + 1; j < m.rows; ++j) {
        double s = 0;
        for (std::size_t k = 0; k < m.cols; ++k) s += std::pow(double(m.at(i, k)) - m.at(j, k), 2);
        d.push_back(std::sqrt(s));
      }
    }
    return d;
  };
  CHECK(testing::pearson(condensed(m1), condensed(m2)) >= 0.9);
}
