#include <doctest.h>

#include "passviz/unicode.hpp"

using passviz::decode_utf8;
using passviz::encode_utf8;

TEST_CASE("ascii and multibyte round trip") {
  const std::string s = "pa\xC3\xA9ss\xE2\x82\xAC\xF0\x9F\x94\x91";  // pa é ss € 🔑
  const auto d = decode_utf8(s);
  REQUIRE(d);
  CHECK(d->size() == 7);
  CHECK((*d)[2] == U'é');
  CHECK((*d)[5] == U'€');
  CHECK((*d)[6] == U'\U0001F511');
  CHECK(encode_utf8(*d) == s);
  CHECK(passviz::utf8_length(s) == 7);
}

TEST_CASE("malformed sequences are rejected") {
  CHECK_FALSE(decode_utf8("\xC3"));              // truncated
  CHECK_FALSE(decode_utf8("\xC0\xAF"));          // overlong '/'
  CHECK_FALSE(decode_utf8("\xED\xA0\x80"));      // surrogate
  CHECK_FALSE(decode_utf8("\xF4\x90\x80\x80"));  // above U+10FFFF
  CHECK_FALSE(decode_utf8("\x80"));              // lone continuation
  CHECK_FALSE(decode_utf8("ab\xFF"));
}

TEST_CASE("empty input decodes to empty") {
  const auto d = decode_utf8("");
  REQUIRE(d);
  CHECK(d->empty());
}
