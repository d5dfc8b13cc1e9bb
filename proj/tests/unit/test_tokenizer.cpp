#include <doctest.h>

#include <string>

#include "mmlm/tokenizer.hpp"

using namespace mmlm;

TEST_CASE("vocabulary layout") {
    CHECK(tok::kVocabSize == 263);
    CHECK(tok::kBos == 256);
    CHECK(tok::kEos == 257);
    CHECK(tok::kImageStart == 258);
    CHECK(tok::kImageEnd == 259);
    CHECK(tok::kPad == 260);
    CHECK(tok::kSlot == 261);
    CHECK(tok::id_name(tok::kBos) == "<s>");
    CHECK(tok::id_name(tok::kEos) == "</s>");
    CHECK(tok::id_name(tok::kImageStart) == "<image>");
    CHECK(tok::id_name(tok::kImageEnd) == "</image>");
}

TEST_CASE("every byte round-trips") {
    std::string all;
    for (int b = 0; b < 256; ++b) all.push_back(static_cast<char>(b));
    auto ids = tok::tokenize(all);
    REQUIRE(ids.size() == 256);
    for (int b = 0; b < 256; ++b) CHECK(ids[static_cast<size_t>(b)] == b);
    CHECK(tok::detokenize(ids) == all);
}

TEST_CASE("utf-8 text round-trips byte for byte") {
    const std::string s = "caf\xc3\xa9 \xf0\x9f\x8c\x8d";
    CHECK(tok::detokenize(tok::tokenize(s)) == s);
    CHECK(tok::tokenize(s).size() == s.size());
}

TEST_CASE("special ids are not text") {
    CHECK_THROWS_AS((void)tok::detokenize(std::vector<int32_t>{65, tok::kEos}), DataError);
    CHECK_THROWS_AS((void)tok::detokenize(std::vector<int32_t>{-1}), DataError);
    CHECK(tok::is_special(tok::kPad));
    CHECK(!tok::is_special(65));
    CHECK(tok::is_valid(262));
    CHECK(!tok::is_valid(263));
}
