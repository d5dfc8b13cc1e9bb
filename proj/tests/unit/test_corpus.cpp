#include <doctest.h>

#include <cmath>
#include <sstream>

#include "mmlm/base64.hpp"
#include "mmlm/corpus.hpp"
#include "mmlm/png_io.hpp"
#include "mmlm/rng.hpp"

using namespace mmlm;

namespace {

ImageTensor noisy_image(size_t h, size_t w, uint64_t seed) {
    ImageTensor img;
    img.height = h;
    img.width = w;
    img.data.resize(h * w * 3);
    Rng rng(seed);
    for (auto& v : img.data) v = static_cast<float>(rng.next_double());
    return img;
}

RawDocument good_doc(const std::string& id, size_t images, uint64_t seed) {
    RawDocument raw;
    raw.doc_id = id;
    raw.content.add_text("a perfectly ordinary paragraph about the weather");
    for (size_t i = 0; i < images; ++i) {
        raw.content.add_image(noisy_image(64, 64, seed + i));
        raw.content.add_text("and some text after image number " + std::to_string(i));
    }
    return raw;
}

} // namespace

TEST_CASE("base64 round trips and rejects malformed input") {
    Rng rng(9);
    for (size_t n : {0u, 1u, 2u, 3u, 4u, 31u, 200u}) {
        std::string raw(n, '\0');
        for (auto& c : raw) c = static_cast<char>(rng.below(256));
        auto enc = base64::encode(raw);
        CHECK(base64::decode(enc) == raw);
        CHECK(enc.size() % 4 == 0);
    }
    CHECK(base64::encode("Man") == "TWFu");
    CHECK(base64::encode("Ma") == "TWE=");
    CHECK(base64::encode("M") == "TQ==");
    CHECK_THROWS_AS(base64::decode("abc"), DataError);
    CHECK_THROWS_AS(base64::decode("a=bc"), DataError);
    CHECK_THROWS_AS(base64::decode("ab!c"), DataError);
}

TEST_CASE("png encode/decode round trips the quantized image") {
    auto img = noisy_image(13, 7, 3);
    auto png = encode_png(img);
    CHECK(png.size() > 8);
    CHECK(png.compare(0, 4, "\x89PNG", 4) == 0);
    auto back = decode_png(png);
    REQUIRE(back.height == 13);
    REQUIRE(back.width == 7);
    REQUIRE(back.data.size() == img.data.size());
    for (size_t i = 0; i < img.data.size(); ++i) {
        const float expect = std::lround(std::min(std::max(img.data[i], 0.0f), 1.0f) * 255.0f) / 255.0f;
        CHECK(back.data[i] == doctest::Approx(expect).epsilon(1e-6));
    }
    // a second pass is lossless since values are already quantized
    auto png2 = encode_png(back);
    CHECK(decode_png(png2).data == back.data);

    CHECK_THROWS_AS(decode_png("definitely not a png"), DataError);
}

TEST_CASE("gibberish heuristics flag urls hashtags and emoji") {
    CHECK(is_gibberish_token("https://example.com/x"));
    CHECK(is_gibberish_token("ftp://host"));
    CHECK(is_gibberish_token("#trending"));
    CHECK_FALSE(is_gibberish_token("#"));
    CHECK(is_gibberish_token("nice\xF0\x9F\x98\x80"));  // grinning face
    CHECK(is_gibberish_token("\xE2\x98\x80"));          // sun
    CHECK(is_gibberish_token("\xff\xfe broken"));       // invalid utf-8
    CHECK_FALSE(is_gibberish_token("ordinary"));
    CHECK_FALSE(is_gibberish_token("co-operate,"));
    CHECK_FALSE(is_gibberish_token("\xC3\xA9t\xC3\xA9")); // accented text is fine

    MultimodalDocument doc;
    doc.add_text("one two three #tag");
    CHECK(gibberish_fraction(doc) == doctest::Approx(0.25));
    MultimodalDocument empty;
    empty.add_text("   ");
    CHECK(gibberish_fraction(empty) == 0.0);
}

TEST_CASE("single color detection uses per-channel variance") {
    auto flat = ImageTensor::filled(80, 80, 0.3f, 0.6f, 0.9f);
    CHECK(is_single_colored(flat, 1e-4));
    auto noisy = noisy_image(80, 80, 4);
    CHECK_FALSE(is_single_colored(noisy, 1e-4));
    // tiny wiggle stays under the floor
    auto nearly = flat;
    nearly.data[0] += 0.001f;
    CHECK(is_single_colored(nearly, 1e-4));
}

TEST_CASE("filter rules fire in order with precise reasons") {
    FilterConfig cfg;
    const uint64_t seed = 11;

    auto en = good_doc("a", 2, 100);
    auto d = evaluate_document(en, cfg, seed, 0);
    CHECK(d.keep);
    CHECK(d.reason == DropReason::kNone);

    auto fr = en;
    fr.language = "fr";
    CHECK(evaluate_document(fr, cfg, seed, 0).reason == DropReason::kNotEnglish);

    RawDocument text_only;
    text_only.doc_id = "t";
    text_only.content.add_text("words but no pictures");
    CHECK(evaluate_document(text_only, cfg, seed, 0).reason == DropReason::kNoInterleavedImages);

    RawDocument image_only;
    image_only.doc_id = "i";
    image_only.content.add_image(noisy_image(64, 64, 5));
    CHECK(evaluate_document(image_only, cfg, seed, 0).reason == DropReason::kNoInterleavedImages);

    // 64x64 floor: 63 in either dimension falls, 64 stands
    RawDocument small = good_doc("s", 0, 0);
    small.content.add_image(noisy_image(63, 128, 6));
    small.content.add_image(noisy_image(128, 63, 7));
    small.content.add_image(noisy_image(64, 64, 8));
    small.content.add_image(noisy_image(64, 64, 88)); // two survivors dodge the coin
    auto ds = evaluate_document(small, cfg, seed, 0);
    CHECK(ds.keep);
    CHECK(ds.small_images == std::vector<size_t>{0, 1});

    // single-colored images fall, and a doc with no image left is dropped
    RawDocument flat = good_doc("f", 0, 0);
    flat.content.add_image(ImageTensor::filled(100, 100, 0.5f, 0.5f, 0.5f));
    auto df = evaluate_document(flat, cfg, seed, 0);
    CHECK(df.reason == DropReason::kImagesGone);
    CHECK(df.flat_images == std::vector<size_t>{0});

    // gibberish saturation: 15 flagged of 38 tokens clears the 0.3 bar
    RawDocument spam = good_doc("g", 2, 300);
    spam.content.add_text(
        "#a #b #c #d #e #f #g #h #j #k https://x.io https://y.io "
        "https://z.io https://w.io https://v.io ok so");
    auto dg = evaluate_document(spam, cfg, seed, 0);
    CHECK(dg.reason == DropReason::kGibberish);

    // five-image cap keeps the first five survivors
    RawDocument many = good_doc("m", 7, 400);
    auto dm = evaluate_document(many, cfg, seed, 0);
    CHECK(dm.keep);
    CHECK(dm.capped_images == std::vector<size_t>{5, 6});
    auto kept = apply_decision(many, dm);
    size_t images = 0;
    for (const auto& seg : kept.segments) images += seg.kind == Segment::Kind::kImage ? 1 : 0;
    CHECK(images == 5);

    // the cap counts survivors, not raw ordinals
    RawDocument mixed = good_doc("x", 6, 500);
    mixed.content.segments.insert(mixed.content.segments.begin() + 1,
                                  Segment::of_image(noisy_image(10, 10, 9)));
    auto dx = evaluate_document(mixed, cfg, seed, 0);
    CHECK(dx.small_images == std::vector<size_t>{0});
    CHECK(dx.capped_images == std::vector<size_t>{6});
}

TEST_CASE("single image coin drops about half over many documents") {
    FilterConfig cfg;
    size_t kept = 0;
    const size_t trials = 10000;
    RawDocument doc = good_doc("c", 1, 900);
    for (size_t i = 0; i < trials; ++i) {
        auto d = evaluate_document(doc, cfg, 2024, i);
        if (d.keep)
            kept++;
        else
            CHECK(d.reason == DropReason::kSingleImageCoin);
    }
    const double rate = 1.0 - static_cast<double>(kept) / trials;
    CHECK(rate > 0.48);
    CHECK(rate < 0.52);

    // two-image documents never see the coin
    RawDocument two = good_doc("c2", 2, 901);
    for (size_t i = 0; i < 50; ++i) CHECK(evaluate_document(two, cfg, 2024, i).keep);
}

TEST_CASE("pipeline is deterministic and reports stats") {
    FilterConfig cfg;
    std::vector<RawDocument> docs;
    for (size_t i = 0; i < 40; ++i) docs.push_back(good_doc("d" + std::to_string(i), 1 + i % 3, i));
    docs[3].language = "de";
    docs[7].content.add_text(
        "#x #y #z #w #v #q #r #s #t #u https://a.bc https://d.ef "
        "https://g.hi https://j.kl https://m.no");
    docs[9].content.segments.clear();
    docs[9].content.add_text("no images at all");

    PipelineStats s1, s2;
    auto k1 = run_pipeline(docs, cfg, 77, &s1);
    auto k2 = run_pipeline(docs, cfg, 77, &s2);
    REQUIRE(k1.size() == k2.size());
    for (size_t i = 0; i < k1.size(); ++i) {
        CHECK(k1[i].doc_id == k2[i].doc_id);
        CHECK(k1[i].segments.size() == k2[i].segments.size());
    }
    CHECK(s1.to_json() == s2.to_json());
    CHECK(s1.input_docs == 40);
    CHECK(s1.dropped_not_english == 1);
    CHECK(s1.dropped_gibberish >= 1);
    CHECK(s1.dropped_no_interleaved >= 1);
    CHECK(s1.kept_docs == k1.size());
    CHECK(s1.kept_docs < 40);

    auto k3 = run_pipeline(docs, cfg, 78, nullptr);
    CHECK(k3.size() != 0); // different seed still yields a corpus
}

TEST_CASE("document archive round trips byte for byte") {
    std::vector<MultimodalDocument> docs;
    for (size_t i = 0; i < 3; ++i) {
        MultimodalDocument d;
        d.doc_id = "doc" + std::to_string(i);
        d.add_text("hello " + std::to_string(i));
        d.add_image(noisy_image(6 + i, 5, i));
        d.add_text("tail");
        docs.push_back(std::move(d));
    }
    std::ostringstream out1;
    write_doc_archive(out1, docs);
    std::istringstream in1(out1.str());
    auto back = read_doc_archive(in1);
    REQUIRE(back.size() == docs.size());
    for (size_t i = 0; i < docs.size(); ++i) {
        CHECK(back[i].doc_id == docs[i].doc_id);
        REQUIRE(back[i].segments.size() == docs[i].segments.size());
        for (size_t s = 0; s < docs[i].segments.size(); ++s) {
            CHECK(back[i].segments[s].kind == docs[i].segments[s].kind);
            CHECK(back[i].segments[s].text == docs[i].segments[s].text);
            CHECK(back[i].segments[s].image == docs[i].segments[s].image);
        }
    }
    std::ostringstream out2;
    write_doc_archive(out2, back);
    CHECK(out1.str() == out2.str());
}

TEST_CASE("document archive rejects corruption with distinct errors") {
    std::vector<MultimodalDocument> docs(1);
    docs[0].doc_id = "x";
    docs[0].add_text("payload");
    std::ostringstream out;
    write_doc_archive(out, docs);
    const std::string good = out.str();

    auto expect_throw = [&](std::string data, const char* what) {
        std::istringstream in(data);
        CHECK_THROWS_WITH_AS(read_doc_archive(in), what, DataError);
    };

    std::string bad_magic = good;
    bad_magic[0] ^= 0xff;
    expect_throw(bad_magic, "not a document archive");

    std::string bad_version = good;
    bad_version[4] ^= 0xff;
    expect_throw(bad_version, "unsupported document archive version");

    std::string flipped = good;
    flipped[flipped.size() - 1] ^= 0x01;
    expect_throw(flipped, "archive record 0 fails its checksum");

    std::string truncated = good.substr(0, good.size() - 3);
    std::istringstream tin(truncated);
    CHECK_THROWS_AS(read_doc_archive(tin), DataError);

    std::string trailing = good + "zzz";
    std::istringstream gin(trailing);
    CHECK_THROWS_AS(read_doc_archive(gin), DataError);
}

TEST_CASE("jsonl corpus round trips through png and base64") {
    std::vector<RawDocument> docs;
    auto d = good_doc("j0", 1, 42);
    docs.push_back(d);
    RawDocument other;
    other.doc_id = "j1";
    other.language = "de";
    other.content.add_text("nur text");
    docs.push_back(other);

    std::ostringstream out;
    write_jsonl_corpus(out, docs);
    std::istringstream in(out.str());
    auto back = read_jsonl_corpus(in);
    REQUIRE(back.size() == 2);
    CHECK(back[0].doc_id == "j0");
    CHECK(back[0].language == "en");
    CHECK(back[1].language == "de");
    REQUIRE(back[0].content.segments.size() == docs[0].content.segments.size());
    const auto& img = back[0].content.segments[1].image;
    CHECK(img.height == 64);
    CHECK(img.width == 64);

    std::istringstream bad1("not json at all\n");
    CHECK_THROWS_AS(read_jsonl_corpus(bad1), DataError);
    std::istringstream bad2("{\"id\": \"a\", \"segments\": [{\"what\": 1}]}\n");
    CHECK_THROWS_AS(read_jsonl_corpus(bad2), DataError);
    std::istringstream bad3("{\"segments\": []}\n");
    CHECK_THROWS_AS(read_jsonl_corpus(bad3), DataError);
}
