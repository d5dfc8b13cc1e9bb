#include <doctest.h>

#include <sstream>
#include <string>

#include "mmlm/stream.hpp"

using namespace mmlm;

namespace {

MultimodalDocument text_image_doc(const std::string& pre, const std::string& post) {
    MultimodalDocument doc;
    doc.doc_id = "doc0";
    doc.add_text(pre);
    doc.add_image(ImageTensor::filled(4, 4, 0.2f, 0.4f, 0.6f));
    doc.add_text(post);
    return doc;
}

} // namespace

TEST_CASE("encode_document produces a guarded slot per image") {
    const size_t V = 3;
    auto unit = encode_document(text_image_doc("ab", "c"), V);
    validate_unit(unit, V);

    // <s> a b <image> . . . </image> c </s>
    REQUIRE(unit.ids.size() == 1 + 2 + 1 + V + 1 + 1 + 1);
    CHECK(unit.ids.front() == tok::kBos);
    CHECK(unit.ids[1] == 'a');
    CHECK(unit.ids[2] == 'b');
    CHECK(unit.ids[3] == tok::kImageStart);
    for (size_t i = 0; i < V; ++i) CHECK(unit.ids[4 + i] == tok::kSlot);
    CHECK(unit.ids[4 + V] == tok::kImageEnd);
    CHECK(unit.ids[5 + V] == 'c');
    CHECK(unit.ids.back() == tok::kEos);

    REQUIRE(unit.slots.size() == 1);
    CHECK(unit.slots[0].start == 4);
    CHECK(unit.slots[0].length == V);
    CHECK(unit.slots[0].image_index == 0);
    REQUIRE(unit.images.size() == 1);

    // mask: <s> never, text yes, slot interior never, guards and </s> by default yes
    CHECK(unit.target_mask[0] == 0);
    CHECK(unit.target_mask[1] == 1);
    CHECK(unit.target_mask[3] == 1);
    for (size_t i = 0; i < V; ++i) CHECK(unit.target_mask[4 + i] == 0);
    CHECK(unit.target_mask[4 + V] == 1);
    CHECK(unit.target_mask.back() == 1);
}

TEST_CASE("guard and eos mask participation is switchable") {
    EncodeOptions opts;
    opts.guards_in_loss = false;
    opts.eos_in_loss = false;
    auto unit = encode_document(text_image_doc("x", "y"), 2, opts);
    CHECK(unit.target_mask[2] == 0);              // <image>
    CHECK(unit.target_mask[2 + 3] == 0);          // </image>
    CHECK(unit.target_mask.back() == 0);          // </s>
    CHECK(unit.target_mask[1] == 1);              // text still counts
}

TEST_CASE("encode_prompt omits the closing tag and all targets") {
    auto unit = encode_prompt(text_image_doc("q", ""), 2);
    CHECK(unit.ids.front() == tok::kBos);
    CHECK(unit.ids.back() != tok::kEos);
    for (auto m : unit.target_mask) CHECK(m == 0);
    validate_unit(unit, 2, /*requires_eos=*/false);
}

TEST_CASE("empty documents cannot be encoded") {
    MultimodalDocument doc;
    CHECK_THROWS_AS((void)encode_document(doc, 2), DataError);
}

TEST_CASE("split keeps units well-formed and preserves the text") {
    MultimodalDocument doc;
    doc.doc_id = "long";
    std::string text(100, 'z');
    for (size_t i = 0; i < text.size(); ++i) text[i] = static_cast<char>('a' + (i % 26));
    doc.add_text(text);
    auto unit = encode_document(doc, 2);
    const size_t max_len = 16;
    auto pieces = split_to_fit(unit, max_len);
    CHECK(pieces.size() > 1);
    std::string collected;
    for (const auto& p : pieces) {
        CHECK(p.ids.size() <= max_len);
        validate_unit(p, 2);
        CHECK(p.doc_id == "long");
        for (int32_t id : p.ids)
            if (id < 256) collected.push_back(static_cast<char>(id));
    }
    CHECK(collected == text);
}

TEST_CASE("split never cuts an image block") {
    MultimodalDocument doc;
    doc.doc_id = "imgs";
    for (int i = 0; i < 4; ++i) {
        doc.add_text("abcde");
        doc.add_image(ImageTensor::filled(2, 2, 0.1f, 0.1f, 0.1f));
    }
    const size_t V = 4;
    auto unit = encode_document(doc, V);
    auto pieces = split_to_fit(unit, 13); // block alone is 6 ids; 13 forces splits
    size_t images_seen = 0;
    for (const auto& p : pieces) {
        validate_unit(p, V);
        CHECK(p.ids.size() <= 13);
        images_seen += p.images.size();
    }
    CHECK(images_seen == 4);
}

TEST_CASE("an image block that cannot fit is an error naming the document") {
    MultimodalDocument doc;
    doc.doc_id = "toobig";
    doc.add_image(ImageTensor::filled(2, 2, 0.5f, 0.5f, 0.5f));
    auto unit = encode_document(doc, 8); // block is 10 ids + <s></s>
    try {
        (void)split_to_fit(unit, 8);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("toobig") != std::string::npos);
    }
}

TEST_CASE("packing fills sequences with whole units and pads the tail") {
    std::vector<EncodedUnit> units;
    for (int i = 0; i < 5; ++i) {
        MultimodalDocument doc;
        doc.doc_id = "u" + std::to_string(i);
        doc.add_text(std::string(3 + static_cast<size_t>(i), 'a' + static_cast<char>(i)));
        units.push_back(encode_document(doc, 2));
    }
    const size_t L = 16;
    auto packed = pack_full_sentences(units, L);
    size_t bos_total = 0;
    for (const auto& s : packed) {
        REQUIRE(s.ids.size() == L);
        validate_packed(s, 2);
        // units are whole: count <s>/</s> pairs
        size_t bos = 0, eos = 0;
        for (int32_t id : s.ids) {
            if (id == tok::kBos) ++bos;
            if (id == tok::kEos) ++eos;
        }
        CHECK(bos == eos);
        bos_total += bos;
        // padding is confined to the tail and never a target
        for (size_t t = s.ids.size() - s.pad_count; t < s.ids.size(); ++t) {
            CHECK(s.ids[t] == tok::kPad);
            CHECK(s.target_mask[t] == 0);
        }
    }
    CHECK(bos_total == units.size());
}

TEST_CASE("packing re-bases slots and images per sequence") {
    std::vector<EncodedUnit> units;
    for (int i = 0; i < 3; ++i) {
        MultimodalDocument doc;
        doc.doc_id = "img" + std::to_string(i);
        doc.add_text("t");
        const float shade = 0.1f * static_cast<float>(i + 1);
        doc.add_image(ImageTensor::filled(2, 2, shade, shade, shade));
        units.push_back(encode_document(doc, 2));
    }
    auto packed = pack_full_sentences(units, 18); // two units of 9 per sequence
    REQUIRE(packed.size() == 2);
    CHECK(packed[0].slots.size() == 2);
    CHECK(packed[0].images.size() == 2);
    CHECK(packed[0].slots[1].image_index == 1);
    CHECK(packed[1].slots.size() == 1);
    // the image travels with its unit
    CHECK(packed[1].images[0].data[0] == doctest::Approx(0.3f));
    for (const auto& s : packed) validate_packed(s, 2);
}

TEST_CASE("units longer than the packing length are an error") {
    MultimodalDocument doc;
    doc.doc_id = "wide";
    doc.add_text(std::string(30, 'x'));
    auto unit = encode_document(doc, 2);
    try {
        (void)pack_full_sentences({unit}, 8);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("wide") != std::string::npos);
    }
}

TEST_CASE("instruction units mask out everything before the output") {
    auto unit = build_instruction_unit("Reverse the word", "cat", "tac");
    validate_unit(unit, 2);
    const std::string prompt = "Reverse the word\ncat\n";
    const std::string output = "tac";
    REQUIRE(unit.ids.size() == 1 + prompt.size() + output.size() + 1);
    for (size_t i = 0; i < prompt.size(); ++i) {
        CHECK(unit.ids[1 + i] == static_cast<unsigned char>(prompt[i]));
        CHECK(unit.target_mask[1 + i] == 0);
    }
    for (size_t i = 0; i < output.size(); ++i) CHECK(unit.target_mask[1 + prompt.size() + i] == 1);
    CHECK(unit.target_mask.back() == 1); // </s>

    CHECK_THROWS_AS((void)build_instruction_unit("", "", "out"), DataError);
    CHECK_THROWS_AS((void)build_instruction_unit("inst", "", ""), DataError);
}

TEST_CASE("packed datasets round-trip exactly") {
    std::vector<EncodedUnit> units;
    MultimodalDocument doc;
    doc.doc_id = "rt";
    doc.add_text("hello");
    doc.add_image(ImageTensor::filled(3, 2, 0.25f, 0.5f, 0.75f));
    doc.add_text("world");
    units.push_back(encode_document(doc, 2));
    auto packed = pack_full_sentences(units, 24);

    std::stringstream ss;
    write_packed_dataset(ss, packed);
    auto back = read_packed_dataset(ss);
    REQUIRE(back.size() == packed.size());
    for (size_t i = 0; i < packed.size(); ++i) {
        CHECK(back[i].ids == packed[i].ids);
        CHECK(back[i].target_mask == packed[i].target_mask);
        CHECK(back[i].pad_count == packed[i].pad_count);
        REQUIRE(back[i].images.size() == packed[i].images.size());
        for (size_t k = 0; k < packed[i].images.size(); ++k) CHECK(back[i].images[k] == packed[i].images[k]);
        REQUIRE(back[i].slots.size() == packed[i].slots.size());
        for (size_t k = 0; k < packed[i].slots.size(); ++k) {
            CHECK(back[i].slots[k].start == packed[i].slots[k].start);
            CHECK(back[i].slots[k].length == packed[i].slots[k].length);
            CHECK(back[i].slots[k].image_index == packed[i].slots[k].image_index);
        }
    }
}

TEST_CASE("truncated packed datasets are rejected") {
    std::vector<EncodedUnit> units;
    MultimodalDocument doc;
    doc.doc_id = "t";
    doc.add_text("abc");
    units.push_back(encode_document(doc, 2));
    auto packed = pack_full_sentences(units, 8);
    std::stringstream ss;
    write_packed_dataset(ss, packed);
    std::string bytes = ss.str();
    std::stringstream cut(bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_AS((void)read_packed_dataset(cut), DataError);

    std::stringstream garbage("not a dataset at all");
    CHECK_THROWS_AS((void)read_packed_dataset(garbage), DataError);
}

TEST_CASE("bilinear resize basics") {
    auto img = ImageTensor::filled(8, 6, 0.3f, 0.6f, 0.9f);
    auto same = resize_bilinear(img, 8, 6);
    CHECK(same == img);
    auto small = resize_bilinear(img, 4, 4);
    CHECK(small.height == 4);
    CHECK(small.width == 4);
    // solid colors stay solid under interpolation
    for (size_t i = 0; i < small.data.size(); i += 3) {
        CHECK(small.data[i] == doctest::Approx(0.3f));
        CHECK(small.data[i + 1] == doctest::Approx(0.6f));
        CHECK(small.data[i + 2] == doctest::Approx(0.9f));
    }
    CHECK_THROWS_AS((void)resize_bilinear(img, 0, 4), DataError);
}
