#include "mmlm/synth.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "mmlm/base64.hpp"
#include "mmlm/png_io.hpp"
#include "mmlm/rng.hpp"

namespace mmlm::synth {

using nlohmann::ordered_json;

namespace {

std::string b64_png(const ImageTensor& img) { return base64::encode(encode_png(img)); }

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path + " for writing");
    for (const auto& line : lines) out << line << "\n";
    if (!out) throw DataError("failed writing " + path);
}

bool inside_shape(const std::string& shape, double dx, double dy, double r) {
    if (shape == "square") return std::abs(dx) <= r && std::abs(dy) <= r;
    if (shape == "circle") return dx * dx + dy * dy <= r * r;
    if (shape == "triangle") {
        if (dy < -r || dy > r) return false;
        const double half = r * (dy + r) / (2 * r); // apex up
        return std::abs(dx) <= half;
    }
    if (shape == "cross")
        return (std::abs(dx) <= r / 3 && std::abs(dy) <= r) ||
               (std::abs(dy) <= r / 3 && std::abs(dx) <= r);
    throw DataError("unknown shape: " + shape);
}

std::string two_digits(size_t v) {
    std::string s = std::to_string(v);
    return s.size() < 2 ? "0" + s : s;
}

const std::vector<std::string>& words() {
    static const std::vector<std::string> w{
        "apple", "river", "stone", "cloud", "amber", "torch",  "maple", "crane",
        "pearl", "cedar", "ridge", "frost", "ember", "meadow", "quill", "harbor"};
    return w;
}

const std::vector<std::string>& publishers() {
    static const std::vector<std::string> p{"Harbor Press", "Quill House", "Cedar Books",
                                            "Meadow Editions", "Frost and Sons"};
    return p;
}

const std::vector<std::string>& authors() {
    static const std::vector<std::string> a{"A. Stone", "R. Crane", "M. Pearl", "T. Ridge",
                                            "E. Amber"};
    return a;
}

} // namespace

const std::vector<PaletteColor>& palette() {
    static const std::vector<PaletteColor> colors{
        {"red", 0.85f, 0.12f, 0.10f},   {"green", 0.10f, 0.75f, 0.20f},
        {"blue", 0.15f, 0.25f, 0.85f},  {"yellow", 0.90f, 0.85f, 0.10f},
        {"purple", 0.55f, 0.15f, 0.70f}, {"orange", 0.95f, 0.55f, 0.10f},
        {"cyan", 0.10f, 0.80f, 0.80f},  {"white", 0.95f, 0.95f, 0.95f}};
    return colors;
}

const std::vector<std::string>& shape_names() {
    static const std::vector<std::string> shapes{"square", "circle", "triangle", "cross"};
    return shapes;
}

ImageTensor shape_image(const std::string& shape, size_t color_index, size_t image_size,
                        uint64_t seed, size_t count, float bg) {
    if (image_size == 0) throw DataError("image size must be positive");
    if (count == 0) throw DataError("shape count must be positive");
    if (color_index >= palette().size())
        throw DataError("color index out of range: " + std::to_string(color_index));
    const PaletteColor& c = palette()[color_index];

    ImageTensor img;
    img.height = image_size;
    img.width = image_size;
    img.data.resize(image_size * image_size * 3);
    Rng rng(derive_seed(seed, 0x73686170));
    for (auto& v : img.data) {
        const float noise = static_cast<float>(rng.next_double() - 0.5) * 0.06f;
        v = std::clamp(bg + noise, 0.0f, 1.0f);
    }

    const size_t cols = static_cast<size_t>(std::ceil(std::sqrt(static_cast<double>(count))));
    const size_t rows = (count + cols - 1) / cols;
    const double cell_w = static_cast<double>(image_size) / static_cast<double>(cols);
    const double cell_h = static_cast<double>(image_size) / static_cast<double>(rows);
    const double r = 0.35 * std::min(cell_w, cell_h);
    for (size_t k = 0; k < count; ++k) {
        const double cx = (static_cast<double>(k % cols) + 0.5) * cell_w;
        const double cy = (static_cast<double>(k / cols) + 0.5) * cell_h;
        for (size_t y = 0; y < image_size; ++y)
            for (size_t x = 0; x < image_size; ++x) {
                const double dx = static_cast<double>(x) + 0.5 - cx;
                const double dy = static_cast<double>(y) + 0.5 - cy;
                if (!inside_shape(shape, dx, dy, r)) continue;
                img.at(y, x, 0) = c.r;
                img.at(y, x, 1) = c.g;
                img.at(y, x, 2) = c.b;
            }
    }
    return img;
}

std::vector<eval::CaptionExample> make_caption_data(size_t n, size_t image_size, uint64_t seed) {
    std::vector<eval::CaptionExample> out;
    const size_t combos = palette().size() * shape_names().size();
    for (size_t i = 0; i < n; ++i) {
        const size_t color = i % palette().size();
        const size_t shape = (i / palette().size()) % shape_names().size();
        std::string caption = "a " + palette()[color].name + " " + shape_names()[shape];
        if (i >= combos) caption += " variant " + std::to_string(i / combos);
        out.push_back({"cap" + two_digits(i),
                       shape_image(shape_names()[shape], color, image_size,
                                   derive_seed(seed, 0x636170, i)),
                       caption});
    }
    return out;
}

std::vector<eval::VqaExample> make_vqa_data(size_t n, size_t image_size, uint64_t seed) {
    std::vector<eval::VqaExample> out;
    for (size_t i = 0; i < n; ++i) {
        const size_t color = i % palette().size();
        const size_t shape = (i / palette().size()) % shape_names().size();
        auto img =
            shape_image(shape_names()[shape], color, image_size, derive_seed(seed, 0x767161, i));
        eval::VqaExample ex;
        ex.id = "vqa" + two_digits(i);
        ex.image = std::move(img);
        if (i % 2 == 0) {
            ex.question = "What is the color of the shape?";
            ex.answers = {palette()[color].name};
        } else {
            ex.question = "What is the shape in the image?";
            ex.answers = {shape_names()[shape]};
        }
        out.push_back(std::move(ex));
    }
    return out;
}

std::vector<eval::LabelExample> make_sentiment_data(size_t n, size_t image_size, uint64_t seed) {
    std::vector<eval::LabelExample> out;
    for (size_t i = 0; i < n; ++i) {
        const bool positive = i % 2 == 0;
        // warm bright rendering for positive, dark cool one for negative
        auto img = shape_image(positive ? "circle" : "square", positive ? 3 : 2, image_size,
                               derive_seed(seed, 0x736e74, i), 1, positive ? 0.75f : 0.08f);
        out.push_back({"snt" + two_digits(i), std::move(img), positive ? "positive" : "negative"});
    }
    return out;
}

std::vector<eval::LabelExample> make_yesno_data(size_t n, size_t image_size, uint64_t seed) {
    std::vector<eval::LabelExample> out;
    for (size_t i = 0; i < n; ++i) {
        const bool yes = i % 2 == 0;
        auto img = shape_image(yes ? "cross" : "circle", i % palette().size(), image_size,
                               derive_seed(seed, 0x796e6f, i));
        out.push_back({"ym" + two_digits(i), std::move(img), yes ? "yes" : "no"});
    }
    return out;
}

std::vector<eval::WebsrcExample> make_websrc_data(size_t n, size_t image_size, uint64_t seed) {
    std::vector<eval::WebsrcExample> out;
    for (size_t i = 0; i < n; ++i) {
        const auto& title =
            words()[i % words().size()] + " " + words()[(i + 5) % words().size()];
        const auto& publisher = publishers()[i % publishers().size()];
        const auto& author = authors()[i % authors().size()];
        eval::WebsrcExample ex;
        ex.id = "web" + two_digits(i);
        ex.image = shape_image("square", i % palette().size(), image_size,
                               derive_seed(seed, 0x776562, i));
        ex.web_text = "Title: " + title + ". Author: " + author + ". Publisher: " + publisher +
                      ". Price: $" + std::to_string(5 + i % 40) + ".";
        if (i % 2 == 0) {
            ex.question = "Who is the publisher of this book?";
            ex.answer = publisher;
        } else {
            ex.question = "Who is the author of this book?";
            ex.answer = author;
        }
        out.push_back(std::move(ex));
    }
    return out;
}

std::vector<eval::LabelExample> make_object_data(size_t n, size_t image_size, uint64_t seed) {
    std::vector<eval::LabelExample> out;
    for (size_t i = 0; i < n; ++i) {
        const size_t color = i % palette().size();
        const size_t shape = (i / palette().size()) % shape_names().size();
        out.push_back({"obj" + two_digits(i),
                       shape_image(shape_names()[shape], color, image_size,
                                   derive_seed(seed, 0x6f626a, i)),
                       palette()[color].name + " " + shape_names()[shape]});
    }
    return out;
}

std::vector<eval::DescribedExample> make_described_data(size_t n, size_t image_size,
                                                        uint64_t seed) {
    static const std::vector<std::pair<prompts::DescribedOption, prompts::DescribedOption>>
        groups{
            {{"square", "It has four equal straight sides and sharp corners."},
             {"circle", "It is perfectly round with no corners at all."}},
            {{"triangle", "It has three straight sides meeting at a pointed top."},
             {"cross", "It is made of two thick bars crossing at the center."}},
        };
    std::vector<eval::DescribedExample> out;
    for (size_t i = 0; i < n; ++i) {
        const auto& group = groups[(i / 2) % groups.size()];
        const bool first = i % 2 == 0;
        const auto& pick = first ? group.first : group.second;
        eval::DescribedExample ex;
        ex.id = "dsc" + two_digits(i);
        ex.image = shape_image(pick.name, i % palette().size(), image_size,
                               derive_seed(seed, 0x647363, i));
        ex.label = pick.name;
        ex.general_category = "shape";
        ex.options = {group.first, group.second};
        out.push_back(std::move(ex));
    }
    return out;
}

std::vector<eval::RavenInstance> make_raven_data(size_t n, size_t image_size, uint64_t seed) {
    static const std::vector<size_t> given_counts{3, 4, 8};
    std::vector<eval::RavenInstance> out;
    for (size_t i = 0; i < n; ++i) {
        Rng rng(derive_seed(seed, 0x7276, i));
        const size_t n_given = given_counts[i % given_counts.size()];
        const size_t color = static_cast<size_t>(rng.below(palette().size()));
        const std::string shape = shape_names()[rng.below(shape_names().size())];
        const size_t base = 1 + static_cast<size_t>(rng.below(3));

        eval::RavenInstance inst;
        inst.id = "rvn" + two_digits(i);
        for (size_t g = 0; g < n_given; ++g)
            inst.given.push_back(shape_image(
                shape, color, image_size, derive_seed(derive_seed(seed, 0x7276676e, i), g + 1),
                base + g));
        const size_t correct_count = base + n_given;

        // five decoys break the count progression, one candidate continues it
        std::vector<size_t> counts;
        for (size_t d = 0; counts.size() < 5; ++d) {
            const size_t c = correct_count + 1 + d;
            counts.push_back(c);
        }
        inst.answer_index = static_cast<int>(rng.below(6));
        size_t decoy = 0;
        for (size_t c = 0; c < 6; ++c) {
            const size_t count =
                static_cast<int>(c) == inst.answer_index ? correct_count : counts[decoy++];
            inst.candidates.push_back(shape_image(
                shape, color, image_size, derive_seed(derive_seed(seed, 0x7276636e, i), c + 1),
                count));
        }
        out.push_back(std::move(inst));
    }
    return out;
}

std::vector<eval::LangExample> make_lang_data(size_t n, uint64_t seed) {
    std::vector<eval::LangExample> out;
    for (size_t i = 0; i < n; ++i) {
        Rng rng(derive_seed(seed, 0x6c616e67, i));
        eval::LangExample ex;
        ex.id = "lng" + two_digits(i);
        if (i % 2 == 0) {
            const size_t v = 2 + static_cast<size_t>(rng.below(96));
            ex.prompt = "Question: is the number " + std::to_string(v) + " even? Answer:";
            ex.options = {"yes", "no"};
            ex.answer_index = v % 2 == 0 ? 0 : 1;
        } else {
            size_t a = 1 + static_cast<size_t>(rng.below(98));
            size_t b = 1 + static_cast<size_t>(rng.below(98));
            if (a == b) b = a == 98 ? 1 : a + 1;
            ex.prompt = "Question: is " + std::to_string(a) + " larger than " +
                        std::to_string(b) + "? Answer:";
            ex.options = {"yes", "no"};
            ex.answer_index = a > b ? 0 : 1;
        }
        out.push_back(std::move(ex));
    }
    return out;
}

std::vector<InstructionRow> make_instruction_data(size_t n, uint64_t seed) {
    std::vector<InstructionRow> out;
    for (size_t i = 0; i < n; ++i) {
        Rng rng(derive_seed(seed, 0x696e7374, i));
        const std::string& w = words()[rng.below(words().size())];
        InstructionRow row;
        switch (i % 3) {
            case 0:
                row = {"Repeat the word.", w, w};
                break;
            case 1: {
                std::string up = w;
                std::transform(up.begin(), up.end(), up.begin(),
                               [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
                row = {"Uppercase the word.", w, up};
                break;
            }
            default:
                row = {"Count the letters.", w, std::to_string(w.size())};
                break;
        }
        out.push_back(std::move(row));
    }
    return out;
}

std::vector<MultimodalDocument> make_overfit_corpus(size_t n, size_t image_size, uint64_t seed) {
    auto rows = make_caption_data(n, image_size, seed);
    std::vector<MultimodalDocument> docs;
    for (size_t i = 0; i < rows.size(); ++i) {
        MultimodalDocument doc;
        doc.doc_id = "doc" + two_digits(i);
        doc.add_image(rows[i].image);
        doc.add_text("An image of " + rows[i].caption + ".");
        docs.push_back(std::move(doc));
    }
    return docs;
}

std::vector<RawDocument> make_raw_corpus(size_t n, size_t image_size, uint64_t seed) {
    auto rows = make_caption_data(n + 1, image_size, seed);
    std::vector<RawDocument> docs;
    for (size_t i = 0; i < n; ++i) {
        RawDocument doc;
        doc.doc_id = "raw" + two_digits(i);
        doc.content.add_text("Sample article number " + std::to_string(i) + " follows here.");
        doc.content.add_image(rows[i].image);
        doc.content.add_text("An image of " + rows[i].caption + ".");
        doc.content.add_image(rows[i + 1].image);
        doc.content.add_text("An image of " + rows[i + 1].caption + ".");
        docs.push_back(std::move(doc));
    }
    return docs;
}

void write_caption_jsonl(const std::string& path, std::span<const eval::CaptionExample> rows) {
    std::vector<std::string> lines;
    for (const auto& r : rows) {
        ordered_json j;
        j["id"] = r.id;
        j["image_png_b64"] = b64_png(r.image);
        j["caption"] = r.caption;
        lines.push_back(j.dump());
    }
    write_lines(path, lines);
}

void write_vqa_jsonl(const std::string& path, std::span<const eval::VqaExample> rows) {
    std::vector<std::string> lines;
    for (const auto& r : rows) {
        ordered_json j;
        j["id"] = r.id;
        j["image_png_b64"] = b64_png(r.image);
        j["question"] = r.question;
        j["answers"] = r.answers;
        lines.push_back(j.dump());
    }
    write_lines(path, lines);
}

void write_label_jsonl(const std::string& path, std::span<const eval::LabelExample> rows) {
    std::vector<std::string> lines;
    for (const auto& r : rows) {
        ordered_json j;
        j["id"] = r.id;
        j["image_png_b64"] = b64_png(r.image);
        j["label"] = r.label;
        lines.push_back(j.dump());
    }
    write_lines(path, lines);
}

void write_websrc_jsonl(const std::string& path, std::span<const eval::WebsrcExample> rows) {
    std::vector<std::string> lines;
    for (const auto& r : rows) {
        ordered_json j;
        j["id"] = r.id;
        if (r.image) j["image_png_b64"] = b64_png(*r.image);
        j["web_text"] = r.web_text;
        j["question"] = r.question;
        j["answer"] = r.answer;
        lines.push_back(j.dump());
    }
    write_lines(path, lines);
}

void write_described_jsonl(const std::string& path, std::span<const eval::DescribedExample> rows) {
    std::vector<std::string> lines;
    for (const auto& r : rows) {
        ordered_json j;
        j["id"] = r.id;
        j["image_png_b64"] = b64_png(r.image);
        j["label"] = r.label;
        j["general_category"] = r.general_category;
        j["options"] = ordered_json::array();
        for (const auto& o : r.options)
            j["options"].push_back({{"name", o.name}, {"description", o.description}});
        lines.push_back(j.dump());
    }
    write_lines(path, lines);
}

void write_raven_jsonl(const std::string& path, std::span<const eval::RavenInstance> rows) {
    std::vector<std::string> lines;
    for (const auto& r : rows) {
        ordered_json j;
        j["id"] = r.id;
        j["given_images"] = ordered_json::array();
        for (const auto& img : r.given) j["given_images"].push_back(b64_png(img));
        j["candidate_images"] = ordered_json::array();
        for (const auto& img : r.candidates) j["candidate_images"].push_back(b64_png(img));
        j["answer_index"] = r.answer_index;
        lines.push_back(j.dump());
    }
    write_lines(path, lines);
}

void write_lang_jsonl(const std::string& path, std::span<const eval::LangExample> rows) {
    std::vector<std::string> lines;
    for (const auto& r : rows) {
        ordered_json j;
        j["id"] = r.id;
        j["prompt"] = r.prompt;
        j["options"] = r.options;
        j["answer_index"] = r.answer_index;
        lines.push_back(j.dump());
    }
    write_lines(path, lines);
}

} // namespace mmlm::synth
