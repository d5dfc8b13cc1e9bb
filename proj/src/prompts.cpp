#include "mmlm/prompts.hpp"

#include "mmlm/errors.hpp"

namespace mmlm::prompts {

namespace {

void require_hole(const std::string& value, const char* hole) {
    if (value.empty()) throw DataError(std::string("prompt hole '") + hole + "' is empty");
}

} // namespace

std::string render_debug(const MultimodalDocument& doc) {
    std::string out;
    for (const auto& seg : doc.segments) {
        if (seg.kind == Segment::Kind::kText)
            out += seg.text;
        else
            out += "[image]";
    }
    return out;
}

MultimodalDocument caption_prompt(std::span<const CaptionDemo> demos, const ImageTensor& query) {
    MultimodalDocument doc;
    doc.doc_id = "caption";
    for (const auto& d : demos) {
        require_hole(d.caption, "caption");
        doc.add_image(d.image);
        doc.add_text("An image of " + d.caption + "\n");
    }
    doc.add_image(query);
    doc.add_text("An image of");
    return doc;
}

MultimodalDocument vqa_prompt(std::span<const VqaDemo> demos, const ImageTensor& query,
                              const std::string& question) {
    MultimodalDocument doc;
    doc.doc_id = "vqa";
    for (const auto& d : demos) {
        require_hole(d.question, "question");
        require_hole(d.answer, "answer");
        doc.add_image(d.image);
        doc.add_text("Question: " + d.question + " Answer: " + d.answer + "\n");
    }
    require_hole(question, "question");
    doc.add_image(query);
    doc.add_text("Question: " + question + " Answer:");
    return doc;
}

MultimodalDocument sentiment_prompt(const ImageTensor& image) {
    MultimodalDocument doc;
    doc.doc_id = "sentiment";
    doc.add_image(image);
    doc.add_text("Question: what is the sentiment of the opinion? Answer:");
    return doc;
}

MultimodalDocument hate_speech_prompt(const ImageTensor& image) {
    MultimodalDocument doc;
    doc.doc_id = "hate-speech";
    doc.add_image(image);
    doc.add_text("Question: does this picture contain real hate speech? Answer:");
    return doc;
}

MultimodalDocument websrc_prompt(const ImageTensor* image, const std::string& web_text,
                                 const std::string& question) {
    require_hole(web_text, "web_text");
    require_hole(question, "question");
    MultimodalDocument doc;
    doc.doc_id = "websrc";
    if (image) doc.add_image(*image);
    doc.add_text(
        "Given the context below from web page, extract the answer from the given text like "
        "this: Qusestion: Who is the publisher of this book? Answer: Penguin Books Ltd. "
        "Context: " +
        web_text + " Q: " + question + " A:");
    return doc;
}

MultimodalDocument photo_label_prompt(const ImageTensor& image) {
    MultimodalDocument doc;
    doc.doc_id = "photo-label";
    doc.add_image(image);
    doc.add_text("The photo of the");
    return doc;
}

MultimodalDocument description_prompt(const ImageTensor& image,
                                      std::span<const DescribedOption> options,
                                      const std::string& general_category,
                                      bool with_descriptions) {
    if (options.size() < 2) throw DataError("description prompt needs at least two options");
    require_hole(general_category, "general_category");
    MultimodalDocument doc;
    doc.doc_id = "description";
    std::string block;
    for (const auto& opt : options) {
        require_hole(opt.name, "name");
        if (with_descriptions) {
            require_hole(opt.description, "description");
            block += opt.name + ": " + opt.description + "\n";
        } else {
            block += opt.name + "\n";
        }
    }
    doc.add_text(block);
    doc.add_image(image);
    doc.add_text("Question:what is the name of " + general_category + " in the picture? Answer:");
    return doc;
}

MultimodalDocument raven_prompt(std::span<const ImageTensor> given, const ImageTensor& candidate) {
    const char* word = nullptr;
    switch (given.size()) {
        case 3: word = "three"; break;
        case 4: word = "four"; break;
        case 8: word = "eight"; break;
        default:
            throw DataError("matrix tasks give 3, 4, or 8 images, got " +
                            std::to_string(given.size()));
    }
    MultimodalDocument doc;
    doc.doc_id = "raven";
    doc.add_text(std::string("Here are ") + word + " images:");
    for (const auto& img : given) doc.add_image(img);
    doc.add_text("The following image is:");
    doc.add_image(candidate);
    doc.add_text("Is it correct?");
    return doc;
}

MultimodalDocument cot_stage1_prompt(const ImageTensor& image) {
    MultimodalDocument doc;
    doc.doc_id = "cot-stage1";
    doc.add_image(image);
    doc.add_text("Introduce this picture in detail:");
    return doc;
}

MultimodalDocument cot_stage2_prompt(const std::string& rationale) {
    MultimodalDocument doc;
    doc.doc_id = "cot-stage2";
    doc.add_text(rationale + " Question: what is the sentiment of the opinion? Answer:");
    return doc;
}

} // namespace mmlm::prompts
