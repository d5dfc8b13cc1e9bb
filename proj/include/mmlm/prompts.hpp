#pragma once

#include <span>
#include <string>
#include <vector>

#include "mmlm/stream.hpp"

// Prompt builders for the evaluation protocols. Each builder returns a
// multimodal document whose rendered form is locked by golden fixtures, so
// any byte-level change here is a deliberate, test-visible decision.

namespace mmlm::prompts {

struct CaptionDemo {
    ImageTensor image;
    std::string caption;
};

struct VqaDemo {
    ImageTensor image;
    std::string question;
    std::string answer;
};

struct DescribedOption {
    std::string name;
    std::string description;
};

// Text rendering with one "[image]" marker per image segment. Used for the
// golden fixtures and for hashing prompts in mock scorers.
std::string render_debug(const MultimodalDocument& doc);

// image + "An image of"; demonstrations first, each followed by a newline.
MultimodalDocument caption_prompt(std::span<const CaptionDemo> demos, const ImageTensor& query);

// image + "Question: {q} Answer:"; demonstrations carry their gold answer.
MultimodalDocument vqa_prompt(std::span<const VqaDemo> demos, const ImageTensor& query,
                              const std::string& question);

// image + the fixed sentiment question.
MultimodalDocument sentiment_prompt(const ImageTensor& image);

// image + the fixed hate-speech question.
MultimodalDocument hate_speech_prompt(const ImageTensor& image);

// Optional page screenshot, then the extraction template around the page
// text and the question. Pass image = nullptr for the text-only variant.
MultimodalDocument websrc_prompt(const ImageTensor* image, const std::string& web_text,
                                 const std::string& question);

// image + "The photo of the", decoded over a closed label set.
MultimodalDocument photo_label_prompt(const ImageTensor& image);

// Option block (name plus description, or name alone), then the image, then
// the category question. The two variants differ only in the option block.
MultimodalDocument description_prompt(const ImageTensor& image,
                                      std::span<const DescribedOption> options,
                                      const std::string& general_category,
                                      bool with_descriptions);

// Instruction, the given images one by one, the candidate under its own
// lead-in, and the closing yes/no question.
MultimodalDocument raven_prompt(std::span<const ImageTensor> given, const ImageTensor& candidate);

// Stage 1 of two-stage prompting: ask for a free-form description.
MultimodalDocument cot_stage1_prompt(const ImageTensor& image);

// Stage 2: the stage-1 output verbatim, then the sentiment question. Text
// only; the rationale stands in for the image.
MultimodalDocument cot_stage2_prompt(const std::string& rationale);

} // namespace mmlm::prompts
