#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cm3/rng.hpp"
#include "cm3/types.hpp"
#include "cm3/vocab.hpp"

namespace cm3 {

enum class PartKind { Literal, TextSlot, ImageSlot, GroundingSlot, Break };

struct TemplatePart {
    PartKind kind = PartKind::Literal;
    std::string value; // literal text, or the slot's field name; empty for <break>
};

// One variant of one instruction-tuning task. Literals carry their own
// spacing; adjacent text parts concatenate verbatim before tokenization, so
// quote marks and punctuation attach to the neighbouring word exactly as
// written in the template.
struct TaskTemplate {
    std::string task;
    std::int32_t variant = 0;
    std::vector<TemplatePart> parts;
};

// Every template must contain at least one slot.
void validate_template(const TaskTemplate& tmpl);

// Axis-aligned box as [ymin, xmin, ymax, xmax], each coordinate in [0, 1].
struct GroundedObject {
    std::string label;
    std::array<double, 4> box{};
};

// Tagged value for one slot; exactly one member should be set.
struct FieldValue {
    std::optional<std::string> text;
    std::optional<TokenStream> image;
    std::optional<std::vector<GroundedObject>> objects;
};

FieldValue text_field(std::string text);
FieldValue image_field(TokenStream tokens);
FieldValue objects_field(std::vector<GroundedObject> objects);

using FieldMap = std::map<std::string, FieldValue>;

// Renders the parts in order: literal and text-slot pieces accumulate into a
// text buffer that is whitespace-tokenized through the word-id map, image
// slots splice their token ids verbatim, grounding slots render each object
// as "<label> at" plus four quantized coordinate tokens, and break markers
// emit <break>. Missing fields and wrong-modality fields raise data errors.
TokenStream render_template(const TaskTemplate& tmpl, const FieldMap& fields, const VocabLayout& vocab,
                            std::int32_t coord_buckets = kCoordBuckets);

// Immutable task-name -> variants table.
struct TemplateRegistry {
    std::map<std::string, std::vector<TaskTemplate>> tasks;

    const std::vector<TaskTemplate>& variants(const std::string& task) const;
    const TaskTemplate& get(const std::string& task, std::int32_t variant) const;
    // Uniform choice among the task's variants.
    const TaskTemplate& pick(const std::string& task, Rng& rng) const;
};

// The built-in task set: image editing, OCR-style sign drawing, spatially
// grounded generation, edge-feature-to-image, captioning (2 variants), long
// captioning (3), question answering (3), and multiple-choice science
// questions (2). The "[newline]" marker some variants use has no dedicated
// token; it renders as an ordinary word.
TemplateRegistry builtin_templates();

} // namespace cm3
