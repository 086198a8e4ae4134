#include "cm3/sft.hpp"

#include <cmath>

#include "cm3/error.hpp"

namespace cm3 {

void validate_template(const TaskTemplate& tmpl) {
    for (const TemplatePart& part : tmpl.parts)
        if (part.kind == PartKind::TextSlot || part.kind == PartKind::ImageSlot ||
            part.kind == PartKind::GroundingSlot)
            return;
    throw ConfigError("template '" + tmpl.task + "' has no slot");
}

FieldValue text_field(std::string text) {
    FieldValue v;
    v.text = std::move(text);
    return v;
}

FieldValue image_field(TokenStream tokens) {
    FieldValue v;
    v.image = std::move(tokens);
    return v;
}

FieldValue objects_field(std::vector<GroundedObject> objects) {
    FieldValue v;
    v.objects = std::move(objects);
    return v;
}

namespace {

const FieldValue& field_for(const FieldMap& fields, const std::string& name) {
    const auto it = fields.find(name);
    if (it == fields.end())
        throw DataError("template field '" + name + "' is missing");
    return it->second;
}

std::int32_t coord_bucket(double v, std::int32_t n_buckets) {
    if (!(v >= 0.0 && v <= 1.0))
        throw DataError("bounding box coordinate " + std::to_string(v) + " outside [0, 1]");
    const auto b = static_cast<std::int32_t>(std::floor(v * n_buckets));
    return b < n_buckets ? b : n_buckets - 1;
}

} // namespace

TokenStream render_template(const TaskTemplate& tmpl, const FieldMap& fields, const VocabLayout& vocab,
                            std::int32_t coord_buckets) {
    validate_template(tmpl);
    TokenStream out;
    std::string buffer;
    auto flush = [&] {
        const TokenStream words = tokenize_words(vocab, buffer, coord_buckets);
        out.insert(out.end(), words.begin(), words.end());
        buffer.clear();
    };
    for (const TemplatePart& part : tmpl.parts) {
        switch (part.kind) {
        case PartKind::Literal:
            buffer += part.value;
            break;
        case PartKind::TextSlot: {
            const FieldValue& field = field_for(fields, part.value);
            if (!field.text)
                throw DataError("template field '" + part.value + "' is not text");
            buffer += *field.text;
            break;
        }
        case PartKind::ImageSlot: {
            const FieldValue& field = field_for(fields, part.value);
            if (!field.image)
                throw DataError("template field '" + part.value + "' is not an image");
            flush();
            for (TokenId t : *field.image) {
                if (!vocab.is_image(t))
                    throw DataError("template field '" + part.value + "': token " + std::to_string(t) +
                                    " outside the image block");
                out.push_back(t);
            }
            break;
        }
        case PartKind::GroundingSlot: {
            const FieldValue& field = field_for(fields, part.value);
            if (!field.objects)
                throw DataError("template field '" + part.value + "' is not an object list");
            for (const GroundedObject& obj : *field.objects) {
                buffer += ' ';
                buffer += obj.label;
                buffer += " at";
                flush();
                for (double v : obj.box)
                    out.push_back(coord_token(vocab, coord_bucket(v, coord_buckets), coord_buckets));
            }
            break;
        }
        case PartKind::Break:
            flush();
            out.push_back(VocabLayout::kBreak);
            break;
        }
    }
    flush();
    return out;
}

const std::vector<TaskTemplate>& TemplateRegistry::variants(const std::string& task) const {
    const auto it = tasks.find(task);
    if (it == tasks.end())
        throw DataError("unknown task '" + task + "'");
    return it->second;
}

const TaskTemplate& TemplateRegistry::get(const std::string& task, std::int32_t variant) const {
    const auto& list = variants(task);
    if (variant < 0 || static_cast<std::size_t>(variant) >= list.size())
        throw DataError("task '" + task + "' has no variant " + std::to_string(variant));
    return list[static_cast<std::size_t>(variant)];
}

const TaskTemplate& TemplateRegistry::pick(const std::string& task, Rng& rng) const {
    const auto& list = variants(task);
    return list[static_cast<std::size_t>(bounded(rng, list.size()))];
}

namespace {

TemplatePart lit(std::string text) { return {PartKind::Literal, std::move(text)}; }
TemplatePart text_slot(std::string name) { return {PartKind::TextSlot, std::move(name)}; }
TemplatePart image_slot(std::string name) { return {PartKind::ImageSlot, std::move(name)}; }
TemplatePart objects_slot(std::string name) { return {PartKind::GroundingSlot, std::move(name)}; }
TemplatePart brk() { return {PartKind::Break, {}}; }

void add(TemplateRegistry& reg, const std::string& task, std::vector<TemplatePart> parts) {
    TaskTemplate tmpl;
    tmpl.task = task;
    tmpl.variant = static_cast<std::int32_t>(reg.tasks[task].size());
    tmpl.parts = std::move(parts);
    validate_template(tmpl);
    reg.tasks[task].push_back(std::move(tmpl));
}

} // namespace

TemplateRegistry builtin_templates() {
    TemplateRegistry reg;
    add(reg, "edit",
        {lit("Edit first image following the instruction"), brk(), image_slot("image1"), brk(),
         text_slot("instruction"), brk(), image_slot("image2")});
    add(reg, "ocr", {lit("draw \""), text_slot("ocr_content"), lit("\""), brk(), image_slot("image")});
    add(reg, "object_detection",
        {lit("Generate high quality image of "), text_slot("caption"), lit(" with segmentations"),
         objects_slot("objects"), brk(), image_slot("image")});
    add(reg, "edge_to_image",
        {lit("Make high quality image from canny edge features"), brk(), image_slot("edge_image"), brk(),
         text_slot("caption"), brk(), image_slot("image")});
    add(reg, "captioning", {text_slot("caption"), brk(), image_slot("image")});
    add(reg, "captioning",
        {lit("Describe the given picture. "), text_slot("caption"), brk(), image_slot("image")});
    add(reg, "long_caption",
        {lit("Describe the given picture in very detail. "), text_slot("caption"), brk(),
         image_slot("image")});
    add(reg, "long_caption",
        {lit("Describe all the objects in the given image in very detail. "), text_slot("caption"), brk(),
         image_slot("image")});
    add(reg, "long_caption",
        {lit("Generate a long caption for the given image. "), text_slot("caption"), brk(),
         image_slot("image")});
    add(reg, "vqa",
        {lit("Question: "), text_slot("question"), lit(" Answer: "), text_slot("answer"), lit("."), brk(),
         image_slot("image")});
    add(reg, "vqa",
        {lit("Question: "), text_slot("question"), lit(" [newline] "), text_slot("answer"), brk(),
         image_slot("image")});
    add(reg, "vqa",
        {lit("Question: "), text_slot("question"), lit(" The answer is "), text_slot("answer"), lit("."),
         brk(), image_slot("image")});
    add(reg, "scienceqa",
        {lit("Question: "), text_slot("question"), lit(" [newline] Context: "), text_slot("context"),
         lit(" [newline] Options: "), text_slot("choices_text"), lit(" [newline] Answer: "),
         text_slot("answer"), lit("."), brk(), image_slot("image")});
    add(reg, "scienceqa",
        {lit("Question: "), text_slot("question"), lit(" [newline] Context: "), text_slot("context"),
         lit(" [newline] Options: "), text_slot("choices_text"),
         lit(" [newline] Answer: Let's think step-by-step: "), text_slot("explanation"),
         lit(" So the answer is "), text_slot("answer"), lit("."), brk(), image_slot("image")});
    return reg;
}

} // namespace cm3
