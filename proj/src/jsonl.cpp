#include "cm3/jsonl.hpp"

#include <filesystem>
#include <string>

#include "json.hpp"

#include "cm3/error.hpp"
#include "cm3/io.hpp"
#include "cm3/pgm.hpp"

namespace cm3 {

namespace {

using nlohmann::json;

std::string at_line(const std::string& path, std::size_t lineno) {
    return path + ":" + std::to_string(lineno) + ": ";
}

// Applies `parse` to every non-blank line, converting any json exception into
// a data error that names the file and line.
template <typename Fn>
void for_each_record(const std::string& path, Fn&& parse) {
    auto in = open_input(path, false);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        try {
            parse(json::parse(line), lineno);
        } catch (const json::exception& e) {
            throw DataError(at_line(path, lineno) + e.what());
        }
    }
}

std::string resolve_against(const std::string& jsonl_path, const std::string& file) {
    std::filesystem::path p(file);
    if (p.is_relative())
        p = std::filesystem::path(jsonl_path).parent_path() / p;
    return p.string();
}

} // namespace

std::vector<Document> read_corpus_jsonl(const std::string& path, const VocabLayout& vocab,
                                        const Codebook* codebook, int threads) {
    std::vector<Document> docs;
    for_each_record(path, [&](const json& j, std::size_t lineno) {
        Document doc;
        doc.id = j.at("id").get<std::string>();
        if (j.contains("caption_tokens")) {
            doc.caption = j.at("caption_tokens").get<TokenStream>();
            for (TokenId t : doc.caption)
                if (!vocab.is_text(t))
                    throw DataError(at_line(path, lineno) + "caption token " + std::to_string(t) +
                                    " outside the text block");
        } else if (j.contains("caption_text")) {
            doc.caption = tokenize_words(vocab, j.at("caption_text").get<std::string>());
        } else {
            throw DataError(at_line(path, lineno) + "record has neither caption_tokens nor caption_text");
        }
        if (j.contains("image_tokens")) {
            doc.image = j.at("image_tokens").get<TokenStream>();
            for (TokenId t : doc.image)
                if (!vocab.is_image(t))
                    throw DataError(at_line(path, lineno) + "image token " + std::to_string(t) +
                                    " outside the image block");
        } else if (j.contains("image_pgm")) {
            if (codebook == nullptr)
                throw DataError(at_line(path, lineno) + "PGM record needs a codebook");
            const auto img = read_pgm(resolve_against(path, j.at("image_pgm").get<std::string>()));
            for (TokenId idx : encode_image(img, *codebook, threads)) {
                const TokenId t = vocab.image_start() + idx;
                if (!vocab.is_image(t))
                    throw DataError(at_line(path, lineno) + "codebook index " + std::to_string(idx) +
                                    " does not fit the image block");
                doc.image.push_back(t);
            }
        } else {
            throw DataError(at_line(path, lineno) + "record has neither image_tokens nor image_pgm");
        }
        docs.push_back(std::move(doc));
    });
    return docs;
}

void write_corpus_jsonl(const std::string& path, const std::vector<Document>& docs) {
    auto out = open_output(path, false);
    for (const Document& doc : docs) {
        const json j{{"id", doc.id}, {"caption_tokens", doc.caption}, {"image_tokens", doc.image}};
        out << j.dump() << '\n';
    }
    if (!out)
        throw IoError("failed writing " + path);
}

std::vector<TransformedDoc> read_transformed_jsonl(const std::string& path) {
    std::vector<TransformedDoc> docs;
    for_each_record(path, [&](const json& j, std::size_t lineno) {
        TransformedDoc doc;
        doc.id = j.at("id").get<std::string>();
        doc.tokens = j.at("tokens").get<TokenStream>();
        for (const json& rec : j.at("mask_records")) {
            if (!rec.is_array() || rec.size() != 3)
                throw DataError(at_line(path, lineno) + "mask record is not a [sentinel, pos, len] triple");
            doc.mask_records.push_back(
                {rec[0].get<TokenId>(), rec[1].get<std::size_t>(), rec[2].get<std::size_t>()});
        }
        docs.push_back(std::move(doc));
    });
    return docs;
}

void write_transformed_jsonl(const std::string& path, const std::vector<TransformedDoc>& docs) {
    auto out = open_output(path, false);
    for (const TransformedDoc& doc : docs) {
        json records = json::array();
        for (const MaskRecord& rec : doc.mask_records)
            records.push_back({rec.sentinel, rec.pos, rec.len});
        const json j{{"id", doc.id}, {"tokens", doc.tokens}, {"mask_records", std::move(records)}};
        out << j.dump() << '\n';
    }
    if (!out)
        throw IoError("failed writing " + path);
}

std::vector<SftExample> read_sft_jsonl(const std::string& path) {
    std::vector<SftExample> examples;
    for_each_record(path, [&](const json& j, std::size_t lineno) {
        SftExample ex;
        ex.task = j.at("task").get<std::string>();
        if (j.contains("variant"))
            ex.variant = j.at("variant").get<std::int32_t>();
        for (const auto& [name, value] : j.at("fields").items()) {
            if (value.is_string()) {
                ex.fields[name] = text_field(value.get<std::string>());
            } else if (value.is_array() && (value.empty() || value[0].is_number())) {
                ex.fields[name] = image_field(value.get<TokenStream>());
            } else if (value.is_array()) {
                std::vector<GroundedObject> objects;
                for (const json& o : value) {
                    GroundedObject obj;
                    obj.label = o.at("label").get<std::string>();
                    const json& box = o.at("box");
                    if (!box.is_array() || box.size() != 4)
                        throw DataError(at_line(path, lineno) + "field '" + name +
                                        "': box is not [ymin, xmin, ymax, xmax]");
                    for (std::size_t i = 0; i < 4; ++i)
                        obj.box[i] = box[i].get<double>();
                    objects.push_back(std::move(obj));
                }
                ex.fields[name] = objects_field(std::move(objects));
            } else {
                throw DataError(at_line(path, lineno) + "field '" + name +
                                "' is neither text, token list nor object list");
            }
        }
        examples.push_back(std::move(ex));
    });
    return examples;
}

} // namespace cm3
