#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cm3/infill.hpp"
#include "cm3/sft.hpp"
#include "cm3/types.hpp"
#include "cm3/vocab.hpp"
#include "cm3/vq.hpp"

namespace cm3 {

// Corpus interchange: one document per line, either pre-tokenized
//   {"id": str, "caption_tokens": [int], "image_tokens": [int]}
// or raw
//   {"id": str, "caption_text": str, "image_pgm": path}.
// Raw captions go through the word-id map; raw images are read as PGM,
// encoded with the codebook (required for such records) and offset into the
// image block. Relative PGM paths resolve against the JSONL file's directory.
std::vector<Document> read_corpus_jsonl(const std::string& path, const VocabLayout& vocab,
                                        const Codebook* codebook = nullptr, int threads = 0);

// Writes the pre-tokenized record form, one document per line.
void write_corpus_jsonl(const std::string& path, const std::vector<Document>& docs);

// A mask-transformed training stream plus where the spans came from.
struct TransformedDoc {
    std::string id;
    TokenStream tokens;
    std::vector<MaskRecord> mask_records; // serialized as [sentinel, pos, len] triples
};

std::vector<TransformedDoc> read_transformed_jsonl(const std::string& path);
void write_transformed_jsonl(const std::string& path, const std::vector<TransformedDoc>& docs);

// Instruction-tuning example: {"task": str, "variant": int?, "fields":
// {name: str | [int] | [{"label": str, "box": [4 floats]}]}}.
struct SftExample {
    std::string task;
    std::optional<std::int32_t> variant;
    FieldMap fields;
};

std::vector<SftExample> read_sft_jsonl(const std::string& path);

} // namespace cm3
