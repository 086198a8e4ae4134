#include "cm3/memory_bank.hpp"

#include <cmath>
#include <string>

#include "json.hpp"

#include "cm3/error.hpp"
#include "cm3/io.hpp"
#include "cm3/kernels.hpp"

namespace cm3 {

namespace {

constexpr std::string_view kBankMagic = "CM3MB1";

} // namespace

std::vector<float> embed_document(const Document& doc, const Embedder& embedder) {
    if (doc.caption.empty() && doc.image.empty())
        throw DataError("document '" + doc.id + "' has neither caption nor image");
    if (doc.caption.empty())
        return embedder.embed_tokens(doc.image);
    if (doc.image.empty())
        return embedder.embed_tokens(doc.caption);
    const auto t = embedder.embed_tokens(doc.caption);
    const auto v = embedder.embed_tokens(doc.image);
    std::vector<float> avg(embedder.dim());
    double norm_sq = 0.0;
    for (std::size_t i = 0; i < avg.size(); ++i) {
        avg[i] = (t[i] + v[i]) / 2.0f;
        norm_sq += static_cast<double>(avg[i]) * avg[i];
    }
    if (norm_sq < 1e-24)
        throw DataError("document '" + doc.id + "' has a degenerate embedding");
    const auto inv = static_cast<float>(1.0 / std::sqrt(norm_sq));
    for (float& x : avg)
        x *= inv;
    return avg;
}

MemoryBank build_memory_bank(const std::vector<Document>& docs, const HashedEmbedder& embedder,
                             int threads) {
    MemoryBank bank;
    bank.docs = docs;
    bank.dim = embedder.dim();
    bank.embedder_seed = embedder.seed();
    bank.embeddings.assign(docs.size() * bank.dim, 0.0f);
    const int nt = resolve_threads(threads);
    (void)nt;
#ifdef _OPENMP
#pragma omp parallel for num_threads(nt) schedule(dynamic)
#endif
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(docs.size()); ++i) {
        const auto e = embed_document(docs[static_cast<std::size_t>(i)], embedder);
        std::copy(e.begin(), e.end(), bank.embeddings.begin() + static_cast<std::size_t>(i) * bank.dim);
    }
    return bank;
}

void save_memory_bank(const MemoryBank& bank, const std::string& path) {
    if (bank.embeddings.size() != bank.docs.size() * bank.dim)
        throw ShapeError("memory bank embedding matrix does not match its documents");
    auto out = open_output(path);
    write_magic(out, kBankMagic);
    write_u32(out, static_cast<std::uint32_t>(bank.docs.size()));
    write_u32(out, static_cast<std::uint32_t>(bank.dim));
    write_u32(out, bank.embedder_seed);
    for (float v : bank.embeddings)
        write_f32(out, v);
    for (const Document& doc : bank.docs) {
        nlohmann::json j;
        j["id"] = doc.id;
        j["caption"] = doc.caption;
        j["image"] = doc.image;
        out << j.dump() << "\n";
    }
    if (!out)
        throw IoError("failed writing " + path);
}

MemoryBank load_memory_bank(const std::string& path) {
    auto in = open_input(path);
    expect_magic(in, kBankMagic, path);
    MemoryBank bank;
    const std::uint32_t n = read_u32(in, path + " (count)");
    bank.dim = read_u32(in, path + " (dim)");
    bank.embedder_seed = read_u32(in, path + " (seed)");
    if (bank.dim == 0)
        throw IoError("corrupt memory bank header in " + path);
    bank.embeddings.resize(static_cast<std::size_t>(n) * bank.dim);
    for (float& v : bank.embeddings)
        v = read_f32(in, path + " (embeddings)");
    bank.docs.reserve(n);
    std::string line;
    while (bank.docs.size() < n && std::getline(in, line)) {
        if (line.empty())
            continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw IoError("bad document record in " + path + ": " + e.what());
        }
        Document doc;
        doc.id = j.at("id").get<std::string>();
        doc.caption = j.at("caption").get<TokenStream>();
        doc.image = j.at("image").get<TokenStream>();
        bank.docs.push_back(std::move(doc));
    }
    if (bank.docs.size() != n)
        throw IoError("memory bank " + path + " is missing document records");
    return bank;
}

} // namespace cm3
