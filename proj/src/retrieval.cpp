#include "cm3/retrieval.hpp"

#include <algorithm>
#include <map>

#include "cm3/error.hpp"
#include "cm3/kernels.hpp"
#include "cm3/stream.hpp"

namespace cm3 {

namespace {

bool hit_before(const RetrievalHit& a, const RetrievalHit& b) {
    if (a.score != b.score)
        return a.score > b.score;
    return a.id < b.id;
}

} // namespace

std::vector<RetrievalHit> mips_search(const MemoryBank& bank, std::span<const float> query, std::size_t k,
                                      int threads) {
    if (query.size() != bank.dim)
        throw ShapeError("query dimension does not match the bank");
    const std::size_t n = bank.docs.size();
    k = std::min(k, n);
    std::vector<float> scores(n);
    if (n > 0)
        inner_products(bank.embeddings, n, bank.dim, query, scores, threads);
    std::vector<RetrievalHit> hits(n);
    for (std::size_t i = 0; i < n; ++i)
        hits[i] = {i, bank.docs[i].id, scores[i], QueryModality::Text};
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(), hit_before);
    hits.resize(k);
    return hits;
}

std::vector<RetrievalHit> filter_candidates(std::vector<RetrievalHit> hits, const MemoryBank& bank,
                                            float max_relevance, float dedup_threshold) {
    std::vector<RetrievalHit> kept;
    kept.reserve(hits.size());
    for (RetrievalHit& hit : hits) {
        if (hit.score > max_relevance)
            continue;
        const bool duplicate = std::any_of(kept.begin(), kept.end(), [&](const RetrievalHit& other) {
            return cosine(bank.row(hit.index), bank.row(other.index)) > dedup_threshold;
        });
        if (!duplicate)
            kept.push_back(std::move(hit));
    }
    return kept;
}

TokenStream query_dropout(const TokenStream& tokens, double rate, Rng& rng) {
    if (!(rate >= 0.0 && rate < 1.0))
        throw ConfigError("dropout rate must lie in [0, 1)");
    const auto n_drop = static_cast<std::size_t>(rate * static_cast<double>(tokens.size()));
    if (n_drop == 0)
        return tokens;
    std::vector<std::size_t> order(tokens.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    for (std::size_t i = 0; i < n_drop; ++i) {
        const std::size_t j = i + bounded(rng, order.size() - i);
        std::swap(order[i], order[j]);
    }
    std::vector<std::uint8_t> dropped(tokens.size(), 0);
    for (std::size_t i = 0; i < n_drop; ++i)
        dropped[order[i]] = 1;
    TokenStream out;
    out.reserve(tokens.size() - n_drop);
    for (std::size_t i = 0; i < tokens.size(); ++i)
        if (!dropped[i])
            out.push_back(tokens[i]);
    return out;
}

ModalHits retrieve_for_query(const MemoryBank& bank, const Document& query, const Embedder& embedder,
                             const RetrieveOptions& opts, Rng& rng, int threads) {
    if (embedder.dim() != bank.dim)
        throw ShapeError("embedder dimension does not match the bank");
    TokenStream caption = query.caption;
    TokenStream image = query.image;
    if (opts.query_dropout) {
        caption = query_dropout(caption, opts.dropout_rate, rng);
        image = query_dropout(image, opts.dropout_rate, rng);
    }

    // One extra hit absorbs the query document itself when it is in the bank.
    const std::size_t want = opts.k_per_modality + 1;
    auto run = [&](const TokenStream& tokens, QueryModality modality) {
        std::vector<RetrievalHit> hits;
        if (tokens.empty())
            return hits;
        hits = mips_search(bank, embedder.embed_tokens(tokens), want, threads);
        std::erase_if(hits, [&](const RetrievalHit& h) { return h.id == query.id; });
        if (hits.size() > opts.k_per_modality)
            hits.resize(opts.k_per_modality);
        for (RetrievalHit& h : hits)
            h.modality = modality;
        return filter_candidates(std::move(hits), bank, opts.max_relevance, opts.dedup_threshold);
    };
    ModalHits out;
    out.text = run(caption, QueryModality::Text);
    out.image = run(image, QueryModality::Image);
    return out;
}

std::vector<RetrievalHit> merge_hits(std::span<const RetrievalHit> text, std::span<const RetrievalHit> image) {
    std::map<std::string, RetrievalHit> by_id;
    for (const RetrievalHit& h : text)
        by_id.emplace(h.id, h);
    for (const RetrievalHit& h : image) {
        const auto [it, inserted] = by_id.emplace(h.id, h);
        if (!inserted && h.score > it->second.score)
            it->second = h;
    }
    std::vector<RetrievalHit> merged;
    merged.reserve(by_id.size());
    for (auto& [id, hit] : by_id)
        merged.push_back(std::move(hit));
    std::sort(merged.begin(), merged.end(), hit_before);
    return merged;
}

std::vector<RetrievalHit> sample_training_retrievals(std::span<const RetrievalHit> pool, Rng& rng,
                                                     std::size_t count) {
    const std::size_t take = std::min(count, pool.size());
    std::vector<std::size_t> order(pool.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    for (std::size_t i = 0; i < take; ++i) {
        const std::size_t j = i + bounded(rng, order.size() - i);
        std::swap(order[i], order[j]);
    }
    std::vector<std::size_t> picked(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take));
    std::sort(picked.begin(), picked.end());
    std::vector<RetrievalHit> out;
    out.reserve(take);
    for (std::size_t i : picked)
        out.push_back(pool[i]);
    return out;
}

std::vector<RetrievalHit> inference_retrievals(const ModalHits& hits) {
    std::vector<RetrievalHit> text, image;
    if (!hits.text.empty())
        text.push_back(hits.text.front());
    if (!hits.image.empty())
        image.push_back(hits.image.front());
    return merge_hits(text, image);
}

TokenStream build_training_context(const std::vector<Document>& retrieved, const Document& query,
                                   std::size_t seq_len, const VocabLayout& vocab) {
    const TokenStream query_stream = serialize_document(query, vocab);
    if (query_stream.size() > seq_len)
        throw DataError("query document alone exceeds the sequence length");
    std::vector<TokenStream> streams;
    streams.reserve(retrieved.size());
    std::size_t total = query_stream.size();
    for (const Document& doc : retrieved) {
        streams.push_back(serialize_document(doc, vocab));
        total += streams.back().size();
    }
    std::size_t first = 0;
    while (total > seq_len && first < streams.size()) {
        total -= streams[first].size();
        ++first;
    }
    TokenStream out;
    out.reserve(total);
    for (std::size_t i = first; i < streams.size(); ++i)
        out.insert(out.end(), streams[i].begin(), streams[i].end());
    out.insert(out.end(), query_stream.begin(), query_stream.end());
    return out;
}

} // namespace cm3
