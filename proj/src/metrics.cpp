#include "cm3/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "cm3/error.hpp"
#include "cm3/infill.hpp"

namespace cm3 {

double perplexity(const LogitSource& model, const std::vector<TokenStream>& heldout,
                  const VocabLayout& vocab) {
    if (heldout.empty())
        throw DataError("held-out set is empty");
    if (model.vocab_size() != static_cast<std::size_t>(vocab.total_size()))
        throw ShapeError("model vocabulary does not match the layout");
    double total_nll = 0.0;
    double total_weight = 0.0;
    for (const TokenStream& stream : heldout) {
        const auto weights = loss_weights(stream, vocab);
        for (std::size_t i = 0; i < stream.size(); ++i) {
            if (weights[i] == 0.0f)
                continue;
            const auto logits = model.logits({stream.data(), i});
            double max_logit = logits[0];
            for (double l : logits)
                max_logit = std::max(max_logit, l);
            double lse = 0.0;
            for (double l : logits)
                lse += std::exp(l - max_logit);
            const double ln_p = logits[static_cast<std::size_t>(stream[i])] - max_logit - std::log(lse);
            total_nll -= static_cast<double>(weights[i]) * ln_p;
            total_weight += weights[i];
        }
    }
    if (total_weight == 0.0)
        throw DataError("held-out set has no scored positions");
    return std::exp(total_nll / total_weight);
}

FidelityReport conditional_fidelity(const std::vector<TokenStream>& candidates,
                                    std::span<const TokenId> gold_pattern,
                                    std::span<const TokenId> caption, const Embedder& embedder) {
    if (candidates.empty())
        throw DataError("candidate pool is empty");
    if (gold_pattern.empty())
        throw ShapeError("gold pattern is empty");
    FidelityReport report;
    report.n_candidates = candidates.size();
    report.best_accuracy = 0.0;
    report.best_similarity = -1.0;
    const auto caption_embedding = embedder.embed_tokens(caption);
    for (const TokenStream& cand : candidates) {
        if (cand.size() != gold_pattern.size())
            throw ShapeError("candidate length " + std::to_string(cand.size()) +
                             " does not match the pattern length " + std::to_string(gold_pattern.size()));
        std::size_t matches = 0;
        for (std::size_t i = 0; i < cand.size(); ++i)
            if (cand[i] == gold_pattern[i])
                ++matches;
        const double accuracy = static_cast<double>(matches) / static_cast<double>(gold_pattern.size());
        const double similarity = cosine(caption_embedding, embedder.embed_tokens(cand));
        report.mean_accuracy += accuracy;
        report.mean_similarity += similarity;
        report.best_accuracy = std::max(report.best_accuracy, accuracy);
        report.best_similarity = std::max(report.best_similarity, similarity);
    }
    report.mean_accuracy /= static_cast<double>(candidates.size());
    report.mean_similarity /= static_cast<double>(candidates.size());
    return report;
}

} // namespace cm3
