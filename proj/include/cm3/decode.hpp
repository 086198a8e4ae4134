#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cm3/embedder.hpp"
#include "cm3/rng.hpp"
#include "cm3/types.hpp"
#include "cm3/vocab.hpp"

namespace cm3 {

// Next-token scorer over the unified id space. Implementations must be safe
// to call from several threads at once (they are read-only once built).
class LogitSource {
  public:
    virtual ~LogitSource() = default;
    virtual std::size_t vocab_size() const = 0;
    virtual std::vector<double> logits(std::span<const TokenId> prefix) const = 0;
};

enum class Strategy {
    Temperature,
    TopP,
    Cfg,
    Cd,
    CdK,
};

std::string strategy_name(Strategy s);
Strategy parse_strategy(std::string_view name);

struct DecodeConfig {
    Strategy strategy = Strategy::TopP;
    double temperature = 1.0;
    double top_p = 1.0;     // 1.0 keeps the full distribution
    double cfg_alpha = 3.0; // guidance scale
    double cd_alpha = 0.1;  // plausibility cutoff relative to the leader
    std::int32_t cd_k = 2;  // rank of the reference probability for the cutoff
    std::size_t max_tokens = 64;
    bool greedy = false; // argmax instead of sampling, ties to the lowest id
};

void validate_decode_config(const DecodeConfig& config);

// logits_uncond + alpha * (logits_cond - logits_uncond). alpha 0 and 1 return
// the unconditional and conditional inputs bit for bit.
std::vector<double> cfg_blend(std::span<const double> cond, std::span<const double> uncond, double alpha);

// softmax(logits / temperature). Entries of -inf carry zero mass.
std::vector<double> temperature_probs(std::span<const double> logits, double temperature);

// Zeroes everything outside the smallest probability-sorted prefix whose mass
// reaches p and renormalizes; ties broken by ascending id. When nothing is
// dropped the input comes back unchanged.
std::vector<double> top_p_filter(std::span<const double> probs, double p);

// ln(p_exp / p_ama) on the plausible set {i : p_exp[i] >= tau}, -inf outside.
// tau = alpha * (k-th largest entry of p_exp); k = 1 anchors the cutoff to the
// leader, larger k relaxes it. p_ama is floored at 1e-12.
std::vector<double> cd_scores(std::span<const double> p_exp, std::span<const double> p_ama, double alpha,
                              std::int32_t k);

// Same stream with the caption segment (between the leading <eos> and the
// first <break>) replaced by a single <mask_0>.
TokenStream unconditional_prompt(const TokenStream& prompt, const VocabLayout& vocab);

// Samples a continuation of the prompt until <eos> or max_tokens. The
// continuation modality follows the prompt structure (image tokens after a
// trailing <break>, text inside an infill suffix) and the terminal <eos> is
// not included. Guided strategies run a second stream on the mask-replaced
// prompt and feed every sampled token to both.
TokenStream decode_sequence(const LogitSource& model, const TokenStream& prompt,
                            const DecodeConfig& config, const VocabLayout& vocab, Rng& rng);

struct Candidate {
    TokenStream tokens;
    Strategy strategy = Strategy::TopP;
    double score = 0.0; // filled by rerank_pool
};

using CandidatePool = std::vector<Candidate>;

// Ordered list of (strategy, candidate count).
using StrategyMix = std::vector<std::pair<Strategy, std::size_t>>;

// Decodes mix[i].second candidates per strategy, each from its own generator
// seeded by (master_seed, strategy, index within the strategy). A pool built
// in one call therefore equals the union of pools built strategy by strategy
// from the same master seed, and the result order never depends on threads.
CandidatePool generate_pool(const LogitSource& model, const TokenStream& prompt, const StrategyMix& mix,
                            const DecodeConfig& base, const VocabLayout& vocab, std::uint64_t master_seed,
                            int threads = 0);

// Cosine similarity between the caption embedding and each candidate's
// embedding, written into the scores; returns the index of the best candidate
// (ties to the lowest index).
std::size_t rerank_pool(CandidatePool& pool, std::span<const TokenId> caption, const Embedder& embedder);

} // namespace cm3
