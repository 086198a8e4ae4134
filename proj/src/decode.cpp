#include "cm3/decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "cm3/error.hpp"
#include "cm3/kernels.hpp"

namespace cm3 {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kAmateurFloor = 1e-12;

} // namespace

std::string strategy_name(Strategy s) {
    switch (s) {
    case Strategy::Temperature: return "temperature";
    case Strategy::TopP: return "top_p";
    case Strategy::Cfg: return "cfg";
    case Strategy::Cd: return "cd";
    case Strategy::CdK: return "cdk";
    }
    throw ConfigError("unknown decoding strategy");
}

Strategy parse_strategy(std::string_view name) {
    if (name == "temperature") return Strategy::Temperature;
    if (name == "top_p") return Strategy::TopP;
    if (name == "cfg") return Strategy::Cfg;
    if (name == "cd") return Strategy::Cd;
    if (name == "cdk") return Strategy::CdK;
    throw ConfigError("unknown decoding strategy '" + std::string(name) + "'");
}

void validate_decode_config(const DecodeConfig& config) {
    if (!(config.temperature > 0.0))
        throw ConfigError("temperature must be positive");
    if (!(config.top_p > 0.0 && config.top_p <= 1.0))
        throw ConfigError("top_p must lie in (0, 1]");
    if (config.cfg_alpha < 0.0)
        throw ConfigError("cfg_alpha must be non-negative");
    if (!(config.cd_alpha > 0.0 && config.cd_alpha <= 1.0))
        throw ConfigError("cd_alpha must lie in (0, 1]");
    if (config.cd_k < 1)
        throw ConfigError("cd_k must be at least 1");
    if (config.max_tokens == 0)
        throw ConfigError("max_tokens must be positive");
}

std::vector<double> cfg_blend(std::span<const double> cond, std::span<const double> uncond, double alpha) {
    if (cond.size() != uncond.size())
        throw ShapeError("cfg_blend: logit lengths differ");
    if (alpha == 0.0)
        return {uncond.begin(), uncond.end()};
    if (alpha == 1.0)
        return {cond.begin(), cond.end()};
    std::vector<double> out(cond.size());
    for (std::size_t i = 0; i < cond.size(); ++i)
        out[i] = uncond[i] + alpha * (cond[i] - uncond[i]);
    return out;
}

std::vector<double> temperature_probs(std::span<const double> logits, double temperature) {
    if (!(temperature > 0.0))
        throw ConfigError("temperature must be positive");
    if (logits.empty())
        throw ShapeError("temperature_probs: empty logits");
    double max_logit = kNegInf;
    for (double l : logits)
        max_logit = std::max(max_logit, l);
    if (max_logit == kNegInf)
        throw DataError("temperature_probs: no admissible tokens");
    std::vector<double> out(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = logits[i] == kNegInf ? 0.0 : std::exp((logits[i] - max_logit) / temperature);
        total += out[i];
    }
    for (double& p : out)
        p /= total;
    return out;
}

std::vector<double> top_p_filter(std::span<const double> probs, double p) {
    if (!(p > 0.0 && p <= 1.0))
        throw ConfigError("top_p must lie in (0, 1]");
    std::vector<std::size_t> order(probs.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (probs[a] != probs[b])
            return probs[a] > probs[b];
        return a < b;
    });
    double cum = 0.0;
    std::size_t kept = order.size();
    for (std::size_t r = 0; r < order.size(); ++r) {
        cum += probs[order[r]];
        if (cum >= p) {
            kept = r + 1;
            break;
        }
    }
    if (kept == order.size())
        return {probs.begin(), probs.end()};
    std::vector<double> out(probs.size(), 0.0);
    double mass = 0.0;
    for (std::size_t r = 0; r < kept; ++r)
        mass += probs[order[r]];
    for (std::size_t r = 0; r < kept; ++r)
        out[order[r]] = probs[order[r]] / mass;
    return out;
}

std::vector<double> cd_scores(std::span<const double> p_exp, std::span<const double> p_ama, double alpha,
                              std::int32_t k) {
    if (p_exp.size() != p_ama.size())
        throw ShapeError("cd_scores: distribution lengths differ");
    if (p_exp.empty())
        throw ShapeError("cd_scores: empty distributions");
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw ConfigError("cd_alpha must lie in (0, 1]");
    if (k < 1 || static_cast<std::size_t>(k) > p_exp.size())
        throw ConfigError("cd_k must lie in [1, vocab size]");
    std::vector<double> sorted(p_exp.begin(), p_exp.end());
    std::nth_element(sorted.begin(), sorted.begin() + (k - 1), sorted.end(), std::greater<>());
    const double tau = alpha * sorted[static_cast<std::size_t>(k - 1)];
    std::vector<double> out(p_exp.size());
    for (std::size_t i = 0; i < p_exp.size(); ++i)
        out[i] = p_exp[i] >= tau ? std::log(p_exp[i] / std::max(p_ama[i], kAmateurFloor)) : kNegInf;
    return out;
}

TokenStream unconditional_prompt(const TokenStream& prompt, const VocabLayout& vocab) {
    if (prompt.empty() || prompt.front() != VocabLayout::kEos)
        throw DataError("prompt must start with <eos>");
    const auto brk = std::find(prompt.begin(), prompt.end(), VocabLayout::kBreak);
    if (brk == prompt.end())
        throw DataError("prompt has no <break>");
    TokenStream out;
    out.reserve(prompt.size());
    out.push_back(VocabLayout::kEos);
    out.push_back(vocab.mask(0));
    out.insert(out.end(), brk, prompt.end());
    return out;
}

namespace {

// Continuation modality implied by the prompt structure: image tokens when
// the prompt ends inside an image segment, text inside a text segment, and
// inside an infill suffix whatever modality the open span had in the body.
bool continuation_is_image(const TokenStream& prompt, const VocabLayout& vocab) {
    bool image_segment = false;
    bool suffix = false;
    bool span_is_image = false;
    bool span_known = false;
    std::map<TokenId, bool> body_modality;
    for (const TokenId t : prompt) {
        if (t == VocabLayout::kEos) {
            image_segment = false;
            suffix = false;
            span_known = false;
            body_modality.clear();
        } else if (t == VocabLayout::kBreak) {
            if (!suffix)
                image_segment = !image_segment;
        } else if (t == VocabLayout::kInfill) {
            suffix = true;
        } else if (vocab.is_mask(t)) {
            if (!suffix) {
                body_modality[t] = image_segment;
            } else {
                const auto it = body_modality.find(t);
                if (it == body_modality.end())
                    throw DataError("prompt suffix sentinel never appeared in the body");
                span_is_image = it->second;
                span_known = true;
            }
        }
    }
    if (suffix) {
        if (!span_known)
            throw DataError("prompt suffix has no open span");
        return span_is_image;
    }
    return image_segment;
}

std::size_t pick(std::span<const double> weights, bool greedy, Rng& rng) {
    if (greedy) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < weights.size(); ++i)
            if (weights[i] > weights[best])
                best = i;
        return best;
    }
    return sample_weights(weights, rng);
}

// Weights proportional to exp(score), -inf scoring zero.
std::vector<double> score_weights(std::span<const double> scores) {
    double max_score = kNegInf;
    for (double s : scores)
        max_score = std::max(max_score, s);
    if (max_score == kNegInf)
        throw DataError("no token passed the plausibility cutoff");
    std::vector<double> w(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i)
        w[i] = scores[i] == kNegInf ? 0.0 : std::exp(scores[i] - max_score);
    return w;
}

void mask_logits(std::vector<double>& logits, const std::vector<std::uint8_t>& allowed) {
    for (std::size_t i = 0; i < logits.size(); ++i)
        if (!allowed[i])
            logits[i] = kNegInf;
}

} // namespace

TokenStream decode_sequence(const LogitSource& model, const TokenStream& prompt,
                            const DecodeConfig& config, const VocabLayout& vocab, Rng& rng) {
    validate_decode_config(config);
    if (prompt.empty())
        throw DataError("prompt is empty");
    if (model.vocab_size() != static_cast<std::size_t>(vocab.total_size()))
        throw ShapeError("model vocabulary does not match the layout");

    const bool image_continuation = continuation_is_image(prompt, vocab);
    std::vector<std::uint8_t> allowed(model.vocab_size(), 0);
    allowed[VocabLayout::kEos] = 1;
    for (TokenId t = 0; t < vocab.total_size(); ++t)
        if (image_continuation ? vocab.is_image(t) : vocab.is_text(t))
            allowed[static_cast<std::size_t>(t)] = 1;

    const bool guided =
        config.strategy == Strategy::Cfg || config.strategy == Strategy::Cd || config.strategy == Strategy::CdK;
    TokenStream cond = prompt;
    TokenStream uncond = guided ? unconditional_prompt(prompt, vocab) : TokenStream{};

    TokenStream generated;
    for (std::size_t step = 0; step < config.max_tokens; ++step) {
        std::vector<double> weights;
        switch (config.strategy) {
        case Strategy::Temperature:
        case Strategy::TopP: {
            auto logits = model.logits(cond);
            mask_logits(logits, allowed);
            auto probs = temperature_probs(logits, config.temperature);
            if (config.strategy == Strategy::TopP)
                probs = top_p_filter(probs, config.top_p);
            weights = std::move(probs);
            break;
        }
        case Strategy::Cfg: {
            auto cond_logits = model.logits(cond);
            auto uncond_logits = model.logits(uncond);
            auto blended = cfg_blend(cond_logits, uncond_logits, config.cfg_alpha);
            mask_logits(blended, allowed);
            auto probs = temperature_probs(blended, config.temperature);
            if (config.top_p < 1.0)
                probs = top_p_filter(probs, config.top_p);
            weights = std::move(probs);
            break;
        }
        case Strategy::Cd:
        case Strategy::CdK: {
            auto cond_logits = model.logits(cond);
            auto uncond_logits = model.logits(uncond);
            mask_logits(cond_logits, allowed);
            mask_logits(uncond_logits, allowed);
            const auto p_exp = temperature_probs(cond_logits, config.temperature);
            const auto p_ama = temperature_probs(uncond_logits, config.temperature);
            const std::int32_t k = config.strategy == Strategy::Cd ? 1 : config.cd_k;
            const auto scores = cd_scores(p_exp, p_ama, config.cd_alpha, k);
            weights = score_weights(scores);
            break;
        }
        }
        const TokenId token = static_cast<TokenId>(pick(weights, config.greedy, rng));
        if (token == VocabLayout::kEos)
            break;
        generated.push_back(token);
        cond.push_back(token);
        if (guided)
            uncond.push_back(token);
    }
    return generated;
}

namespace {

std::uint64_t strategy_tag(Strategy s) {
    switch (s) {
    case Strategy::Temperature: return 1;
    case Strategy::TopP: return 2;
    case Strategy::Cfg: return 3;
    case Strategy::Cd: return 4;
    case Strategy::CdK: return 5;
    }
    throw ConfigError("unknown decoding strategy");
}

} // namespace

CandidatePool generate_pool(const LogitSource& model, const TokenStream& prompt, const StrategyMix& mix,
                            const DecodeConfig& base, const VocabLayout& vocab, std::uint64_t master_seed,
                            int threads) {
    struct Job {
        Strategy strategy;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (const auto& [strategy, count] : mix)
        for (std::size_t j = 0; j < count; ++j)
            jobs.push_back({strategy, derive_seed(master_seed, strategy_tag(strategy), j)});
    if (jobs.empty())
        throw ConfigError("candidate pool mix is empty");

    CandidatePool pool(jobs.size());
    const int nt = resolve_threads(threads);
    (void)nt;
#ifdef _OPENMP
#pragma omp parallel for num_threads(nt) schedule(dynamic)
#endif
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(jobs.size()); ++i) {
        const Job& job = jobs[static_cast<std::size_t>(i)];
        DecodeConfig cfg = base;
        cfg.strategy = job.strategy;
        Rng rng(job.seed);
        Candidate cand;
        cand.strategy = job.strategy;
        cand.tokens = decode_sequence(model, prompt, cfg, vocab, rng);
        pool[static_cast<std::size_t>(i)] = std::move(cand);
    }
    return pool;
}

std::size_t rerank_pool(CandidatePool& pool, std::span<const TokenId> caption, const Embedder& embedder) {
    if (pool.empty())
        throw DataError("cannot rerank an empty pool");
    const auto query = embedder.embed_tokens(caption);
    std::size_t best = 0;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const auto cand = embedder.embed_tokens(pool[i].tokens);
        pool[i].score = cosine(query, cand);
        if (pool[i].score > pool[best].score)
            best = i;
    }
    return best;
}

} // namespace cm3
