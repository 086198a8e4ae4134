#include "cm3/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "json.hpp"

#include "cm3/decode.hpp"
#include "cm3/error.hpp"
#include "cm3/infill.hpp"
#include "cm3/io.hpp"
#include "cm3/metrics.hpp"
#include "cm3/retrieval.hpp"
#include "cm3/stream.hpp"

namespace cm3 {

namespace {

// Decode-time seed streams under the experiment master seed.
constexpr std::uint64_t kSweepEval = 100; // + retrieved count
constexpr std::uint64_t kCfgEval = 200;
constexpr std::uint64_t kPoolEval = 300;

} // namespace

void validate_experiment_config(const ExperimentConfig& config) {
    validate_spec(config.corpus);
    if (config.heldout_docs < 1 || config.heldout_docs >= config.corpus.n_docs)
        throw ConfigError("held-out split must leave both training and held-out documents");
    if (config.eval_candidates == 0)
        throw ConfigError("at least one evaluation candidate is required");
    if (config.train_retrieved < 0 || config.train_retrieved > 3)
        throw ConfigError("retrieved context documents must lie in [0, 3]");
    if (!(config.mask_prob >= 0.0 && config.mask_prob <= 1.0))
        throw ConfigError("mask_prob must lie in [0, 1]");
}

TrainedPipeline train_pipeline(const ExperimentConfig& config, std::int32_t retrieved, int threads) {
    validate_experiment_config(config);
    if (retrieved < 0 || retrieved > 3)
        throw ConfigError("retrieved context documents must lie in [0, 3]");
    const VocabLayout vocab = build_vocab(config.n_text, config.n_image, config.n_masks);
    PatternBook book = make_pattern_book(config.corpus, vocab);
    std::vector<std::int32_t> classes;
    std::vector<Document> docs = generate_synthetic_corpus(config.corpus, vocab, &classes);

    const auto n_train = docs.size() - static_cast<std::size_t>(config.heldout_docs);
    std::vector<Document> train_docs(docs.begin(), docs.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<Document> heldout_docs(docs.begin() + static_cast<std::ptrdiff_t>(n_train), docs.end());
    std::vector<std::int32_t> heldout_classes(classes.begin() + static_cast<std::ptrdiff_t>(n_train),
                                              classes.end());

    const HashedEmbedder embedder(config.embed_dim, config.embedder_seed);
    MemoryBank bank = build_memory_bank(train_docs, embedder, threads);

    InfillConfig infill;
    infill.mask_prob = config.mask_prob;
    if (config.seq_len <= max_infill_growth(infill))
        throw ConfigError("sequence length too small for the masking transform");
    const std::size_t context_budget = config.seq_len - max_infill_growth(infill);

    RetrieveOptions opts; // training defaults: dropout on, 8 per modality
    std::vector<TokenStream> streams;
    streams.reserve(train_docs.size());
    for (std::size_t d = 0; d < train_docs.size(); ++d) {
        std::vector<Document> context_docs;
        if (retrieved > 0) {
            Rng rng(derive_seed(config.seed, kRetrieveSeedStream, d));
            const auto hits = retrieve_for_query(bank, train_docs[d], embedder, opts, rng, threads);
            const auto merged = merge_hits(hits.text, hits.image);
            auto picked = sample_training_retrievals(merged, rng, 3);
            if (picked.size() > static_cast<std::size_t>(retrieved))
                picked.resize(static_cast<std::size_t>(retrieved));
            for (const RetrievalHit& hit : picked)
                context_docs.push_back(bank.docs[hit.index]);
        }
        TokenStream context = build_training_context(context_docs, train_docs[d], context_budget, vocab);
        Rng rng(derive_seed(config.seed, kTransformSeedStream, d));
        streams.push_back(infill_transform(context, rng, infill, vocab).tokens);
    }
    const auto packed = pack_sequences(streams, config.seq_len, vocab);
    NGramModel model = train_ngram(packed, config.ngram_order, config.ngram_delta,
                                   static_cast<std::size_t>(vocab.total_size()));
    return TrainedPipeline{vocab,
                           std::move(book),
                           std::move(train_docs),
                           std::move(heldout_docs),
                           std::move(heldout_classes),
                           std::move(bank),
                           std::move(model)};
}

namespace {

TokenStream pad_candidate(TokenStream tokens, std::size_t len) {
    tokens.resize(len, VocabLayout::kPad);
    return tokens;
}

struct FidelityPair {
    double mean = 0.0;
    double best = 0.0;
};

// Mean over held-out prompts of the pool fidelity under one decode setting.
FidelityPair eval_fidelity(const TrainedPipeline& pipe, const ExperimentConfig& config,
                           const DecodeConfig& decode, const StrategyMix& mix, std::uint64_t eval_tag,
                           int threads) {
    const HashedEmbedder embedder(config.embed_dim, config.embedder_seed);
    FidelityPair acc;
    for (std::size_t p = 0; p < pipe.heldout_docs.size(); ++p) {
        const Document& doc = pipe.heldout_docs[p];
        const TokenStream& gold = pipe.book.patterns[static_cast<std::size_t>(pipe.heldout_classes[p])];
        const auto prompt = caption_to_image_prompt(doc.caption, pipe.vocab);
        const auto pool = generate_pool(pipe.model, prompt, mix, decode, pipe.vocab,
                                        derive_seed(config.seed, eval_tag, p), threads);
        std::vector<TokenStream> candidates;
        candidates.reserve(pool.size());
        for (const Candidate& cand : pool)
            candidates.push_back(pad_candidate(cand.tokens, gold.size()));
        const auto report = conditional_fidelity(candidates, gold, doc.caption, embedder);
        acc.mean += report.mean_accuracy;
        acc.best += report.best_accuracy;
    }
    acc.mean /= static_cast<double>(pipe.heldout_docs.size());
    acc.best /= static_cast<double>(pipe.heldout_docs.size());
    return acc;
}

DecodeConfig eval_decode_config(const ExperimentConfig& config) {
    DecodeConfig decode;
    decode.temperature = 1.0;
    decode.top_p = 1.0;
    decode.cfg_alpha = 1.0;
    decode.max_tokens = static_cast<std::size_t>(config.corpus.tokens_per_image);
    return decode;
}

} // namespace

std::vector<RetrievalSweepRow> retrieval_sweep(const ExperimentConfig& config, int threads) {
    std::vector<RetrievalSweepRow> rows;
    for (std::int32_t r = 0; r <= 3; ++r) {
        const TrainedPipeline pipe = train_pipeline(config, r, threads);
        std::vector<TokenStream> heldout;
        heldout.reserve(pipe.heldout_docs.size());
        for (const Document& doc : pipe.heldout_docs)
            heldout.push_back(serialize_document(doc, pipe.vocab));
        const DecodeConfig decode = eval_decode_config(config);
        const auto fid = eval_fidelity(pipe, config, decode, {{Strategy::Cfg, config.eval_candidates}},
                                       kSweepEval + static_cast<std::uint64_t>(r), threads);
        rows.push_back({r, fid.mean, fid.best, perplexity(pipe.model, heldout, pipe.vocab)});
    }
    return rows;
}

std::vector<CfgSweepRow> cfg_sweep(const ExperimentConfig& config, int threads) {
    const TrainedPipeline pipe = train_pipeline(config, config.train_retrieved, threads);
    const std::vector<double> alphas{0.0, 0.5, 1.0, 2.0, 3.0, 5.0, 8.0};
    std::vector<CfgSweepRow> rows;
    for (double alpha : alphas) {
        DecodeConfig decode = eval_decode_config(config);
        decode.cfg_alpha = alpha;
        const auto fid =
            eval_fidelity(pipe, config, decode, {{Strategy::Cfg, config.eval_candidates}}, kCfgEval, threads);
        rows.push_back({alpha, fid.mean, fid.best});
    }
    return rows;
}

std::vector<PoolSweepRow> pool_sweep(const ExperimentConfig& config, int threads) {
    const TrainedPipeline pipe = train_pipeline(config, config.train_retrieved, threads);
    const HashedEmbedder embedder(config.embed_dim, config.embedder_seed);
    constexpr std::size_t kMaxPool = 16;
    const std::vector<std::size_t> sizes{1, 2, 4, 8, 16};

    // One 16-candidate pool per strategy per prompt; every arm and size is a
    // slice of these, so monotonicity and the union comparison are exact.
    DecodeConfig decode = eval_decode_config(config);
    decode.cfg_alpha = 3.0;
    std::vector<std::vector<double>> cfg_acc(pipe.heldout_docs.size()), cdk_acc(pipe.heldout_docs.size());
    for (std::size_t p = 0; p < pipe.heldout_docs.size(); ++p) {
        const Document& doc = pipe.heldout_docs[p];
        const TokenStream& gold = pipe.book.patterns[static_cast<std::size_t>(pipe.heldout_classes[p])];
        const auto prompt = caption_to_image_prompt(doc.caption, pipe.vocab);
        const auto pool =
            generate_pool(pipe.model, prompt, {{Strategy::Cfg, kMaxPool}, {Strategy::CdK, kMaxPool}},
                          decode, pipe.vocab, derive_seed(config.seed, kPoolEval, p), threads);
        auto accuracy = [&](const Candidate& cand) {
            const auto padded = pad_candidate(cand.tokens, gold.size());
            std::size_t matches = 0;
            for (std::size_t i = 0; i < gold.size(); ++i)
                if (padded[i] == gold[i])
                    ++matches;
            return static_cast<double>(matches) / static_cast<double>(gold.size());
        };
        for (std::size_t j = 0; j < kMaxPool; ++j) {
            cfg_acc[p].push_back(accuracy(pool[j]));
            cdk_acc[p].push_back(accuracy(pool[kMaxPool + j]));
        }
    }

    const auto arm_rows = [&](const std::string& arm, auto&& slice) {
        std::vector<PoolSweepRow> rows;
        for (std::size_t n : sizes) {
            double mean = 0.0, best = 0.0;
            for (std::size_t p = 0; p < cfg_acc.size(); ++p) {
                const std::vector<double> accs = slice(p, n);
                best += *std::max_element(accs.begin(), accs.end());
                double m = 0.0;
                for (double a : accs)
                    m += a;
                mean += m / static_cast<double>(accs.size());
            }
            rows.push_back({arm, n, mean / static_cast<double>(cfg_acc.size()),
                            best / static_cast<double>(cfg_acc.size())});
        }
        return rows;
    };

    auto prefix = [](const std::vector<double>& v, std::size_t n) {
        return std::vector<double>(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n));
    };
    std::vector<PoolSweepRow> rows;
    for (auto& row : arm_rows("cfg", [&](std::size_t p, std::size_t n) { return prefix(cfg_acc[p], n); }))
        rows.push_back(std::move(row));
    for (auto& row : arm_rows("cdk", [&](std::size_t p, std::size_t n) { return prefix(cdk_acc[p], n); }))
        rows.push_back(std::move(row));
    for (auto& row : arm_rows("mixed", [&](std::size_t p, std::size_t n) {
             auto accs = prefix(cfg_acc[p], (n + 1) / 2);
             const auto tail = prefix(cdk_acc[p], n / 2);
             accs.insert(accs.end(), tail.begin(), tail.end());
             return accs;
         }))
        rows.push_back(std::move(row));
    for (auto& row : arm_rows("union", [&](std::size_t p, std::size_t n) {
             auto accs = prefix(cfg_acc[p], n);
             const auto tail = prefix(cdk_acc[p], n);
             accs.insert(accs.end(), tail.begin(), tail.end());
             return accs;
         }))
        rows.push_back(std::move(row));
    return rows;
}

ExperimentReport run_experiment_suite(const ExperimentConfig& config, int threads) {
    validate_experiment_config(config);
    ExperimentReport report;
    report.config = config;
    report.retrieval = retrieval_sweep(config, threads);
    report.cfg = cfg_sweep(config, threads);
    report.pool = pool_sweep(config, threads);
    return report;
}

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

nlohmann::json config_json(const ExperimentConfig& c) {
    return {
        {"seed", c.seed},
        {"corpus",
         {{"seed", c.corpus.seed},
          {"n_patterns", c.corpus.n_patterns},
          {"noise_rate", c.corpus.noise_rate},
          {"n_docs", c.corpus.n_docs},
          {"caption_len", c.corpus.caption_len},
          {"tokens_per_image", c.corpus.tokens_per_image}}},
        {"n_text", c.n_text},
        {"n_image", c.n_image},
        {"n_masks", c.n_masks},
        {"seq_len", c.seq_len},
        {"ngram_order", c.ngram_order},
        {"ngram_delta", c.ngram_delta},
        {"embed_dim", c.embed_dim},
        {"embedder_seed", c.embedder_seed},
        {"heldout_docs", c.heldout_docs},
        {"eval_candidates", c.eval_candidates},
        {"train_retrieved", c.train_retrieved},
        {"mask_prob", c.mask_prob},
    };
}

} // namespace

void write_report_csv(const ExperimentReport& report, const std::string& path) {
    auto out = open_output(path, false);
    out << "sweep,retrieved,cfg_alpha,arm,pool_size,fidelity,best_fidelity,ppl\n";
    for (const auto& row : report.retrieval)
        out << "retrieval," << row.retrieved << ",,,," << fmt(row.fidelity) << ',' << fmt(row.best_fidelity)
            << ',' << fmt(row.ppl) << '\n';
    for (const auto& row : report.cfg)
        out << "cfg,," << fmt(row.cfg_alpha) << ",,," << fmt(row.fidelity) << ',' << fmt(row.best_fidelity)
            << ",\n";
    for (const auto& row : report.pool)
        out << "pool,,," << row.arm << ',' << row.pool_size << ',' << fmt(row.fidelity) << ','
            << fmt(row.best_fidelity) << ",\n";
    if (!out)
        throw IoError("failed writing " + path);
}

void write_report_json(const ExperimentReport& report, const std::string& path) {
    nlohmann::json j;
    j["config"] = config_json(report.config);
    j["metric_note"] = "fidelity is canonical-pattern accuracy and similarity is an embedding cosine; "
                       "neither is an FID and the values are not comparable to published numbers";
    j["retrieval_sweep"] = nlohmann::json::array();
    for (const auto& row : report.retrieval)
        j["retrieval_sweep"].push_back({{"retrieved", row.retrieved},
                                        {"fidelity", row.fidelity},
                                        {"best_fidelity", row.best_fidelity},
                                        {"ppl", row.ppl}});
    j["cfg_sweep"] = nlohmann::json::array();
    for (const auto& row : report.cfg)
        j["cfg_sweep"].push_back(
            {{"cfg_alpha", row.cfg_alpha}, {"fidelity", row.fidelity}, {"best_fidelity", row.best_fidelity}});
    j["pool_sweep"] = nlohmann::json::array();
    for (const auto& row : report.pool)
        j["pool_sweep"].push_back({{"arm", row.arm},
                                   {"pool_size", row.pool_size},
                                   {"fidelity", row.fidelity},
                                   {"best_fidelity", row.best_fidelity}});
    auto out = open_output(path, false);
    out << j.dump(2) << "\n";
    if (!out)
        throw IoError("failed writing " + path);
}

} // namespace cm3
