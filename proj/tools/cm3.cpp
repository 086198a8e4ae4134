#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cm3/decode.hpp"
#include "cm3/embedder.hpp"
#include "cm3/error.hpp"
#include "cm3/experiments.hpp"
#include "cm3/infill.hpp"
#include "cm3/io.hpp"
#include "cm3/jsonl.hpp"
#include "cm3/memory_bank.hpp"
#include "cm3/metrics.hpp"
#include "cm3/ngram.hpp"
#include "cm3/pgm.hpp"
#include "cm3/retrieval.hpp"
#include "cm3/rng.hpp"
#include "cm3/sft.hpp"
#include "cm3/stream.hpp"
#include "cm3/synthetic.hpp"
#include "cm3/vocab.hpp"
#include "cm3/vq.hpp"

namespace {

using namespace cm3;
using nlohmann::json;

// Everything a subcommand can need; file values first, flags override.
struct RunConfig {
    ExperimentConfig experiment;
    DecodeConfig decode;
    int threads = 0;
};

void load_config(const std::string& path, RunConfig& cfg) {
    auto in = open_input(path, false);
    json j;
    try {
        j = json::parse(in, nullptr, true, true); // allow comments
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    if (j.is_null())
        return; // empty file: all defaults
    if (!j.is_object())
        throw ConfigError(path + ": top-level value is not an object");
    auto& ex = cfg.experiment;
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "seed") {
                ex.seed = value.get<std::uint32_t>();
                ex.corpus.seed = ex.seed;
            } else if (key == "corpus_seed") {
                ex.corpus.seed = value.get<std::uint32_t>();
            } else if (key == "threads") {
                cfg.threads = value.get<int>();
            } else if (key == "vocab_text") {
                ex.n_text = value.get<std::int32_t>();
            } else if (key == "vocab_image") {
                ex.n_image = value.get<std::int32_t>();
            } else if (key == "n_masks") {
                ex.n_masks = value.get<std::int32_t>();
            } else if (key == "tokens_per_image") {
                ex.corpus.tokens_per_image = value.get<std::int32_t>();
            } else if (key == "caption_len") {
                ex.corpus.caption_len = value.get<std::int32_t>();
            } else if (key == "n_docs") {
                ex.corpus.n_docs = value.get<std::int32_t>();
            } else if (key == "n_patterns") {
                ex.corpus.n_patterns = value.get<std::int32_t>();
            } else if (key == "noise_rate") {
                ex.corpus.noise_rate = value.get<double>();
            } else if (key == "seq_len") {
                ex.seq_len = value.get<std::size_t>();
            } else if (key == "retrieved") {
                ex.train_retrieved = value.get<std::int32_t>();
            } else if (key == "heldout_docs") {
                ex.heldout_docs = value.get<std::int32_t>();
            } else if (key == "eval_candidates") {
                ex.eval_candidates = value.get<std::size_t>();
            } else if (key == "mask_prob") {
                ex.mask_prob = value.get<double>();
            } else if (key == "embed_dim") {
                ex.embed_dim = value.get<std::size_t>();
            } else if (key == "embedder_seed") {
                ex.embedder_seed = value.get<std::uint32_t>();
            } else if (key == "ngram_order") {
                ex.ngram_order = value.get<std::int32_t>();
            } else if (key == "ngram_delta") {
                ex.ngram_delta = value.get<float>();
            } else if (key == "strategy") {
                cfg.decode.strategy = parse_strategy(value.get<std::string>());
            } else if (key == "temperature") {
                cfg.decode.temperature = value.get<double>();
            } else if (key == "top_p") {
                cfg.decode.top_p = value.get<double>();
            } else if (key == "cfg_alpha") {
                cfg.decode.cfg_alpha = value.get<double>();
            } else if (key == "cd_alpha") {
                cfg.decode.cd_alpha = value.get<double>();
            } else if (key == "cd_k") {
                cfg.decode.cd_k = value.get<std::int32_t>();
            } else if (key == "max_tokens") {
                cfg.decode.max_tokens = value.get<std::size_t>();
            } else if (key == "greedy") {
                cfg.decode.greedy = value.get<bool>();
            } else {
                std::cerr << "warning: unknown config key '" << key << "'\n";
            }
        } catch (const json::exception& e) {
            throw ConfigError(path + ": key '" + key + "': " + e.what());
        }
    }
}

StrategyMix parse_mix(const std::string& spec) {
    StrategyMix mix;
    std::size_t pos = 0;
    while (pos < spec.size()) {
        const std::size_t comma = spec.find(',', pos);
        const std::string item = spec.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        const std::size_t eq = item.find('=');
        if (eq == std::string::npos)
            throw ConfigError("mix entry '" + item + "' is not name=count");
        std::size_t count = 0;
        try {
            count = std::stoul(item.substr(eq + 1));
        } catch (const std::exception&) {
            throw ConfigError("mix entry '" + item + "' has a bad count");
        }
        if (count == 0)
            throw ConfigError("mix entry '" + item + "' has a zero count");
        mix.emplace_back(parse_strategy(item.substr(0, eq)), count);
        pos = comma == std::string::npos ? spec.size() : comma + 1;
    }
    if (mix.empty())
        throw ConfigError("empty strategy mix");
    return mix;
}

json decode_json(const DecodeConfig& d) {
    return {{"strategy", strategy_name(d.strategy)}, {"temperature", d.temperature},
            {"top_p", d.top_p},                      {"cfg_alpha", d.cfg_alpha},
            {"cd_alpha", d.cd_alpha},                {"cd_k", d.cd_k},
            {"max_tokens", d.max_tokens},            {"greedy", d.greedy}};
}

VocabLayout vocab_of(const RunConfig& cfg) {
    return build_vocab(cfg.experiment.n_text, cfg.experiment.n_image, cfg.experiment.n_masks);
}

// ---------------------------------------------------------------- commands

int cmd_ingest(const RunConfig& cfg, const std::string& input, const std::string& output,
               const std::string& codebook_path) {
    const VocabLayout vocab = vocab_of(cfg);
    std::optional<Codebook> cb;
    if (!codebook_path.empty())
        cb = load_codebook(codebook_path);
    const auto docs = read_corpus_jsonl(input, vocab, cb ? &*cb : nullptr, cfg.threads);
    for (const Document& doc : docs)
        validate_document(doc, vocab, static_cast<std::size_t>(cfg.experiment.corpus.tokens_per_image));
    write_corpus_jsonl(output, docs);
    std::cout << "wrote " << docs.size() << " documents to " << output << "\n";
    return 0;
}

int cmd_fit_vq(const RunConfig& cfg, const std::vector<std::string>& image_paths, const std::string& output,
               std::int32_t k, std::int32_t patch_size, std::int32_t iters) {
    std::vector<GrayImage> images;
    images.reserve(image_paths.size());
    for (const std::string& p : image_paths)
        images.push_back(read_pgm(p));
    FitStats stats;
    const Codebook cb = fit_codebook(images, k, patch_size, iters, cfg.experiment.seed, &stats, cfg.threads);
    save_codebook(cb, output);
    std::cout << "fit " << k << " centroids on " << images.size() << " images; final mse "
              << (stats.iteration_mse.empty() ? 0.0 : stats.iteration_mse.back()) << "; wrote " << output
              << "\n";
    return 0;
}

int cmd_build_bank(const RunConfig& cfg, const std::string& corpus, const std::string& output) {
    const VocabLayout vocab = vocab_of(cfg);
    const auto docs = read_corpus_jsonl(corpus, vocab);
    const HashedEmbedder embedder(cfg.experiment.embed_dim, cfg.experiment.embedder_seed);
    const MemoryBank bank = build_memory_bank(docs, embedder, cfg.threads);
    save_memory_bank(bank, output);
    std::cout << "embedded " << bank.docs.size() << " documents (dim " << bank.dim << ") into " << output
              << "\n";
    return 0;
}

int cmd_transform(const RunConfig& cfg, const std::string& corpus, const std::string& bank_path,
                  const std::string& output) {
    const VocabLayout vocab = vocab_of(cfg);
    const auto docs = read_corpus_jsonl(corpus, vocab);
    const auto retrieved = cfg.experiment.train_retrieved;

    InfillConfig infill;
    infill.mask_prob = cfg.experiment.mask_prob;
    if (cfg.experiment.seq_len <= max_infill_growth(infill))
        throw ConfigError("sequence length too small for the masking transform");
    const std::size_t context_budget = cfg.experiment.seq_len - max_infill_growth(infill);

    std::optional<MemoryBank> bank;
    std::optional<HashedEmbedder> embedder;
    if (retrieved > 0) {
        if (bank_path.empty())
            throw ConfigError("--bank is required when --retrieved > 0");
        bank = load_memory_bank(bank_path);
        embedder.emplace(bank->dim, bank->embedder_seed);
    }

    RetrieveOptions opts;
    std::vector<TransformedDoc> out;
    out.reserve(docs.size());
    for (std::size_t d = 0; d < docs.size(); ++d) {
        std::vector<Document> context_docs;
        if (retrieved > 0) {
            Rng rng(derive_seed(cfg.experiment.seed, kRetrieveSeedStream, d));
            const auto hits = retrieve_for_query(*bank, docs[d], *embedder, opts, rng, cfg.threads);
            const auto merged = merge_hits(hits.text, hits.image);
            auto picked = sample_training_retrievals(merged, rng, 3);
            if (picked.size() > static_cast<std::size_t>(retrieved))
                picked.resize(static_cast<std::size_t>(retrieved));
            for (const RetrievalHit& hit : picked)
                context_docs.push_back(bank->docs[hit.index]);
        }
        const TokenStream context = build_training_context(context_docs, docs[d], context_budget, vocab);
        Rng rng(derive_seed(cfg.experiment.seed, kTransformSeedStream, d));
        InfillInstance instance = infill_transform(context, rng, infill, vocab);
        out.push_back({docs[d].id, std::move(instance.tokens), std::move(instance.mask_records)});
    }
    write_transformed_jsonl(output, out);
    std::cout << "transformed " << out.size() << " documents into " << output << "\n";
    return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& transformed, const std::string& output) {
    const VocabLayout vocab = vocab_of(cfg);
    const auto docs = read_transformed_jsonl(transformed);
    std::vector<TokenStream> streams;
    streams.reserve(docs.size());
    for (const TransformedDoc& doc : docs)
        streams.push_back(doc.tokens);
    const auto packed = pack_sequences(streams, cfg.experiment.seq_len, vocab);
    const NGramModel model = train_ngram(packed, cfg.experiment.ngram_order, cfg.experiment.ngram_delta,
                                         static_cast<std::size_t>(vocab.total_size()));
    save_ngram(model, output);
    std::cout << "trained order-" << cfg.experiment.ngram_order << " model on " << packed.size()
              << " sequences; wrote " << output << "\n";
    return 0;
}

int cmd_generate(const RunConfig& cfg, const std::string& model_path, const std::string& caption,
                 std::size_t n, const std::string& mix_spec) {
    const VocabLayout vocab = vocab_of(cfg);
    const NGramModel model = load_ngram(model_path);
    if (model.vocab_size() != static_cast<std::size_t>(vocab.total_size()))
        throw DataError(model_path + ": model vocabulary " + std::to_string(model.vocab_size()) +
                        " does not match the layout (" + std::to_string(vocab.total_size()) + ")");

    StrategyMix mix;
    if (!mix_spec.empty()) {
        mix = parse_mix(mix_spec);
        std::size_t total = 0;
        for (const auto& [s, c] : mix)
            total += c;
        if (n != 0 && n != total)
            throw ConfigError("--n " + std::to_string(n) + " disagrees with the mix total " +
                              std::to_string(total));
    } else {
        mix = {{cfg.decode.strategy, n == 0 ? 8 : n}};
    }

    const TokenStream caption_tokens = tokenize_words(vocab, caption);
    const TokenStream prompt = caption_to_image_prompt(caption_tokens, vocab);
    CandidatePool pool =
        generate_pool(model, prompt, mix, cfg.decode, vocab, cfg.experiment.seed, cfg.threads);
    const HashedEmbedder embedder(cfg.experiment.embed_dim, cfg.experiment.embedder_seed);
    const std::size_t best = rerank_pool(pool, caption_tokens, embedder);

    json out;
    out["config"] = {{"seed", cfg.experiment.seed},
                     {"caption", caption},
                     {"vocab_text", vocab.n_text},
                     {"vocab_image", vocab.n_image},
                     {"n_masks", vocab.n_masks},
                     {"decode", decode_json(cfg.decode)}};
    out["candidates"] = json::array();
    for (const Candidate& cand : pool)
        out["candidates"].push_back(
            {{"strategy", strategy_name(cand.strategy)}, {"score", cand.score}, {"tokens", cand.tokens}});
    out["best"] = {{"index", best}, {"tokens", pool[best].tokens}};
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& csv_path, const std::string& json_path) {
    const ExperimentReport report = run_experiment_suite(cfg.experiment, cfg.threads);
    write_report_csv(report, csv_path);
    write_report_json(report, json_path);
    std::cout << "wrote " << csv_path << " and " << json_path << "\n";
    return 0;
}

int cmd_render_sft(const RunConfig& cfg, const std::string& input, const std::string& output) {
    const VocabLayout vocab = vocab_of(cfg);
    const TemplateRegistry registry = builtin_templates();
    const auto examples = read_sft_jsonl(input);
    auto out = open_output(output, false);
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const SftExample& ex = examples[i];
        Rng rng(derive_seed(cfg.experiment.seed, kSftSeedStream, i));
        const TaskTemplate& tmpl =
            ex.variant ? registry.get(ex.task, *ex.variant) : registry.pick(ex.task, rng);
        const TokenStream tokens = render_template(tmpl, ex.fields, vocab);
        const auto violations = validate_stream(tokens, vocab);
        if (!violations.empty())
            throw DataError(input + ": example " + std::to_string(i) + " renders invalid stream: " +
                            violations.front().message);
        const json j{{"task", tmpl.task}, {"variant", tmpl.variant}, {"tokens", tokens}};
        out << j.dump() << '\n';
    }
    if (!out)
        throw IoError("failed writing " + output);
    std::cout << "rendered " << examples.size() << " examples into " << output << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"multimodal token pipeline: tokenize, retrieve, mask, train, decode, evaluate"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string config_path;
    std::uint32_t seed = 0;
    int threads = 0;
    std::int32_t vocab_text = 0, vocab_image = 0, n_masks = 0, tokens_per_image = 0, retrieved = 0;
    std::size_t seq_len = 0;
    std::string strategy;
    double temperature = 0, top_p = 0, cfg_alpha = 0, cd_alpha = 0;
    std::int32_t cd_k = 0;
    std::size_t max_tokens = 0;
    bool greedy = false;

    app.add_option("--config", config_path, "JSON config file; flags override its values");
    auto* seed_opt = app.add_option("--seed", seed, "master seed for all randomness");
    auto* threads_opt =
        app.add_option("--threads", threads, "worker threads (0: CM3_PIPELINE_THREADS, then all cores)");
    auto* vt_opt = app.add_option("--vocab-text", vocab_text, "text block size");
    auto* vi_opt = app.add_option("--vocab-image", vocab_image, "image block size");
    auto* nm_opt = app.add_option("--n-masks", n_masks, "mask sentinel count");
    auto* tpi_opt = app.add_option("--tokens-per-image", tokens_per_image, "image length in tokens");
    auto* sl_opt = app.add_option("--seq-len", seq_len, "packed sequence length");
    auto* ret_opt = app.add_option("--retrieved", retrieved, "retrieved context documents per stream")
                        ->check(CLI::Range(0, 3));
    auto* strat_opt =
        app.add_option("--strategy", strategy, "decode strategy: temperature|top_p|cfg|cd|cdk");
    auto* temp_opt = app.add_option("--temperature", temperature, "softmax temperature");
    auto* topp_opt = app.add_option("--top-p", top_p, "nucleus mass, (0, 1]");
    auto* cfga_opt = app.add_option("--cfg-alpha", cfg_alpha, "guidance scale");
    auto* cda_opt = app.add_option("--cd-alpha", cd_alpha, "plausibility cutoff factor");
    auto* cdk_opt = app.add_option("--cd-k", cd_k, "reference rank for the cutoff");
    auto* mt_opt = app.add_option("--max-tokens", max_tokens, "decode length cap");
    auto* greedy_opt = app.add_flag("--greedy", greedy, "argmax decoding");

    std::string input, output, corpus, bank_path, codebook_path, model_path, mix_spec, caption;
    std::string csv_path = "report.csv", json_path = "report.json";
    std::vector<std::string> image_paths;
    std::int32_t vq_k = 64, vq_patch = 8, vq_iters = 10;
    std::size_t gen_n = 0;

    auto* ingest = app.add_subcommand("ingest", "JSONL (tokens, text, or PGM paths) -> tokenized corpus");
    ingest->add_option("--input", input, "corpus JSONL")->required();
    ingest->add_option("--output", output, "tokenized corpus JSONL")->required();
    ingest->add_option("--codebook", codebook_path, "codebook for PGM records");

    auto* fit_vq = app.add_subcommand("fit-vq", "fit a patch codebook on PGM images");
    fit_vq->add_option("images", image_paths, "PGM files")->required();
    fit_vq->add_option("--output", output, "codebook file")->required();
    fit_vq->add_option("--k", vq_k, "centroid count");
    fit_vq->add_option("--patch-size", vq_patch, "square patch side");
    fit_vq->add_option("--iters", vq_iters, "refinement iterations");

    auto* build_bank = app.add_subcommand("build-bank", "embed a corpus into a retrieval bank");
    build_bank->add_option("--corpus", corpus, "tokenized corpus JSONL")->required();
    build_bank->add_option("--output", output, "bank file")->required();

    auto* transform = app.add_subcommand("transform", "retrieval contexts + masked-span transform");
    transform->add_option("--corpus", corpus, "tokenized corpus JSONL")->required();
    transform->add_option("--bank", bank_path, "retrieval bank");
    transform->add_option("--output", output, "transformed JSONL")->required();

    auto* train = app.add_subcommand("train", "count n-grams over packed transformed streams");
    train->add_option("--transformed", input, "transformed JSONL")->required();
    train->add_option("--output", output, "model file")->required();
    auto* order_opt = train->add_option("--ngram-order", cfg.experiment.ngram_order, "context size + 1");
    auto* delta_opt = train->add_option("--ngram-delta", cfg.experiment.ngram_delta, "add-delta smoothing");

    auto* generate = app.add_subcommand("generate", "decode candidates for a caption and rerank");
    generate->add_option("--model", model_path, "model file")->required();
    generate->add_option("--caption", caption, "prompt caption (whitespace words)");
    generate->add_option("--n", gen_n, "candidate count");
    generate->add_option("--mix", mix_spec, "per-strategy counts, e.g. cfg=4,cdk=4");

    auto* evaluate = app.add_subcommand("evaluate", "run the experiment suite");
    evaluate->add_option("--report-csv", csv_path, "CSV output path");
    evaluate->add_option("--report-json", json_path, "JSON output path");

    auto* render_sft = app.add_subcommand("render-sft", "render instruction templates to token streams");
    render_sft->add_option("--input", input, "examples JSONL")->required();
    render_sft->add_option("--output", output, "rendered JSONL")->required();

    for (auto* sub : {ingest, fit_vq, build_bank, transform, train, generate, evaluate, render_sft})
        sub->fallthrough();

    try {
        app.parse(argc, argv);

        if (!config_path.empty())
            load_config(config_path, cfg);
        auto& ex = cfg.experiment;
        if (seed_opt->count()) {
            ex.seed = seed;
            ex.corpus.seed = seed;
        }
        if (threads_opt->count())
            cfg.threads = threads;
        if (vt_opt->count())
            ex.n_text = vocab_text;
        if (vi_opt->count())
            ex.n_image = vocab_image;
        if (nm_opt->count())
            ex.n_masks = n_masks;
        if (tpi_opt->count())
            ex.corpus.tokens_per_image = tokens_per_image;
        if (sl_opt->count())
            ex.seq_len = seq_len;
        if (ret_opt->count())
            ex.train_retrieved = retrieved;
        if (strat_opt->count())
            cfg.decode.strategy = parse_strategy(strategy);
        if (temp_opt->count())
            cfg.decode.temperature = temperature;
        if (topp_opt->count())
            cfg.decode.top_p = top_p;
        if (cfga_opt->count())
            cfg.decode.cfg_alpha = cfg_alpha;
        if (cda_opt->count())
            cfg.decode.cd_alpha = cd_alpha;
        if (cdk_opt->count())
            cfg.decode.cd_k = cd_k;
        if (mt_opt->count())
            cfg.decode.max_tokens = max_tokens;
        if (greedy_opt->count())
            cfg.decode.greedy = greedy;
        (void)order_opt;
        (void)delta_opt;
        validate_decode_config(cfg.decode);

        if (ingest->parsed())
            return cmd_ingest(cfg, input, output, codebook_path);
        if (fit_vq->parsed())
            return cmd_fit_vq(cfg, image_paths, output, vq_k, vq_patch, vq_iters);
        if (build_bank->parsed())
            return cmd_build_bank(cfg, corpus, output);
        if (transform->parsed())
            return cmd_transform(cfg, corpus, bank_path, output);
        if (train->parsed())
            return cmd_train(cfg, input, output);
        if (generate->parsed())
            return cmd_generate(cfg, model_path, caption, gen_n, mix_spec);
        if (evaluate->parsed())
            return cmd_evaluate(cfg, csv_path, json_path);
        if (render_sft->parsed())
            return cmd_render_sft(cfg, input, output);
        return 1; // unreachable with require_subcommand
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
