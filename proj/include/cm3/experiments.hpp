#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cm3/memory_bank.hpp"
#include "cm3/ngram.hpp"
#include "cm3/synthetic.hpp"
#include "cm3/types.hpp"
#include "cm3/vocab.hpp"

namespace cm3 {

// Seed-stream labels shared by the harness and the transform subcommand, so
// both derive per-document generators the same way from one master seed.
inline constexpr std::uint64_t kRetrieveSeedStream = 10;
inline constexpr std::uint64_t kTransformSeedStream = 20;
inline constexpr std::uint64_t kSftSeedStream = 30;

struct ExperimentConfig {
    std::uint32_t seed = 7; // master seed for retrieval, transforms and decoding
    SyntheticSpec corpus;   // corpus.seed defaults to 7 as well
    std::int32_t n_text = 512;
    std::int32_t n_image = 64;
    std::int32_t n_masks = 4;
    std::size_t seq_len = 256;
    std::int32_t ngram_order = 3;
    float ngram_delta = 0.1f;
    std::size_t embed_dim = 64;
    std::uint32_t embedder_seed = 11;
    std::int32_t heldout_docs = 64;     // split off the end of the corpus
    std::size_t eval_candidates = 4;    // candidates per prompt for fidelity rows
    std::int32_t train_retrieved = 3;   // context documents for the CFG and pool sweeps
    double mask_prob = 0.5;
};

void validate_experiment_config(const ExperimentConfig& config);

// Everything one sweep setting needs: the corpus split, the bank over the
// training half, and an n-gram trained on retrieval-augmented (r context
// documents), mask-transformed, packed streams.
struct TrainedPipeline {
    VocabLayout vocab;
    PatternBook book;
    std::vector<Document> train_docs;
    std::vector<Document> heldout_docs;
    std::vector<std::int32_t> heldout_classes;
    MemoryBank bank;
    NGramModel model;
};

TrainedPipeline train_pipeline(const ExperimentConfig& config, std::int32_t retrieved, int threads = 0);

struct RetrievalSweepRow {
    std::int32_t retrieved = 0;
    double fidelity = 0.0;
    double best_fidelity = 0.0;
    double ppl = 0.0;
};

struct CfgSweepRow {
    double cfg_alpha = 0.0;
    double fidelity = 0.0;
    double best_fidelity = 0.0;
};

struct PoolSweepRow {
    std::string arm; // cfg | cdk | mixed | union
    std::size_t pool_size = 0;
    double fidelity = 0.0;
    double best_fidelity = 0.0;
};

// Retrieval counts 0..3: fidelity and held-out perplexity per setting.
std::vector<RetrievalSweepRow> retrieval_sweep(const ExperimentConfig& config, int threads = 0);

// Guidance scales {0, 0.5, 1, 2, 3, 5, 8} on the default-trained pipeline.
std::vector<CfgSweepRow> cfg_sweep(const ExperimentConfig& config, int threads = 0);

// Pool sizes {1, 2, 4, 8, 16} per arm at equal candidate budget; the union
// arm pairs the two pure pools for the superset comparison.
std::vector<PoolSweepRow> pool_sweep(const ExperimentConfig& config, int threads = 0);

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<RetrievalSweepRow> retrieval;
    std::vector<CfgSweepRow> cfg;
    std::vector<PoolSweepRow> pool;
};

ExperimentReport run_experiment_suite(const ExperimentConfig& config, int threads = 0);

// One CSV with a fixed header; blank cells where a column does not apply.
void write_report_csv(const ExperimentReport& report, const std::string& path);
// JSON twin with the effective config echoed for provenance.
void write_report_json(const ExperimentReport& report, const std::string& path);

} // namespace cm3
