#pragma once

#include "oisub/analysis.hpp"
#include "oisub/train.hpp"

namespace oisub {

struct VocabConfig {
    size_t objects = 224;
    size_t names = 523;
};

/// The relation-specific dataset used for capture, fitting and evaluation.
struct DatasetConfig {
    int relation = 0;
    size_t k_pairs = 7;
    size_t n = 2500;
    double train_frac = 0.2, dev_frac = 0.4, test_frac = 0.4;
    size_t sweep_dev_n = 100;    // query-OI-0 samples for grid search
    size_t sweep_test_n = 500;   // query-OI-0 samples for sweep evaluation
    std::string variant = "base";   // base|pseudo|filler|interjection|nonrelated|pattern
    std::string pattern = "7A-7E";  // used when variant == "pattern"
};

/// The mixed-relation training corpus: n_per_cell samples for every
/// (relation, clause count) cell with k in [k_min, k_max].
struct CorpusConfig {
    size_t n_per_cell = 1400;   // x 6 relations x 6 clause counts ~= 50k samples
    size_t k_min = 2;
    size_t k_max = 7;
};

struct CaptureConfig {
    std::vector<int> layers;     // empty = every layer
    size_t attribute_samples = 200;
};

struct SubspaceConfig {
    SubspaceMethod method = SubspaceMethod::pca;
    size_t c = 2;
};

struct GridConfig {
    bool enabled = false;
    std::vector<int> layers;            // empty = middle band of the stack
    std::vector<double> step_values;    // empty = quantiles of per-OI pc1 gaps
    std::vector<double> alphas{1.0, 2.0, 3.0, 5.0};
    std::vector<int> betas{1, 2, 3};
};

struct InterveneConfig {
    EditMode mode = EditMode::direct_literal;
    double alpha = 3.0;
    double step_value = 1.0;
    double pc2_fixed = 0.0;
    int layer = -1;                     // -1 = auto best layer
    std::vector<int> betas{0, 1, 2, 3, 4, 5, 6};
    double steer_alpha = 1.25;
    std::vector<int> steer_bis{1, 2, 3};
    GridConfig grid;
};

struct ExperimentConfig {
    uint64_t seed = 1;
    std::string out_dir = "run";
    VocabConfig vocab;
    DatasetConfig dataset;
    CorpusConfig corpus;
    // vocab_size is filled from the built vocabulary at train time
    ModelConfig model{.d_model = 128, .n_layers = 4, .n_heads = 4, .d_ff = 256,
                      .max_seq_len = 96};
    TrainRecipe train{.steps = 5000, .batch_size = 32, .lr = 1e-3,
                      .log_every = 250, .eval_every = 500,
                      .answer_loss_weight = 16.0};
    CaptureConfig capture;
    SubspaceConfig subspace;
    InterveneConfig intervene;

    void validate() const;
};

/// Parse a JSON config; unknown fields are errors, missing ones keep their
/// defaults. Throws ConfigError with the offending field path.
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Hash of the canonical serialized config (determines the whole bundle).
uint64_t config_hash(const ExperimentConfig& c);
std::string config_to_json(const ExperimentConfig& c);

// --- staged artifact ledger --------------------------------------------------

uint64_t file_hash(const std::string& path);

/// Absolute path of a named artifact inside the config's out_dir.
std::string artifact_path(const ExperimentConfig& c, const std::string& name);

/// Record an artifact's content hash in out_dir/artifacts.json.
void record_artifact(const ExperimentConfig& c, const std::string& name);

/// Require an upstream artifact: present and hash-matching the ledger,
/// else StageError naming the stage and artifact.
void require_artifact(const ExperimentConfig& c, const std::string& name,
                      const std::string& stage);

/// True when every listed artifact exists and matches the ledger (used for
/// idempotent re-runs).
bool artifacts_fresh(const ExperimentConfig& c, const std::vector<std::string>& names);

// --- stages ------------------------------------------------------------------

void cmd_gen(const ExperimentConfig& c);
void cmd_train(const ExperimentConfig& c);
void cmd_capture(const ExperimentConfig& c);
void cmd_fit(const ExperimentConfig& c);
void cmd_intervene(const ExperimentConfig& c);
void cmd_report(const ExperimentConfig& c);

/// gen → train → capture → fit → intervene → report
void run_pipeline(const ExperimentConfig& c);

Vocabulary pipeline_vocabulary(const ExperimentConfig& c);

/// Entity-matrix capture for a set of samples whose query is re-rendered to
/// ask about the entity with the given OI (used to build steering pairs).
std::vector<Sample> requery_samples(const std::vector<Sample>& samples, int oi,
                                    const Vocabulary& vocab);

/// Bound-pair classification on a multi-binding pattern dataset: entity and
/// attribute points are projected onto a subspace fitted on the dev split's
/// pooled entity points, per-sample pair distances are thresholded on the dev
/// split and scored on the test split.
struct PatternPairAnalysis {
    std::vector<int> entities;   // distinct entity OIs of the pattern
    size_t k_pairs = 0;
    Matrix mean_distance;        // |entities| x k, mean over test samples
    ClassifyResult classify;
};
PatternPairAnalysis pattern_pair_analysis(const Transformer& model,
                                          const std::vector<Sample>& dev,
                                          const std::vector<Sample>& test,
                                          const Vocabulary& vocab, int layer,
                                          DistanceMetric metric, size_t pc_index);

}  // namespace oisub
