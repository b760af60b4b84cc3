#pragma once

#include "oisub/subspace.hpp"

namespace oisub {

enum class EditMode : uint8_t { direct_literal = 0, direct_replace = 1, steer = 2 };

std::string edit_mode_name(EditMode m);
EditMode edit_mode_from_name(const std::string& s);

/// Parameters of one intervention: x* = x + alpha * B^T (B x + beta * v) in
/// the literal mode, with v = (step_value, pc2_fixed, 0, ...). The replace
/// mode translates the subspace coordinates by alpha*beta*v instead of
/// amplifying them.
struct InterventionSpec {
    int layer = 0;
    double alpha = 1.0;
    double step_value = 1.0;  // v: per-step displacement along PC1
    int beta = 0;
    double pc2_fixed = 0.0;
    EditMode mode = EditMode::direct_literal;
    int target_bi = 0;  // steer mode only

    void validate(int n_layers) const;
    std::vector<double> v(size_t c) const;  // (step_value, pc2_fixed, 0, ...)
};

struct SteeringVector {
    std::vector<double> coords;  // subspace coordinates
    int source_bi = 0;
    size_t n_averaged = 0;
};

/// Direct OI-PC edit of a single activation.
std::vector<double> direct_edit(const std::vector<double>& x, const Subspace& s,
                                const InterventionSpec& spec);

/// s_{0->bi}: mean subspace-coordinate difference over sample-paired rows.
SteeringVector steering_vector(const ActivationMatrix& bi_matrix,
                               const ActivationMatrix& zero_matrix,
                               const Subspace& s);

/// x* = x + alpha * B^T s
std::vector<double> apply_steering(const std::vector<double>& x, const Subspace& s,
                                   const SteeringVector& sv, double alpha);

/// One record per (sample, key); key is the step count beta for step sweeps
/// and the target bi for steering sweeps. Logits are read at the final
/// position; answer OIs are full-vocabulary argmaxes mapped onto the sample's
/// candidate attributes, -1 meaning "other" (a non-candidate token won).
struct SweepRecord {
    uint64_t sample_id = 0;
    int key = 0;
    std::vector<int> candidate_oi;
    std::vector<int> candidate_token;
    std::vector<double> logit_original;
    std::vector<double> logit_intervened;
    int answer_oi_original = -1;
    int answer_oi_intervened = -1;
};

/// Edit the query-entity activation at spec.layer for each beta in betas.
/// Samples must query OI 0 and have at least max(betas)+1 pairs.
std::vector<SweepRecord> run_step_sweep(const Transformer& model,
                                        const std::vector<Sample>& samples,
                                        const Subspace& s, InterventionSpec spec,
                                        const std::vector<int>& betas);

/// Apply each steering vector at spec.layer with the given alpha.
std::vector<SweepRecord> run_steering_sweep(const Transformer& model,
                                            const std::vector<Sample>& samples,
                                            const Subspace& s,
                                            const std::vector<SteeringVector>& svs,
                                            double alpha, int layer);

struct LayerEffect {
    int layer = 0;
    double mean_ld_nonoriginal = 0.0;  // mean LD over non-original candidates
    double flip_rate = 0.0;            // fraction of samples whose argmax moved
};

/// Fixed-beta edit applied at every layer with that layer's own subspace.
std::vector<LayerEffect> run_layer_sweep(const Transformer& model,
                                         const std::vector<Sample>& samples,
                                         const std::map<int, Subspace>& per_layer,
                                         InterventionSpec spec);

struct GridChoice {
    int layer = 0;
    double step_value = 0.0;
    double alpha = 0.0;
    double score = 0.0;  // mean plurality rate of a_beta over beta in {1,2,3}
};

/// Small deterministic grid search on a dev split: score(l, v, alpha) is the
/// mean over beta of the fraction of samples answering a_beta.
GridChoice grid_search(const Transformer& model, const std::vector<Sample>& dev,
                       const std::map<int, Subspace>& per_layer,
                       const std::vector<int>& layers,
                       const std::vector<double>& step_values,
                       const std::vector<double>& alphas,
                       const std::vector<int>& betas, EditMode mode);

/// CSV: sample_id,<key_name>,candidate_oi,logit_original,logit_intervened
void write_sweep_csv(const std::string& path, const std::vector<SweepRecord>& rows,
                     const std::string& key_name);

/// Lossless binary round-trip of sweep records (magic "OISW"), so analysis
/// stages can rebuild flip tables without re-running the model.
void write_sweep_records(const std::string& path,
                         const std::vector<SweepRecord>& rows);
std::vector<SweepRecord> read_sweep_records(const std::string& path);

}  // namespace oisub
