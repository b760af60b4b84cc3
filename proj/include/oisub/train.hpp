#pragma once

#include <utility>

#include "oisub/datagen.hpp"
#include "oisub/model.hpp"

namespace oisub {

struct TrainRecipe {
    int steps = 2000;
    int batch_size = 64;
    double lr = 3e-4;
    int warmup_steps = 100;
    double min_lr_frac = 0.1;      // cosine decay floor
    double weight_decay = 0.01;
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    double grad_clip = 1.0;
    double heldout_frac = 0.02;
    uint64_t seed = 0;
    int log_every = 50;
    int eval_every = 0;       // 0 disables periodic held-out evaluation
    int eval_max_samples = 200;
    // CE weight on the final predictable position (the answer token); the
    // other positions keep weight 1. Raising it sharpens the retrieval
    // gradient, which is otherwise diluted across the whole sequence.
    double answer_loss_weight = 1.0;
};

struct TrainingReport {
    std::vector<std::pair<int, double>> loss_curve;   // (step, batch loss)
    std::vector<std::pair<int, double>> eval_curve;   // (step, held-out accuracy)
    double final_loss = 0.0;
    double heldout_accuracy = 0.0;
    int steps = 0;
};

/// Next-token cross-entropy over a batch of sequences, accumulating
/// parameter gradients into `grads` (zeroed first). Returns the weighted mean
/// loss over predicted positions; `last_weight` scales each sequence's final
/// predictable position. Templated so the finite-difference harness can run
/// the identical code path in double.
template <typename T>
double loss_and_grads(const TransformerT<T>& model,
                      const std::vector<std::vector<int>>& seqs,
                      TransformerT<T>& grads, double last_weight = 1.0);

/// Forward-only batch loss (no gradients), same masking and weighting rules.
template <typename T>
double batch_loss(const TransformerT<T>& model,
                  const std::vector<std::vector<int>>& seqs,
                  double last_weight = 1.0);

/// Train on the corpus (samples with answers become full_tokens + answer).
/// Deterministic given recipe.seed; single-threaded.
TrainingReport train(Transformer& model, const std::vector<Sample>& corpus,
                     const TrainRecipe& recipe);

/// Top-1 accuracy of the answer token at the query's final position.
double answer_accuracy(const Transformer& model, const std::vector<Sample>& samples);

}  // namespace oisub
