#include "oisub/train_impl.hpp"

#include <algorithm>
#include <map>

namespace oisub {

template double loss_and_grads<float>(const TransformerT<float>&,
                                      const std::vector<std::vector<int>>&,
                                      TransformerT<float>&, double);
template double loss_and_grads<double>(const TransformerT<double>&,
                                       const std::vector<std::vector<int>>&,
                                       TransformerT<double>&, double);
template double batch_loss<float>(const TransformerT<float>&,
                                  const std::vector<std::vector<int>>&, double);
template double batch_loss<double>(const TransformerT<double>&,
                                   const std::vector<std::vector<int>>&, double);

namespace {

std::vector<int> training_sequence(const Sample& s) {
    std::vector<int> t = s.full_tokens();
    if (s.answer_token >= 0) t.push_back(s.answer_token);
    return t;
}

}  // namespace

double answer_accuracy(const Transformer& model, const std::vector<Sample>& samples) {
    if (samples.empty()) throw InputError("answer_accuracy: no samples");
    size_t hits = 0, counted = 0;
    for (const auto& s : samples) {
        if (s.answer_token < 0) continue;
        const auto tokens = s.full_tokens();
        Mat<float> logits = model.forward(tokens);
        Eigen::Index best = 0;
        logits.row(logits.rows() - 1).maxCoeff(&best);
        if (static_cast<int>(best) == s.answer_token) ++hits;
        ++counted;
    }
    if (counted == 0) throw InputError("answer_accuracy: no answerable samples");
    return static_cast<double>(hits) / static_cast<double>(counted);
}

TrainingReport train(Transformer& model, const std::vector<Sample>& corpus,
                     const TrainRecipe& recipe) {
    if (corpus.empty()) throw InputError("train: empty corpus");
    if (recipe.steps < 1 || recipe.batch_size < 1)
        throw ConfigError("train: steps and batch_size must be >= 1");
    if (recipe.heldout_frac < 0.0 || recipe.heldout_frac >= 1.0)
        throw ConfigError("train: heldout_frac must be in [0, 1)");

    const size_t n_heldout = std::min(
        corpus.size() - 1,
        static_cast<size_t>(std::ceil(recipe.heldout_frac * corpus.size())));
    const size_t n_train = corpus.size() - n_heldout;
    std::vector<std::vector<int>> seqs(n_train);
    for (size_t i = 0; i < n_train; ++i) seqs[i] = training_sequence(corpus[i]);
    std::vector<Sample> heldout(corpus.begin() + static_cast<long>(n_train),
                                corpus.end());

    // length-grouped batching: same-length sequences share a batch so no
    // padding work is wasted
    std::map<size_t, std::vector<size_t>> by_len;
    for (size_t i = 0; i < seqs.size(); ++i) by_len[seqs[i].size()].push_back(i);

    Rng rng(recipe.seed ^ 0x747261696eULL);
    std::vector<std::vector<size_t>> batch_queue;
    auto refill = [&] {
        batch_queue.clear();
        for (auto& [len, idxs] : by_len) {
            (void)len;
            rng.shuffle(idxs);
            for (size_t i = 0; i < idxs.size(); i += recipe.batch_size) {
                const size_t end = std::min(idxs.size(), i + recipe.batch_size);
                batch_queue.emplace_back(idxs.begin() + static_cast<long>(i),
                                         idxs.begin() + static_cast<long>(end));
            }
        }
        rng.shuffle(batch_queue);
    };
    refill();
    size_t qpos = 0;

    // AdamW state mirrors the parameter list
    std::vector<Mat<float>*> params;
    model.visit([&](const std::string&, Mat<float>& m) { params.push_back(&m); });
    std::vector<Mat<float>> m_state(params.size()), v_state(params.size());
    std::vector<bool> decay(params.size());
    {
        size_t i = 0;
        model.visit([&](const std::string& name, Mat<float>& t) {
            m_state[i] = Mat<float>::Zero(t.rows(), t.cols());
            v_state[i] = Mat<float>::Zero(t.rows(), t.cols());
            // decoupled weight decay on weight matrices only (not LN params,
            // biases, or embeddings)
            decay[i] = t.rows() > 1 && t.cols() > 1 && name != "tok_emb" &&
                       name != "pos_emb";
            ++i;
        });
    }

    Transformer grads;
    TrainingReport report;
    report.steps = recipe.steps;
    for (int step = 1; step <= recipe.steps; ++step) {
        if (qpos >= batch_queue.size()) {
            refill();
            qpos = 0;
        }
        std::vector<std::vector<int>> batch;
        batch.reserve(batch_queue[qpos].size());
        for (size_t idx : batch_queue[qpos]) batch.push_back(seqs[idx]);
        ++qpos;

        const double loss =
            loss_and_grads(model, batch, grads, recipe.answer_loss_weight);

        double lr = recipe.lr;
        if (step <= recipe.warmup_steps && recipe.warmup_steps > 0) {
            lr *= static_cast<double>(step) / recipe.warmup_steps;
        } else {
            const double t =
                static_cast<double>(step - recipe.warmup_steps) /
                std::max(1, recipe.steps - recipe.warmup_steps);
            const double cosine = 0.5 * (1.0 + std::cos(3.141592653589793 * t));
            lr *= recipe.min_lr_frac + (1.0 - recipe.min_lr_frac) * cosine;
        }

        if (!std::isfinite(loss))
            throw NumericError("train: non-finite loss at step " +
                               std::to_string(step) + " (lr=" + std::to_string(lr) +
                               ")");

        std::vector<Mat<float>*> gptrs;
        grads.visit([&](const std::string&, Mat<float>& g) { gptrs.push_back(&g); });

        if (recipe.grad_clip > 0) {
            double sq = 0.0;
            for (auto* g : gptrs) sq += static_cast<double>(g->squaredNorm());
            const double norm = std::sqrt(sq);
            if (norm > recipe.grad_clip) {
                const float s = static_cast<float>(recipe.grad_clip / norm);
                for (auto* g : gptrs) *g *= s;
            }
        }

        const double bc1 = 1.0 - std::pow(recipe.beta1, step);
        const double bc2 = 1.0 - std::pow(recipe.beta2, step);
        for (size_t i = 0; i < params.size(); ++i) {
            Mat<float>& p = *params[i];
            const Mat<float>& g = *gptrs[i];
            m_state[i] = static_cast<float>(recipe.beta1) * m_state[i] +
                         static_cast<float>(1.0 - recipe.beta1) * g;
            v_state[i].array() =
                static_cast<float>(recipe.beta2) * v_state[i].array() +
                static_cast<float>(1.0 - recipe.beta2) * g.array().square();
            auto mhat = m_state[i].array() / static_cast<float>(bc1);
            auto vhat = v_state[i].array() / static_cast<float>(bc2);
            if (decay[i])
                p.array() -= static_cast<float>(lr * recipe.weight_decay) * p.array();
            p.array() -= static_cast<float>(lr) * mhat /
                         (vhat.sqrt() + static_cast<float>(recipe.adam_eps));
        }

        if (step == 1 || step % recipe.log_every == 0 || step == recipe.steps)
            report.loss_curve.emplace_back(step, loss);
        if (recipe.eval_every > 0 && !heldout.empty() &&
            (step % recipe.eval_every == 0 || step == recipe.steps)) {
            std::vector<Sample> eval_set(
                heldout.begin(),
                heldout.begin() +
                    std::min<size_t>(heldout.size(),
                                     static_cast<size_t>(recipe.eval_max_samples)));
            report.eval_curve.emplace_back(step, answer_accuracy(model, eval_set));
        }
        report.final_loss = loss;
    }

    report.heldout_accuracy =
        heldout.empty() ? 0.0 : answer_accuracy(model, heldout);
    return report;
}

}  // namespace oisub
