#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "oisub/common.hpp"

namespace oisub {

struct ModelConfig {
    int d_model = 128;
    int n_layers = 8;
    int n_heads = 4;
    int d_ff = 512;
    int max_seq_len = 128;
    int vocab_size = 0;
    uint64_t seed = 0;

    void validate() const {
        if (d_model < 1 || n_layers < 1 || n_heads < 1 || d_ff < 1 ||
            max_seq_len < 1 || vocab_size < 1)
            throw ConfigError("model config: all counts must be >= 1");
        if (d_model % n_heads != 0)
            throw ConfigError("model config: d_model must be divisible by n_heads");
    }
};

/// Which residual-stream point a trace or edit refers to. post_block is the
/// canonical capture site (the input to the next block); pre_block is the
/// input to the named block.
enum class StreamPoint { pre_block, post_block };

struct TraceSite {
    int layer = 0;
    int position = 0;
    StreamPoint point = StreamPoint::post_block;
};

struct EditSite {
    int layer = 0;
    int position = 0;
    std::vector<float> replacement;  // length d_model
    StreamPoint point = StreamPoint::post_block;
};

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Pre-norm decoder-only transformer with learned absolute positions.
/// Templated on the scalar so the gradient-check harness can run in double.
template <typename T>
struct TransformerT {
    struct Block {
        Mat<T> ln1_g, ln1_b;      // 1 x d
        Mat<T> wq, wk, wv, wo;    // d x d
        Mat<T> bq, bk, bv, bo;    // 1 x d
        Mat<T> ln2_g, ln2_b;      // 1 x d
        Mat<T> w1, b1;            // d x d_ff, 1 x d_ff
        Mat<T> w2, b2;            // d_ff x d, 1 x d
    };

    ModelConfig config;
    Mat<T> tok_emb;               // V x d
    Mat<T> pos_emb;               // P x d
    std::vector<Block> blocks;
    Mat<T> lnf_g, lnf_b;          // 1 x d
    Mat<T> w_head, b_head;        // d x V, 1 x V

    void init(const ModelConfig& cfg);

    /// Visit every parameter tensor in a fixed order; name is stable and used
    /// for checkpoints and the optimizer state.
    void visit(const std::function<void(const std::string&, Mat<T>&)>& fn);

    size_t parameter_count();

    /// Inference forward on one sequence, with optional residual-stream edits
    /// and trace capture. Returns seq_len x vocab logits.
    Mat<T> forward(const std::vector<int>& tokens,
                   const std::vector<EditSite>* edits = nullptr,
                   const std::vector<TraceSite>* trace = nullptr,
                   std::vector<std::vector<T>>* captured = nullptr) const;
};

using Transformer = TransformerT<float>;

template <typename T>
void TransformerT<T>::init(const ModelConfig& cfg) {
    cfg.validate();
    config = cfg;
    Rng rng(cfg.seed ^ 0x6d6f64656cULL);
    const int d = cfg.d_model, v = cfg.vocab_size, f = cfg.d_ff;
    auto randn = [&](int r, int c, double scale) {
        Mat<T> m(r, c);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j)
                m(i, j) = static_cast<T>(rng.next_gaussian() * scale);
        return m;
    };
    auto zeros = [&](int r, int c) { return Mat<T>::Zero(r, c).eval(); };
    auto ones = [&](int r, int c) { return Mat<T>::Ones(r, c).eval(); };

    const double s = 0.02;
    const double so = 0.02 / std::sqrt(2.0 * cfg.n_layers);  // residual-path scaling
    tok_emb = randn(v, d, s);
    pos_emb = randn(cfg.max_seq_len, d, 0.01);
    blocks.assign(cfg.n_layers, Block{});
    for (auto& b : blocks) {
        b.ln1_g = ones(1, d);
        b.ln1_b = zeros(1, d);
        b.wq = randn(d, d, s);
        b.wk = randn(d, d, s);
        b.wv = randn(d, d, s);
        b.wo = randn(d, d, so);
        b.bq = zeros(1, d);
        b.bk = zeros(1, d);
        b.bv = zeros(1, d);
        b.bo = zeros(1, d);
        b.ln2_g = ones(1, d);
        b.ln2_b = zeros(1, d);
        b.w1 = randn(d, f, s);
        b.b1 = zeros(1, f);
        b.w2 = randn(f, d, so);
        b.b2 = zeros(1, d);
    }
    lnf_g = ones(1, d);
    lnf_b = zeros(1, d);
    w_head = randn(d, v, s);
    b_head = zeros(1, v);
}

template <typename T>
void TransformerT<T>::visit(const std::function<void(const std::string&, Mat<T>&)>& fn) {
    fn("tok_emb", tok_emb);
    fn("pos_emb", pos_emb);
    for (size_t l = 0; l < blocks.size(); ++l) {
        auto& b = blocks[l];
        const std::string p = "block" + std::to_string(l) + ".";
        fn(p + "ln1_g", b.ln1_g);
        fn(p + "ln1_b", b.ln1_b);
        fn(p + "wq", b.wq);
        fn(p + "wk", b.wk);
        fn(p + "wv", b.wv);
        fn(p + "wo", b.wo);
        fn(p + "bq", b.bq);
        fn(p + "bk", b.bk);
        fn(p + "bv", b.bv);
        fn(p + "bo", b.bo);
        fn(p + "ln2_g", b.ln2_g);
        fn(p + "ln2_b", b.ln2_b);
        fn(p + "w1", b.w1);
        fn(p + "b1", b.b1);
        fn(p + "w2", b.w2);
        fn(p + "b2", b.b2);
    }
    fn("lnf_g", lnf_g);
    fn("lnf_b", lnf_b);
    fn("w_head", w_head);
    fn("b_head", b_head);
}

template <typename T>
size_t TransformerT<T>::parameter_count() {
    size_t n = 0;
    visit([&](const std::string&, Mat<T>& m) { n += static_cast<size_t>(m.size()); });
    return n;
}

namespace detail {

template <typename T>
Mat<T> layer_norm(const Mat<T>& x, const Mat<T>& g, const Mat<T>& b) {
    constexpr double eps = 1e-5;
    Mat<T> out(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const T mean = x.row(i).mean();
        const T var = (x.row(i).array() - mean).square().mean();
        const T inv = static_cast<T>(1.0 / std::sqrt(static_cast<double>(var) + eps));
        out.row(i) =
            ((x.row(i).array() - mean) * inv) * g.row(0).array() + b.row(0).array();
    }
    return out;
}

}  // namespace detail

template <typename T>
Mat<T> TransformerT<T>::forward(const std::vector<int>& tokens,
                                const std::vector<EditSite>* edits,
                                const std::vector<TraceSite>* trace,
                                std::vector<std::vector<T>>* captured) const {
    const int s = static_cast<int>(tokens.size());
    const int d = config.d_model;
    const int h = config.n_heads;
    const int dh = d / h;
    if (s == 0 || s > config.max_seq_len)
        throw InputError("forward: sequence length out of bounds");
    for (int t : tokens)
        if (t < 0 || t >= config.vocab_size)
            throw InputError("forward: token id out of vocabulary");

    auto check_site = [&](int layer, int position, const char* who) {
        if (layer < 0 || layer >= config.n_layers)
            throw InputError(std::string(who) + ": layer out of range");
        if (position < 0 || position >= s)
            throw InputError(std::string(who) + ": position out of range");
    };
    if (trace)
        for (const auto& t : *trace) check_site(t.layer, t.position, "trace");
    if (edits)
        for (const auto& e : *edits) {
            check_site(e.layer, e.position, "edit");
            if (static_cast<int>(e.replacement.size()) != d)
                throw InputError("edit: replacement width != d_model");
        }
    if (captured) captured->clear();
    if (trace && captured) captured->resize(trace->size());

    Mat<T> x(s, d);
    for (int i = 0; i < s; ++i)
        x.row(i) = tok_emb.row(tokens[i]) + pos_emb.row(i);

    auto apply_sites = [&](int layer, StreamPoint point) {
        if (edits)
            for (const auto& e : *edits)
                if (e.layer == layer && e.point == point)
                    for (int j = 0; j < d; ++j)
                        x(e.position, j) = static_cast<T>(e.replacement[j]);
        if (trace)
            for (size_t ti = 0; ti < trace->size(); ++ti) {
                const auto& t = (*trace)[ti];
                if (t.layer == layer && t.point == point) {
                    auto& dst = (*captured)[ti];
                    dst.resize(d);
                    for (int j = 0; j < d; ++j) dst[j] = x(t.position, j);
                }
            }
    };

    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
    for (int l = 0; l < config.n_layers; ++l) {
        apply_sites(l, StreamPoint::pre_block);
        const Block& b = blocks[l];

        Mat<T> n1 = detail::layer_norm(x, b.ln1_g, b.ln1_b);
        Mat<T> q = (n1 * b.wq).rowwise() + b.bq.row(0);
        Mat<T> k = (n1 * b.wk).rowwise() + b.bk.row(0);
        Mat<T> v = (n1 * b.wv).rowwise() + b.bv.row(0);

        Mat<T> att(s, d);
        for (int head = 0; head < h; ++head) {
            auto qh = q.middleCols(head * dh, dh);
            auto kh = k.middleCols(head * dh, dh);
            auto vh = v.middleCols(head * dh, dh);
            Mat<T> scores = (qh * kh.transpose()) * scale;
            for (int i = 0; i < s; ++i) {
                // causal softmax over j <= i
                auto seg = scores.row(i).segment(0, i + 1).array();
                seg = (seg - seg.maxCoeff()).exp();
                seg /= seg.sum();
                if (i + 1 < s) scores.row(i).segment(i + 1, s - i - 1).setZero();
            }
            att.middleCols(head * dh, dh) = scores * vh;
        }
        x += (att * b.wo).rowwise() + b.bo.row(0);

        Mat<T> n2 = detail::layer_norm(x, b.ln2_g, b.ln2_b);
        Mat<T> hidden = ((n2 * b.w1).rowwise() + b.b1.row(0)).cwiseMax(T(0));
        x += (hidden * b.w2).rowwise() + b.b2.row(0);

        apply_sites(l, StreamPoint::post_block);
    }

    Mat<T> nf = detail::layer_norm(x, lnf_g, lnf_b);
    Mat<T> logits = (nf * w_head).rowwise() + b_head.row(0);
    for (Eigen::Index i = 0; i < logits.size(); ++i)
        if (!std::isfinite(static_cast<double>(logits.data()[i])))
            throw NumericError("forward: non-finite logits");
    return logits;
}

// --- checkpoint io (float models) -------------------------------------------

void save_checkpoint(const Transformer& model, const std::string& path,
                     uint64_t train_steps = 0, double final_loss = 0.0,
                     double heldout_accuracy = 0.0);

struct CheckpointMeta {
    uint64_t train_steps = 0;
    double final_loss = 0.0;
    double heldout_accuracy = 0.0;
};

Transformer load_checkpoint(const std::string& path, CheckpointMeta* meta = nullptr);

/// FNV-1a over config and all parameter bytes; used for determinism checks.
uint64_t checkpoint_hash(Transformer& model);

}  // namespace oisub
