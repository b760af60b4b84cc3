#pragma once

// Batched loss/gradient computation shared by the float training loop and the
// double-precision finite-difference harness.

#include <algorithm>

#include "oisub/train.hpp"

namespace oisub {

namespace detail {

template <typename T>
struct LnCache {
    Mat<T> xhat;                 // R x d
    std::vector<T> inv;          // R
};

template <typename T>
Mat<T> ln_forward(const Mat<T>& x, const Mat<T>& g, const Mat<T>& b, LnCache<T>& cache) {
    constexpr double eps = 1e-5;
    const auto R = x.rows();
    const auto d = x.cols();
    cache.xhat.resize(R, d);
    cache.inv.resize(R);
    Mat<T> out(R, d);
    for (Eigen::Index i = 0; i < R; ++i) {
        const T mean = x.row(i).mean();
        const T var = (x.row(i).array() - mean).square().mean();
        const T inv = static_cast<T>(1.0 / std::sqrt(static_cast<double>(var) + eps));
        cache.inv[i] = inv;
        cache.xhat.row(i) = (x.row(i).array() - mean) * inv;
        out.row(i) = cache.xhat.row(i).array() * g.row(0).array() + b.row(0).array();
    }
    return out;
}

template <typename T>
Mat<T> ln_backward(const Mat<T>& dout, const Mat<T>& g, const LnCache<T>& cache,
                   Mat<T>& dg, Mat<T>& db) {
    const auto R = dout.rows();
    const auto d = dout.cols();
    Mat<T> dx(R, d);
    for (Eigen::Index i = 0; i < R; ++i) {
        dg.row(0).array() += dout.row(i).array() * cache.xhat.row(i).array();
        db.row(0) += dout.row(i);
        Eigen::Array<T, 1, Eigen::Dynamic> dxhat =
            dout.row(i).array() * g.row(0).array();
        const T m1 = dxhat.mean();
        const T m2 = (dxhat * cache.xhat.row(i).array()).mean();
        dx.row(i) = (dxhat - m1 - cache.xhat.row(i).array() * m2) * cache.inv[i];
    }
    return dx;
}

}  // namespace detail

template <typename T>
double loss_and_grads(const TransformerT<T>& model,
                      const std::vector<std::vector<int>>& seqs,
                      TransformerT<T>& grads, double last_weight) {
    if (!(last_weight > 0.0))
        throw ConfigError("loss_and_grads: last_weight must be > 0");
    using detail::LnCache;
    const ModelConfig& cfg = model.config;
    const int d = cfg.d_model, h = cfg.n_heads, dh = d / h;
    const int nb = static_cast<int>(seqs.size());
    if (nb == 0) throw InputError("loss_and_grads: empty batch");
    int L = 0;
    for (const auto& s : seqs) {
        if (s.empty()) throw InputError("loss_and_grads: empty sequence");
        if (static_cast<int>(s.size()) > cfg.max_seq_len)
            throw InputError("loss_and_grads: sequence exceeds max_seq_len");
        for (int t : s)
            if (t < 0 || t >= cfg.vocab_size)
                throw InputError("loss_and_grads: token out of vocabulary");
        L = std::max(L, static_cast<int>(s.size()));
    }
    const int R = nb * L;
    auto row_of = [&](int b, int i) { return b * L + i; };
    auto len_of = [&](int b) { return static_cast<int>(seqs[b].size()); };
    auto tok_at = [&](int b, int i) { return i < len_of(b) ? seqs[b][i] : seqs[b][0]; };

    grads.config = cfg;
    // mirror the model's parameter shapes, zeroed
    {
        auto& mref = const_cast<TransformerT<T>&>(model);
        std::vector<Mat<T>*> src;
        mref.visit([&](const std::string&, Mat<T>& m) { src.push_back(&m); });
        std::vector<Mat<T>*> dst;
        grads.blocks.assign(cfg.n_layers, typename TransformerT<T>::Block{});
        grads.visit([&](const std::string&, Mat<T>& m) { dst.push_back(&m); });
        for (size_t i = 0; i < src.size(); ++i)
            *dst[i] = Mat<T>::Zero(src[i]->rows(), src[i]->cols());
    }

    // ---- forward with caches ----
    struct BlockCache {
        Mat<T> x_in, n1, q, k, v, att, x_mid, n2, hidden;
        detail::LnCache<T> ln1, ln2;
        std::vector<Mat<T>> probs;  // nb*h entries, each L x L
    };
    std::vector<BlockCache> caches(cfg.n_layers);

    Mat<T> x(R, d);
    for (int b = 0; b < nb; ++b)
        for (int i = 0; i < L; ++i)
            x.row(row_of(b, i)) = model.tok_emb.row(tok_at(b, i)) + model.pos_emb.row(i);

    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
    for (int l = 0; l < cfg.n_layers; ++l) {
        auto& c = caches[l];
        const auto& blk = model.blocks[l];
        c.x_in = x;
        c.n1 = detail::ln_forward(x, blk.ln1_g, blk.ln1_b, c.ln1);
        c.q = (c.n1 * blk.wq).rowwise() + blk.bq.row(0);
        c.k = (c.n1 * blk.wk).rowwise() + blk.bk.row(0);
        c.v = (c.n1 * blk.wv).rowwise() + blk.bv.row(0);
        c.att.resize(R, d);
        c.probs.assign(static_cast<size_t>(nb) * h, Mat<T>());
        for (int b = 0; b < nb; ++b) {
            for (int head = 0; head < h; ++head) {
                auto qh = c.q.block(b * L, head * dh, L, dh);
                auto kh = c.k.block(b * L, head * dh, L, dh);
                auto vh = c.v.block(b * L, head * dh, L, dh);
                Mat<T> scores = (qh * kh.transpose()) * scale;
                for (int i = 0; i < L; ++i) {
                    auto seg = scores.row(i).segment(0, i + 1).array();
                    seg = (seg - seg.maxCoeff()).exp();
                    seg /= seg.sum();
                    if (i + 1 < L) scores.row(i).segment(i + 1, L - i - 1).setZero();
                }
                c.att.block(b * L, head * dh, L, dh) = scores * vh;
                c.probs[static_cast<size_t>(b) * h + head] = std::move(scores);
            }
        }
        x += (c.att * blk.wo).rowwise() + blk.bo.row(0);
        c.x_mid = x;
        c.n2 = detail::ln_forward(x, blk.ln2_g, blk.ln2_b, c.ln2);
        c.hidden = ((c.n2 * blk.w1).rowwise() + blk.b1.row(0)).cwiseMax(T(0));
        x += (c.hidden * blk.w2).rowwise() + blk.b2.row(0);
    }
    detail::LnCache<T> lnf_cache;
    Mat<T> nf = detail::ln_forward(x, model.lnf_g, model.lnf_b, lnf_cache);
    Mat<T> logits = (nf * model.w_head).rowwise() + model.b_head.row(0);

    // ---- cross entropy (final predictable position upweighted) ----
    int n_pred = 0;
    for (int b = 0; b < nb; ++b) n_pred += len_of(b) - 1;
    if (n_pred == 0) throw InputError("loss_and_grads: no predictable positions");

    double total_w = 0.0;
    for (int b = 0; b < nb; ++b)
        if (len_of(b) > 1) total_w += (len_of(b) - 2) + last_weight;
    const double inv_total = 1.0 / total_w;

    double loss = 0.0;
    Mat<T> dlogits = Mat<T>::Zero(R, cfg.vocab_size);
    for (int b = 0; b < nb; ++b) {
        for (int i = 0; i + 1 < len_of(b); ++i) {
            const int r = row_of(b, i);
            const int target = seqs[b][i + 1];
            const double w = (i + 2 == len_of(b)) ? last_weight : 1.0;
            const T wf = static_cast<T>(w * inv_total);
            const T mx = logits.row(r).maxCoeff();
            auto drow = dlogits.row(r).array();
            drow = (logits.row(r).array() - mx).exp();
            const T sum = drow.sum();
            loss += w * (static_cast<double>(std::log(sum)) +
                         static_cast<double>(mx) -
                         static_cast<double>(logits(r, target)));
            drow *= wf / sum;
            dlogits(r, target) -= wf;
        }
    }
    loss *= inv_total;

    // ---- backward ----
    grads.w_head += nf.transpose() * dlogits;
    grads.b_head.row(0) += dlogits.colwise().sum();
    Mat<T> dnf = dlogits * model.w_head.transpose();
    Mat<T> dx = detail::ln_backward(dnf, model.lnf_g, lnf_cache, grads.lnf_g, grads.lnf_b);

    for (int l = cfg.n_layers - 1; l >= 0; --l) {
        auto& c = caches[l];
        const auto& blk = model.blocks[l];
        auto& g = grads.blocks[l];

        // FFN
        g.w2 += c.hidden.transpose() * dx;
        g.b2.row(0) += dx.colwise().sum();
        Mat<T> dhidden = dx * blk.w2.transpose();
        Mat<T> dpre =
            ((c.hidden.array() > T(0)).template cast<T>() * dhidden.array()).matrix();
        g.w1 += c.n2.transpose() * dpre;
        g.b1.row(0) += dpre.colwise().sum();
        Mat<T> dn2 = dpre * blk.w1.transpose();
        Mat<T> dx_mid = dx + detail::ln_backward(dn2, blk.ln2_g, c.ln2, g.ln2_g, g.ln2_b);

        // attention output projection
        g.wo += c.att.transpose() * dx_mid;
        g.bo.row(0) += dx_mid.colwise().sum();
        Mat<T> datt = dx_mid * blk.wo.transpose();

        Mat<T> dq = Mat<T>::Zero(R, d), dk = Mat<T>::Zero(R, d), dv = Mat<T>::Zero(R, d);
        for (int b = 0; b < nb; ++b) {
            for (int head = 0; head < h; ++head) {
                const Mat<T>& probs = c.probs[static_cast<size_t>(b) * h + head];
                auto qh = c.q.block(b * L, head * dh, L, dh);
                auto kh = c.k.block(b * L, head * dh, L, dh);
                auto vh = c.v.block(b * L, head * dh, L, dh);
                auto datt_h = datt.block(b * L, head * dh, L, dh);
                Mat<T> dp = datt_h * vh.transpose();
                dv.block(b * L, head * dh, L, dh) += probs.transpose() * datt_h;
                Mat<T> dscore(L, L);
                for (int i = 0; i < L; ++i) {
                    T srow = 0;
                    for (int j = 0; j <= i; ++j) srow += probs(i, j) * dp(i, j);
                    for (int j = 0; j <= i; ++j)
                        dscore(i, j) = probs(i, j) * (dp(i, j) - srow);
                    for (int j = i + 1; j < L; ++j) dscore(i, j) = 0;
                }
                dq.block(b * L, head * dh, L, dh) += dscore * kh * scale;
                dk.block(b * L, head * dh, L, dh) += dscore.transpose() * qh * scale;
            }
        }
        g.wq += c.n1.transpose() * dq;
        g.wk += c.n1.transpose() * dk;
        g.wv += c.n1.transpose() * dv;
        g.bq.row(0) += dq.colwise().sum();
        g.bk.row(0) += dk.colwise().sum();
        g.bv.row(0) += dv.colwise().sum();
        Mat<T> dn1 = dq * blk.wq.transpose() + dk * blk.wk.transpose() +
                     dv * blk.wv.transpose();
        dx = dx_mid + detail::ln_backward(dn1, blk.ln1_g, c.ln1, g.ln1_g, g.ln1_b);
    }

    for (int b = 0; b < nb; ++b)
        for (int i = 0; i < len_of(b); ++i) {
            grads.tok_emb.row(seqs[b][i]) += dx.row(row_of(b, i));
            grads.pos_emb.row(i) += dx.row(row_of(b, i));
        }

    return loss;
}

template <typename T>
double batch_loss(const TransformerT<T>& model,
                  const std::vector<std::vector<int>>& seqs,
                  double last_weight) {
    if (!(last_weight > 0.0))
        throw ConfigError("batch_loss: last_weight must be > 0");
    double loss = 0.0;
    double total_w = 0.0;
    for (const auto& s : seqs) {
        Mat<T> logits = model.forward(s);
        for (size_t i = 0; i + 1 < s.size(); ++i) {
            const double w = (i + 2 == s.size()) ? last_weight : 1.0;
            T mx = logits.row(i).maxCoeff();
            double sum = 0.0;
            for (int t = 0; t < model.config.vocab_size; ++t)
                sum += std::exp(static_cast<double>(logits(i, t) - mx));
            loss += w * (std::log(sum) + static_cast<double>(mx) -
                         static_cast<double>(logits(i, s[i + 1])));
            total_w += w;
        }
    }
    return loss / total_w;
}

}  // namespace oisub
