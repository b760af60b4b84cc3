#include "oisub/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace oisub::linalg {

namespace {

constexpr int kSvdMaxSweeps = 100;
constexpr double kSvdTol = 1e-12;
constexpr int kIcaMaxIter = 500;
constexpr double kIcaTol = 1e-6;
constexpr int kPlsMaxIter = 500;
constexpr double kPlsTol = 1e-9;

// One-sided Jacobi on a tall matrix (rows >= cols). Orthogonalizes the
// columns of w in place, accumulating rotations into v (cols x cols).
void jacobi_orthogonalize(Matrix& w, Matrix& v) {
    const size_t n = w.rows, d = w.cols;
    for (size_t i = 0; i < d; ++i)
        for (size_t j = 0; j < d; ++j) v.at(i, j) = (i == j) ? 1.0 : 0.0;

    for (int sweep = 0; sweep < kSvdMaxSweeps; ++sweep) {
        bool rotated = false;
        for (size_t p = 0; p + 1 < d; ++p) {
            for (size_t q = p + 1; q < d; ++q) {
                double app = 0.0, aqq = 0.0, apq = 0.0;
                for (size_t i = 0; i < n; ++i) {
                    const double wp = w.at(i, p), wq = w.at(i, q);
                    app += wp * wp;
                    aqq += wq * wq;
                    apq += wp * wq;
                }
                if (std::abs(apq) <= kSvdTol * std::sqrt(app * aqq)) continue;
                rotated = true;
                const double zeta = (aqq - app) / (2.0 * apq);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double cs = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = cs * t;
                for (size_t i = 0; i < n; ++i) {
                    const double wp = w.at(i, p), wq = w.at(i, q);
                    w.at(i, p) = cs * wp - sn * wq;
                    w.at(i, q) = sn * wp + cs * wq;
                }
                for (size_t i = 0; i < d; ++i) {
                    const double vp = v.at(i, p), vq = v.at(i, q);
                    v.at(i, p) = cs * vp - sn * vq;
                    v.at(i, q) = sn * vp + cs * vq;
                }
            }
        }
        if (!rotated) return;
    }
    throw NumericError("svd: one-sided Jacobi did not converge within 100 sweeps");
}

SvdResult svd_tall(const Matrix& m) {
    Matrix w = m;
    Matrix v(m.cols, m.cols);
    jacobi_orthogonalize(w, v);

    const size_t k = m.cols;
    std::vector<double> s(k);
    for (size_t j = 0; j < k; ++j) {
        double acc = 0.0;
        for (size_t i = 0; i < m.rows; ++i) acc += w.at(i, j) * w.at(i, j);
        s[j] = std::sqrt(acc);
    }
    std::vector<size_t> order(k);
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return s[a] > s[b]; });

    SvdResult out;
    out.u = Matrix(m.rows, k);
    out.vt = Matrix(k, m.cols);
    out.singular_values.resize(k);
    for (size_t jj = 0; jj < k; ++jj) {
        const size_t j = order[jj];
        out.singular_values[jj] = s[j];
        const double inv = s[j] > 0.0 ? 1.0 / s[j] : 0.0;
        for (size_t i = 0; i < m.rows; ++i) out.u.at(i, jj) = w.at(i, j) * inv;
        for (size_t i = 0; i < m.cols; ++i) out.vt.at(jj, i) = v.at(i, j);
    }
    return out;
}

double column_mean(const Matrix& m, size_t c) {
    double s = 0.0;
    for (size_t r = 0; r < m.rows; ++r) s += m.at(r, c);
    return s / static_cast<double>(m.rows);
}

// Solve a small SPD-ish system by Gaussian elimination with partial pivoting.
std::vector<double> solve_dense(Matrix a, std::vector<double> b) {
    const size_t n = a.rows;
    for (size_t col = 0; col < n; ++col) {
        size_t piv = col;
        for (size_t r = col + 1; r < n; ++r)
            if (std::abs(a.at(r, col)) > std::abs(a.at(piv, col))) piv = r;
        if (std::abs(a.at(piv, col)) < 1e-300)
            throw NumericError("solve_dense: singular system");
        if (piv != col) {
            for (size_t c = 0; c < n; ++c) std::swap(a.at(col, c), a.at(piv, c));
            std::swap(b[col], b[piv]);
        }
        for (size_t r = col + 1; r < n; ++r) {
            const double f = a.at(r, col) / a.at(col, col);
            if (f == 0.0) continue;
            for (size_t c = col; c < n; ++c) a.at(r, c) -= f * a.at(col, c);
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (size_t ri = n; ri-- > 0;) {
        double s = b[ri];
        for (size_t c = ri + 1; c < n; ++c) s -= a.at(ri, c) * x[c];
        x[ri] = s / a.at(ri, ri);
    }
    return x;
}

}  // namespace

SvdResult svd(const Matrix& m) {
    m.require_finite("svd");
    if (m.rows == 0 || m.cols == 0) throw InputError("svd: empty matrix");
    if (m.rows >= m.cols) return svd_tall(m);
    SvdResult t = svd_tall(m.transposed());
    SvdResult out;
    out.singular_values = std::move(t.singular_values);
    // A = (A^T)^T = (U1 S V1^T)^T = V1 S U1^T
    const size_t k = out.singular_values.size();
    out.u = Matrix(m.rows, k);
    for (size_t i = 0; i < m.rows; ++i)
        for (size_t j = 0; j < k; ++j) out.u.at(i, j) = t.vt.at(j, i);
    out.vt = Matrix(k, m.cols);
    for (size_t j = 0; j < k; ++j)
        for (size_t i = 0; i < m.cols; ++i) out.vt.at(j, i) = t.u.at(i, j);
    return out;
}

std::pair<Matrix, std::vector<double>> mean_center(const Matrix& m) {
    if (m.rows == 0) throw InputError("mean_center: empty matrix");
    m.require_finite("mean_center");
    std::vector<double> mean(m.cols);
    for (size_t c = 0; c < m.cols; ++c) mean[c] = column_mean(m, c);
    Matrix out(m.rows, m.cols);
    for (size_t r = 0; r < m.rows; ++r)
        for (size_t c = 0; c < m.cols; ++c) out.at(r, c) = m.at(r, c) - mean[c];
    return {std::move(out), std::move(mean)};
}

PcaResult pca(const Matrix& m, size_t c) {
    if (c == 0) throw InputError("pca: c must be >= 1");
    if (c > std::min(m.rows, m.cols)) throw InputError("pca: c exceeds min(rows, cols)");
    auto [centered, mean] = mean_center(m);
    SvdResult s = svd(centered);
    PcaResult out;
    out.mean = std::move(mean);
    out.components = Matrix(c, m.cols);
    out.explained_variance.resize(c);
    out.explained_ratio.resize(c);
    const double denom = m.rows > 1 ? static_cast<double>(m.rows - 1) : 1.0;
    double total = 0.0;
    for (double sv : s.singular_values) total += sv * sv;
    for (size_t i = 0; i < c; ++i) {
        for (size_t j = 0; j < m.cols; ++j) out.components.at(i, j) = s.vt.at(i, j);
        const double var = s.singular_values[i] * s.singular_values[i];
        out.explained_variance[i] = var / denom;
        out.explained_ratio[i] = total > 0.0 ? var / total : 0.0;
    }
    return out;
}

std::pair<std::vector<double>, Matrix> sym_eig(const Matrix& a) {
    if (a.rows != a.cols) throw InputError("sym_eig: matrix not square");
    const size_t d = a.rows;
    Matrix w = a;
    Matrix v(d, d);
    for (size_t i = 0; i < d; ++i) v.at(i, i) = 1.0;

    for (int sweep = 0; sweep < kSvdMaxSweeps; ++sweep) {
        double off = 0.0;
        for (size_t p = 0; p < d; ++p)
            for (size_t q = p + 1; q < d; ++q) off += w.at(p, q) * w.at(p, q);
        if (off < kSvdTol * kSvdTol) break;
        for (size_t p = 0; p + 1 < d; ++p) {
            for (size_t q = p + 1; q < d; ++q) {
                const double apq = w.at(p, q);
                if (std::abs(apq) < 1e-300) continue;
                const double theta = (w.at(q, q) - w.at(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(1.0 + theta * theta));
                const double cs = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = cs * t;
                for (size_t i = 0; i < d; ++i) {
                    const double wip = w.at(i, p), wiq = w.at(i, q);
                    w.at(i, p) = cs * wip - sn * wiq;
                    w.at(i, q) = sn * wip + cs * wiq;
                }
                for (size_t i = 0; i < d; ++i) {
                    const double wpi = w.at(p, i), wqi = w.at(q, i);
                    w.at(p, i) = cs * wpi - sn * wqi;
                    w.at(q, i) = sn * wpi + cs * wqi;
                }
                for (size_t i = 0; i < d; ++i) {
                    const double vip = v.at(i, p), viq = v.at(i, q);
                    v.at(i, p) = cs * vip - sn * viq;
                    v.at(i, q) = sn * vip + cs * viq;
                }
            }
        }
    }
    std::vector<double> eig(d);
    for (size_t i = 0; i < d; ++i) eig[i] = w.at(i, i);
    std::vector<size_t> order(d);
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t x, size_t y) { return eig[x] > eig[y]; });
    std::vector<double> eig_sorted(d);
    Matrix vec_rows(d, d);
    for (size_t r = 0; r < d; ++r) {
        eig_sorted[r] = eig[order[r]];
        for (size_t i = 0; i < d; ++i) vec_rows.at(r, i) = v.at(i, order[r]);
    }
    return {std::move(eig_sorted), std::move(vec_rows)};
}

namespace {

// W <- (W W^T)^{-1/2} W
void symmetric_decorrelate(Matrix& w) {
    const size_t c = w.rows;
    Matrix wwt(c, c);
    for (size_t i = 0; i < c; ++i)
        for (size_t j = 0; j < c; ++j) wwt.at(i, j) = dot(w.row(i), w.row(j), w.cols);
    auto [eig, vec] = sym_eig(wwt);
    Matrix inv_sqrt(c, c);
    for (size_t i = 0; i < c; ++i) {
        if (eig[i] <= 1e-300) throw NumericError("fast_ica: degenerate decorrelation");
        const double f = 1.0 / std::sqrt(eig[i]);
        for (size_t a = 0; a < c; ++a)
            for (size_t b = 0; b < c; ++b)
                inv_sqrt.at(a, b) += vec.at(i, a) * f * vec.at(i, b);
    }
    w = matmul(inv_sqrt, w);
}

}  // namespace

Matrix fast_ica(const Matrix& m, size_t c, uint64_t seed) {
    m.require_finite("fast_ica");
    if (m.rows < 3) throw InputError("fast_ica: need at least 3 rows");
    if (c == 0 || c > std::min(m.rows - 1, m.cols))
        throw InputError("fast_ica: c must satisfy 1 <= c <= min(rows-1, cols)");

    auto [x, mean] = mean_center(m);
    const size_t n = x.rows, d = x.cols;

    // covariance, then whitening matrix K (c x d): z = K (x - mean)
    Matrix cov(d, d);
    for (size_t i = 0; i < d; ++i)
        for (size_t j = i; j < d; ++j) {
            double s = 0.0;
            for (size_t r = 0; r < n; ++r) s += x.at(r, i) * x.at(r, j);
            cov.at(i, j) = cov.at(j, i) = s / static_cast<double>(n - 1);
        }
    auto [eig, vec] = sym_eig(cov);
    Matrix k_white(c, d);
    for (size_t i = 0; i < c; ++i) {
        if (eig[i] <= 1e-12)
            throw NumericError("fast_ica: input rank below requested components");
        const double f = 1.0 / std::sqrt(eig[i]);
        for (size_t j = 0; j < d; ++j) k_white.at(i, j) = vec.at(i, j) * f;
    }
    Matrix z = matmul(x, k_white.transposed());  // n x c, identity covariance

    Rng rng(seed);
    Matrix w(c, c);
    for (double& v : w.data) v = rng.next_gaussian();
    symmetric_decorrelate(w);

    bool converged = false;
    for (int iter = 0; iter < kIcaMaxIter; ++iter) {
        Matrix w_new(c, c);
        for (size_t i = 0; i < c; ++i) {
            double mean_gprime = 0.0;
            std::vector<double> acc(c, 0.0);
            for (size_t r = 0; r < n; ++r) {
                const double wz = dot(w.row(i), z.row(r), c);
                const double g = std::tanh(wz);
                mean_gprime += 1.0 - g * g;
                for (size_t j = 0; j < c; ++j) acc[j] += z.at(r, j) * g;
            }
            mean_gprime /= static_cast<double>(n);
            for (size_t j = 0; j < c; ++j)
                w_new.at(i, j) = acc[j] / static_cast<double>(n) - mean_gprime * w.at(i, j);
        }
        symmetric_decorrelate(w_new);
        double delta = 0.0;
        for (size_t i = 0; i < c; ++i)
            delta = std::max(delta, std::abs(1.0 - std::abs(dot(w_new.row(i), w.row(i), c))));
        w = std::move(w_new);
        if (delta < kIcaTol) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw NumericError("fast_ica: no convergence within 500 iterations");

    // Gaussian inputs leave ICA indeterminate; detect via excess kurtosis of
    // the recovered unit-variance components and refuse the result.
    double max_abs_kurt = 0.0;
    for (size_t i = 0; i < c; ++i) {
        double m2 = 0.0, m4 = 0.0;
        for (size_t r = 0; r < n; ++r) {
            const double s = dot(w.row(i), z.row(r), c);
            m2 += s * s;
            m4 += s * s * s * s;
        }
        m2 /= static_cast<double>(n);
        m4 /= static_cast<double>(n);
        max_abs_kurt = std::max(max_abs_kurt, std::abs(m4 / (m2 * m2) - 3.0));
    }
    if (max_abs_kurt < 0.1)
        throw NumericError("fast_ica: all components have |excess kurtosis| < 0.1 "
                           "(input indistinguishable from Gaussian)");

    Matrix unmix = matmul(w, k_white);  // c x d
    for (size_t i = 0; i < c; ++i) {
        const double nrm = norm2(unmix.row(i), d);
        if (nrm <= 0.0) throw NumericError("fast_ica: zero unmixing row");
        for (size_t j = 0; j < d; ++j) unmix.at(i, j) /= nrm;
    }
    return unmix;
}

PlsFit pls_fit(const Matrix& m, const std::vector<double>& targets, size_t c) {
    if (targets.size() != m.rows) throw InputError("pls_fit: targets length != rows");
    if (c == 0) throw InputError("pls_fit: c must be >= 1");
    if (c > std::min(m.rows, m.cols)) throw InputError("pls_fit: c exceeds min(rows, cols)");
    m.require_finite("pls_fit");

    const size_t n = m.rows, d = m.cols;
    double ymean = 0.0;
    for (double t : targets) ymean += t;
    ymean /= static_cast<double>(n);
    double ss_tot = 0.0;
    for (double t : targets) ss_tot += (t - ymean) * (t - ymean);
    if (ss_tot <= 0.0) throw InputError("pls_fit: constant targets (R^2 undefined)");

    auto [x, xmean] = mean_center(m);
    std::vector<double> y(n);
    for (size_t i = 0; i < n; ++i) y[i] = targets[i] - ymean;

    PlsFit out;
    out.directions = Matrix(c, d);
    out.r2_per_component.resize(c);
    Matrix scores(n, c);

    for (size_t comp = 0; comp < c; ++comp) {
        std::vector<double> w(d), t(n);
        // NIPALS inner loop; with a single response it stabilizes immediately
        // but the cap and tolerance are enforced regardless.
        std::vector<double> w_prev(d, 0.0);
        bool ok = false;
        for (int iter = 0; iter < kPlsMaxIter; ++iter) {
            for (size_t j = 0; j < d; ++j) {
                double s = 0.0;
                for (size_t i = 0; i < n; ++i) s += x.at(i, j) * y[i];
                w[j] = s;
            }
            const double wn = norm2(w.data(), d);
            if (wn <= 1e-300) throw NumericError("pls_fit: zero weight vector");
            for (double& v : w) v /= wn;
            double diff = 0.0;
            for (size_t j = 0; j < d; ++j) diff += (w[j] - w_prev[j]) * (w[j] - w_prev[j]);
            w_prev = w;
            if (std::sqrt(diff) < kPlsTol) {
                ok = true;
                break;
            }
        }
        if (!ok) throw NumericError("pls_fit: NIPALS did not converge within 500 iterations");

        for (size_t i = 0; i < n; ++i) t[i] = dot(x.row(i), w.data(), d);
        const double tt = dot(t.data(), t.data(), n);
        if (tt <= 1e-300) throw NumericError("pls_fit: degenerate component score");

        // deflate
        std::vector<double> p(d);
        for (size_t j = 0; j < d; ++j) {
            double s = 0.0;
            for (size_t i = 0; i < n; ++i) s += x.at(i, j) * t[i];
            p[j] = s / tt;
        }
        double q = 0.0;
        for (size_t i = 0; i < n; ++i) q += y[i] * t[i];
        q /= tt;
        for (size_t i = 0; i < n; ++i) {
            for (size_t j = 0; j < d; ++j) x.at(i, j) -= t[i] * p[j];
            y[i] -= q * t[i];
        }

        for (size_t j = 0; j < d; ++j) out.directions.at(comp, j) = w[j];
        for (size_t i = 0; i < n; ++i) scores.at(i, comp) = t[i];

        // cumulative R^2 of the original targets on scores 0..comp
        const size_t kdim = comp + 1;
        Matrix gram(kdim, kdim);
        std::vector<double> rhs(kdim);
        for (size_t a = 0; a < kdim; ++a) {
            for (size_t b = 0; b < kdim; ++b) {
                double s = 0.0;
                for (size_t i = 0; i < n; ++i) s += scores.at(i, a) * scores.at(i, b);
                gram.at(a, b) = s;
            }
            double s = 0.0;
            for (size_t i = 0; i < n; ++i) s += scores.at(i, a) * (targets[i] - ymean);
            rhs[a] = s;
        }
        std::vector<double> beta = solve_dense(gram, rhs);
        double ss_res = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double pred = ymean;
            for (size_t a = 0; a < kdim; ++a) pred += beta[a] * scores.at(i, a);
            const double e = targets[i] - pred;
            ss_res += e * e;
        }
        out.r2_per_component[comp] = 1.0 - ss_res / ss_tot;
    }
    return out;
}

std::vector<double> fractional_ranks(const std::vector<double>& v) {
    const size_t n = v.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw InputError("pearson: length mismatch");
    const size_t n = x.size();
    if (n < 2) throw InputError("pearson: need at least 2 points");
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) throw InputError("pearson: constant input");
    return sxy / std::sqrt(sxx * syy);
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw InputError("spearman: length mismatch");
    if (x.size() < 2) throw InputError("spearman: need at least 2 points");
    for (double v : x)
        if (!std::isfinite(v)) throw InputError("spearman: non-finite input");
    for (double v : y)
        if (!std::isfinite(v)) throw InputError("spearman: non-finite input");
    return pearson(fractional_ranks(x), fractional_ranks(y));
}

}  // namespace oisub::linalg
