#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "oisub/common.hpp"
#include "oisub/linalg.hpp"

using namespace oisub;
using namespace oisub::linalg;

namespace {

Matrix random_matrix(size_t r, size_t c, uint64_t seed) {
    Rng rng(seed);
    Matrix m(r, c);
    for (double& v : m.data) v = rng.next_gaussian();
    return m;
}

// Test-side oracle: classic two-sided Jacobi eigendecomposition of the
// symmetric matrix A = M^T M. Independent of the one-sided path in linalg.
void oracle_jacobi_eig(std::vector<std::vector<double>> a,
                       std::vector<double>& eigvals,
                       std::vector<std::vector<double>>& eigvecs) {
    const size_t n = a.size();
    eigvecs.assign(n, std::vector<double>(n, 0.0));
    for (size_t i = 0; i < n; ++i) eigvecs[i][i] = 1.0;
    for (int sweep = 0; sweep < 200; ++sweep) {
        double off = 0.0;
        for (size_t p = 0; p < n; ++p)
            for (size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
        if (off < 1e-24) break;
        for (size_t p = 0; p + 1 < n; ++p) {
            for (size_t q = p + 1; q < n; ++q) {
                if (std::abs(a[p][q]) < 1e-300) continue;
                const double phi = 0.5 * std::atan2(2.0 * a[p][q], a[q][q] - a[p][p]);
                const double c = std::cos(phi), s = std::sin(phi);
                for (size_t i = 0; i < n; ++i) {
                    const double aip = a[i][p], aiq = a[i][q];
                    a[i][p] = c * aip - s * aiq;
                    a[i][q] = s * aip + c * aiq;
                }
                for (size_t i = 0; i < n; ++i) {
                    const double api = a[p][i], aqi = a[q][i];
                    a[p][i] = c * api - s * aqi;
                    a[q][i] = s * api + c * aqi;
                }
                for (size_t i = 0; i < n; ++i) {
                    const double vip = eigvecs[i][p], viq = eigvecs[i][q];
                    eigvecs[i][p] = c * vip - s * viq;
                    eigvecs[i][q] = s * vip + c * viq;
                }
            }
        }
    }
    eigvals.resize(n);
    for (size_t i = 0; i < n; ++i) eigvals[i] = a[i][i];
}

// eigvecs of M^T M sorted by descending eigenvalue, as columns
void oracle_cov_eig(const Matrix& m, std::vector<double>& eigvals,
                    std::vector<std::vector<double>>& eigvec_cols) {
    const size_t d = m.cols;
    std::vector<std::vector<double>> mtm(d, std::vector<double>(d, 0.0));
    for (size_t i = 0; i < d; ++i)
        for (size_t j = 0; j < d; ++j) {
            double s = 0.0;
            for (size_t r = 0; r < m.rows; ++r) s += m.at(r, i) * m.at(r, j);
            mtm[i][j] = s;
        }
    std::vector<std::vector<double>> vecs;
    oracle_jacobi_eig(mtm, eigvals, vecs);
    std::vector<size_t> order(d);
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return eigvals[a] > eigvals[b]; });
    std::vector<double> ev(d);
    eigvec_cols.assign(d, std::vector<double>(d));
    for (size_t k = 0; k < d; ++k) {
        ev[k] = eigvals[order[k]];
        for (size_t i = 0; i < d; ++i) eigvec_cols[k][i] = vecs[i][order[k]];
    }
    eigvals = ev;
}

double reconstruction_error(const Matrix& m, const SvdResult& s) {
    Matrix rec(m.rows, m.cols);
    const size_t k = s.singular_values.size();
    for (size_t i = 0; i < m.rows; ++i)
        for (size_t j = 0; j < m.cols; ++j) {
            double v = 0.0;
            for (size_t t = 0; t < k; ++t)
                v += s.u.at(i, t) * s.singular_values[t] * s.vt.at(t, j);
            rec.at(i, j) = m.at(i, j) - v;
        }
    return frobenius(rec) / frobenius(m);
}

double abs_cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    return std::abs(ab) / std::sqrt(aa * bb);
}

}  // namespace

TEST_CASE("svd identity and diagonal") {
    Matrix eye(3, 3);
    for (size_t i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
    auto s = svd(eye);
    for (double sv : s.singular_values) CHECK(sv == doctest::Approx(1.0).epsilon(1e-12));

    Matrix d(2, 2);
    d.at(0, 0) = 3.0;
    d.at(1, 1) = 2.0;
    auto sd = svd(d);
    CHECK(sd.singular_values[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(sd.singular_values[1] == doctest::Approx(2.0).epsilon(1e-12));
    // axis-aligned up to sign
    CHECK(std::abs(sd.vt.at(0, 0)) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(std::abs(sd.vt.at(1, 1)) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("svd random 5x3 reconstructs and matches MtM oracle") {
    Matrix m = random_matrix(5, 3, 7);
    auto s = svd(m);
    CHECK(reconstruction_error(m, s) < 1e-6);

    std::vector<double> ev;
    std::vector<std::vector<double>> vecs;
    oracle_cov_eig(m, ev, vecs);
    for (size_t k = 0; k < 3; ++k) {
        CHECK(s.singular_values[k] ==
              doctest::Approx(std::sqrt(std::max(0.0, ev[k]))).epsilon(1e-8));
        std::vector<double> vtrow(3);
        for (size_t j = 0; j < 3; ++j) vtrow[j] = s.vt.at(k, j);
        CHECK(abs_cosine(vtrow, vecs[k]) > 1.0 - 1e-8);
    }
}

TEST_CASE("svd invariants on random matrices up to 64x64") {
    for (uint64_t seed = 0; seed < 8; ++seed) {
        Rng shape_rng(seed * 977 + 5);
        const size_t r = 1 + shape_rng.next_below(64);
        const size_t c = 1 + shape_rng.next_below(64);
        Matrix m = random_matrix(r, c, seed + 100);
        auto s = svd(m);
        CHECK(reconstruction_error(m, s) < 1e-6);
        for (size_t i = 0; i + 1 < s.singular_values.size(); ++i)
            CHECK(s.singular_values[i] >= s.singular_values[i + 1] - 1e-12);
        for (size_t i = 0; i < s.vt.rows; ++i)
            for (size_t j = 0; j < s.vt.rows; ++j) {
                const double d = dot(s.vt.row(i), s.vt.row(j), s.vt.cols);
                CHECK(std::abs(d - (i == j ? 1.0 : 0.0)) < 1e-8);
            }
    }
}

TEST_CASE("svd rejects non-finite input") {
    Matrix m(2, 2);
    m.at(0, 0) = std::nan("");
    CHECK_THROWS_AS(svd(m), InputError);
}

TEST_CASE("mean_center examples") {
    Matrix m(2, 2, {1, 2, 3, 4});
    auto [c, mean] = mean_center(m);
    CHECK(c.at(0, 0) == doctest::Approx(-1.0));
    CHECK(c.at(0, 1) == doctest::Approx(-1.0));
    CHECK(c.at(1, 0) == doctest::Approx(1.0));
    CHECK(c.at(1, 1) == doctest::Approx(1.0));
    CHECK(mean[0] == doctest::Approx(2.0));
    CHECK(mean[1] == doctest::Approx(3.0));

    Matrix single(1, 3, {5, 6, 7});
    auto [cs, ms] = mean_center(single);
    for (double v : cs.data) CHECK(v == doctest::Approx(0.0));
    CHECK(ms[1] == doctest::Approx(6.0));

    Matrix r = random_matrix(20, 5, 1);
    auto [cr, mr] = mean_center(r);
    for (size_t col = 0; col < 5; ++col) {
        double s = 0.0;
        for (size_t row = 0; row < 20; ++row) s += cr.at(row, col);
        CHECK(std::abs(s) < 1e-9);
    }
    CHECK_THROWS_AS(mean_center(Matrix(0, 3)), InputError);
}

TEST_CASE("pca equals brute-force covariance eigenvectors") {
    for (uint64_t seed = 0; seed < 6; ++seed) {
        Rng shape_rng(seed + 31);
        const size_t r = 4 + shape_rng.next_below(29);  // <= 32
        const size_t c = 2 + shape_rng.next_below(15);  // <= 16
        Matrix m = random_matrix(r, c, seed + 400);
        const size_t ncomp = std::min<size_t>(3, std::min(r, c));
        auto p = pca(m, ncomp);

        auto [centered, mean] = mean_center(m);
        std::vector<double> ev;
        std::vector<std::vector<double>> vecs;
        oracle_cov_eig(centered, ev, vecs);
        for (size_t k = 0; k < ncomp; ++k) {
            std::vector<double> row(c);
            for (size_t j = 0; j < c; ++j) row[j] = p.components.at(k, j);
            CHECK(abs_cosine(row, vecs[k]) >= 1.0 - 1e-8);
        }
        for (size_t k = 0; k + 1 < ncomp; ++k)
            CHECK(p.explained_ratio[k] >= p.explained_ratio[k + 1] - 1e-12);
    }
}

TEST_CASE("fast_ica recovers mixed uniform sources") {
    Rng rng(42);
    const size_t n = 2000;
    Matrix x(n, 2);
    // mixing A = [[2,1],[1,1]]
    for (size_t i = 0; i < n; ++i) {
        const double s0 = rng.next_double() - 0.5;
        const double s1 = rng.next_double() - 0.5;
        x.at(i, 0) = 2.0 * s0 + 1.0 * s1;
        x.at(i, 1) = 1.0 * s0 + 1.0 * s1;
    }
    Matrix w = fast_ica(x, 2, 9);
    // true unmixing rows: rows of inv(A) = [[1,-1],[-1,2]]
    std::vector<std::vector<double>> truth = {{1.0, -1.0}, {-1.0, 2.0}};
    for (auto& t : truth) {
        double best = 0.0;
        for (size_t i = 0; i < 2; ++i) {
            std::vector<double> row = {w.at(i, 0), w.at(i, 1)};
            best = std::max(best, abs_cosine(row, t));
        }
        CHECK(best >= 0.95);
    }
}

TEST_CASE("fast_ica single component on embedded 1-D data") {
    Rng rng(5);
    const size_t n = 1000;
    Matrix x(n, 3);
    for (size_t i = 0; i < n; ++i) {
        const double s = rng.next_double() - 0.5;
        x.at(i, 1) = s;  // embedding axis = e1
        x.at(i, 0) = 1e-4 * (rng.next_double() - 0.5);
        x.at(i, 2) = 1e-4 * (rng.next_double() - 0.5);
    }
    Matrix w = fast_ica(x, 1, 3);
    std::vector<double> row = {w.at(0, 0), w.at(0, 1), w.at(0, 2)};
    CHECK(abs_cosine(row, {0.0, 1.0, 0.0}) >= 0.99);
}

TEST_CASE("fast_ica refuses Gaussian-only input") {
    Rng rng(11);
    Matrix x(20000, 2);
    for (double& v : x.data) v = rng.next_gaussian();
    CHECK_THROWS_AS(fast_ica(x, 2, 1), NumericError);
}

TEST_CASE("fast_ica input validation and determinism") {
    Matrix x = random_matrix(10, 4, 2);
    CHECK_THROWS_AS(fast_ica(x, 10, 0), InputError);
    Matrix tiny = random_matrix(2, 2, 2);
    CHECK_THROWS_AS(fast_ica(tiny, 1, 0), InputError);

    Rng rng(77);
    Matrix big(500, 3);
    for (size_t i = 0; i < 500; ++i) {
        const double a = rng.next_double() - 0.5, b = rng.next_double() - 0.5;
        big.at(i, 0) = a + b;
        big.at(i, 1) = a - 0.3 * b;
        big.at(i, 2) = 0.5 * a + b;
    }
    Matrix w1 = fast_ica(big, 2, 13);
    Matrix w2 = fast_ica(big, 2, 13);
    CHECK(w1.data == w2.data);  // bit-identical
}

namespace {
// Gram-Schmidt on columns so the signal column is exactly uncorrelated with
// the rest (keeps the fixtures free of finite-sample leakage).
void orthogonalize_columns(Matrix& m) {
    for (size_t j = 0; j < m.cols; ++j) {
        double mean = 0.0;
        for (size_t i = 0; i < m.rows; ++i) mean += m.at(i, j);
        mean /= static_cast<double>(m.rows);
        for (size_t i = 0; i < m.rows; ++i) m.at(i, j) -= mean;
    }
    for (size_t j = 0; j < m.cols; ++j) {
        for (size_t k = 0; k < j; ++k) {
            double num = 0.0, den = 0.0;
            for (size_t i = 0; i < m.rows; ++i) {
                num += m.at(i, j) * m.at(i, k);
                den += m.at(i, k) * m.at(i, k);
            }
            const double f = num / den;
            for (size_t i = 0; i < m.rows; ++i) m.at(i, j) -= f * m.at(i, k);
        }
    }
}
}  // namespace

TEST_CASE("pls_fit on linear target") {
    Matrix m = random_matrix(200, 6, 17);
    orthogonalize_columns(m);
    std::vector<double> y(200);
    for (size_t i = 0; i < 200; ++i) y[i] = 3.0 * m.at(i, 0) + 1.0;
    auto fit = pls_fit(m, y, 2);
    CHECK(fit.r2_per_component[0] >= 0.999);
    CHECK(fit.r2_per_component[1] >= fit.r2_per_component[0] - 1e-9);
    for (size_t i = 0; i < fit.directions.rows; ++i)
        CHECK(norm2(fit.directions.row(i), fit.directions.cols) ==
              doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("pls_fit noise target has low R2") {
    Matrix m = random_matrix(500, 8, 3);
    Rng rng(303);
    std::vector<double> y(500);
    for (double& v : y) v = rng.next_gaussian();
    auto fit = pls_fit(m, y, 1);
    CHECK(fit.r2_per_component[0] < 0.2);
}

TEST_CASE("pls_fit two orthogonal directions") {
    // fully orthogonal design, target exactly in span(col0, col1)
    Matrix m = random_matrix(64, 4, 21);
    orthogonalize_columns(m);
    std::vector<double> y(64);
    for (size_t i = 0; i < 64; ++i) y[i] = m.at(i, 0) + m.at(i, 1);
    auto fit = pls_fit(m, y, 2);
    CHECK(fit.r2_per_component[1] >= 0.999);

    // oracle: normal-equations least squares on the two raw columns
    double g00 = 0, g01 = 0, g11 = 0, b0 = 0, b1 = 0, ymean = 0;
    for (size_t i = 0; i < 64; ++i) ymean += y[i];
    ymean /= 64.0;
    for (size_t i = 0; i < 64; ++i) {
        g00 += m.at(i, 0) * m.at(i, 0);
        g01 += m.at(i, 0) * m.at(i, 1);
        g11 += m.at(i, 1) * m.at(i, 1);
        b0 += m.at(i, 0) * (y[i] - ymean);
        b1 += m.at(i, 1) * (y[i] - ymean);
    }
    const double det = g00 * g11 - g01 * g01;
    const double beta0 = (g11 * b0 - g01 * b1) / det;
    const double beta1 = (g00 * b1 - g01 * b0) / det;
    double ss_res = 0, ss_tot = 0;
    for (size_t i = 0; i < 64; ++i) {
        const double e = y[i] - ymean - beta0 * m.at(i, 0) - beta1 * m.at(i, 1);
        ss_res += e * e;
        ss_tot += (y[i] - ymean) * (y[i] - ymean);
    }
    CHECK(fit.r2_per_component[1] == doctest::Approx(1.0 - ss_res / ss_tot).epsilon(1e-6));
}

TEST_CASE("pls_fit rejects constant targets") {
    Matrix m = random_matrix(10, 3, 1);
    CHECK_THROWS_AS(pls_fit(m, std::vector<double>(10, 2.0), 1), InputError);
}

namespace {
// Independent oracle: average ranks computed by sorting copies, then the
// textbook Pearson formula on the ranks.
double oracle_spearman(const std::vector<double>& x, const std::vector<double>& y) {
    auto ranks = [](const std::vector<double>& v) {
        std::vector<double> r(v.size());
        for (size_t i = 0; i < v.size(); ++i) {
            size_t less = 0, equal = 0;
            for (size_t j = 0; j < v.size(); ++j) {
                if (v[j] < v[i]) ++less;
                if (v[j] == v[i]) ++equal;
            }
            r[i] = less + 0.5 * (equal + 1);
        }
        return r;
    };
    auto rx = ranks(x), ry = ranks(y);
    const size_t n = x.size();
    double sx = 0, sy = 0;
    for (size_t i = 0; i < n; ++i) {
        sx += rx[i];
        sy += ry[i];
    }
    sx /= n;
    sy /= n;
    double num = 0, dx = 0, dy = 0;
    for (size_t i = 0; i < n; ++i) {
        num += (rx[i] - sx) * (ry[i] - sy);
        dx += (rx[i] - sx) * (rx[i] - sx);
        dy += (ry[i] - sy) * (ry[i] - sy);
    }
    return num / std::sqrt(dx * dy);
}
}  // namespace

TEST_CASE("spearman basics") {
    CHECK(spearman({1, 2, 3}, {10, 20, 30}) == doctest::Approx(1.0));
    CHECK(spearman({1, 2, 3}, {3, 2, 1}) == doctest::Approx(-1.0));
    CHECK(spearman({1, 2, 2, 3}, {1, 3, 2, 4}) ==
          doctest::Approx(oracle_spearman({1, 2, 2, 3}, {1, 3, 2, 4})).epsilon(1e-12));
    CHECK(spearman({1, 2, 2, 3}, {1, 3, 2, 4}) == doctest::Approx(0.9487).epsilon(1e-3));
    CHECK_THROWS_AS(spearman({1, 1, 1}, {1, 2, 3}), InputError);
    CHECK_THROWS_AS(spearman({1, 2}, {1, 2, 3}), InputError);
}

TEST_CASE("spearman matches oracle on random tied data") {
    Rng rng(55);
    for (int trial = 0; trial < 100; ++trial) {
        const size_t n = 3 + rng.next_below(30);
        std::vector<double> x(n), y(n);
        for (size_t i = 0; i < n; ++i) {
            x[i] = static_cast<double>(rng.next_below(8));  // many ties
            y[i] = static_cast<double>(rng.next_below(8));
        }
        auto constant = [](const std::vector<double>& v) {
            for (double e : v)
                if (e != v[0]) return false;
            return true;
        };
        if (constant(x) || constant(y)) continue;
        CHECK(spearman(x, y) == doctest::Approx(oracle_spearman(x, y)).epsilon(1e-9));
    }
}

TEST_CASE("spearman invariance properties") {
    Rng rng(66);
    std::vector<double> x(40), y(40);
    for (size_t i = 0; i < 40; ++i) {
        x[i] = rng.next_gaussian();
        y[i] = rng.next_gaussian();
    }
    CHECK(spearman(x, x) == doctest::Approx(1.0));
    const double base = spearman(x, y);
    std::vector<double> xt(40);
    for (size_t i = 0; i < 40; ++i) xt[i] = std::exp(2.0 * x[i]) + 5.0;  // strictly increasing
    CHECK(spearman(xt, y) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("fast_ica rows are orthonormal in whitened space") {
    Rng rng(123);
    const size_t n = 1500;
    Matrix x(n, 3);
    for (size_t i = 0; i < n; ++i) {
        const double a = rng.next_double() - 0.5;
        const double b = rng.next_double() - 0.5;
        const double c = rng.next_double() - 0.5;
        x.at(i, 0) = a + 0.4 * b + 0.1 * c;
        x.at(i, 1) = 0.2 * a + b + 0.3 * c;
        x.at(i, 2) = 0.5 * a + 0.1 * b + c;
    }
    Matrix w = fast_ica(x, 2, 8);
    // pairwise decorrelation of recovered components on the data
    auto [cx, mean] = mean_center(x);
    std::vector<double> s0(n), s1(n);
    for (size_t i = 0; i < n; ++i) {
        s0[i] = dot(w.row(0), cx.row(i), 3);
        s1[i] = dot(w.row(1), cx.row(i), 3);
    }
    double c01 = 0, c00 = 0, c11 = 0;
    for (size_t i = 0; i < n; ++i) {
        c01 += s0[i] * s1[i];
        c00 += s0[i] * s0[i];
        c11 += s1[i] * s1[i];
    }
    CHECK(std::abs(c01) / std::sqrt(c00 * c11) < 1e-3);
}
