#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "oisub/matrix.hpp"

namespace oisub::linalg {

struct SvdResult {
    Matrix u;                             // n x k
    std::vector<double> singular_values;  // length k, nonincreasing
    Matrix vt;                            // k x d, orthonormal rows
};

struct PcaResult {
    Matrix components;                        // c x d, orthonormal rows
    std::vector<double> mean;                 // length d
    std::vector<double> explained_variance;   // per-component sample variance
    std::vector<double> explained_ratio;      // fraction of total variance
};

struct PlsFit {
    Matrix directions;                    // c x d, unit rows (X weights)
    std::vector<double> r2_per_component; // cumulative R^2 using components 0..k
};

/// Thin SVD by one-sided Jacobi on the shorter side. Deterministic; sweeps
/// capped at 100, off-diagonal convergence threshold 1e-12.
SvdResult svd(const Matrix& m);

/// Subtract column means. Returns (centered matrix, mean row).
std::pair<Matrix, std::vector<double>> mean_center(const Matrix& m);

/// PCA of m: center, SVD, keep top-c right singular vectors.
PcaResult pca(const Matrix& m, size_t c);

/// Symmetric eigendecomposition by cyclic Jacobi. Returns (eigenvalues
/// descending, eigenvectors as rows). Used for whitening inside FastICA.
std::pair<std::vector<double>, Matrix> sym_eig(const Matrix& a);

/// FastICA with PCA whitening, tanh contrast and symmetric decorrelation.
/// Returns c unmixing rows in the original d-dimensional space, unit norm.
/// If every recovered component has |excess kurtosis| < 0.1 the input is
/// indistinguishable from Gaussian and a NumericError is thrown (ICA is
/// indeterminate there); callers wanting the raw rotation should not feed
/// Gaussian data.
Matrix fast_ica(const Matrix& m, size_t c, uint64_t seed);

/// PLS regression via NIPALS with deflation (max 500 iterations per
/// component, tolerance 1e-9). r2_per_component[k] is the ordinary
/// least-squares R^2 of the targets regressed on the scores of
/// components 0..k.
PlsFit pls_fit(const Matrix& m, const std::vector<double>& targets, size_t c);

/// Average-fractional ranks; ties share the mean of their rank range.
std::vector<double> fractional_ranks(const std::vector<double>& v);

/// Spearman's rho: Pearson correlation of fractional ranks.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

double pearson(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace oisub::linalg
