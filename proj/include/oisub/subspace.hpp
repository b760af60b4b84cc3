#pragma once

#include <map>

#include "oisub/capture.hpp"
#include "oisub/linalg.hpp"

namespace oisub {

enum class SubspaceMethod : uint8_t { pca = 0, ica = 1, pls = 2 };

std::string method_name(SubspaceMethod m);
SubspaceMethod method_from_name(const std::string& s);

/// Low-rank subspace over residual-stream activations. The basis is stored as
/// c rows of length d so that project(x) = basis * (x - mean) is type-correct;
/// rows are orthonormal for PCA/ICA whitened output and unit-norm for PLS.
struct Subspace {
    Matrix basis;                          // c x d
    std::vector<double> mean;              // length d
    std::vector<double> explained_ratio;   // PCA only, length c
    SubspaceMethod method = SubspaceMethod::pca;
    int layer = 0;
    int relation = 0;
    CaptureRole role = CaptureRole::entity_query;

    size_t c() const { return basis.rows; }
    size_t d() const { return basis.cols; }
    void validate() const;
};

struct ProjectionTable {
    int layer = 0;
    std::vector<double> pc1, pc2;
    std::vector<int> oi, pi;
    std::vector<uint64_t> sample_id;
};

/// Fit a c-dimensional subspace from an activation matrix. PCA is the
/// default (centered SVD, top-c right singular vectors); ICA and PLS (on the
/// OI labels) are the alternates.
Subspace fit_oi_subspace(const ActivationMatrix& m, size_t c,
                         SubspaceMethod method = SubspaceMethod::pca,
                         uint64_t seed = 0);

/// Resolve the sign ambiguity of row 1: flip it if needed so that
/// spearman(pc1 scores of the rows of m, oi_labels) >= 0.
Subspace orient(Subspace s, const ActivationMatrix& m);

/// coords = basis * (x - mean)
std::vector<double> project(const Subspace& s, const double* x, size_t len);
std::vector<double> project(const Subspace& s, const std::vector<double>& x);

/// Uncentered product basis * x (the literal B_r x of the intervention
/// formulas, which never subtract the mean).
std::vector<double> project_uncentered(const Subspace& s, const double* x, size_t len);

/// All pc1 (or pc-k) scores of a matrix under a subspace.
std::vector<double> pc_scores(const Subspace& s, const Matrix& m, size_t k = 0);

/// Per-layer fit+orient+project; each layer uses its own subspace.
std::map<int, ProjectionTable> projection_tables(
    const std::map<int, ActivationMatrix>& per_layer, size_t c = 2,
    SubspaceMethod method = SubspaceMethod::pca);

/// argmax over layers of spearman(pc1, OI) after orientation; returns
/// (layer, rho). Intended to run on a dev split.
std::pair<int, double> best_layer(const std::map<int, ActivationMatrix>& per_layer,
                                  size_t c = 2,
                                  SubspaceMethod method = SubspaceMethod::pca);

/// Binary record (magic "OISS").
void write_subspace(const std::string& path, const Subspace& s);
Subspace read_subspace(const std::string& path);

/// CSV with header pc1,pc2,oi,pi,sample_id.
void write_projection_csv(const std::string& path, const ProjectionTable& t);

}  // namespace oisub
