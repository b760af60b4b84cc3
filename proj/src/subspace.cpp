#include "oisub/subspace.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace oisub {

namespace {

constexpr char kMagic[4] = {'O', 'I', 'S', 'S'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& is, T& v) {
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw FormatError("subspace file: truncated");
}

std::vector<double> column_means(const Matrix& m) {
    std::vector<double> mu(m.cols, 0.0);
    for (size_t i = 0; i < m.rows; ++i)
        for (size_t j = 0; j < m.cols; ++j) mu[j] += m.at(i, j);
    for (double& v : mu) v /= static_cast<double>(m.rows);
    return mu;
}

}  // namespace

std::string method_name(SubspaceMethod m) {
    switch (m) {
        case SubspaceMethod::pca: return "pca";
        case SubspaceMethod::ica: return "ica";
        case SubspaceMethod::pls: return "pls";
    }
    throw InputError("unknown subspace method");
}

SubspaceMethod method_from_name(const std::string& s) {
    if (s == "pca") return SubspaceMethod::pca;
    if (s == "ica") return SubspaceMethod::ica;
    if (s == "pls") return SubspaceMethod::pls;
    throw ConfigError("unknown subspace method '" + s + "'");
}

void Subspace::validate() const {
    if (basis.rows == 0 || basis.cols == 0 || mean.size() != basis.cols)
        throw InputError("subspace: empty basis or mean width mismatch");
    basis.require_finite("subspace basis");
    for (size_t i = 0; i < basis.rows; ++i) {
        const double n = norm2(basis.row(i), basis.cols);
        if (std::abs(n - 1.0) > 1e-8)
            throw InputError("subspace: basis row " + std::to_string(i) +
                             " is not unit-norm");
    }
    // ICA unmixing rows are orthogonal in the whitened space, not the original
    // one, so mutual orthogonality is a PCA-only invariant.
    if (method == SubspaceMethod::pca) {
        for (size_t i = 0; i < basis.rows; ++i)
            for (size_t j = i + 1; j < basis.rows; ++j)
                if (std::abs(dot(basis.row(i), basis.row(j), basis.cols)) > 1e-8)
                    throw InputError("subspace: basis rows not orthogonal");
    }
    for (size_t i = 0; i < explained_ratio.size(); ++i) {
        if (explained_ratio[i] < -1e-12 || explained_ratio[i] > 1.0 + 1e-12)
            throw InputError("subspace: explained ratio outside [0,1]");
        if (i > 0 && explained_ratio[i] > explained_ratio[i - 1] + 1e-12)
            throw InputError("subspace: explained ratios must be nonincreasing");
    }
}

Subspace fit_oi_subspace(const ActivationMatrix& m, size_t c, SubspaceMethod method,
                         uint64_t seed) {
    const size_t n = m.data.rows, d = m.data.cols;
    if (n < 3) throw InputError("fit_oi_subspace: need at least 3 rows");
    if (c < 1 || c > std::min(n - 1, d))
        throw InputError("fit_oi_subspace: c must be in [1, min(n-1, d)]");
    m.data.require_finite("fit_oi_subspace");

    Subspace s;
    s.method = method;
    s.layer = m.layer;
    s.relation = m.relation;
    s.role = m.role;
    switch (method) {
        case SubspaceMethod::pca: {
            linalg::PcaResult p = linalg::pca(m.data, c);
            if (p.explained_variance.empty() || p.explained_variance[0] < 1e-300)
                throw NumericError("fit_oi_subspace: zero variance in top component");
            s.basis = std::move(p.components);
            s.mean = std::move(p.mean);
            s.explained_ratio = std::move(p.explained_ratio);
            break;
        }
        case SubspaceMethod::ica: {
            s.basis = linalg::fast_ica(m.data, c, seed);
            s.mean = column_means(m.data);
            break;
        }
        case SubspaceMethod::pls: {
            if (m.oi_labels.size() != n)
                throw InputError("fit_oi_subspace: pls needs OI labels per row");
            std::vector<double> y(m.oi_labels.begin(), m.oi_labels.end());
            linalg::PlsFit p = linalg::pls_fit(m.data, y, c);
            s.basis = std::move(p.directions);
            s.mean = column_means(m.data);
            break;
        }
    }
    return s;
}

std::vector<double> project(const Subspace& s, const double* x, size_t len) {
    if (len != s.d()) throw InputError("project: point width != basis width");
    std::vector<double> out(s.c(), 0.0);
    for (size_t i = 0; i < s.c(); ++i) {
        const double* b = s.basis.row(i);
        double acc = 0.0;
        for (size_t j = 0; j < len; ++j) acc += b[j] * (x[j] - s.mean[j]);
        out[i] = acc;
    }
    return out;
}

std::vector<double> project(const Subspace& s, const std::vector<double>& x) {
    return project(s, x.data(), x.size());
}

std::vector<double> project_uncentered(const Subspace& s, const double* x, size_t len) {
    if (len != s.d()) throw InputError("project: point width != basis width");
    std::vector<double> out(s.c(), 0.0);
    for (size_t i = 0; i < s.c(); ++i) out[i] = dot(s.basis.row(i), x, len);
    return out;
}

std::vector<double> pc_scores(const Subspace& s, const Matrix& m, size_t k) {
    if (k >= s.c()) throw InputError("pc_scores: component index out of range");
    std::vector<double> out(m.rows);
    for (size_t i = 0; i < m.rows; ++i) out[i] = project(s, m.row(i), m.cols)[k];
    return out;
}

Subspace orient(Subspace s, const ActivationMatrix& m) {
    if (m.oi_labels.size() != m.data.rows)
        throw InputError("orient: OI labels missing");
    const int first = m.oi_labels.empty() ? 0 : m.oi_labels[0];
    bool constant = true;
    for (int v : m.oi_labels)
        if (v != first) {
            constant = false;
            break;
        }
    if (constant) throw InputError("orient: constant OI labels");

    std::vector<double> scores = pc_scores(s, m.data, 0);
    std::vector<double> oi(m.oi_labels.begin(), m.oi_labels.end());
    if (linalg::spearman(scores, oi) < 0.0)
        for (size_t j = 0; j < s.d(); ++j) s.basis.at(0, j) = -s.basis.at(0, j);
    return s;
}

std::map<int, ProjectionTable> projection_tables(
    const std::map<int, ActivationMatrix>& per_layer, size_t c,
    SubspaceMethod method) {
    std::map<int, ProjectionTable> out;
    for (const auto& [layer, m] : per_layer) {
        Subspace s = orient(fit_oi_subspace(m, c, method), m);
        ProjectionTable t;
        t.layer = layer;
        for (size_t i = 0; i < m.data.rows; ++i) {
            std::vector<double> p = project(s, m.data.row(i), m.data.cols);
            t.pc1.push_back(p[0]);
            t.pc2.push_back(p.size() > 1 ? p[1] : 0.0);
            t.oi.push_back(m.oi_labels[i]);
            t.pi.push_back(m.pi_labels[i]);
            t.sample_id.push_back(m.sample_refs[i]);
        }
        out.emplace(layer, std::move(t));
    }
    return out;
}

std::pair<int, double> best_layer(const std::map<int, ActivationMatrix>& per_layer,
                                  size_t c, SubspaceMethod method) {
    if (per_layer.empty()) throw InputError("best_layer: no layers given");
    int best = -1;
    double best_rho = -2.0;
    for (const auto& [layer, m] : per_layer) {
        Subspace s = orient(fit_oi_subspace(m, c, method), m);
        std::vector<double> scores = pc_scores(s, m.data, 0);
        std::vector<double> oi(m.oi_labels.begin(), m.oi_labels.end());
        const double rho = linalg::spearman(scores, oi);
        if (rho > best_rho) {
            best_rho = rho;
            best = layer;
        }
    }
    return {best, best_rho};
}

void write_subspace(const std::string& path, const Subspace& s) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("subspace file: cannot open '" + path + "' for writing");
    os.write(kMagic, 4);
    write_pod(os, kVersion);
    write_pod(os, static_cast<uint32_t>(s.c()));
    write_pod(os, static_cast<uint32_t>(s.d()));
    write_pod(os, static_cast<uint8_t>(s.method));
    write_pod(os, static_cast<uint32_t>(s.layer));
    write_pod(os, static_cast<uint32_t>(s.relation));
    write_pod(os, static_cast<uint8_t>(s.role));
    write_pod(os, static_cast<uint32_t>(s.explained_ratio.size()));
    for (double v : s.mean) write_pod(os, v);
    for (double v : s.explained_ratio) write_pod(os, v);
    for (double v : s.basis.data) write_pod(os, v);
    if (!os) throw InputError("subspace file: write failed for '" + path + "'");
}

Subspace read_subspace(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InputError("subspace file: cannot open '" + path + "'");
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("subspace file: bad magic");
    uint32_t version = 0;
    read_pod(is, version);
    if (version != kVersion)
        throw FormatError("subspace file: unsupported version " +
                          std::to_string(version));
    uint32_t c = 0, d = 0, layer = 0, relation = 0, n_ratio = 0;
    uint8_t method = 0, role = 0;
    read_pod(is, c);
    read_pod(is, d);
    read_pod(is, method);
    read_pod(is, layer);
    read_pod(is, relation);
    read_pod(is, role);
    read_pod(is, n_ratio);
    if (method > 2 || role > 1 || n_ratio > c)
        throw FormatError("subspace file: bad header fields");
    Subspace s;
    s.method = static_cast<SubspaceMethod>(method);
    s.layer = static_cast<int>(layer);
    s.relation = static_cast<int>(relation);
    s.role = static_cast<CaptureRole>(role);
    s.mean.resize(d);
    for (double& v : s.mean) read_pod(is, v);
    s.explained_ratio.resize(n_ratio);
    for (double& v : s.explained_ratio) read_pod(is, v);
    s.basis = Matrix(c, d);
    for (double& v : s.basis.data) read_pod(is, v);
    return s;
}

void write_projection_csv(const std::string& path, const ProjectionTable& t) {
    std::ostringstream os;
    os << "pc1,pc2,oi,pi,sample_id\n";
    os.precision(17);
    for (size_t i = 0; i < t.pc1.size(); ++i)
        os << t.pc1[i] << ',' << t.pc2[i] << ',' << t.oi[i] << ',' << t.pi[i] << ','
           << t.sample_id[i] << '\n';
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("projection csv: cannot open '" + path + "' for writing");
    f << os.str();
}

}  // namespace oisub
