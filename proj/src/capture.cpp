#include "oisub/capture.hpp"

#include <cstring>
#include <fstream>

namespace oisub {

namespace {

constexpr char kMagic[4] = {'O', 'I', 'A', 'M'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& is, T& v) {
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw FormatError("activation file: truncated");
}

}  // namespace

void ActivationMatrix::validate(int n_layers) const {
    const size_t nn = data.rows;
    if (oi_labels.size() != nn || pi_labels.size() != nn || sample_refs.size() != nn)
        throw InputError("activation matrix: label lengths must equal row count");
    if (layer < 0 || layer >= n_layers)
        throw InputError("activation matrix: layer out of range");
    data.require_finite("activation matrix");
}

ActivationMatrix build_entity_matrix(const Transformer& model,
                                     const std::vector<Sample>& samples, int layer,
                                     StreamPoint point) {
    if (layer < 0 || layer >= model.config.n_layers)
        throw InputError("build_entity_matrix: layer out of range");
    const int d = model.config.d_model;
    ActivationMatrix out;
    out.data = Matrix(samples.size(), static_cast<size_t>(d));
    out.role = CaptureRole::entity_query;
    out.layer = layer;
    out.relation = samples.empty() ? 0 : samples.front().relation;
    out.oi_labels.reserve(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) {
        const Sample& s = samples[i];
        std::vector<TraceSite> trace{{layer, s.query_entity_pi, point}};
        std::vector<std::vector<float>> cap;
        model.forward(s.full_tokens(), nullptr, &trace, &cap);
        for (int j = 0; j < d; ++j)
            out.data.at(i, static_cast<size_t>(j)) = static_cast<double>(cap[0][j]);
        out.oi_labels.push_back(s.query_entity_oi);
        out.pi_labels.push_back(s.query_entity_pi);
        out.sample_refs.push_back(s.sample_id);
    }
    return out;
}

ActivationMatrix build_attribute_matrix(const Transformer& model,
                                        const std::vector<Sample>& samples,
                                        const Vocabulary& vocab, int layer,
                                        StreamPoint point) {
    if (layer < 0 || layer >= model.config.n_layers)
        throw InputError("build_attribute_matrix: layer out of range");
    const int d = model.config.d_model;
    size_t rows = 0;
    for (const auto& s : samples) rows += s.pairs.size();
    ActivationMatrix out;
    out.data = Matrix(rows, static_cast<size_t>(d));
    out.role = CaptureRole::attribute_query;
    out.layer = layer;
    out.relation = samples.empty() ? 0 : samples.front().relation;
    size_t r = 0;
    for (const Sample& s : samples) {
        for (const EaPair& p : s.pairs) {
            int attr_off = 0;
            std::vector<int> query =
                attribute_query_tokens(vocab, s.relation, p.attribute, &attr_off);
            std::vector<int> tokens = s.context_tokens;
            const int pos = static_cast<int>(tokens.size()) + attr_off;
            tokens.insert(tokens.end(), query.begin(), query.end());
            std::vector<TraceSite> trace{{layer, pos, point}};
            std::vector<std::vector<float>> cap;
            model.forward(tokens, nullptr, &trace, &cap);
            for (int j = 0; j < d; ++j)
                out.data.at(r, static_cast<size_t>(j)) = static_cast<double>(cap[0][j]);
            out.oi_labels.push_back(p.attribute_oi);
            out.pi_labels.push_back(pos);
            out.sample_refs.push_back(s.sample_id);
            ++r;
        }
    }
    return out;
}

std::map<int, ActivationMatrix> layer_sweep_matrices(const Transformer& model,
                                                     const std::vector<Sample>& samples,
                                                     const std::vector<int>& layers,
                                                     StreamPoint point) {
    if (layers.empty()) throw InputError("layer_sweep_matrices: no layers requested");
    for (int l : layers)
        if (l < 0 || l >= model.config.n_layers)
            throw InputError("layer_sweep_matrices: layer out of range");
    const int d = model.config.d_model;
    std::map<int, ActivationMatrix> out;
    for (int l : layers) {
        ActivationMatrix m;
        m.data = Matrix(samples.size(), static_cast<size_t>(d));
        m.role = CaptureRole::entity_query;
        m.layer = l;
        m.relation = samples.empty() ? 0 : samples.front().relation;
        out.emplace(l, std::move(m));
    }
    for (size_t i = 0; i < samples.size(); ++i) {
        const Sample& s = samples[i];
        std::vector<TraceSite> trace;
        trace.reserve(layers.size());
        for (int l : layers) trace.push_back({l, s.query_entity_pi, point});
        std::vector<std::vector<float>> cap;
        model.forward(s.full_tokens(), nullptr, &trace, &cap);
        for (size_t li = 0; li < layers.size(); ++li) {
            ActivationMatrix& m = out.at(layers[li]);
            for (int j = 0; j < d; ++j)
                m.data.at(i, static_cast<size_t>(j)) =
                    static_cast<double>(cap[li][j]);
            m.oi_labels.push_back(s.query_entity_oi);
            m.pi_labels.push_back(s.query_entity_pi);
            m.sample_refs.push_back(s.sample_id);
        }
    }
    return out;
}

void write_activation_matrix(const std::string& path, const ActivationMatrix& m) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("activation file: cannot open '" + path + "' for writing");
    os.write(kMagic, 4);
    write_pod(os, kVersion);
    write_pod(os, static_cast<uint32_t>(m.data.rows));
    write_pod(os, static_cast<uint32_t>(m.data.cols));
    write_pod(os, static_cast<uint8_t>(m.role));
    write_pod(os, static_cast<uint32_t>(m.layer));
    write_pod(os, static_cast<uint32_t>(m.relation));
    for (size_t i = 0; i < m.data.rows; ++i) {
        write_pod(os, static_cast<int32_t>(m.oi_labels[i]));
        write_pod(os, static_cast<int32_t>(m.pi_labels[i]));
        write_pod(os, static_cast<uint64_t>(m.sample_refs[i]));
    }
    for (double v : m.data.data) write_pod(os, static_cast<float>(v));
    if (!os) throw InputError("activation file: write failed for '" + path + "'");
}

ActivationMatrix read_activation_matrix(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InputError("activation file: cannot open '" + path + "'");
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("activation file: bad magic");
    uint32_t version = 0;
    read_pod(is, version);
    if (version != kVersion)
        throw FormatError("activation file: unsupported version " +
                          std::to_string(version));
    uint32_t n = 0, d = 0, layer = 0, relation = 0;
    uint8_t role = 0;
    read_pod(is, n);
    read_pod(is, d);
    read_pod(is, role);
    read_pod(is, layer);
    read_pod(is, relation);
    if (role > 1) throw FormatError("activation file: bad role byte");
    ActivationMatrix m;
    m.data = Matrix(n, d);
    m.role = static_cast<CaptureRole>(role);
    m.layer = static_cast<int>(layer);
    m.relation = static_cast<int>(relation);
    m.oi_labels.resize(n);
    m.pi_labels.resize(n);
    m.sample_refs.resize(n);
    for (uint32_t i = 0; i < n; ++i) {
        int32_t oi = 0, pi = 0;
        uint64_t sid = 0;
        read_pod(is, oi);
        read_pod(is, pi);
        read_pod(is, sid);
        m.oi_labels[i] = oi;
        m.pi_labels[i] = pi;
        m.sample_refs[i] = sid;
    }
    for (double& v : m.data.data) {
        float f = 0;
        read_pod(is, f);
        v = static_cast<double>(f);
    }
    return m;
}

uint64_t activation_matrix_hash(const ActivationMatrix& m) {
    uint64_t h = 0xcbf29ce484222325ULL;
    const uint32_t n = static_cast<uint32_t>(m.data.rows),
                   d = static_cast<uint32_t>(m.data.cols);
    h = fnv1a(&n, sizeof(n), h);
    h = fnv1a(&d, sizeof(d), h);
    const uint8_t role = static_cast<uint8_t>(m.role);
    h = fnv1a(&role, sizeof(role), h);
    h = fnv1a(&m.layer, sizeof(int), h);
    h = fnv1a(&m.relation, sizeof(int), h);
    h = fnv1a(m.oi_labels.data(), m.oi_labels.size() * sizeof(int), h);
    h = fnv1a(m.pi_labels.data(), m.pi_labels.size() * sizeof(int), h);
    h = fnv1a(m.sample_refs.data(), m.sample_refs.size() * sizeof(uint64_t), h);
    for (double v : m.data.data) {
        const float f = static_cast<float>(v);
        h = fnv1a(&f, sizeof(f), h);
    }
    return h;
}

}  // namespace oisub
