#include "oisub/model.hpp"

#include <cstring>
#include <fstream>

namespace oisub {

namespace {

constexpr char kMagic[4] = {'O', 'I', 'L', 'M'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& is, T& v) {
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw FormatError("checkpoint: truncated file");
}

void write_string(std::ostream& os, const std::string& s) {
    write_pod(os, static_cast<uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
    uint32_t n = 0;
    read_pod(is, n);
    if (n > 1024) throw FormatError("checkpoint: implausible name length");
    std::string s(n, '\0');
    is.read(s.data(), n);
    if (!is) throw FormatError("checkpoint: truncated file");
    return s;
}

}  // namespace

void save_checkpoint(const Transformer& model, const std::string& path,
                     uint64_t train_steps, double final_loss,
                     double heldout_accuracy) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("checkpoint: cannot open '" + path + "' for writing");
    os.write(kMagic, 4);
    write_pod(os, kVersion);
    const ModelConfig& c = model.config;
    write_pod(os, static_cast<uint32_t>(c.d_model));
    write_pod(os, static_cast<uint32_t>(c.n_layers));
    write_pod(os, static_cast<uint32_t>(c.n_heads));
    write_pod(os, static_cast<uint32_t>(c.d_ff));
    write_pod(os, static_cast<uint32_t>(c.max_seq_len));
    write_pod(os, static_cast<uint32_t>(c.vocab_size));
    write_pod(os, c.seed);
    write_pod(os, train_steps);
    write_pod(os, final_loss);
    write_pod(os, heldout_accuracy);

    auto& m = const_cast<Transformer&>(model);
    uint32_t n_tensors = 0;
    m.visit([&](const std::string&, Mat<float>&) { ++n_tensors; });
    write_pod(os, n_tensors);
    m.visit([&](const std::string& name, Mat<float>& t) {
        write_string(os, name);
        write_pod(os, static_cast<uint32_t>(t.rows()));
        write_pod(os, static_cast<uint32_t>(t.cols()));
        os.write(reinterpret_cast<const char*>(t.data()),
                 static_cast<std::streamsize>(sizeof(float) * t.size()));
    });
    if (!os) throw InputError("checkpoint: write failed for '" + path + "'");
}

Transformer load_checkpoint(const std::string& path, CheckpointMeta* meta) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InputError("checkpoint: cannot open '" + path + "'");
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("checkpoint: bad magic");
    uint32_t version = 0;
    read_pod(is, version);
    if (version != kVersion)
        throw FormatError("checkpoint: unsupported version " + std::to_string(version));

    ModelConfig c;
    uint32_t u;
    read_pod(is, u); c.d_model = static_cast<int>(u);
    read_pod(is, u); c.n_layers = static_cast<int>(u);
    read_pod(is, u); c.n_heads = static_cast<int>(u);
    read_pod(is, u); c.d_ff = static_cast<int>(u);
    read_pod(is, u); c.max_seq_len = static_cast<int>(u);
    read_pod(is, u); c.vocab_size = static_cast<int>(u);
    read_pod(is, c.seed);
    CheckpointMeta m;
    read_pod(is, m.train_steps);
    read_pod(is, m.final_loss);
    read_pod(is, m.heldout_accuracy);
    if (meta) *meta = m;

    Transformer model;
    model.init(c);  // allocates all tensors with the right shapes
    uint32_t n_tensors = 0;
    read_pod(is, n_tensors);
    uint32_t expected = 0;
    model.visit([&](const std::string&, Mat<float>&) { ++expected; });
    if (n_tensors != expected)
        throw FormatError("checkpoint: tensor count mismatch");

    model.visit([&](const std::string& name, Mat<float>& t) {
        const std::string got = read_string(is);
        if (got != name)
            throw FormatError("checkpoint: tensor order mismatch, expected '" + name +
                              "' got '" + got + "'");
        uint32_t r = 0, cc = 0;
        read_pod(is, r);
        read_pod(is, cc);
        if (static_cast<Eigen::Index>(r) != t.rows() ||
            static_cast<Eigen::Index>(cc) != t.cols())
            throw FormatError("checkpoint: shape mismatch for '" + name + "'");
        is.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(sizeof(float) * t.size()));
        if (!is) throw FormatError("checkpoint: truncated tensor data for '" + name + "'");
    });
    return model;
}

uint64_t checkpoint_hash(Transformer& model) {
    uint64_t h = 0xcbf29ce484222325ULL;
    const ModelConfig& c = model.config;
    h = fnv1a(&c.d_model, sizeof(int), h);
    h = fnv1a(&c.n_layers, sizeof(int), h);
    h = fnv1a(&c.n_heads, sizeof(int), h);
    h = fnv1a(&c.d_ff, sizeof(int), h);
    h = fnv1a(&c.max_seq_len, sizeof(int), h);
    h = fnv1a(&c.vocab_size, sizeof(int), h);
    h = fnv1a(&c.seed, sizeof(uint64_t), h);
    model.visit([&](const std::string& name, Mat<float>& t) {
        h = fnv1a(std::string_view(name), h);
        h = fnv1a(t.data(), sizeof(float) * static_cast<size_t>(t.size()), h);
    });
    return h;
}

}  // namespace oisub
