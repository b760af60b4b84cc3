#include "oisub/intervene.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

namespace oisub {

std::string edit_mode_name(EditMode m) {
    switch (m) {
        case EditMode::direct_literal: return "direct-literal";
        case EditMode::direct_replace: return "direct-replace";
        case EditMode::steer: return "steer";
    }
    throw InputError("unknown edit mode");
}

EditMode edit_mode_from_name(const std::string& s) {
    if (s == "direct-literal") return EditMode::direct_literal;
    if (s == "direct-replace") return EditMode::direct_replace;
    if (s == "steer") return EditMode::steer;
    throw ConfigError("unknown edit mode '" + s + "'");
}

void InterventionSpec::validate(int n_layers) const {
    if (layer < 0 || layer >= n_layers)
        throw InputError("intervention spec: layer out of range");
    if (beta < 0) throw InputError("intervention spec: beta must be >= 0");
    if (!std::isfinite(alpha) || !std::isfinite(step_value) || !std::isfinite(pc2_fixed))
        throw InputError("intervention spec: non-finite parameter");
}

std::vector<double> InterventionSpec::v(size_t c) const {
    std::vector<double> out(c, 0.0);
    if (c > 0) out[0] = step_value;
    if (c > 1) out[1] = pc2_fixed;
    return out;
}

namespace {

// x + B^T coeffs
std::vector<double> add_lifted(const std::vector<double>& x, const Subspace& s,
                               const std::vector<double>& coeffs) {
    std::vector<double> out = x;
    for (size_t i = 0; i < s.c(); ++i) {
        const double* b = s.basis.row(i);
        for (size_t j = 0; j < s.d(); ++j) out[j] += coeffs[i] * b[j];
    }
    return out;
}

}  // namespace

std::vector<double> direct_edit(const std::vector<double>& x, const Subspace& s,
                                const InterventionSpec& spec) {
    if (x.size() != s.d()) throw InputError("direct_edit: width mismatch");
    if (spec.mode == EditMode::steer)
        throw InputError("direct_edit: steer mode needs apply_steering");
    const std::vector<double> v = spec.v(s.c());
    std::vector<double> coeffs(s.c());
    if (spec.mode == EditMode::direct_literal) {
        // Eq.-style amplification with the literal uncentered product B x
        const std::vector<double> bx = project_uncentered(s, x.data(), x.size());
        for (size_t i = 0; i < s.c(); ++i)
            coeffs[i] = spec.alpha * (bx[i] + spec.beta * v[i]);
    } else {
        // pure translation: target = Bx + alpha*beta*v, so the added term is
        // alpha*beta*B^T v regardless of centering
        for (size_t i = 0; i < s.c(); ++i)
            coeffs[i] = spec.alpha * spec.beta * v[i];
    }
    return add_lifted(x, s, coeffs);
}

SteeringVector steering_vector(const ActivationMatrix& bi_matrix,
                               const ActivationMatrix& zero_matrix,
                               const Subspace& s) {
    const size_t n = bi_matrix.data.rows;
    if (n == 0 || n != zero_matrix.data.rows)
        throw InputError("steering_vector: matrices must pair the same samples");
    if (bi_matrix.data.cols != s.d() || zero_matrix.data.cols != s.d())
        throw InputError("steering_vector: width mismatch");
    SteeringVector sv;
    sv.coords.assign(s.c(), 0.0);
    sv.n_averaged = n;
    sv.source_bi = bi_matrix.oi_labels.empty() ? 0 : bi_matrix.oi_labels[0];
    for (size_t i = 0; i < n; ++i) {
        const std::vector<double> a =
            project(s, bi_matrix.data.row(i), bi_matrix.data.cols);
        const std::vector<double> b =
            project(s, zero_matrix.data.row(i), zero_matrix.data.cols);
        for (size_t j = 0; j < s.c(); ++j) sv.coords[j] += a[j] - b[j];
    }
    for (double& v : sv.coords) v /= static_cast<double>(n);
    return sv;
}

std::vector<double> apply_steering(const std::vector<double>& x, const Subspace& s,
                                   const SteeringVector& sv, double alpha) {
    if (x.size() != s.d()) throw InputError("apply_steering: width mismatch");
    if (sv.coords.size() != s.c())
        throw InputError("apply_steering: steering vector width mismatch");
    std::vector<double> coeffs(s.c());
    for (size_t i = 0; i < s.c(); ++i) coeffs[i] = alpha * sv.coords[i];
    return add_lifted(x, s, coeffs);
}

namespace {

struct SamplePrep {
    std::vector<int> tokens;
    int pos = 0;
    std::vector<double> x;              // captured activation at (layer, pos)
    std::vector<double> logits_orig;    // final position, full vocab
};

SamplePrep prep_sample(const Transformer& model, const Sample& s, int layer) {
    SamplePrep p;
    p.tokens = s.full_tokens();
    p.pos = s.query_entity_pi;
    std::vector<TraceSite> tr{{layer, p.pos, StreamPoint::post_block}};
    std::vector<std::vector<float>> cap;
    Mat<float> logits = model.forward(p.tokens, nullptr, &tr, &cap);
    p.x.assign(cap[0].begin(), cap[0].end());
    const Eigen::Index last = logits.rows() - 1;
    p.logits_orig.resize(model.config.vocab_size);
    for (int t = 0; t < model.config.vocab_size; ++t)
        p.logits_orig[t] = static_cast<double>(logits(last, t));
    return p;
}

std::vector<double> final_logits_with_edit(const Transformer& model,
                                           const std::vector<int>& tokens, int layer,
                                           int pos, const std::vector<double>& xstar) {
    EditSite e;
    e.layer = layer;
    e.position = pos;
    e.point = StreamPoint::post_block;
    e.replacement.assign(xstar.begin(), xstar.end());
    std::vector<EditSite> edits{e};
    Mat<float> logits = model.forward(tokens, &edits);
    const Eigen::Index last = logits.rows() - 1;
    std::vector<double> out(model.config.vocab_size);
    for (int t = 0; t < model.config.vocab_size; ++t)
        out[t] = static_cast<double>(logits(last, t));
    return out;
}

int argmax_token(const std::vector<double>& logits) {
    return static_cast<int>(std::max_element(logits.begin(), logits.end()) -
                            logits.begin());
}

int map_to_candidate_oi(int token, const std::vector<int>& cand_tokens,
                        const std::vector<int>& cand_ois) {
    for (size_t i = 0; i < cand_tokens.size(); ++i)
        if (cand_tokens[i] == token) return cand_ois[i];
    return -1;  // "other"
}

SweepRecord make_record(const Sample& s, int key,
                        const std::vector<double>& logits_orig,
                        const std::vector<double>& logits_int) {
    SweepRecord r;
    r.sample_id = s.sample_id;
    r.key = key;
    for (const EaPair& p : s.pairs) {
        r.candidate_oi.push_back(p.attribute_oi);
        r.candidate_token.push_back(p.attribute);
        r.logit_original.push_back(logits_orig[p.attribute]);
        r.logit_intervened.push_back(logits_int[p.attribute]);
    }
    r.answer_oi_original =
        map_to_candidate_oi(argmax_token(logits_orig), r.candidate_token, r.candidate_oi);
    r.answer_oi_intervened =
        map_to_candidate_oi(argmax_token(logits_int), r.candidate_token, r.candidate_oi);
    return r;
}

}  // namespace

std::vector<SweepRecord> run_step_sweep(const Transformer& model,
                                        const std::vector<Sample>& samples,
                                        const Subspace& s, InterventionSpec spec,
                                        const std::vector<int>& betas) {
    spec.validate(model.config.n_layers);
    if (betas.empty()) throw InputError("run_step_sweep: no betas");
    const int max_beta = *std::max_element(betas.begin(), betas.end());
    std::vector<SweepRecord> out;
    out.reserve(samples.size() * betas.size());
    for (const Sample& smp : samples) {
        if (smp.query_entity_oi != 0)
            throw InputError("run_step_sweep: samples must query the OI-0 entity");
        if (static_cast<int>(smp.pairs.size()) < max_beta + 1)
            throw InputError("run_step_sweep: fewer pairs than max beta + 1");
        SamplePrep p = prep_sample(model, smp, spec.layer);
        for (int beta : betas) {
            InterventionSpec b = spec;
            b.beta = beta;
            const std::vector<double> xstar = direct_edit(p.x, s, b);
            const std::vector<double> logits_int =
                final_logits_with_edit(model, p.tokens, spec.layer, p.pos, xstar);
            out.push_back(make_record(smp, beta, p.logits_orig, logits_int));
        }
    }
    return out;
}

std::vector<SweepRecord> run_steering_sweep(const Transformer& model,
                                            const std::vector<Sample>& samples,
                                            const Subspace& s,
                                            const std::vector<SteeringVector>& svs,
                                            double alpha, int layer) {
    if (svs.empty()) throw InputError("run_steering_sweep: no steering vectors");
    if (layer < 0 || layer >= model.config.n_layers)
        throw InputError("run_steering_sweep: layer out of range");
    std::vector<SweepRecord> out;
    out.reserve(samples.size() * svs.size());
    for (const Sample& smp : samples) {
        SamplePrep p = prep_sample(model, smp, layer);
        for (const SteeringVector& sv : svs) {
            const std::vector<double> xstar = apply_steering(p.x, s, sv, alpha);
            const std::vector<double> logits_int =
                final_logits_with_edit(model, p.tokens, layer, p.pos, xstar);
            out.push_back(make_record(smp, sv.source_bi, p.logits_orig, logits_int));
        }
    }
    return out;
}

std::vector<LayerEffect> run_layer_sweep(const Transformer& model,
                                         const std::vector<Sample>& samples,
                                         const std::map<int, Subspace>& per_layer,
                                         InterventionSpec spec) {
    if (per_layer.empty()) throw InputError("run_layer_sweep: no subspaces");
    std::map<uint64_t, int> orig_attr;  // sample id -> attribute OI bound to e_0
    for (const Sample& smp : samples)
        for (const EaPair& pr : smp.pairs)
            if (pr.entity_oi == 0) orig_attr[smp.sample_id] = pr.attribute_oi;
    std::vector<LayerEffect> out;
    for (const auto& [layer, sub] : per_layer) {
        InterventionSpec ls = spec;
        ls.layer = layer;
        const std::vector<SweepRecord> recs =
            run_step_sweep(model, samples, sub, ls, {spec.beta});
        LayerEffect e;
        e.layer = layer;
        double ld_sum = 0.0;
        size_t ld_n = 0, flips = 0;
        for (const SweepRecord& r : recs) {
            const auto it = orig_attr.find(r.sample_id);
            const int orig_attr_oi = it == orig_attr.end() ? -1 : it->second;
            for (size_t i = 0; i < r.candidate_oi.size(); ++i) {
                if (r.candidate_oi[i] == orig_attr_oi) continue;
                ld_sum += r.logit_intervened[i] - r.logit_original[i];
                ++ld_n;
            }
            if (r.answer_oi_intervened != r.answer_oi_original) ++flips;
        }
        e.mean_ld_nonoriginal = ld_n ? ld_sum / static_cast<double>(ld_n) : 0.0;
        e.flip_rate = recs.empty() ? 0.0
                                   : static_cast<double>(flips) /
                                         static_cast<double>(recs.size());
        out.push_back(e);
    }
    return out;
}

GridChoice grid_search(const Transformer& model, const std::vector<Sample>& dev,
                       const std::map<int, Subspace>& per_layer,
                       const std::vector<int>& layers,
                       const std::vector<double>& step_values,
                       const std::vector<double>& alphas,
                       const std::vector<int>& betas, EditMode mode) {
    if (layers.empty() || step_values.empty() || alphas.empty() || betas.empty())
        throw InputError("grid_search: empty grid axis");
    GridChoice best;
    best.score = -1.0;
    for (int layer : layers) {
        auto it = per_layer.find(layer);
        if (it == per_layer.end())
            throw InputError("grid_search: no subspace for layer " +
                             std::to_string(layer));
        for (double v : step_values) {
            for (double a : alphas) {
                InterventionSpec spec;
                spec.layer = layer;
                spec.alpha = a;
                spec.step_value = v;
                spec.mode = mode;
                const std::vector<SweepRecord> recs =
                    run_step_sweep(model, dev, it->second, spec, betas);
                // per-beta hit rate of a_beta, averaged over betas
                double score = 0.0;
                for (int beta : betas) {
                    size_t hits = 0, n = 0;
                    for (const SweepRecord& r : recs)
                        if (r.key == beta) {
                            ++n;
                            if (r.answer_oi_intervened == beta) ++hits;
                        }
                    score += n ? static_cast<double>(hits) / n : 0.0;
                }
                score /= static_cast<double>(betas.size());
                if (score > best.score) {
                    best = {layer, v, a, score};
                }
            }
        }
    }
    return best;
}

void write_sweep_csv(const std::string& path, const std::vector<SweepRecord>& rows,
                     const std::string& key_name) {
    std::ostringstream os;
    os << "sample_id," << key_name << ",candidate_oi,logit_original,logit_intervened\n";
    os.precision(17);
    for (const SweepRecord& r : rows)
        for (size_t i = 0; i < r.candidate_oi.size(); ++i)
            os << r.sample_id << ',' << r.key << ',' << r.candidate_oi[i] << ','
               << r.logit_original[i] << ',' << r.logit_intervened[i] << '\n';
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("sweep csv: cannot open '" + path + "' for writing");
    f << os.str();
}

namespace {

constexpr char kSweepMagic[4] = {'O', 'I', 'S', 'W'};
constexpr uint32_t kSweepVersion = 1;

template <typename T>
void put_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void take_pod(std::istream& is, T& v) {
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw FormatError("sweep file: truncated");
}

}  // namespace

void write_sweep_records(const std::string& path,
                         const std::vector<SweepRecord>& rows) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("sweep file: cannot open '" + path + "' for writing");
    os.write(kSweepMagic, 4);
    put_pod(os, kSweepVersion);
    put_pod(os, static_cast<uint64_t>(rows.size()));
    for (const SweepRecord& r : rows) {
        put_pod(os, r.sample_id);
        put_pod(os, static_cast<int32_t>(r.key));
        put_pod(os, static_cast<int32_t>(r.answer_oi_original));
        put_pod(os, static_cast<int32_t>(r.answer_oi_intervened));
        put_pod(os, static_cast<uint32_t>(r.candidate_oi.size()));
        for (size_t i = 0; i < r.candidate_oi.size(); ++i) {
            put_pod(os, static_cast<int32_t>(r.candidate_oi[i]));
            put_pod(os, static_cast<int32_t>(r.candidate_token[i]));
            put_pod(os, r.logit_original[i]);
            put_pod(os, r.logit_intervened[i]);
        }
    }
    if (!os) throw InputError("sweep file: write failed for '" + path + "'");
}

std::vector<SweepRecord> read_sweep_records(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InputError("sweep file: cannot open '" + path + "'");
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kSweepMagic, 4) != 0)
        throw FormatError("sweep file: bad magic");
    uint32_t version = 0;
    take_pod(is, version);
    if (version != kSweepVersion) throw FormatError("sweep file: unknown version");
    uint64_t n = 0;
    take_pod(is, n);
    std::vector<SweepRecord> rows(n);
    for (SweepRecord& r : rows) {
        int32_t v = 0;
        take_pod(is, r.sample_id);
        take_pod(is, v);
        r.key = v;
        take_pod(is, v);
        r.answer_oi_original = v;
        take_pod(is, v);
        r.answer_oi_intervened = v;
        uint32_t nc = 0;
        take_pod(is, nc);
        r.candidate_oi.resize(nc);
        r.candidate_token.resize(nc);
        r.logit_original.resize(nc);
        r.logit_intervened.resize(nc);
        for (uint32_t i = 0; i < nc; ++i) {
            take_pod(is, v);
            r.candidate_oi[i] = v;
            take_pod(is, v);
            r.candidate_token[i] = v;
            take_pod(is, r.logit_original[i]);
            take_pod(is, r.logit_intervened[i]);
        }
    }
    return rows;
}

}  // namespace oisub
