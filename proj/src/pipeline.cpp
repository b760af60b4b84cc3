#include "oisub/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace oisub {

namespace fs = std::filesystem;
using nlohmann::json;

void ExperimentConfig::validate() const {
    if (out_dir.empty()) throw ConfigError("out_dir: must not be empty");
    if (vocab.objects < 8 || vocab.names < 8)
        throw ConfigError("vocab: pools must have at least 8 words");
    if (dataset.relation < 0 || dataset.relation >= kNumRelations)
        throw ConfigError("dataset.relation: out of range");
    if (dataset.k_pairs < 1) throw ConfigError("dataset.k_pairs: must be >= 1");
    if (dataset.n < 10) throw ConfigError("dataset.n: too small");
    const double fracs = dataset.train_frac + dataset.dev_frac + dataset.test_frac;
    if (dataset.train_frac < 0 || dataset.dev_frac <= 0 || dataset.test_frac <= 0 ||
        fracs > 1.0 + 1e-9)
        throw ConfigError("dataset: split fractions invalid");
    if (corpus.k_min < 1 || corpus.k_max < corpus.k_min)
        throw ConfigError("corpus: k range invalid");
    if (subspace.c < 1) throw ConfigError("subspace.c: must be >= 1");
    // vocab_size is filled at train time, so check the shape fields only
    if (model.d_model < 1 || model.n_layers < 1 || model.n_heads < 1 ||
        model.d_ff < 1 || model.max_seq_len < 1)
        throw ConfigError("model: all counts must be >= 1");
    if (model.d_model % model.n_heads != 0)
        throw ConfigError("model.d_model: must be divisible by n_heads");
}

namespace {

template <typename T>
void read_field(const json& j, const char* section, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string(section) + "." + key + ": wrong type");
    }
}

void check_known(const json& j, const char* section,
                 std::initializer_list<const char*> known) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known)
            if (it.key() == k) ok = true;
        if (!ok)
            throw ConfigError(std::string(section) + "." + it.key() +
                              ": unknown field");
    }
}

}  // namespace

ExperimentConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    ExperimentConfig c;
    check_known(j, "config",
                {"seed", "out_dir", "vocab", "dataset", "corpus", "model", "train",
                 "capture", "subspace", "intervene"});
    read_field(j, "config", "seed", c.seed);
    read_field(j, "config", "out_dir", c.out_dir);
    if (j.contains("vocab")) {
        const json& v = j.at("vocab");
        check_known(v, "vocab", {"objects", "names"});
        read_field(v, "vocab", "objects", c.vocab.objects);
        read_field(v, "vocab", "names", c.vocab.names);
    }
    if (j.contains("dataset")) {
        const json& d = j.at("dataset");
        check_known(d, "dataset",
                    {"relation", "k_pairs", "n", "train_frac", "dev_frac",
                     "test_frac", "sweep_dev_n", "sweep_test_n", "variant",
                     "pattern"});
        read_field(d, "dataset", "relation", c.dataset.relation);
        read_field(d, "dataset", "k_pairs", c.dataset.k_pairs);
        read_field(d, "dataset", "n", c.dataset.n);
        read_field(d, "dataset", "train_frac", c.dataset.train_frac);
        read_field(d, "dataset", "dev_frac", c.dataset.dev_frac);
        read_field(d, "dataset", "test_frac", c.dataset.test_frac);
        read_field(d, "dataset", "sweep_dev_n", c.dataset.sweep_dev_n);
        read_field(d, "dataset", "sweep_test_n", c.dataset.sweep_test_n);
        read_field(d, "dataset", "variant", c.dataset.variant);
        read_field(d, "dataset", "pattern", c.dataset.pattern);
    }
    if (j.contains("corpus")) {
        const json& d = j.at("corpus");
        check_known(d, "corpus", {"n_per_cell", "k_min", "k_max"});
        read_field(d, "corpus", "n_per_cell", c.corpus.n_per_cell);
        read_field(d, "corpus", "k_min", c.corpus.k_min);
        read_field(d, "corpus", "k_max", c.corpus.k_max);
    }
    if (j.contains("model")) {
        const json& m = j.at("model");
        check_known(m, "model",
                    {"d_model", "n_layers", "n_heads", "d_ff", "max_seq_len"});
        read_field(m, "model", "d_model", c.model.d_model);
        read_field(m, "model", "n_layers", c.model.n_layers);
        read_field(m, "model", "n_heads", c.model.n_heads);
        read_field(m, "model", "d_ff", c.model.d_ff);
        read_field(m, "model", "max_seq_len", c.model.max_seq_len);
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        check_known(t, "train",
                    {"steps", "batch_size", "lr", "warmup_steps", "min_lr_frac",
                     "weight_decay", "grad_clip", "heldout_frac", "log_every",
                     "eval_every", "answer_loss_weight"});
        read_field(t, "train", "steps", c.train.steps);
        read_field(t, "train", "batch_size", c.train.batch_size);
        read_field(t, "train", "lr", c.train.lr);
        read_field(t, "train", "warmup_steps", c.train.warmup_steps);
        read_field(t, "train", "min_lr_frac", c.train.min_lr_frac);
        read_field(t, "train", "weight_decay", c.train.weight_decay);
        read_field(t, "train", "grad_clip", c.train.grad_clip);
        read_field(t, "train", "heldout_frac", c.train.heldout_frac);
        read_field(t, "train", "log_every", c.train.log_every);
        read_field(t, "train", "eval_every", c.train.eval_every);
        read_field(t, "train", "answer_loss_weight", c.train.answer_loss_weight);
    }
    if (j.contains("capture")) {
        const json& p = j.at("capture");
        check_known(p, "capture", {"layers", "attribute_samples"});
        read_field(p, "capture", "layers", c.capture.layers);
        read_field(p, "capture", "attribute_samples", c.capture.attribute_samples);
    }
    if (j.contains("subspace")) {
        const json& s = j.at("subspace");
        check_known(s, "subspace", {"method", "c"});
        std::string m = method_name(c.subspace.method);
        read_field(s, "subspace", "method", m);
        c.subspace.method = method_from_name(m);
        read_field(s, "subspace", "c", c.subspace.c);
    }
    if (j.contains("intervene")) {
        const json& iv = j.at("intervene");
        check_known(iv, "intervene",
                    {"mode", "alpha", "step_value", "pc2_fixed", "layer", "betas",
                     "steer_alpha", "steer_bis", "grid"});
        std::string m = edit_mode_name(c.intervene.mode);
        read_field(iv, "intervene", "mode", m);
        c.intervene.mode = edit_mode_from_name(m);
        read_field(iv, "intervene", "alpha", c.intervene.alpha);
        read_field(iv, "intervene", "step_value", c.intervene.step_value);
        read_field(iv, "intervene", "pc2_fixed", c.intervene.pc2_fixed);
        read_field(iv, "intervene", "layer", c.intervene.layer);
        read_field(iv, "intervene", "betas", c.intervene.betas);
        read_field(iv, "intervene", "steer_alpha", c.intervene.steer_alpha);
        read_field(iv, "intervene", "steer_bis", c.intervene.steer_bis);
        if (iv.contains("grid")) {
            const json& g = iv.at("grid");
            check_known(g, "intervene.grid",
                        {"enabled", "layers", "step_values", "alphas", "betas"});
            read_field(g, "intervene.grid", "enabled", c.intervene.grid.enabled);
            read_field(g, "intervene.grid", "layers", c.intervene.grid.layers);
            read_field(g, "intervene.grid", "step_values",
                       c.intervene.grid.step_values);
            read_field(g, "intervene.grid", "alphas", c.intervene.grid.alphas);
            read_field(g, "intervene.grid", "betas", c.intervene.grid.betas);
        }
    }
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config: cannot open '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(f)), {});
    return config_from_json(text);
}

std::string config_to_json(const ExperimentConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["out_dir"] = c.out_dir;
    j["vocab"] = {{"objects", c.vocab.objects}, {"names", c.vocab.names}};
    j["dataset"] = {{"relation", c.dataset.relation},
                    {"k_pairs", c.dataset.k_pairs},
                    {"n", c.dataset.n},
                    {"train_frac", c.dataset.train_frac},
                    {"dev_frac", c.dataset.dev_frac},
                    {"test_frac", c.dataset.test_frac},
                    {"sweep_dev_n", c.dataset.sweep_dev_n},
                    {"sweep_test_n", c.dataset.sweep_test_n},
                    {"variant", c.dataset.variant},
                    {"pattern", c.dataset.pattern}};
    j["corpus"] = {{"n_per_cell", c.corpus.n_per_cell},
                   {"k_min", c.corpus.k_min},
                   {"k_max", c.corpus.k_max}};
    j["model"] = {{"d_model", c.model.d_model},
                  {"n_layers", c.model.n_layers},
                  {"n_heads", c.model.n_heads},
                  {"d_ff", c.model.d_ff},
                  {"max_seq_len", c.model.max_seq_len}};
    j["train"] = {{"steps", c.train.steps},
                  {"batch_size", c.train.batch_size},
                  {"lr", c.train.lr},
                  {"warmup_steps", c.train.warmup_steps},
                  {"min_lr_frac", c.train.min_lr_frac},
                  {"weight_decay", c.train.weight_decay},
                  {"grad_clip", c.train.grad_clip},
                  {"heldout_frac", c.train.heldout_frac},
                  {"log_every", c.train.log_every},
                  {"eval_every", c.train.eval_every},
                  {"answer_loss_weight", c.train.answer_loss_weight}};
    j["capture"] = {{"layers", c.capture.layers},
                    {"attribute_samples", c.capture.attribute_samples}};
    j["subspace"] = {{"method", method_name(c.subspace.method)},
                     {"c", c.subspace.c}};
    j["intervene"] = {{"mode", edit_mode_name(c.intervene.mode)},
                      {"alpha", c.intervene.alpha},
                      {"step_value", c.intervene.step_value},
                      {"pc2_fixed", c.intervene.pc2_fixed},
                      {"layer", c.intervene.layer},
                      {"betas", c.intervene.betas},
                      {"steer_alpha", c.intervene.steer_alpha},
                      {"steer_bis", c.intervene.steer_bis},
                      {"grid",
                       {{"enabled", c.intervene.grid.enabled},
                        {"layers", c.intervene.grid.layers},
                        {"step_values", c.intervene.grid.step_values},
                        {"alphas", c.intervene.grid.alphas},
                        {"betas", c.intervene.grid.betas}}}};
    return j.dump(2);
}

uint64_t config_hash(const ExperimentConfig& c) {
    return fnv1a(std::string_view(config_to_json(c)));
}

// --- artifact ledger ---------------------------------------------------------

uint64_t file_hash(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InputError("file_hash: cannot open '" + path + "'");
    uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (f) {
        f.read(buf, sizeof(buf));
        h = fnv1a(buf, static_cast<size_t>(f.gcount()), h);
    }
    return h;
}

std::string artifact_path(const ExperimentConfig& c, const std::string& name) {
    return (fs::path(c.out_dir) / name).string();
}

namespace {

std::string ledger_path(const ExperimentConfig& c) {
    return artifact_path(c, "artifacts.json");
}

json load_ledger(const ExperimentConfig& c) {
    std::ifstream f(ledger_path(c));
    if (!f) return json::object();
    try {
        json j;
        f >> j;
        return j.is_object() ? j : json::object();
    } catch (const json::exception&) {
        return json::object();
    }
}

void save_ledger(const ExperimentConfig& c, const json& j) {
    const std::string tmp = ledger_path(c) + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        f << j.dump(2) << '\n';
    }
    fs::rename(tmp, ledger_path(c));
}

}  // namespace

void record_artifact(const ExperimentConfig& c, const std::string& name) {
    json j = load_ledger(c);
    j[name] = file_hash(artifact_path(c, name));
    save_ledger(c, j);
}

void require_artifact(const ExperimentConfig& c, const std::string& name,
                      const std::string& stage) {
    const std::string path = artifact_path(c, name);
    if (!fs::exists(path))
        throw StageError("stage '" + stage + "': missing upstream artifact '" +
                         name + "' (run the earlier stages first)");
    const json j = load_ledger(c);
    if (!j.contains(name))
        throw StageError("stage '" + stage + "': artifact '" + name +
                         "' is not in the ledger");
    if (j.at(name).get<uint64_t>() != file_hash(path))
        throw StageError("stage '" + stage + "': artifact '" + name +
                         "' is stale or corrupted (hash mismatch)");
}

bool artifacts_fresh(const ExperimentConfig& c,
                     const std::vector<std::string>& names) {
    const json j = load_ledger(c);
    for (const std::string& n : names) {
        const std::string path = artifact_path(c, n);
        if (!fs::exists(path) || !j.contains(n)) return false;
        if (j.at(n).get<uint64_t>() != file_hash(path)) return false;
    }
    return true;
}

// --- stages ------------------------------------------------------------------

Vocabulary pipeline_vocabulary(const ExperimentConfig& c) {
    return build_vocabulary(c.vocab.objects, c.vocab.names, c.seed);
}

std::vector<Sample> requery_samples(const std::vector<Sample>& samples, int oi,
                                    const Vocabulary& vocab) {
    std::vector<Sample> out;
    out.reserve(samples.size());
    for (const Sample& s : samples) {
        const EaPair* target = nullptr;
        for (const EaPair& p : s.pairs)
            if (p.entity_oi == oi) {
                target = &p;
                break;
            }
        if (!target)
            throw InputError("requery_samples: no entity with OI " +
                             std::to_string(oi));
        Sample r = s;
        int off = 0;
        r.query_tokens = query_tokens_for(vocab, s.relation, target->entity, &off);
        r.query_entity_pi = static_cast<int>(s.context_tokens.size()) + off;
        r.query_entity_oi = oi;
        r.answer_token = target->attribute;
        out.push_back(std::move(r));
    }
    return out;
}

namespace {

void ensure_out_dir(const ExperimentConfig& c) {
    fs::create_directories(c.out_dir);
    // persist the resolved config next to the artifacts
    const std::string path = artifact_path(c, "config.json");
    std::ofstream f(path, std::ios::binary);
    f << config_to_json(c) << '\n';
    f.close();
    // a config change invalidates every cached artifact: the ledger keys the
    // bundle on the config hash
    json ledger = load_ledger(c);
    const uint64_t h = config_hash(c);
    if (!ledger.contains("__config") || ledger.at("__config").get<uint64_t>() != h)
        ledger = json::object();
    ledger["__config"] = h;
    save_ledger(c, ledger);
}

uint64_t derive_seed(const ExperimentConfig& c, uint64_t stream) {
    uint64_t s = c.seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
    return splitmix64(s);
}

std::vector<Sample> apply_variant(const ExperimentConfig& c,
                                  const std::vector<Sample>& base,
                                  const Vocabulary& v, uint64_t seed) {
    const std::string& var = c.dataset.variant;
    if (var == "base") return base;
    if (var == "pseudo") return gen_pseudo(base, v);
    if (var == "filler") return gen_filler(base, {0, 1, 2, 3, 4, 5}, v);
    if (var == "interjection") return gen_interjection(base, v);
    if (var == "nonrelated") return gen_nonrelated(base, v, seed);
    throw ConfigError("dataset.variant: unknown variant '" + var + "'");
}

void write_samples_atomic(const ExperimentConfig& c, const std::string& name,
                          const std::vector<Sample>& samples) {
    const std::string path = artifact_path(c, name);
    write_jsonl(path + ".tmp", samples);
    fs::rename(path + ".tmp", path);
    record_artifact(c, name);
}

std::vector<int> capture_layers(const ExperimentConfig& c) {
    if (!c.capture.layers.empty()) return c.capture.layers;
    std::vector<int> out(c.model.n_layers);
    for (int l = 0; l < c.model.n_layers; ++l) out[l] = l;
    return out;
}

}  // namespace

void cmd_gen(const ExperimentConfig& c) {
    ensure_out_dir(c);
    if (artifacts_fresh(c, {"corpus.jsonl", "capture_train.jsonl",
                            "capture_dev.jsonl", "capture_test.jsonl",
                            "sweep_dev.jsonl", "sweep_test.jsonl",
                            "dataset_manifest.json"}))
        return;
    const Vocabulary v = pipeline_vocabulary(c);

    // mixed-relation training corpus
    std::vector<Sample> corpus;
    uint64_t stream = 1000;
    for (int r = 0; r < kNumRelations; ++r)
        for (size_t k = c.corpus.k_min; k <= c.corpus.k_max; ++k) {
            auto s = gen_base(r, c.corpus.n_per_cell, k, v, derive_seed(c, stream++));
            corpus.insert(corpus.end(), s.begin(), s.end());
        }
    Rng shuffler(derive_seed(c, 1));
    shuffler.shuffle(corpus);
    write_samples_atomic(c, "corpus.jsonl", corpus);

    // capture datasets (single relation, optional variant / pattern)
    std::vector<Sample> cap;
    if (c.dataset.variant == "pattern") {
        cap = gen_pattern(c.dataset.pattern, c.dataset.n, v, derive_seed(c, 2));
    } else {
        cap = gen_base(c.dataset.relation, c.dataset.n, c.dataset.k_pairs, v,
                       derive_seed(c, 2));
        cap = apply_variant(c, cap, v, derive_seed(c, 3));
    }
    const size_t n = cap.size();
    const size_t n_train = static_cast<size_t>(c.dataset.train_frac * n);
    const size_t n_dev = static_cast<size_t>(c.dataset.dev_frac * n);
    std::vector<Sample> cap_train(cap.begin(), cap.begin() + n_train);
    std::vector<Sample> cap_dev(cap.begin() + n_train, cap.begin() + n_train + n_dev);
    std::vector<Sample> cap_test(cap.begin() + n_train + n_dev, cap.end());
    write_samples_atomic(c, "capture_train.jsonl", cap_train);
    write_samples_atomic(c, "capture_dev.jsonl", cap_dev);
    write_samples_atomic(c, "capture_test.jsonl", cap_test);

    // query-OI-0 sweep sets
    auto make_sweep = [&](size_t count, uint64_t stream_id) {
        auto s = gen_base(c.dataset.relation, count, c.dataset.k_pairs, v,
                          derive_seed(c, stream_id), /*query_oi=*/0);
        if (c.dataset.variant == "interjection") s = gen_interjection(s, v);
        return s;
    };
    write_samples_atomic(c, "sweep_dev.jsonl", make_sweep(c.dataset.sweep_dev_n, 4));
    write_samples_atomic(c, "sweep_test.jsonl", make_sweep(c.dataset.sweep_test_n, 5));

    DatasetManifest m;
    m.relation = c.dataset.relation;
    m.variant = c.dataset.variant;
    m.n = n;
    m.k_pairs = c.dataset.k_pairs;
    m.seed = c.seed;
    m.train_frac = c.dataset.train_frac;
    m.dev_frac = c.dataset.dev_frac;
    m.test_frac = c.dataset.test_frac;
    m.vocab_hash = v.hash();
    write_manifest(artifact_path(c, "dataset_manifest.json"), m);
    record_artifact(c, "dataset_manifest.json");
}

void cmd_train(const ExperimentConfig& c) {
    ensure_out_dir(c);
    require_artifact(c, "corpus.jsonl", "train");
    if (artifacts_fresh(c, {"model.ckpt", "train_meta.json"})) return;
    const Vocabulary v = pipeline_vocabulary(c);
    std::vector<Sample> corpus = read_jsonl(artifact_path(c, "corpus.jsonl"));

    ModelConfig mc = c.model;
    mc.vocab_size = v.size();
    mc.seed = derive_seed(c, 10);
    Transformer model;
    model.init(mc);

    TrainRecipe r = c.train;
    r.seed = derive_seed(c, 11);
    const auto t0 = std::chrono::steady_clock::now();
    TrainingReport rep = train(model, corpus, r);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const std::string ckpt = artifact_path(c, "model.ckpt");
    save_checkpoint(model, ckpt + ".tmp", static_cast<uint64_t>(rep.steps),
                    rep.final_loss, rep.heldout_accuracy);
    fs::rename(ckpt + ".tmp", ckpt);
    record_artifact(c, "model.ckpt");

    json meta;
    meta["train_seconds"] = secs;
    meta["final_loss"] = rep.final_loss;
    meta["heldout_accuracy"] = rep.heldout_accuracy;
    meta["steps"] = rep.steps;
    json curve = json::array();
    for (auto& [step, loss] : rep.loss_curve) curve.push_back({step, loss});
    meta["loss_curve"] = curve;
    json evals = json::array();
    for (auto& [step, acc] : rep.eval_curve) evals.push_back({step, acc});
    meta["eval_curve"] = evals;
    {
        std::ofstream f(artifact_path(c, "train_meta.json") + ".tmp",
                        std::ios::binary);
        f << meta.dump(2) << '\n';
    }
    fs::rename(artifact_path(c, "train_meta.json") + ".tmp",
               artifact_path(c, "train_meta.json"));
    record_artifact(c, "train_meta.json");
}

void cmd_capture(const ExperimentConfig& c) {
    ensure_out_dir(c);
    require_artifact(c, "model.ckpt", "capture");
    require_artifact(c, "capture_dev.jsonl", "capture");
    require_artifact(c, "capture_test.jsonl", "capture");
    {
        std::vector<std::string> outs;
        for (int l : capture_layers(c)) {
            outs.push_back("act_dev_l" + std::to_string(l) + ".oiam");
            outs.push_back("act_test_l" + std::to_string(l) + ".oiam");
            if (c.dataset.variant != "nonrelated")
                outs.push_back("att_test_l" + std::to_string(l) + ".oiam");
        }
        if (artifacts_fresh(c, outs)) return;
    }
    const Vocabulary v = pipeline_vocabulary(c);
    const Transformer model = load_checkpoint(artifact_path(c, "model.ckpt"));
    const std::vector<int> layers = capture_layers(c);

    auto capture_split = [&](const std::string& in, const std::string& prefix) {
        const std::vector<Sample> samples = read_jsonl(artifact_path(c, in));
        auto mats = layer_sweep_matrices(model, samples, layers);
        for (const auto& [l, m] : mats) {
            const std::string name = prefix + "_l" + std::to_string(l) + ".oiam";
            const std::string path = artifact_path(c, name);
            write_activation_matrix(path + ".tmp", m);
            fs::rename(path + ".tmp", path);
            record_artifact(c, name);
        }
        return samples;
    };
    capture_split("capture_dev.jsonl", "act_dev");
    std::vector<Sample> test = capture_split("capture_test.jsonl", "act_test");

    // attribute-query capture on a prefix of the test split
    if (c.dataset.variant != "nonrelated") {
        const size_t na = std::min(test.size(), c.capture.attribute_samples);
        std::vector<Sample> att_set(test.begin(), test.begin() + na);
        for (int l : layers) {
            ActivationMatrix am = build_attribute_matrix(model, att_set, v, l);
            const std::string name = "att_test_l" + std::to_string(l) + ".oiam";
            const std::string path = artifact_path(c, name);
            write_activation_matrix(path + ".tmp", am);
            fs::rename(path + ".tmp", path);
            record_artifact(c, name);
        }
    }
}

void cmd_fit(const ExperimentConfig& c) {
    ensure_out_dir(c);
    const std::vector<int> layers = capture_layers(c);
    require_artifact(c, "capture_test.jsonl", "fit");
    for (int l : layers) {
        require_artifact(c, "act_dev_l" + std::to_string(l) + ".oiam", "fit");
        require_artifact(c, "act_test_l" + std::to_string(l) + ".oiam", "fit");
    }
    {
        std::vector<std::string> outs{"best_layer.json"};
        for (int l : layers) {
            outs.push_back("subspace_l" + std::to_string(l) + ".oiss");
            outs.push_back("proj_l" + std::to_string(l) + ".csv");
        }
        if (artifacts_fresh(c, outs)) return;
    }
    // Context PI of the queried entity per sample: the activation matrices
    // carry the capture-site position (the query mention), but the projection
    // table reports the paper-style PI of the entity's context occurrence.
    std::map<uint64_t, int> context_pi;
    {
        for (const Sample& s :
             read_jsonl(artifact_path(c, "capture_test.jsonl")))
            for (const EaPair& p : s.pairs)
                if (p.entity_oi == s.query_entity_oi)
                    context_pi[s.sample_id] = p.entity_pi;
    }
    std::map<int, ActivationMatrix> dev, test;
    for (int l : layers) {
        const std::string dn = "act_dev_l" + std::to_string(l) + ".oiam";
        const std::string tn = "act_test_l" + std::to_string(l) + ".oiam";
        require_artifact(c, dn, "fit");
        require_artifact(c, tn, "fit");
        dev.emplace(l, read_activation_matrix(artifact_path(c, dn)));
        test.emplace(l, read_activation_matrix(artifact_path(c, tn)));
    }

    int best = -1;
    double best_rho = -2.0;
    for (int l : layers) {
        const ActivationMatrix& dm = dev.at(l);
        Subspace s = orient(fit_oi_subspace(dm, c.subspace.c, c.subspace.method,
                                            derive_seed(c, 20 + l)),
                            dm);
        s.layer = l;
        const std::string name = "subspace_l" + std::to_string(l) + ".oiss";
        const std::string path = artifact_path(c, name);
        write_subspace(path + ".tmp", s);
        fs::rename(path + ".tmp", path);
        record_artifact(c, name);

        // dev-fit subspace projecting the held-out split (Fig. 2 style table)
        const ActivationMatrix& tm = test.at(l);
        ProjectionTable t;
        t.layer = l;
        for (size_t i = 0; i < tm.data.rows; ++i) {
            std::vector<double> p = project(s, tm.data.row(i), tm.data.cols);
            t.pc1.push_back(p[0]);
            t.pc2.push_back(p.size() > 1 ? p[1] : 0.0);
            t.oi.push_back(tm.oi_labels[i]);
            const auto it = context_pi.find(tm.sample_refs[i]);
            t.pi.push_back(it != context_pi.end() ? it->second
                                                  : tm.pi_labels[i]);
            t.sample_id.push_back(tm.sample_refs[i]);
        }
        const std::string pname = "proj_l" + std::to_string(l) + ".csv";
        write_projection_csv(artifact_path(c, pname), t);
        record_artifact(c, pname);

        std::vector<double> scores = pc_scores(s, dm.data, 0);
        std::vector<double> oi(dm.oi_labels.begin(), dm.oi_labels.end());
        const double rho = linalg::spearman(scores, oi);
        if (rho > best_rho) {
            best_rho = rho;
            best = l;
        }
    }
    json bj;
    bj["layer"] = best;
    bj["dev_spearman_pc1_oi"] = best_rho;
    {
        std::ofstream f(artifact_path(c, "best_layer.json"), std::ios::binary);
        f << bj.dump(2) << '\n';
    }
    record_artifact(c, "best_layer.json");
}

namespace {

int resolve_layer(const ExperimentConfig& c) {
    if (c.intervene.layer >= 0) return c.intervene.layer;
    std::ifstream f(artifact_path(c, "best_layer.json"));
    if (!f)
        throw StageError(
            "stage 'intervene': best_layer.json missing (run fit first)");
    json j;
    f >> j;
    return j.at("layer").get<int>();
}

}  // namespace

void cmd_intervene(const ExperimentConfig& c) {
    ensure_out_dir(c);
    {
        std::vector<std::string> outs{"step_sweep.csv",  "step_sweep.oisw",
                                      "steer_sweep.csv", "steer_sweep.oisw",
                                      "layer_sweep.csv", "intervene_meta.json"};
        if (c.intervene.grid.enabled) outs.push_back("grid_choice.json");
        if (artifacts_fresh(c, outs)) return;
    }
    require_artifact(c, "model.ckpt", "intervene");
    require_artifact(c, "sweep_dev.jsonl", "intervene");
    require_artifact(c, "sweep_test.jsonl", "intervene");
    const Vocabulary v = pipeline_vocabulary(c);
    const Transformer model = load_checkpoint(artifact_path(c, "model.ckpt"));
    const std::vector<int> layers = capture_layers(c);
    std::map<int, Subspace> subs;
    for (int l : layers) {
        const std::string name = "subspace_l" + std::to_string(l) + ".oiss";
        require_artifact(c, name, "intervene");
        subs.emplace(l, read_subspace(artifact_path(c, name)));
    }
    const std::vector<Sample> dev = read_jsonl(artifact_path(c, "sweep_dev.jsonl"));
    const std::vector<Sample> test = read_jsonl(artifact_path(c, "sweep_test.jsonl"));

    int layer = resolve_layer(c);
    double step_value = c.intervene.step_value;
    double alpha = c.intervene.alpha;
    if (c.intervene.grid.enabled) {
        GridConfig g = c.intervene.grid;
        if (g.layers.empty()) {
            // middle band of the stack
            for (int l : layers)
                if (l > 0 && l < c.model.n_layers - 1) g.layers.push_back(l);
            if (g.layers.empty()) g.layers.push_back(layer);
        }
        if (g.step_values.empty()) {
            // quantiles of per-OI pc1 gaps on the dev capture split
            const std::string dn = "act_dev_l" + std::to_string(layer) + ".oiam";
            require_artifact(c, dn, "intervene");
            ActivationMatrix dm = read_activation_matrix(artifact_path(c, dn));
            const Subspace& s = subs.at(layer);
            std::vector<double> mean_by_oi;
            std::vector<size_t> count;
            for (size_t i = 0; i < dm.data.rows; ++i) {
                const size_t oi = static_cast<size_t>(dm.oi_labels[i]);
                if (oi >= mean_by_oi.size()) {
                    mean_by_oi.resize(oi + 1, 0.0);
                    count.resize(oi + 1, 0);
                }
                mean_by_oi[oi] += project(s, dm.data.row(i), dm.data.cols)[0];
                ++count[oi];
            }
            std::vector<double> gaps;
            for (size_t i = 0; i + 1 < mean_by_oi.size(); ++i)
                if (count[i] && count[i + 1])
                    gaps.push_back(mean_by_oi[i + 1] / count[i + 1] -
                                   mean_by_oi[i] / count[i]);
            if (gaps.empty()) gaps.push_back(1.0);
            std::sort(gaps.begin(), gaps.end());
            g.step_values = {gaps[gaps.size() / 4], gaps[gaps.size() / 2],
                             gaps[(3 * gaps.size()) / 4]};
        }
        GridChoice choice = grid_search(model, dev, subs, g.layers, g.step_values,
                                        g.alphas, g.betas, c.intervene.mode);
        layer = choice.layer;
        step_value = choice.step_value;
        alpha = choice.alpha;
        json cj;
        cj["layer"] = choice.layer;
        cj["step_value"] = choice.step_value;
        cj["alpha"] = choice.alpha;
        cj["score"] = choice.score;
        cj["mode"] = edit_mode_name(c.intervene.mode);
        std::ofstream f(artifact_path(c, "grid_choice.json"), std::ios::binary);
        f << cj.dump(2) << '\n';
        f.close();
        record_artifact(c, "grid_choice.json");
    }

    InterventionSpec spec;
    spec.layer = layer;
    spec.alpha = alpha;
    spec.step_value = step_value;
    spec.pc2_fixed = c.intervene.pc2_fixed;
    spec.mode = c.intervene.mode;

    const auto recs = run_step_sweep(model, test, subs.at(layer), spec,
                                     c.intervene.betas);
    write_sweep_csv(artifact_path(c, "step_sweep.csv"), recs, "beta");
    record_artifact(c, "step_sweep.csv");
    write_sweep_records(artifact_path(c, "step_sweep.oisw"), recs);
    record_artifact(c, "step_sweep.oisw");

    // steering sweep: pair each dev sample's OI-0 query with a re-query of bi
    std::vector<SteeringVector> svs;
    for (int bi : c.intervene.steer_bis) {
        const std::vector<Sample> re = requery_samples(dev, bi, v);
        ActivationMatrix m_bi = build_entity_matrix(model, re, layer);
        ActivationMatrix m_0 = build_entity_matrix(model, dev, layer);
        SteeringVector sv = steering_vector(m_bi, m_0, subs.at(layer));
        sv.source_bi = bi;
        svs.push_back(sv);
    }
    const auto steer_recs = run_steering_sweep(model, test, subs.at(layer), svs,
                                               c.intervene.steer_alpha, layer);
    write_sweep_csv(artifact_path(c, "steer_sweep.csv"), steer_recs, "target_bi");
    record_artifact(c, "steer_sweep.csv");
    write_sweep_records(artifact_path(c, "steer_sweep.oisw"), steer_recs);
    record_artifact(c, "steer_sweep.oisw");

    // layer sweep at a fixed beta for the Fig. 14 analogue
    InterventionSpec ls = spec;
    ls.beta = 1;
    const auto effects = run_layer_sweep(model, test, subs, ls);
    {
        std::ostringstream os;
        os << "layer,mean_ld_nonoriginal,flip_rate\n";
        os.precision(17);
        for (const LayerEffect& e : effects)
            os << e.layer << ',' << e.mean_ld_nonoriginal << ',' << e.flip_rate
               << '\n';
        std::ofstream f(artifact_path(c, "layer_sweep.csv"), std::ios::binary);
        f << os.str();
    }
    record_artifact(c, "layer_sweep.csv");

    json ij;
    ij["layer"] = layer;
    ij["alpha"] = alpha;
    ij["step_value"] = step_value;
    ij["mode"] = edit_mode_name(c.intervene.mode);
    ij["steer_alpha"] = c.intervene.steer_alpha;
    {
        std::ofstream f(artifact_path(c, "intervene_meta.json"), std::ios::binary);
        f << ij.dump(2) << '\n';
    }
    record_artifact(c, "intervene_meta.json");
}

PatternPairAnalysis pattern_pair_analysis(const Transformer& model,
                                          const std::vector<Sample>& dev,
                                          const std::vector<Sample>& test,
                                          const Vocabulary& vocab, int layer,
                                          DistanceMetric metric,
                                          size_t pc_index) {
    if (dev.empty() || test.empty())
        throw InputError("pattern_pair_analysis: empty split");
    PatternPairAnalysis out;
    {
        std::set<int> eset;
        for (const EaPair& p : dev.front().pairs) eset.insert(p.entity_oi);
        out.entities.assign(eset.begin(), eset.end());
    }
    out.k_pairs = dev.front().pairs.size();
    const size_t ne = out.entities.size();
    const size_t d = static_cast<size_t>(model.config.d_model);

    auto entity_mats = [&](const std::vector<Sample>& split) {
        std::map<int, ActivationMatrix> mats;
        for (int e : out.entities)
            mats.emplace(e, build_entity_matrix(
                                model, requery_samples(split, e, vocab), layer));
        return mats;
    };
    const auto dev_em = entity_mats(dev);
    const auto test_em = entity_mats(test);

    // subspace fitted on the pooled dev entity points, labeled by entity OI
    ActivationMatrix pool;
    pool.data = Matrix(ne * dev.size(), d);
    size_t r = 0;
    for (int e : out.entities) {
        const ActivationMatrix& m = dev_em.at(e);
        for (size_t i = 0; i < m.n(); ++i, ++r) {
            for (size_t j = 0; j < d; ++j) pool.data.at(r, j) = m.data.at(i, j);
            pool.oi_labels.push_back(e);
            pool.pi_labels.push_back(m.pi_labels[i]);
            pool.sample_refs.push_back(m.sample_refs[i]);
        }
    }
    const Subspace s = orient(fit_oi_subspace(pool, 2, SubspaceMethod::pca, 1),
                              pool);

    out.mean_distance = Matrix(ne, out.k_pairs);
    auto distances = [&](const std::vector<Sample>& split,
                         const std::map<int, ActivationMatrix>& em,
                         std::vector<double>& dist, std::vector<int>& labels,
                         bool accumulate_mean) {
        const ActivationMatrix am =
            build_attribute_matrix(model, split, vocab, layer);
        for (size_t i = 0; i < split.size(); ++i) {
            const Sample& smp = split[i];
            if (smp.pairs.size() != out.k_pairs)
                throw InputError("pattern_pair_analysis: ragged pair counts");
            Matrix ec(ne, 2), ac(out.k_pairs, 2);
            for (size_t e = 0; e < ne; ++e) {
                const auto p = project(s, em.at(out.entities[e]).data.row(i), d);
                ec.at(e, 0) = p[0];
                ec.at(e, 1) = p[1];
            }
            for (size_t a = 0; a < out.k_pairs; ++a) {
                // attribute rows are grouped per sample in pair order
                const auto p = project(s, am.data.row(i * out.k_pairs + a), d);
                ac.at(a, 0) = p[0];
                ac.at(a, 1) = p[1];
            }
            const PairDistanceMatrix pd = pair_distances(ec, ac, metric, pc_index);
            for (size_t e = 0; e < ne; ++e)
                for (size_t a = 0; a < out.k_pairs; ++a) {
                    dist.push_back(pd.values.at(e, a));
                    labels.push_back(
                        smp.pairs[a].entity_oi == out.entities[e] ? 1 : 0);
                    if (accumulate_mean)
                        out.mean_distance.at(e, a) +=
                            pd.values.at(e, a) / static_cast<double>(split.size());
                }
        }
    };
    std::vector<double> dev_d, test_d;
    std::vector<int> dev_l, test_l;
    distances(dev, dev_em, dev_d, dev_l, false);
    distances(test, test_em, test_d, test_l, true);
    out.classify = threshold_classify(dev_d, dev_l, test_d, test_l);
    return out;
}

void run_pipeline(const ExperimentConfig& c) {
    cmd_gen(c);
    cmd_train(c);
    cmd_capture(c);
    cmd_fit(c);
    cmd_intervene(c);
    cmd_report(c);
}

}  // namespace oisub
