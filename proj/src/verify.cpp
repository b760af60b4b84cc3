#include "oisub/verify.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "oisub/svg.hpp"

namespace oisub {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

CheckResult pass(int id, const std::string& name, const std::string& detail) {
    return {id, name, CheckResult::Status::pass, detail};
}
CheckResult fail(int id, const std::string& name, const std::string& detail) {
    return {id, name, CheckResult::Status::fail, detail};
}
CheckResult skipped(int id, const std::string& name, const std::string& detail) {
    return {id, name, CheckResult::Status::skipped, detail};
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InputError("verify: cannot open '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

Matrix random_matrix(Rng& rng, size_t r, size_t c) {
    Matrix m(r, c);
    for (double& v : m.data) v = rng.next_gaussian();
    return m;
}

// --- criterion 1: numeric oracles -------------------------------------------

CheckResult check_numeric_oracles() {
    const std::string name = "numeric oracles (SVD / PCA / Spearman)";
    Rng rng(101);
    double worst_svd = 0.0, worst_cos = 1.0, worst_rho = 0.0;
    for (int t = 0; t < 50; ++t) {
        const size_t r = 2 + rng.next_below(31);  // <= 32
        const size_t c = 2 + rng.next_below(15);  // <= 16
        Matrix m = random_matrix(rng, r, c);

        // SVD reconstruction
        const auto sv = linalg::svd(m);
        Matrix us(sv.u.rows, sv.u.cols, sv.u.data);
        for (size_t i = 0; i < us.rows; ++i)
            for (size_t j = 0; j < us.cols; ++j)
                us.at(i, j) *= sv.singular_values[j];
        Matrix rec = matmul(us, sv.vt);
        double err = 0.0;
        for (size_t i = 0; i < m.data.size(); ++i) {
            const double d = rec.data[i] - m.data[i];
            err += d * d;
        }
        const double rel = std::sqrt(err) / std::max(1e-300, frobenius(m));
        worst_svd = std::max(worst_svd, rel);

        // PCA vs brute-force covariance eigenvectors (Eigen as the oracle)
        const size_t nc = std::min<size_t>({3, r - 1, c});
        const auto p = linalg::pca(m, nc);
        auto [centered, mean] = linalg::mean_center(m);
        (void)mean;
        Eigen::MatrixXd x(r, c);
        for (size_t i = 0; i < r; ++i)
            for (size_t j = 0; j < c; ++j) x(i, j) = centered.at(i, j);
        Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(r - 1);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
        for (size_t k = 0; k < nc; ++k) {
            // eigenvalues ascend in Eigen; component k pairs with column c-1-k
            Eigen::VectorXd v = es.eigenvectors().col(static_cast<long>(c - 1 - k));
            double d = 0.0;
            for (size_t j = 0; j < c; ++j) d += v(static_cast<long>(j)) * p.components.at(k, j);
            worst_cos = std::min(worst_cos, std::abs(d));
        }
    }

    // Spearman against an average-rank oracle (independent implementation)
    for (int t = 0; t < 100; ++t) {
        const size_t n = 5 + rng.next_below(60);
        std::vector<double> x(n), y(n);
        for (size_t i = 0; i < n; ++i) {
            x[i] = rng.next_gaussian();
            y[i] = rng.next_gaussian();
        }
        if (t % 2 == 1)  // force ties on half the pairs
            for (size_t i = 0; i < n; ++i) {
                x[i] = std::round(x[i]);
                y[i] = std::round(y[i]);
            }
        auto oracle_ranks = [](const std::vector<double>& v) {
            const size_t m = v.size();
            std::vector<size_t> idx(m);
            for (size_t i = 0; i < m; ++i) idx[i] = i;
            std::sort(idx.begin(), idx.end(),
                      [&](size_t a, size_t b) { return v[a] < v[b]; });
            std::vector<double> rank(m);
            size_t i = 0;
            while (i < m) {
                size_t j = i;
                while (j + 1 < m && v[idx[j + 1]] == v[idx[i]]) ++j;
                const double avg = 0.5 * (static_cast<double>(i) +
                                          static_cast<double>(j)) + 1.0;
                for (size_t k = i; k <= j; ++k) rank[idx[k]] = avg;
                i = j + 1;
            }
            return rank;
        };
        const double expect = linalg::pearson(oracle_ranks(x), oracle_ranks(y));
        const double got = linalg::spearman(x, y);
        worst_rho = std::max(worst_rho, std::abs(expect - got));
    }

    const std::string detail = "svd rel err " + num(worst_svd) +
                               " (req < 1e-6), pca |cos| " + num(worst_cos) +
                               " (req >= 1-1e-8), spearman dev " + num(worst_rho) +
                               " (req <= 1e-9)";
    if (worst_svd < 1e-6 && worst_cos >= 1.0 - 1e-8 && worst_rho <= 1e-9)
        return pass(1, name, detail);
    return fail(1, name, detail);
}

// --- criterion 2: edit algebra ----------------------------------------------

Subspace random_subspace(Rng& rng, size_t d, size_t c) {
    Matrix m = random_matrix(rng, d + 5, d);
    const auto p = linalg::pca(m, c);
    Subspace s;
    s.basis = p.components;
    s.mean = p.mean;
    s.explained_ratio = p.explained_ratio;
    return s;
}

CheckResult check_edit_algebra() {
    const std::string name = "direct-edit / steering algebra";
    Rng rng(202);
    const size_t d = 24, c = 2;
    double worst_lit = 0.0, worst_res = 0.0;
    for (int t = 0; t < 1000; ++t) {
        Subspace s = random_subspace(rng, d, c);
        std::vector<double> x(d);
        for (double& v : x) v = rng.next_gaussian();

        InterventionSpec spec;
        spec.alpha = 4.0 * rng.next_double() - 2.0;
        spec.beta = static_cast<int>(rng.next_below(7));
        spec.step_value = 4.0 * rng.next_double() - 2.0;
        spec.pc2_fixed = 4.0 * rng.next_double() - 2.0;
        spec.mode = EditMode::direct_literal;

        const std::vector<double> bx = project_uncentered(s, x.data(), d);
        const std::vector<double> v = spec.v(c);
        const std::vector<double> edited = direct_edit(x, s, spec);
        const std::vector<double> got =
            project_uncentered(s, edited.data(), d);
        for (size_t i = 0; i < c; ++i) {
            const double expect =
                (1.0 + spec.alpha) * bx[i] + spec.alpha * spec.beta * v[i];
            worst_lit = std::max(worst_lit, std::abs(got[i] - expect));
        }

        SteeringVector sv;
        sv.coords = {rng.next_gaussian(), rng.next_gaussian()};
        sv.n_averaged = 1;
        const std::vector<double> xs = apply_steering(x, s, sv, spec.alpha);
        std::vector<double> delta(d);
        for (size_t i = 0; i < d; ++i) delta[i] = xs[i] - x[i];
        // remove the in-subspace component; the rest must vanish
        const std::vector<double> bd = project_uncentered(s, delta.data(), d);
        for (size_t i = 0; i < c; ++i)
            for (size_t j = 0; j < d; ++j) delta[j] -= bd[i] * s.basis.at(i, j);
        worst_res = std::max(worst_res, norm2(delta.data(), d));
    }
    const std::string detail = "literal coord dev " + num(worst_lit) +
                               ", steering off-subspace residual " +
                               num(worst_res) + " (both req < 1e-9)";
    if (worst_lit < 1e-9 && worst_res < 1e-9) return pass(2, name, detail);
    return fail(2, name, detail);
}

// --- criterion 3: dataset goldens -------------------------------------------

CheckResult check_dataset_goldens(const std::string& golden_dir) {
    const std::string name = "dataset goldens and variant label bookkeeping";
    const Vocabulary v = build_vocabulary(224, 523, 0);
    std::vector<std::string> problems;

    for (int rel = 0; rel < kNumRelations; ++rel) {
        const auto samples = gen_base(rel, 1, 7, v, 42);
        const std::string text = v.detokenize(samples[0].full_tokens());
        const std::string golden =
            read_file(golden_dir + "/template_r" + std::to_string(rel) + ".txt");
        if (text != golden)
            problems.push_back("template r" + std::to_string(rel) + " mismatch");
    }

    const auto base = gen_base(0, 40, 7, v, 8);
    const auto fil = gen_filler(base, {3}, v);
    for (size_t i = 0; i < base.size(); ++i) {
        if (fil[i].query_entity_pi != base[i].query_entity_pi + 3)
            problems.push_back("filler PI shift wrong");
        for (size_t p = 0; p < base[i].pairs.size(); ++p) {
            if (fil[i].pairs[p].entity_oi != base[i].pairs[p].entity_oi)
                problems.push_back("filler changed an OI");
            const auto all = fil[i].full_tokens();
            if (all.at(fil[i].pairs[p].entity_pi) != fil[i].pairs[p].entity)
                problems.push_back("filler PI does not point at the entity");
        }
    }

    const auto base3 = gen_base(0, 12, 3, v, 5);
    const auto ps = gen_pseudo(base3, v);
    std::set<int> qpis, ois;
    for (const auto& s : ps) {
        qpis.insert(s.query_entity_pi);
        ois.insert(s.query_entity_oi);
    }
    if (qpis.size() != 1) problems.push_back("pseudo query PIs not equalized");
    if (ois.size() < 2) problems.push_back("pseudo query OIs not spread");

    const auto ib = gen_base(0, 10, 7, v, 11);
    const auto ij = gen_interjection(ib, v);
    const int ah = v.id("ah");
    for (size_t i = 0; i < ib.size(); ++i) {
        const auto all = ij[i].full_tokens();
        int last_ah = -1;
        for (size_t p = 0; p < all.size(); ++p)
            if (all[p] == ah) last_ah = static_cast<int>(p);
        if (last_ah <= static_cast<int>(ib[i].full_tokens().size()) - 1)
            problems.push_back("interjection does not pass the original end");
        for (size_t p = 0; p < ib[i].pairs.size(); ++p)
            if (ij[i].pairs[p].entity_oi != ib[i].pairs[p].entity_oi)
                problems.push_back("interjection changed an OI");
    }

    const std::map<std::string, std::vector<int>> maps{
        {"7A-7E", {0, 1, 2, 3, 4, 5, 6}},
        {"7A-3E", {0, 0, 0, 1, 1, 2, 2}},
        {"7A-2E", {0, 0, 0, 1, 1, 1, 1}},
        {"7A-5E", {0, 0, 0, 1, 2, 3, 4}}};
    for (const auto& [pname, expect] : maps)
        if (pattern_entity_map(pname) != expect)
            problems.push_back("entity map wrong for " + pname);

    if (problems.empty())
        return pass(3, name, "6 templates byte-identical; variant OI/PI and "
                             "pattern maps verified");
    std::string d = problems.front();
    if (problems.size() > 1)
        d += " (+" + std::to_string(problems.size() - 1) + " more)";
    return fail(3, name, d);
}

// --- criterion 4: gradient check --------------------------------------------

CheckResult check_gradients() {
    const std::string name = "gradient check vs central finite differences";
    ModelConfig cfg;
    cfg.d_model = 16;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.d_ff = 24;
    cfg.max_seq_len = 12;
    cfg.vocab_size = 11;
    cfg.seed = 5;
    TransformerT<double> model;
    model.init(cfg);
    const std::vector<std::vector<int>> seqs{{1, 4, 2, 9, 3, 7},
                                             {5, 5, 8, 1, 2, 2, 10, 0}};
    // the same final-position weight the training loop uses, so the weighted
    // code path is the one being differenced
    const double lw = 4.0;
    TransformerT<double> grads;
    loss_and_grads(model, seqs, grads, lw);

    std::vector<Mat<double>*> params, gptrs;
    model.visit([&](const std::string&, Mat<double>& m) { params.push_back(&m); });
    grads.visit([&](const std::string&, Mat<double>& g) { gptrs.push_back(&g); });

    Rng pick(99);
    double worst = 0.0;
    const double eps = 1e-5;
    for (size_t t = 0; t < params.size(); ++t) {
        Mat<double>& p = *params[t];
        for (int probe = 0; probe < 3; ++probe) {
            const auto i = static_cast<Eigen::Index>(pick.next_below(
                static_cast<uint64_t>(p.size())));
            const double saved = p.data()[i];
            p.data()[i] = saved + eps;
            const double lp = batch_loss(model, seqs, lw);
            p.data()[i] = saved - eps;
            const double lm = batch_loss(model, seqs, lw);
            p.data()[i] = saved;
            const double fd = (lp - lm) / (2.0 * eps);
            const double an = gptrs[t]->data()[i];
            const double rel =
                std::abs(fd - an) / std::max({1e-8, std::abs(fd), std::abs(an)});
            worst = std::max(worst, rel);
        }
    }
    const std::string detail =
        "worst relative error " + num(worst) + " (req < 1e-3)";
    return worst < 1e-3 ? pass(4, name, detail) : fail(4, name, detail);
}

// --- criterion 5: planted-direction recovery --------------------------------

CheckResult check_planted_recovery() {
    const std::string name = "planted-direction recovery";
    Rng rng(303);
    const size_t n = 240, d = 30;
    std::vector<double> u(d);
    for (double& x : u) x = rng.next_gaussian();
    const double un = norm2(u.data(), d);
    for (double& x : u) x /= un;

    ActivationMatrix m;
    m.data = Matrix(n, d);
    for (size_t i = 0; i < n; ++i) {
        std::vector<double> eps(d);
        for (double& e : eps) e = rng.next_gaussian();
        const double en = norm2(eps.data(), d);
        const double scale = 0.05 * rng.next_double() / std::max(1e-300, en);
        for (size_t j = 0; j < d; ++j)
            m.data.at(i, j) = static_cast<double>(i) * u[j] + scale * eps[j];
        m.oi_labels.push_back(static_cast<int>(i));
        m.pi_labels.push_back(0);
        m.sample_refs.push_back(i);
    }
    Subspace s = orient(fit_oi_subspace(m, 2, SubspaceMethod::pca, 1), m);
    double cosv = 0.0;
    for (size_t j = 0; j < d; ++j) cosv += s.basis.at(0, j) * u[j];
    cosv = std::abs(cosv);
    std::vector<double> oi(m.oi_labels.begin(), m.oi_labels.end());
    const double rho = linalg::spearman(pc_scores(s, m.data, 0), oi);
    const std::string detail = "|cos(pc1,u)| " + num(cosv) +
                               " (req >= 0.99), spearman " + num(rho) +
                               " (req >= 0.999)";
    return (cosv >= 0.99 && rho >= 0.999) ? pass(5, name, detail)
                                          : fail(5, name, detail);
}

// --- criterion 6: classification machinery ----------------------------------

CheckResult check_classifier() {
    const std::string name = "threshold classifier and closed-form baseline";
    Rng rng(404);
    std::vector<double> dev_d, test_d;
    std::vector<int> dev_l, test_l;
    for (int s = 0; s < 30; ++s)
        for (int c = 0; c < 7; ++c) {
            const bool bound = c == 0;
            const double dist =
                bound ? 0.1 * rng.next_double() : 0.5 + 0.5 * rng.next_double();
            dev_d.push_back(dist);
            dev_l.push_back(bound ? 1 : 0);
            test_d.push_back(dist);
            test_l.push_back(bound ? 1 : 0);
        }
    const ClassifyResult r = threshold_classify(dev_d, dev_l, test_d, test_l);
    const double base_err = std::abs(r.baseline_f1 - 0.25);
    const std::string detail = "separable F1 " + num(r.dev_f1) +
                               " (req = 1), baseline dev " + num(base_err) +
                               " (req <= 1e-12)";
    return (r.dev_f1 == 1.0 && r.test_f1 == 1.0 && base_err <= 1e-12)
               ? pass(6, name, detail)
               : fail(6, name, detail);
}

// --- criterion 7: pipeline determinism --------------------------------------

ExperimentConfig small_config(const std::string& out) {
    ExperimentConfig c;
    c.seed = 7;
    c.out_dir = out;
    c.vocab = {64, 64};
    c.dataset.n = 60;
    c.dataset.train_frac = 0.2;
    c.dataset.dev_frac = 0.4;
    c.dataset.test_frac = 0.4;
    c.dataset.sweep_dev_n = 10;
    c.dataset.sweep_test_n = 15;
    c.corpus = {6, 2, 7};
    c.model = ModelConfig{.d_model = 32, .n_layers = 3, .n_heads = 4,
                          .d_ff = 64, .max_seq_len = 96, .vocab_size = 0,
                          .seed = 0};
    c.train.steps = 30;
    c.train.batch_size = 16;
    c.train.warmup_steps = 5;
    c.train.heldout_frac = 0.1;
    c.train.log_every = 10;
    c.intervene.betas = {0, 1, 2, 3};
    c.intervene.steer_bis = {1};
    return c;
}

CheckResult check_determinism(const std::string& work_dir) {
    const std::string name = "pipeline determinism (identical CSV bytes)";
    const std::string a = work_dir + "/det_a", b = work_dir + "/det_b";
    fs::remove_all(a);
    fs::remove_all(b);
    run_pipeline(small_config(a));
    run_pipeline(small_config(b));

    auto csvs = [](const std::string& root) {
        std::vector<std::string> out;
        for (const auto& e : fs::recursive_directory_iterator(root))
            if (e.is_regular_file() && e.path().extension() == ".csv")
                out.push_back(fs::relative(e.path(), root).string());
        std::sort(out.begin(), out.end());
        return out;
    };
    const auto la = csvs(a), lb = csvs(b);
    if (la != lb || la.empty())
        return fail(7, name, "CSV file sets differ or are empty");
    for (const auto& rel : la)
        if (read_file(a + "/" + rel) != read_file(b + "/" + rel))
            return fail(7, name, "bytes differ for " + rel);
    return pass(7, name, std::to_string(la.size()) + " CSV files byte-identical "
                         "across two runs");
}

// --- criteria 8-13: trained-model analogues ---------------------------------

ExperimentConfig main_config(const std::string& work_dir) {
    ExperimentConfig c;  // library defaults are the documented recipe
    c.seed = 1;
    c.out_dir = work_dir + "/main";
    c.intervene.grid.enabled = true;
    return c;
}

int find_index(const std::vector<int>& v, int x) {
    for (size_t i = 0; i < v.size(); ++i)
        if (v[i] == x) return static_cast<int>(i);
    return -1;
}

}  // namespace

std::vector<CheckResult> run_acceptance(const std::string& golden_dir,
                                        const std::string& work_dir) {
    fs::create_directories(work_dir);
    std::vector<CheckResult> out;
    auto guarded = [&](CheckResult (*fn)()) {
        try {
            out.push_back(fn());
        } catch (const std::exception& e) {
            out.push_back(fail(static_cast<int>(out.size()) + 1, "check threw",
                               e.what()));
        }
    };
    guarded(check_numeric_oracles);
    guarded(check_edit_algebra);
    try {
        out.push_back(check_dataset_goldens(golden_dir));
    } catch (const std::exception& e) {
        out.push_back(fail(3, "dataset goldens", e.what()));
    }
    guarded(check_gradients);
    guarded(check_planted_recovery);
    guarded(check_classifier);
    try {
        out.push_back(check_determinism(work_dir));
    } catch (const std::exception& e) {
        out.push_back(fail(7, "pipeline determinism", e.what()));
    }

    // --- criterion 8: training gate ---
    const ExperimentConfig cfg = main_config(work_dir);
    bool gate_open = false;
    std::string gate_reason;
    try {
        cmd_gen(cfg);
        cmd_train(cfg);
        json meta;
        std::ifstream(artifact_path(cfg, "train_meta.json")) >> meta;
        const double acc = meta.at("heldout_accuracy").get<double>();
        const double secs = meta.at("train_seconds").get<double>();
        const std::string detail = "held-out accuracy " + num(acc) +
                                   " (req >= 0.95) in " + num(secs) +
                                   " s (req <= 1800)";
        if (acc >= 0.95 && secs <= 1800.0) {
            gate_open = true;
            out.push_back(pass(8, "training gate", detail));
        } else {
            gate_reason = detail;
            // An unmet gate is not a build failure: criteria 1-7 alone
            // decide pass/fail and the gated checks below report SKIPPED.
            out.push_back(skipped(8, "training gate", "gate unmet: " + detail));
        }
    } catch (const std::exception& e) {
        gate_reason = e.what();
        out.push_back(fail(8, "training gate", e.what()));
    }

    const std::vector<std::pair<int, std::string>> gated{
        {9, "OI-subspace emergence at an interior layer"},
        {10, "step-edit plurality and LD peak"},
        {11, "steering raises the target attribute"},
        {12, "position independence (filler / interjection)"},
        {13, "pair classification beats the baseline"}};
    if (!gate_open) {
        for (const auto& [id, nm] : gated)
            out.push_back(skipped(id, nm, "SKIPPED(gate): " + gate_reason));
        return out;
    }

    try {
        cmd_capture(cfg);
        cmd_fit(cfg);
        cmd_intervene(cfg);
        cmd_report(cfg);
    } catch (const std::exception& e) {
        for (const auto& [id, nm] : gated)
            out.push_back(fail(id, nm, std::string("pipeline failed: ") + e.what()));
        return out;
    }

    const Transformer model = load_checkpoint(artifact_path(cfg, "model.ckpt"));
    const Vocabulary vocab = pipeline_vocabulary(cfg);
    json bj;
    std::ifstream(artifact_path(cfg, "best_layer.json")) >> bj;
    const int best = bj.at("layer").get<int>();

    // --- criterion 9 ---
    try {
        const Subspace s = read_subspace(
            artifact_path(cfg, "subspace_l" + std::to_string(best) + ".oiss"));
        const ActivationMatrix tm = read_activation_matrix(
            artifact_path(cfg, "act_test_l" + std::to_string(best) + ".oiam"));
        std::vector<double> oi(tm.oi_labels.begin(), tm.oi_labels.end());
        const double rho = linalg::spearman(pc_scores(s, tm.data, 0), oi);
        const bool interior = best > 0 && best < cfg.model.n_layers - 1;
        const std::string detail =
            "layer " + std::to_string(best) + " (interior req), spearman " +
            num(rho) + " on " + std::to_string(tm.n()) + " held-out samples "
            "(req >= 0.9 on >= 1000)";
        out.push_back((rho >= 0.9 && interior && tm.n() >= 1000)
                          ? pass(9, gated[0].second, detail)
                          : fail(9, gated[0].second, detail));
    } catch (const std::exception& e) {
        out.push_back(fail(9, gated[0].second, e.what()));
    }

    // --- criterion 10 ---
    try {
        const auto recs =
            read_sweep_records(artifact_path(cfg, "step_sweep.oisw"));
        const FlipTable flip = logit_flip(recs);
        const LdCurve ld = ld_curves(recs);
        bool ok = true;
        std::string detail;
        for (int beta : {1, 2, 3}) {
            const int kr = find_index(flip.keys, beta);
            const int kc = find_index(flip.candidate_ois, beta);
            const double prop =
                (kr >= 0 && kc >= 0) ? flip.proportions.at(kr, kc) : 0.0;
            // LD of a_beta should peak at or next to step beta
            const int lc = find_index(ld.candidate_ois, beta);
            int peak_key = -99;
            double peak_val = -1e300;
            for (size_t i = 0; i < ld.keys.size(); ++i)
                if (lc >= 0 && ld.mean.at(i, lc) > peak_val) {
                    peak_val = ld.mean.at(i, lc);
                    peak_key = ld.keys[i];
                }
            const bool adj = std::abs(peak_key - beta) <= 1;
            if (!(prop >= 0.5 && adj)) ok = false;
            detail += "b" + std::to_string(beta) + ": a_b " + num(prop) +
                      " (req >= 0.5), LD peak at " + std::to_string(peak_key) +
                      "; ";
        }
        out.push_back(ok ? pass(10, gated[1].second, detail)
                         : fail(10, gated[1].second, detail));
    } catch (const std::exception& e) {
        out.push_back(fail(10, gated[1].second, e.what()));
    }

    // --- criterion 11 ---
    try {
        const auto recs =
            read_sweep_records(artifact_path(cfg, "steer_sweep.oisw"));
        const LdCurve ld = ld_curves(recs);
        bool ok = true;
        std::string detail;
        for (int bi : cfg.intervene.steer_bis) {
            const int kr = find_index(ld.keys, bi);
            const int tc = find_index(ld.candidate_ois, bi);
            if (kr < 0 || tc < 0) {
                ok = false;
                continue;
            }
            const double target = ld.mean.at(kr, tc);
            double margin = 1e300;
            for (size_t j = 0; j < ld.candidate_ois.size(); ++j) {
                const int oi = ld.candidate_ois[j];
                if (oi == 0 || oi == bi) continue;
                margin = std::min(margin, target - ld.mean.at(kr, j));
            }
            if (!(margin > 0.0)) ok = false;
            detail += "bi" + std::to_string(bi) + " margin " + num(margin) + "; ";
        }
        out.push_back(ok ? pass(11, gated[2].second, detail + "(req > 0)")
                         : fail(11, gated[2].second, detail + "(req > 0)"));
    } catch (const std::exception& e) {
        out.push_back(fail(11, gated[2].second, e.what()));
    }

    // --- criterion 12 ---
    try {
        const auto base = gen_base(cfg.dataset.relation, 600, 7, vocab, 4242);
        const auto fil = gen_filler(base, {0, 1, 2, 3, 4, 5}, vocab);
        ActivationMatrix fm = build_entity_matrix(model, fil, best);
        Subspace fsub = orient(fit_oi_subspace(fm, 2, SubspaceMethod::pca, 1), fm);
        std::vector<double> oi(fm.oi_labels.begin(), fm.oi_labels.end());
        std::vector<double> pi(fm.pi_labels.begin(), fm.pi_labels.end());
        const std::vector<double> pc1 = pc_scores(fsub, fm.data, 0);
        const double rho_oi = linalg::spearman(pc1, oi);
        const double rho_pi = linalg::spearman(pc1, pi);

        json im;
        std::ifstream(artifact_path(cfg, "intervene_meta.json")) >> im;
        InterventionSpec spec;
        spec.layer = im.at("layer").get<int>();
        spec.alpha = im.at("alpha").get<double>();
        spec.step_value = im.at("step_value").get<double>();
        spec.mode = edit_mode_from_name(im.at("mode").get<std::string>());
        const Subspace isub = read_subspace(artifact_path(
            cfg, "subspace_l" + std::to_string(spec.layer) + ".oiss"));

        const auto ibase =
            gen_base(cfg.dataset.relation, 500, 7, vocab, 777, /*query_oi=*/0);
        const auto ij = gen_interjection(ibase, vocab);
        const auto recs = run_step_sweep(model, ij, isub, spec, {0, 1, 2});
        const FlipTable flip = logit_flip(recs);
        bool flips_ok = true;
        std::string fd;
        for (int beta : {1, 2}) {
            const int kr = find_index(flip.keys, beta);
            const int kc = find_index(flip.candidate_ois, beta);
            const double prop =
                (kr >= 0 && kc >= 0) ? flip.proportions.at(kr, kc) : 0.0;
            if (prop < 0.5) flips_ok = false;
            fd += "interj b" + std::to_string(beta) + ": " + num(prop) + "; ";
        }
        const std::string detail = "filler rho_oi " + num(rho_oi) +
                                   " (req > 0.8), rho_pi " + num(rho_pi) +
                                   " (req |.| < 0.3); " + fd + "(req >= 0.5)";
        out.push_back((rho_oi > 0.8 && std::abs(rho_pi) < 0.3 && flips_ok)
                          ? pass(12, gated[3].second, detail)
                          : fail(12, gated[3].second, detail));
    } catch (const std::exception& e) {
        out.push_back(fail(12, gated[3].second, e.what()));
    }

    // --- criterion 13 ---
    try {
        bool ok = true;
        std::string detail;
        uint64_t pseed = 31000;
        for (const char* pname : {"7A-7E", "7A-3E", "7A-2E", "7A-5E"}) {
            const auto all = gen_pattern(pname, 120, vocab, pseed++);
            const std::vector<Sample> dev(all.begin(), all.begin() + 60);
            const std::vector<Sample> test(all.begin() + 60, all.end());
            const PatternPairAnalysis pa = pattern_pair_analysis(
                model, dev, test, vocab, best, DistanceMetric::rank_distance, 0);
            if (!(pa.classify.test_f1 > pa.classify.baseline_f1)) ok = false;
            detail += std::string(pname) + ": F1 " + num(pa.classify.test_f1) +
                      " vs base " + num(pa.classify.baseline_f1) + "; ";
        }
        out.push_back(ok ? pass(13, gated[4].second, detail + "(req strict >)")
                         : fail(13, gated[4].second, detail + "(req strict >)"));
    } catch (const std::exception& e) {
        out.push_back(fail(13, gated[4].second, e.what()));
    }

    return out;
}

int print_results(const std::vector<CheckResult>& results, std::ostream& os) {
    int failures = 0;
    for (const CheckResult& r : results) {
        const char* s = r.status == CheckResult::Status::pass      ? "PASS"
                        : r.status == CheckResult::Status::skipped ? "SKIPPED"
                                                                   : "FAIL";
        if (r.status == CheckResult::Status::fail) ++failures;
        os << "criterion " << r.id << ": " << s << " — " << r.name;
        if (!r.detail.empty()) os << " [" << r.detail << "]";
        os << "\n";
    }
    return failures;
}

}  // namespace oisub
