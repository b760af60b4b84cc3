#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "oisub/linalg.hpp"
#include "oisub/pipeline.hpp"
#include "oisub/svg.hpp"

namespace oisub {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InputError("report: cannot open '" + path + "'");
    json j;
    f >> j;
    return j;
}

/// Parse a projection CSV (pc1,pc2,oi,pi,sample_id) back into a table.
ProjectionTable read_projection_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InputError("report: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(f, line) || line != "pc1,pc2,oi,pi,sample_id")
        throw FormatError("report: unexpected projection CSV header in '" + path +
                          "'");
    ProjectionTable t;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream is(line);
        std::string cell;
        std::getline(is, cell, ',');
        t.pc1.push_back(std::stod(cell));
        std::getline(is, cell, ',');
        t.pc2.push_back(std::stod(cell));
        std::getline(is, cell, ',');
        t.oi.push_back(std::stoi(cell));
        std::getline(is, cell, ',');
        t.pi.push_back(std::stoi(cell));
        std::getline(is, cell, ',');
        t.sample_id.push_back(std::stoull(cell));
    }
    return t;
}

std::vector<Series> ld_curve_series(const LdCurve& c) {
    std::vector<Series> series;
    for (size_t j = 0; j < c.candidate_ois.size(); ++j) {
        Series s;
        s.label = "a_" + std::to_string(c.candidate_ois[j]);
        for (size_t i = 0; i < c.keys.size(); ++i) {
            s.x.push_back(static_cast<double>(c.keys[i]));
            s.y.push_back(c.mean.at(i, j));
        }
        series.push_back(std::move(s));
    }
    return series;
}

void flip_svg(const std::string& path, const std::string& title,
              const std::string& key_name, const FlipTable& t) {
    std::vector<std::string> bars, segs;
    for (int k : t.keys) bars.push_back(key_name + "=" + std::to_string(k));
    for (int oi : t.candidate_ois) segs.push_back("a_" + std::to_string(oi));
    segs.push_back("other");
    write_stacked_bar_svg(path, title, bars, segs, t.proportions);
}

}  // namespace

void cmd_report(const ExperimentConfig& c) {
    {
        std::vector<std::string> outs{
            "report/ld_step.csv",     "report/ld_step.svg",
            "report/flip_step.csv",   "report/flip_step.svg",
            "report/ld_steer.csv",    "report/ld_steer.svg",
            "report/flip_steer.csv",  "report/projection.svg",
            "report/correlation.csv", "report/layer_sweep.svg",
            "report/summary.txt",     "report/report_manifest.json"};
        if (c.dataset.variant == "pattern") {
            outs.push_back("report/distances.csv");
            outs.push_back("report/distances.svg");
            outs.push_back("report/classify.csv");
        }
        if (artifacts_fresh(c, outs)) return;
    }
    fs::create_directories(fs::path(c.out_dir) / "report");
    auto rpath = [&](const std::string& name) {
        return artifact_path(c, "report/" + name);
    };
    std::vector<std::string> produced;
    auto done = [&](const std::string& name) {
        record_artifact(c, "report/" + name);
        produced.push_back(name);
    };

    // step sweep: mean LD per (beta, candidate) + answer distribution
    require_artifact(c, "step_sweep.oisw", "report");
    const auto step_recs = read_sweep_records(artifact_path(c, "step_sweep.oisw"));
    const LdCurve step_ld = ld_curves(step_recs);
    write_ld_curve_csv(rpath("ld_step.csv"), step_ld, "beta");
    done("ld_step.csv");
    write_line_svg(rpath("ld_step.svg"), "Mean logit difference vs step count",
                   "beta", "mean LD", ld_curve_series(step_ld));
    done("ld_step.svg");
    const FlipTable step_flip = logit_flip(step_recs);
    write_flip_table_csv(rpath("flip_step.csv"), step_flip, "beta");
    done("flip_step.csv");
    flip_svg(rpath("flip_step.svg"), "Post-edit answer distribution", "beta",
             step_flip);
    done("flip_step.svg");

    // steering sweep
    require_artifact(c, "steer_sweep.oisw", "report");
    const auto steer_recs = read_sweep_records(artifact_path(c, "steer_sweep.oisw"));
    const LdCurve steer_ld = ld_curves(steer_recs);
    write_ld_curve_csv(rpath("ld_steer.csv"), steer_ld, "target_bi");
    done("ld_steer.csv");
    write_line_svg(rpath("ld_steer.svg"),
                   "Mean logit difference under activation steering", "target bi",
                   "mean LD", ld_curve_series(steer_ld));
    done("ld_steer.svg");
    const FlipTable steer_flip = logit_flip(steer_recs);
    write_flip_table_csv(rpath("flip_steer.csv"), steer_flip, "target_bi");
    done("flip_steer.csv");

    // best-layer projection scatter + correlation table
    require_artifact(c, "best_layer.json", "report");
    const int best =
        read_json_file(artifact_path(c, "best_layer.json")).at("layer").get<int>();
    const std::string proj_name = "proj_l" + std::to_string(best) + ".csv";
    require_artifact(c, proj_name, "report");
    const ProjectionTable pt = read_projection_csv(artifact_path(c, proj_name));
    {
        std::map<int, Series> by_oi;
        for (size_t i = 0; i < pt.pc1.size(); ++i) {
            Series& s = by_oi[pt.oi[i]];
            s.label = "OI " + std::to_string(pt.oi[i]);
            s.x.push_back(pt.pc1[i]);
            s.y.push_back(pt.pc2[i]);
        }
        std::vector<Series> series;
        for (auto& [oi, s] : by_oi) {
            (void)oi;
            series.push_back(std::move(s));
        }
        write_scatter_svg(rpath("projection.svg"),
                          "Held-out projections, layer " + std::to_string(best),
                          "PC1", "PC2", series);
        done("projection.svg");
    }
    {
        Matrix scores(pt.pc1.size(), 2);
        for (size_t i = 0; i < pt.pc1.size(); ++i) {
            scores.at(i, 0) = pt.pc1[i];
            scores.at(i, 1) = pt.pc2[i];
        }
        // Degenerate label sets are legitimate here (the pseudo variant
        // equalizes PI by construction); report "nan" for that column
        // instead of failing the whole bundle.
        auto constant_labels = [](const std::vector<int>& v) {
            for (int x : v)
                if (x != v[0]) return false;
            return true;
        };
        auto rho_col = [&](const std::vector<int>& labels, size_t pc) {
            std::vector<double> lab(labels.begin(), labels.end());
            std::vector<double> col(scores.rows);
            for (size_t i = 0; i < scores.rows; ++i) col[i] = scores.at(i, pc);
            return linalg::spearman(col, lab);
        };
        const bool oi_const = constant_labels(pt.oi);
        const bool pi_const = constant_labels(pt.pi);
        std::ostringstream os;
        os.precision(17);
        os << "pc,rho_oi,rho_pi\n";
        for (size_t i = 0; i < 2; ++i) {
            os << (i + 1) << ',';
            if (oi_const)
                os << "nan";
            else
                os << rho_col(pt.oi, i);
            os << ',';
            if (pi_const)
                os << "nan";
            else
                os << rho_col(pt.pi, i);
            os << '\n';
        }
        std::ofstream f(rpath("correlation.csv"), std::ios::binary);
        f << os.str();
        f.close();
        done("correlation.csv");
    }

    // layer sweep curve
    require_artifact(c, "layer_sweep.csv", "report");
    {
        std::ifstream f(artifact_path(c, "layer_sweep.csv"));
        std::string line;
        std::getline(f, line);  // header
        Series ld_s{"mean LD (non-original)", {}, {}};
        Series fl_s{"flip rate", {}, {}};
        while (std::getline(f, line)) {
            if (line.empty()) continue;
            std::istringstream is(line);
            std::string cell;
            std::getline(is, cell, ',');
            const double layer = std::stod(cell);
            std::getline(is, cell, ',');
            ld_s.x.push_back(layer);
            ld_s.y.push_back(std::stod(cell));
            std::getline(is, cell, ',');
            fl_s.x.push_back(layer);
            fl_s.y.push_back(std::stod(cell));
        }
        write_line_svg(rpath("layer_sweep.svg"), "Edit effect per layer", "layer",
                       "effect", {ld_s, fl_s});
        done("layer_sweep.svg");
    }

    // multi-binding patterns: distance heatmap + bound-pair classification
    if (c.dataset.variant == "pattern") {
        require_artifact(c, "model.ckpt", "report");
        require_artifact(c, "capture_dev.jsonl", "report");
        require_artifact(c, "capture_test.jsonl", "report");
        const Transformer model = load_checkpoint(artifact_path(c, "model.ckpt"));
        const Vocabulary vocab = pipeline_vocabulary(c);
        const auto dev = read_jsonl(artifact_path(c, "capture_dev.jsonl"));
        const auto test = read_jsonl(artifact_path(c, "capture_test.jsonl"));
        const PatternPairAnalysis pa = pattern_pair_analysis(
            model, dev, test, vocab, best, DistanceMetric::rank_distance, 0);
        {
            std::ostringstream os;
            os.precision(17);
            os << "entity_oi";
            for (size_t a = 0; a < pa.k_pairs; ++a) os << ",a_" << a;
            os << '\n';
            for (size_t e = 0; e < pa.entities.size(); ++e) {
                os << pa.entities[e];
                for (size_t a = 0; a < pa.k_pairs; ++a)
                    os << ',' << pa.mean_distance.at(e, a);
                os << '\n';
            }
            std::ofstream f(rpath("distances.csv"), std::ios::binary);
            f << os.str();
        }
        done("distances.csv");
        write_heatmap_svg(rpath("distances.svg"),
                          "Mean PC1 rank distance, " + c.dataset.pattern,
                          pa.mean_distance);
        done("distances.svg");
        {
            std::ostringstream os;
            os.precision(17);
            os << "pattern,threshold,dev_f1,test_f1,baseline_f1\n"
               << c.dataset.pattern << ',' << pa.classify.threshold << ','
               << pa.classify.dev_f1 << ',' << pa.classify.test_f1 << ','
               << pa.classify.baseline_f1 << '\n';
            std::ofstream f(rpath("classify.csv"), std::ios::binary);
            f << os.str();
        }
        done("classify.csv");
    }

    // summary
    {
        std::ostringstream os;
        os.precision(6);
        os << "experiment summary\n==================\n";
        os << "config hash: " << config_hash(c) << "\n";
        os << "best layer: " << best << "\n";
        const json bj = read_json_file(artifact_path(c, "best_layer.json"));
        os << "dev spearman(pc1, OI): "
           << bj.at("dev_spearman_pc1_oi").get<double>() << "\n";
        if (fs::exists(artifact_path(c, "train_meta.json"))) {
            const json tm = read_json_file(artifact_path(c, "train_meta.json"));
            os << "train steps: " << tm.at("steps").get<int>() << "\n";
            os << "train seconds: " << tm.at("train_seconds").get<double>() << "\n";
            os << "held-out accuracy: "
               << tm.at("heldout_accuracy").get<double>() << "\n";
            os << "final loss: " << tm.at("final_loss").get<double>() << "\n";
        }
        if (fs::exists(artifact_path(c, "grid_choice.json"))) {
            const json gj = read_json_file(artifact_path(c, "grid_choice.json"));
            os << "grid choice: layer " << gj.at("layer").get<int>() << ", v "
               << gj.at("step_value").get<double>() << ", alpha "
               << gj.at("alpha").get<double>() << ", score "
               << gj.at("score").get<double>() << "\n";
        }
        require_artifact(c, "intervene_meta.json", "report");
        const json ij = read_json_file(artifact_path(c, "intervene_meta.json"));
        os << "intervention: layer " << ij.at("layer").get<int>() << ", mode "
           << ij.at("mode").get<std::string>() << ", alpha "
           << ij.at("alpha").get<double>() << ", v "
           << ij.at("step_value").get<double>() << "\n";
        std::ofstream f(rpath("summary.txt"), std::ios::binary);
        f << os.str();
        f.close();
        done("summary.txt");
    }

    // manifest of the bundle: file name -> content hash
    {
        json m;
        for (const std::string& name : produced)
            m[name] = file_hash(rpath(name));
        std::ofstream f(rpath("report_manifest.json"), std::ios::binary);
        f << m.dump(2) << '\n';
        f.close();
        record_artifact(c, "report/report_manifest.json");
    }
}

}  // namespace oisub
