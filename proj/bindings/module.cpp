#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "oisub/verify.hpp"

namespace py = pybind11;
using namespace oisub;

namespace {

ExperimentConfig parse(const std::string& config_json) {
    return config_from_json(config_json);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Ordering-ID subspace workbench core";

    py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<StageError>(m, "StageError", PyExc_RuntimeError);

    m.def("default_config", [] { return config_to_json(ExperimentConfig{}); },
          "JSON of the default experiment configuration");
    m.def("config_hash",
          [](const std::string& j) { return config_hash(parse(j)); },
          py::arg("config_json"));

    m.def("cmd_gen", [](const std::string& j) { cmd_gen(parse(j)); },
          py::arg("config_json"));
    m.def("cmd_train", [](const std::string& j) { cmd_train(parse(j)); },
          py::arg("config_json"));
    m.def("cmd_capture", [](const std::string& j) { cmd_capture(parse(j)); },
          py::arg("config_json"));
    m.def("cmd_fit", [](const std::string& j) { cmd_fit(parse(j)); },
          py::arg("config_json"));
    m.def("cmd_intervene", [](const std::string& j) { cmd_intervene(parse(j)); },
          py::arg("config_json"));
    m.def("cmd_report", [](const std::string& j) { cmd_report(parse(j)); },
          py::arg("config_json"));
    m.def("run_pipeline", [](const std::string& j) { run_pipeline(parse(j)); },
          py::arg("config_json"),
          "Run gen -> train -> capture -> fit -> intervene -> report");

    m.def("spearman", &linalg::spearman, py::arg("x"), py::arg("y"));
    m.def("pearson", &linalg::pearson, py::arg("x"), py::arg("y"));
    m.def(
        "pca",
        [](const std::vector<std::vector<double>>& rows, size_t c) {
            if (rows.empty()) throw InputError("pca: empty input");
            Matrix x(rows.size(), rows.front().size());
            for (size_t i = 0; i < rows.size(); ++i) {
                if (rows[i].size() != x.cols)
                    throw InputError("pca: ragged input rows");
                for (size_t j = 0; j < x.cols; ++j) x.at(i, j) = rows[i][j];
            }
            const auto p = linalg::pca(x, c);
            std::vector<std::vector<double>> comps(p.components.rows);
            for (size_t i = 0; i < p.components.rows; ++i)
                comps[i].assign(p.components.row(i),
                                p.components.row(i) + p.components.cols);
            return py::make_tuple(comps, p.mean, p.explained_ratio);
        },
        py::arg("rows"), py::arg("c"),
        "Returns (components, mean, explained_ratio)");

    py::class_<Vocabulary>(m, "Vocabulary")
        .def("tokenize", &Vocabulary::tokenize, py::arg("text"))
        .def("detokenize", &Vocabulary::detokenize, py::arg("token_ids"))
        .def("__len__", &Vocabulary::size)
        .def_property_readonly("hash", &Vocabulary::hash);
    m.def("build_vocabulary", &build_vocabulary, py::arg("num_objects") = 224,
          py::arg("num_names") = 523, py::arg("seed") = 0);

    m.def(
        "gen_base",
        [](int relation, size_t n, size_t k, const Vocabulary& v, uint64_t seed,
           int query_oi) {
            py::list out;
            for (const Sample& s : gen_base(relation, n, k, v, seed, query_oi)) {
                py::dict d;
                d["tokens"] = s.full_tokens();
                d["text"] = v.detokenize(s.full_tokens());
                d["answer_token"] = s.answer_token;
                d["query_entity_oi"] = s.query_entity_oi;
                d["query_entity_pi"] = s.query_entity_pi;
                d["sample_id"] = s.sample_id;
                out.append(std::move(d));
            }
            return out;
        },
        py::arg("relation"), py::arg("n"), py::arg("k_pairs"), py::arg("vocab"),
        py::arg("seed"), py::arg("query_oi") = -1);

    m.def(
        "run_acceptance",
        [](const std::string& golden_dir, const std::string& work_dir) {
            py::list out;
            for (const CheckResult& r : run_acceptance(golden_dir, work_dir)) {
                py::dict d;
                d["id"] = r.id;
                d["name"] = r.name;
                d["status"] = r.status == CheckResult::Status::pass ? "pass"
                              : r.status == CheckResult::Status::skipped
                                  ? "skipped"
                                  : "fail";
                d["detail"] = r.detail;
                out.append(std::move(d));
            }
            return out;
        },
        py::arg("golden_dir"), py::arg("work_dir"));
}
