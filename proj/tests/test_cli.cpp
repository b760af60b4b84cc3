#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

std::string cli() {
    const char* p = std::getenv("OISUB_CLI");
    REQUIRE(p != nullptr);
    return p;
}

int run(const std::string& args) {
    const std::string cmd = cli() + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    return WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

const std::string kRoot = "/tmp/oisub_cli_test";

std::string write_config(const std::string& name, const std::string& out_dir,
                         const std::string& extra = "") {
    fs::create_directories(kRoot);
    const std::string path = kRoot + "/" + name;
    std::ofstream f(path);
    f << R"({
  "seed": 11,
  "out_dir": ")" << out_dir << R"(",
  "vocab": {"objects": 48, "names": 48},
  "dataset": {"n": 40, "train_frac": 0.2, "dev_frac": 0.4, "test_frac": 0.4,
              "sweep_dev_n": 8, "sweep_test_n": 10},
  "corpus": {"n_per_cell": 4, "k_min": 2, "k_max": 7},
  "model": {"d_model": 32, "n_layers": 3, "n_heads": 4, "d_ff": 64,
            "max_seq_len": 96},
  "train": {"steps": 12, "batch_size": 16, "warmup_steps": 3,
            "heldout_frac": 0.1, "log_every": 6},
  "intervene": {"betas": [0, 1, 2], "steer_bis": [1]})"
      << extra << "\n}\n";
    return path;
}

}  // namespace

TEST_CASE("usage errors exit 1") {
    CHECK(run("") == 1);
    CHECK(run("frobnicate") == 1);
    CHECK(run("gen --config") == 1);
    CHECK(run("gen --bogus-flag x") == 1);
    CHECK(run("gen --config /nonexistent/config.json") == 1);
}

TEST_CASE("malformed config exits 1") {
    fs::create_directories(kRoot);
    const std::string bad = kRoot + "/bad.json";
    std::ofstream(bad) << R"({"seed": 1, "out_dir": "x", "no_such_field": 3})";
    CHECK(run("gen --config " + bad) == 1);
    const std::string bad2 = kRoot + "/bad2.json";
    std::ofstream(bad2) << R"({"seed": "not a number"})";
    CHECK(run("gen --config " + bad2) == 1);
}

TEST_CASE("stages require upstream artifacts") {
    const std::string out = kRoot + "/staged";
    fs::remove_all(out);
    const std::string cfg = write_config("staged.json", out);
    CHECK(run("train --config " + cfg) == 2);
    CHECK(run("capture --config " + cfg) == 2);
    CHECK(run("report --config " + cfg) == 2);
}

TEST_CASE("pipeline smoke run, idempotence, corruption detection") {
    const std::string out = kRoot + "/smoke";
    fs::remove_all(out);
    const std::string cfg = write_config("smoke.json", out);

    CHECK(run("gen --config " + cfg) == 0);
    CHECK(fs::exists(out + "/corpus.jsonl"));
    CHECK(fs::exists(out + "/sweep_test.jsonl"));

    CHECK(run("train --config " + cfg) == 0);
    CHECK(fs::exists(out + "/model.ckpt"));

    CHECK(run("capture --config " + cfg) == 0);
    CHECK(fs::exists(out + "/act_dev_l0.oiam"));

    CHECK(run("fit --config " + cfg) == 0);
    CHECK(fs::exists(out + "/best_layer.json"));

    CHECK(run("intervene --config " + cfg) == 0);
    CHECK(fs::exists(out + "/step_sweep.csv"));

    CHECK(run("report --config " + cfg) == 0);
    const std::string manifest = out + "/report/report_manifest.json";
    CHECK(fs::exists(manifest));
    CHECK(fs::exists(out + "/report/ld_step.csv"));
    CHECK(fs::exists(out + "/report/ld_step.svg"));

    // a second report run is a no-op: the bundle bytes do not change
    const std::string before = slurp(manifest);
    const auto stamp_before = fs::last_write_time(out + "/report/ld_step.csv");
    CHECK(run("report --config " + cfg) == 0);
    CHECK(slurp(manifest) == before);
    CHECK(fs::last_write_time(out + "/report/ld_step.csv") == stamp_before);

    // corrupting an upstream artifact turns downstream stages into staged
    // dependency errors
    {
        std::ofstream f(out + "/act_dev_l1.oiam",
                        std::ios::binary | std::ios::app);
        f << "garbage";
    }
    CHECK(run("fit --config " + cfg) == 2);
}

TEST_CASE("seed and out overrides") {
    const std::string out_a = kRoot + "/ov_a", out_b = kRoot + "/ov_b";
    fs::remove_all(out_a);
    fs::remove_all(out_b);
    const std::string cfg = write_config("override.json", out_a);
    CHECK(run("gen --config " + cfg) == 0);
    CHECK(run("gen --config " + cfg + " --out " + out_b + " --seed 99") == 0);
    CHECK(fs::exists(out_b + "/corpus.jsonl"));
    CHECK(slurp(out_a + "/corpus.jsonl") != slurp(out_b + "/corpus.jsonl"));
    // same seed and config, different directory: identical dataset bytes
    const std::string out_c = kRoot + "/ov_c";
    fs::remove_all(out_c);
    CHECK(run("gen --config " + cfg + " --out " + out_c) == 0);
    CHECK(slurp(out_a + "/corpus.jsonl") == slurp(out_c + "/corpus.jsonl"));
}
