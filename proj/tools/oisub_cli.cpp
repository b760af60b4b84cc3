#include <cstdlib>
#include <iostream>
#include <string>

#include "oisub/verify.hpp"

namespace {

constexpr const char* kUsage =
    "usage: oisub <gen|train|capture|fit|intervene|report|verify> [options]\n"
    "\n"
    "stages (each requires the artifacts of the stages before it):\n"
    "  gen        generate corpus, capture and sweep datasets\n"
    "  train      train the toy transformer on the corpus\n"
    "  capture    capture residual-stream activation matrices\n"
    "  fit        fit per-layer subspaces and pick the best layer\n"
    "  intervene  run step, steering and layer sweeps\n"
    "  report     emit the CSV/SVG report bundle\n"
    "  verify     run the acceptance suite and print pass/fail lines\n"
    "\n"
    "options:\n"
    "  --config PATH   JSON experiment config (defaults used when omitted)\n"
    "  --seed N        override the config seed\n"
    "  --out DIR       override the config output directory\n"
    "  --jobs N        accepted for compatibility; stages are single-threaded\n";

int usage_error(const std::string& msg) {
    std::cerr << "oisub: " << msg << "\n\n" << kUsage;
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) return usage_error("missing subcommand");
    const std::string cmd = argv[1];

    std::string config_path, out_override, seed_override, jobs;
    for (int i = 2; i < argc; ++i) {
        const std::string arg = argv[i];
        auto next = [&]() -> const char* {
            if (i + 1 >= argc) return nullptr;
            return argv[++i];
        };
        const char* v = nullptr;
        if (arg == "--config") {
            if (!(v = next())) return usage_error("--config needs a path");
            config_path = v;
        } else if (arg == "--seed") {
            if (!(v = next())) return usage_error("--seed needs a value");
            seed_override = v;
        } else if (arg == "--out") {
            if (!(v = next())) return usage_error("--out needs a directory");
            out_override = v;
        } else if (arg == "--jobs") {
            if (!(v = next())) return usage_error("--jobs needs a value");
            jobs = v;
        } else {
            return usage_error("unknown option '" + arg + "'");
        }
    }

    try {
        oisub::ExperimentConfig cfg;
        if (!config_path.empty()) cfg = oisub::load_config(config_path);
        if (!seed_override.empty()) {
            try {
                cfg.seed = std::stoull(seed_override);
            } catch (const std::exception&) {
                return usage_error("--seed must be an unsigned integer");
            }
        }
        if (!out_override.empty()) cfg.out_dir = out_override;
        cfg.validate();

        if (cmd == "gen") {
            oisub::cmd_gen(cfg);
        } else if (cmd == "train") {
            oisub::cmd_train(cfg);
        } else if (cmd == "capture") {
            oisub::cmd_capture(cfg);
        } else if (cmd == "fit") {
            oisub::cmd_fit(cfg);
        } else if (cmd == "intervene") {
            oisub::cmd_intervene(cfg);
        } else if (cmd == "report") {
            oisub::cmd_report(cfg);
        } else if (cmd == "verify") {
            const char* gd = std::getenv("OISUB_GOLDEN_DIR");
            const std::string golden = gd ? gd : "tests/golden";
            const auto results = oisub::run_acceptance(golden, cfg.out_dir);
            const int failures = oisub::print_results(results, std::cout);
            return failures > 0 ? 3 : 0;
        } else {
            return usage_error("unknown subcommand '" + cmd + "'");
        }
        return 0;
    } catch (const oisub::StageError& e) {
        std::cerr << "oisub: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "oisub: " << e.what() << "\n";
        return 1;
    }
}
