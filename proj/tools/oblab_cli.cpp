// oblab: run an experiment config or replay a previous report.
//
//   oblab run samples/classify_cusp.cfg --out out/cusp
//   oblab replay out/cusp/report.json --out out/cusp-replay
//
// Exit code 0 iff every expectation passed; 1 when some failed; 2 on bad
// input (config errors, missing files).

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "oblab/experiment.hpp"

namespace {

void print(const oblab::ExperimentReport& rep, const oblab::fs::path& out) {
    for (const auto& e : rep.expectations)
        std::cout << (e.passed ? "PASS " : "FAIL ") << e.name << "  (" << e.detail << ")\n";
    for (const auto& err : rep.errors) std::cout << "ERROR " << err << "\n";
    std::cout << rep.artifacts.size() << " artifacts, report " << (out / "report.json").string() << ", "
              << rep.wall_time << " s\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Numerical laboratory for obstacle-problem free boundaries"};
    app.require_subcommand(1);

    std::string config_path, report_path, out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> grid;

    auto* run = app.add_subcommand("run", "Run an experiment config");
    run->add_option("config", config_path, "Key-value experiment file")->required();
    run->add_option("--out", out_dir, "Output directory (default out/<config stem>)");
    run->add_option("--seed", seed, "Override the config seed");
    run->add_option("--grid", grid, "Override points per axis");

    auto* rep = app.add_subcommand("replay", "Re-run the config echoed in a report and compare");
    rep->add_option("report", report_path, "report.json of an earlier run")->required();
    rep->add_option("--out", out_dir, "Output directory (default <report dir>/replay)");
    rep->add_option("--seed", seed, "Replay with another seed; only verdicts are compared then");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            auto cfg = oblab::ExperimentConfig::load(config_path);
            if (seed) cfg.set("seed", std::to_string(*seed));
            if (grid) cfg.set("grid", std::to_string(*grid));
            const oblab::fs::path out =
                out_dir.empty() ? oblab::fs::path("out") / oblab::fs::path(config_path).stem() : oblab::fs::path(out_dir);
            const auto report = oblab::run_experiment(cfg, out);
            print(report, out);
            return report.passed() ? 0 : 1;
        }
        const oblab::fs::path out =
            out_dir.empty() ? oblab::fs::path(report_path).parent_path() / "replay" : oblab::fs::path(out_dir);
        const auto res = oblab::replay(report_path, out, seed);
        if (!res.missing.empty()) {
            std::cout << nlohmann::json{{"missing_inputs", res.missing}}.dump(2) << "\n";
            return 2;
        }
        print(res.report, out);
        return res.report.passed() ? 0 : 1;
    } catch (const oblab::Error& e) {
        std::cerr << "oblab: " << e.what() << "\n";
        return 2;
    }
}
