// Command-line runner for the simulation scenarios: run, list, explain.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "qake/harness.hpp"

namespace {

qake::Overrides overrides_from_json(const nlohmann::json& j) {
    qake::Overrides ov;
    if (j.contains("n1")) ov.n1 = j.at("n1").get<int>();
    if (j.contains("trials")) ov.trials = j.at("trials").get<int>();
    if (j.contains("seed")) ov.seed = j.at("seed").get<uint64_t>();
    if (j.contains("fraction")) ov.fraction = j.at("fraction").get<double>();
    if (j.contains("threshold")) ov.threshold = j.at("threshold").get<double>();
    if (j.contains("sig")) {
        const std::string s = j.at("sig").get<std::string>();
        if (s == "ideal") ov.sig = qake::SigScheme::ideal;
        else if (s == "breakable") ov.sig = qake::SigScheme::breakable;
        else throw std::invalid_argument("invalid override: sig must be ideal|breakable");
    }
    return ov;
}

std::optional<std::string> default_out_path(const std::string& scenario) {
    const char* dir = std::getenv("QAKE_OUT_DIR");
    if (!dir || !*dir) return std::nullopt;
    return std::string(dir) + "/" + scenario + "-report.json";
}

void print_summary(const qake::Report& r) {
    std::cout << "scenario: " << r.scenario << " (seed " << r.seed << ")\n";
    for (const auto& a : r.assertions)
        std::cout << "  [" << (a.pass ? "PASS" : "FAIL") << "] " << a.name << " — " << a.detail
                  << "\n";
    std::cout << (r.pass ? "PASS" : "FAIL") << " (" << r.wall_ms << " ms)\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qake — authenticated quantum key exchange scenario runner"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "Run a scenario and emit its report");
    std::string scenario;
    run->add_option("scenario", scenario, "Scenario name (see `list`)")->required();
    std::optional<int> n1, trials;
    std::optional<uint64_t> seed;
    std::optional<double> fraction, threshold;
    std::string sig_flag, config_path, out_path, dump_path;
    run->add_option("--n1", n1, "Qubit count per session");
    run->add_option("--trials", trials, "Trial count");
    run->add_option("--seed", seed, "Root seed");
    run->add_option("--fraction", fraction, "Intercept fraction in [0,1]");
    run->add_option("--sig", sig_flag, "Signature scheme: ideal|breakable");
    run->add_option("--threshold", threshold, "Abort threshold in (0, 0.5)");
    run->add_option("--config", config_path, "JSON config file (overridden by flags)");
    run->add_option("--out", out_path, "Report output path (default: $QAKE_OUT_DIR)");
    run->add_option("--dump-transcript", dump_path, "Write the transcript dump here");

    // list
    auto* list = app.add_subcommand("list", "List the scenario catalog");

    // explain
    auto* explain = app.add_subcommand("explain", "Describe one scenario");
    std::string explain_name;
    explain->add_option("scenario", explain_name, "Scenario name")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (list->parsed()) {
            for (const auto& s : qake::scenario_catalog()) std::cout << s.name << "\n";
            return 0;
        }
        if (explain->parsed()) {
            const qake::ScenarioDef* def = qake::find_scenario(explain_name);
            if (!def) {
                std::cerr << qake::unknown_scenario_message(explain_name) << "\n";
                return 2;
            }
            std::cout << def->name << "\n  " << def->description << "\n";
            return 0;
        }

        // precedence: CLI flag > config file > built-in default
        qake::Overrides ov;
        if (!config_path.empty()) {
            std::ifstream f(config_path);
            if (!f) {
                std::cerr << "cannot read config file " << config_path << "\n";
                return 2;
            }
            nlohmann::json j;
            f >> j;
            ov = overrides_from_json(j);
        }
        qake::Overrides flags;
        flags.n1 = n1;
        flags.trials = trials;
        flags.seed = seed;
        flags.fraction = fraction;
        flags.threshold = threshold;
        if (!sig_flag.empty()) {
            if (sig_flag == "ideal") flags.sig = qake::SigScheme::ideal;
            else if (sig_flag == "breakable") flags.sig = qake::SigScheme::breakable;
            else {
                std::cerr << "invalid override: sig must be ideal|breakable\n";
                return 2;
            }
        }
        flags.layer_under(ov);

        std::optional<std::string> out =
            out_path.empty() ? default_out_path(scenario) : std::optional<std::string>(out_path);
        std::optional<std::string> dump =
            dump_path.empty() ? std::nullopt : std::optional<std::string>(dump_path);

        qake::Report r = qake::run_scenario_to(scenario, flags, out, dump);
        print_summary(r);
        if (out) std::cout << "report: " << *out << "\n";
        if (dump) std::cout << "transcript: " << *dump << "\n";
        if (!out) std::cout << r.to_json().dump(2) << "\n";
        return r.pass ? 0 : 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
