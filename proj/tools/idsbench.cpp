// Command-line front end; talks to the library only through the C API.
#include "idsbench/idsbench.h"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

using nlohmann::json;

namespace {

struct Owned {
    char* p = nullptr;
    ~Owned() { ids_string_free(p); }
    std::string str() const { return p ? p : ""; }
};

int report(ids_status s) {
    std::cerr << "idsbench: " << ids_last_error() << "\n";
    // IO and argument failures surface as configuration errors.
    if (s == IDS_ERR_IO || s == IDS_ERR_INVALID_ARGUMENT) return IDS_ERR_CONFIG;
    if (s == IDS_ERR_INTERNAL) return IDS_ERR_TRAINING;
    return static_cast<int>(s);
}

std::optional<std::string> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct RunArgs {
    std::string scenario, data, config, schema, out;
    std::optional<std::uint64_t> seed;
    std::optional<double> test_fraction;
    std::optional<std::size_t> k;
    bool dry_run = false;
    std::size_t workers = 1;
};

int cmd_run(const RunArgs& a) {
    json flags = json::object();
    if (!a.scenario.empty()) flags["scenario"] = a.scenario;
    if (!a.data.empty()) flags["data"] = a.data;
    if (!a.schema.empty()) flags["schema"] = a.schema;
    if (!a.out.empty()) flags["out"] = a.out;
    if (a.seed) flags["seed"] = *a.seed;
    if (a.test_fraction) flags["test_fraction"] = *a.test_fraction;
    if (a.k) flags["k"] = *a.k;
    if (a.dry_run) flags["dry_run"] = true;

    std::string file_text;
    if (!a.config.empty()) {
        auto text = slurp(a.config);
        if (!text) {
            std::cerr << "idsbench: cannot read config file " << a.config << "\n";
            return IDS_ERR_CONFIG;
        }
        file_text = *text;
    }
    Owned config;
    if (auto s = ids_resolve_config(file_text.empty() ? nullptr : file_text.c_str(), flags.dump().c_str(), &config.p))
        return report(s);

    Owned results;
    if (auto s = ids_run_scenario(config.p, a.workers, &results.p)) return report(s);
    const json resolved = json::parse(config.str());
    const std::string out_dir = resolved.at("out").get<std::string>();
    if (resolved.at("dry_run").get<bool>()) {
        std::cout << config.str() << "\n";
        std::cout << "dry run: manifest written to " << out_dir << "/manifest.json\n";
        return 0;
    }
    Owned table;
    if (auto s = ids_format_table(results.p, &table.p)) return report(s);
    std::cout << table.str();
    std::cout << "artifacts written to " << out_dir << "\n";
    return 0;
}

int cmd_inspect(const std::string& data, const std::string& scenario, const std::string& schema, bool expect) {
    Owned text;
    int ok = 1;
    if (auto s = ids_inspect_data(data.c_str(), scenario.c_str(), schema.empty() ? nullptr : schema.c_str(), expect ? 1 : 0,
                                  &text.p, &ok))
        return report(s);
    std::cout << text.str();
    if (expect && !ok) {
        std::cerr << "idsbench: dataset counts differ from the expected values\n";
        return IDS_ERR_EXPECTATION;
    }
    return 0;
}

int cmd_plot(const std::string& dir) {
    if (auto s = ids_plot(dir.c_str())) return report(s);
    std::cout << "wrote " << dir << "/roc_all.svg\n";
    return 0;
}

int cmd_schema(const std::string& scenario) {
    Owned text;
    if (auto s = ids_builtin_schema(scenario.c_str(), &text.p)) return report(s);
    std::cout << text.str() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Intrusion-detection classifier benchmark"};
    app.set_version_flag("--version", std::string(ids_version()));
    app.require_subcommand(1);

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "Run a scenario end to end");
    run_cmd->add_option("--scenario", run.scenario, "network, android or iot");
    run_cmd->add_option("--data", run.data, "Dataset CSV");
    run_cmd->add_option("--seed", run.seed, "Base seed (default 42)");
    run_cmd->add_option("--test-fraction", run.test_fraction, "Held-out fraction (default 0.2)");
    run_cmd->add_option("--k", run.k, "Super learner folds (default 5)");
    run_cmd->add_option("--out", run.out, "Output directory");
    run_cmd->add_flag("--dry-run", run.dry_run, "Resolve config and write the manifest only");
    run_cmd->add_option("--config", run.config, "JSON config file; flags override its values");
    run_cmd->add_option("--schema", run.schema, "Schema JSON replacing the built-in one");
    run_cmd->add_option("--workers", run.workers, "Worker threads (results do not depend on it)")
        ->check(CLI::PositiveNumber);

    std::string data, scenario, schema, in_dir;
    bool expect = false;
    auto* inspect_cmd = app.add_subcommand("inspect-data", "Summarize a dataset");
    inspect_cmd->add_option("--data", data, "Dataset CSV")->required();
    inspect_cmd->add_option("--scenario", scenario, "network, android or iot")->required();
    inspect_cmd->add_flag("--expect-paper-counts", expect, "Fail unless counts match the scenario's expected values");
    inspect_cmd->add_option("--schema", schema, "Schema JSON replacing the built-in one");

    auto* plot_cmd = app.add_subcommand("plot", "Re-render roc_all.svg from stored ROC CSVs");
    plot_cmd->add_option("--in", in_dir, "Run output directory")->required();

    std::string schema_scenario;
    auto* schema_cmd = app.add_subcommand("schema", "Print a built-in scenario schema");
    schema_cmd->add_option("--scenario", schema_scenario)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : IDS_ERR_CONFIG;
    }

    if (*run_cmd) return cmd_run(run);
    if (*inspect_cmd) return cmd_inspect(data, scenario, schema, expect);
    if (*plot_cmd) return cmd_plot(in_dir);
    if (*schema_cmd) return cmd_schema(schema_scenario);
    return IDS_ERR_CONFIG;
}
