#include "wxd/error.hpp"
#include "wxd/pipeline.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

namespace {

struct GlobalOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    bool offline = false;
};

wxd::RunConfig load(const GlobalOptions& g) {
    if (g.config.empty()) throw wxd::ConfigError("--config is required");
    std::ifstream in(g.config);
    if (!in) throw wxd::ConfigError("cannot read config " + g.config);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw wxd::ConfigError(g.config + ": " + e.what());
    }
    if (!j.is_object()) throw wxd::ConfigError("config: expected an object");
    // Command-line overrides are applied before validation so derived seeds follow them.
    if (g.seed) j["seed"] = *g.seed;
    if (g.out) j["output_dir"] = *g.out;
    if (g.offline) j["data"]["offline"] = true;
    return wxd::parse_run_config(j);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Weather derivative toolkit: temperature and precipitation models and strangle pricing"};
    app.require_subcommand(1);
    GlobalOptions g;
    app.add_option("--config", g.config, "Run configuration (JSON)");
    app.add_option("--seed", g.seed, "Override the master seed");
    app.add_option("--out", g.out, "Override the output directory");
    app.add_flag("--offline", g.offline, "Use cached data only");

    const std::vector<std::pair<std::string, std::string>> stages = {
        {"fetch", "Load the series (POWER API or CSV) into the output directory"},
        {"stats", "Summary statistics and stationarity/normality tests"},
        {"fit-harmonic", "Fit the harmonic regression"},
        {"fit-arma", "Select and fit the ARMA residual model and forecast"},
        {"train-nn", "Train the neural forecaster and forecast"},
        {"fit-precip", "Fit Gamma wet-day models per season"},
        {"simulate", "Simulate compound Poisson-Gamma months"},
        {"price", "Price the configured strangle"},
        {"compare", "Compare forecasts against the actual series"},
    };
    std::string chosen;
    for (const auto& [name, help] : stages) {
        app.add_subcommand(name, help)->callback([&chosen, n = name] { chosen = n; });
    }
    app.add_subcommand("run", "Run every configured stage and write the manifest")->callback([&chosen] {
        chosen = "run";
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        const wxd::RunConfig config = load(g);
        if (chosen == "run") {
            const wxd::PipelineResult r = wxd::run_pipeline(config);
            if (r.exit_code != 0) {
                std::cerr << "error in stage " << r.failed_stage << ": " << r.error << '\n';
                return r.exit_code;
            }
            std::cout << "wrote " << (config.output_dir / wxd::kManifestName).string() << '\n';
            return 0;
        }
        wxd::run_stage(config, chosen);
        if (chosen == "compare") {
            std::ifstream table(config.output_dir / "comparison.txt");
            if (table) std::cout << table.rdbuf();
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return wxd::exit_code_for(e);
    }
}
