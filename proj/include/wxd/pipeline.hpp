#pragma once

#include "wxd/climate_data.hpp"
#include "wxd/forecast.hpp"
#include "wxd/nn.hpp"
#include "wxd/pricing.hpp"

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace wxd {

/// Declarative run description, read from JSON.
///
/// {
///   "location": {"name": "Toronto", "latitude": 43.6523, "longitude": -79.3839},
///   "variable": "temperature",
///   "train": {"start": "1981-01-01", "end": "2023-11-30"},
///   "forecast": {"start": "2023-12-01", "end": "2023-12-31"},
///   "data": {"csv": "toronto.csv", "cache_dir": "cache", "offline": false},
///   "arma": {"p_max": 4, "q_max": 4},
///   "nn": {"hidden": [7, 5, 3], "rprop": {"max_epochs": 2000}},
///   "precipitation": {"season": "winter", "n_sim": 1000, "threshold": 0.01},
///   "contract": {"r": 0.0, "tau": 0.0833, "strike_levels": [75, 25]},
///   "surface_levels": [50, 60, 70, 80, 90, 99],
///   "band_levels": [0.95],
///   "seed": 42,
///   "output_dir": "out"
/// }
struct RunConfig {
    Location location;
    Variable variable = Variable::temperature_c;
    Date train_start, train_end;
    Date forecast_start, forecast_end;

    std::optional<std::filesystem::path> data_csv;  // local series instead of the POWER API
    std::filesystem::path cache_dir = "cache";
    bool offline = false;

    int arma_p_max = 4;
    int arma_q_max = 4;

    std::vector<std::size_t> nn_hidden{7, 5, 3};
    nn::RpropConfig rprop;

    Season precip_season = Season::winter;
    std::size_t precip_n_sim = 1000;
    double wet_threshold = kWetDayThreshold;

    ContractSpec contract;
    std::optional<std::pair<double, double>> strike_levels;  // (call, put) percentiles of history

    std::vector<double> surface_levels{50, 60, 70, 80, 90, 99};
    std::vector<double> band_levels{0.95};

    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "out";
    std::vector<std::string> stages;  // empty = all stages for the variable
};

/// Parse and validate. Unknown fields, wrong types and missing required
/// fields raise ConfigError naming the JSON path (e.g. "config.arma.p_max").
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& c);

struct ComparisonRow {
    std::string method;
    double mse = 0.0;
    double pr_index = 0.0;
};

struct ComparisonTable {
    std::vector<ComparisonRow> rows;  // one per method, then "actual" with mse 0
    std::string to_csv() const;
    std::string to_text() const;
};

/// Per-method MSE and Pacific Rim index against the actual series. Every
/// forecast must cover exactly the actual dates; the first mismatch is named
/// in the DataError.
ComparisonTable emit_comparison(const std::map<std::string, Forecast>& forecasts, const DailySeries& actual);

/// Stage names in execution order for a variable.
std::vector<std::string> default_stages(Variable variable);

/// Run one stage. Inputs come from the artifacts of earlier stages in the
/// output directory; outputs are written there and recorded in the manifest.
void run_stage(const RunConfig& config, const std::string& stage);

struct PipelineResult {
    int exit_code = 0;
    std::string failed_stage;
    std::string error;
};

/// Exit code for an exception: 2 ConfigError, 3 DataError, 4 NumericalError, 1 otherwise.
int exit_code_for(const std::exception& e);

/// All configured stages in order. On failure the manifest is marked
/// "failed" with the stage name and the artifacts written so far are kept.
PipelineResult run_pipeline(const RunConfig& config);

inline constexpr const char* kManifestName = "manifest.json";

}  // namespace wxd
