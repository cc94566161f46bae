#include "fixtures.hpp"
#include "wxd/digest.hpp"
#include "wxd/error.hpp"
#include "wxd/pipeline.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace wxd;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json read(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

fs::path temperature_csv() {
    const auto dir = fixtures::scratch_dir("pipeline_data_t");
    const auto s = fixtures::synthetic_temperature(Date::from_ymd(2000, 1, 1), 2922, 21);
    write_csv(s, dir / "temp.csv");
    return dir / "temp.csv";
}

fs::path precipitation_csv() {
    const auto dir = fixtures::scratch_dir("pipeline_data_p");
    const auto s = fixtures::synthetic_precipitation(Date::from_ymd(2000, 1, 1), 2922, 22, 0.4, 0.6, 0.4);
    write_csv(s, dir / "precip.csv");
    return dir / "precip.csv";
}

nlohmann::json temperature_config(const fs::path& csv, const fs::path& out) {
    return {{"location", {{"name", "Toronto"}, {"latitude", 43.6523}, {"longitude", -79.3839}}},
            {"variable", "temperature"},
            {"train", {{"start", "2000-01-01"}, {"end", "2007-11-30"}}},
            {"forecast", {{"start", "2007-12-01"}, {"end", "2007-12-31"}}},
            {"data", {{"csv", csv.string()}}},
            {"arma", {{"p_max", 1}, {"q_max", 1}}},
            {"nn", {{"hidden", {4, 3}}, {"rprop", {{"max_epochs", 40}}}}},
            {"contract", {{"r", 0.0}, {"tau", 0.0833}, {"strike_levels", {75, 25}}}},
            {"seed", 42},
            {"output_dir", out.string()}};
}

nlohmann::json precipitation_config(const fs::path& csv, const fs::path& out) {
    return {{"location", {{"name", "Chicago"}, {"latitude", 41.8781}, {"longitude", -87.6298}}},
            {"variable", "precipitation"},
            {"train", {{"start", "2000-01-01"}, {"end", "2007-11-30"}}},
            {"forecast", {{"start", "2007-12-01"}, {"end", "2007-12-31"}}},
            {"data", {{"csv", csv.string()}}},
            {"precipitation", {{"season", "winter"}, {"n_sim", 500}}},
            {"contract", {{"r", 0.05}, {"tau", 0.0833}, {"d_call", 10}, {"d_put", 10}, {"strike_levels", {75, 25}}}},
            {"seed", 7},
            {"output_dir", out.string()}};
}

void check_manifest_digests(const fs::path& out) {
    const auto m = read(out / kManifestName);
    CHECK(m.at("status") == "ok");
    for (const auto& [stage, entry] : m.at("stages").items()) {
        CHECK(entry.at("status") == "ok");
        for (const auto& a : entry.at("artifacts")) {
            CHECK(sha256_file(out / a.at("path").get<std::string>()) == a.at("sha256").get<std::string>());
        }
    }
}

}  // namespace

TEST_CASE("config validation names the offending field") {
    const auto csv = temperature_csv();
    auto j = temperature_config(csv, "unused");
    CHECK_NOTHROW(parse_run_config(j));

    auto bad = j;
    bad["arma"]["p_maxx"] = 2;
    try {
        parse_run_config(bad);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("config.arma.p_maxx") != std::string::npos);
    }
    bad = j;
    bad["arma"]["p_max"] = "four";
    CHECK_THROWS_AS(parse_run_config(bad), ConfigError);
    bad = j;
    bad.erase("seed");
    CHECK_THROWS_AS(parse_run_config(bad), ConfigError);
    bad = j;
    bad["forecast"]["start"] = "2007-12-02";
    CHECK_THROWS_AS(parse_run_config(bad), ConfigError);
    bad = j;
    bad["contract"]["k_call"] = 1.0;
    CHECK_THROWS_AS(parse_run_config(bad), ConfigError);

    const RunConfig c = parse_run_config(j);
    CHECK(c.contract.n_days == 31);
    const RunConfig again = parse_run_config(to_json(c));
    CHECK(to_json(again) == to_json(c));
}

TEST_CASE("comparison table") {
    const std::vector<Observation> obs{{Date::from_ymd(2023, 12, 1), 1.0}, {Date::from_ymd(2023, 12, 2), 3.0}};
    const DailySeries actual(toronto(), Variable::temperature_c, obs);
    Forecast a;
    a.dates = {Date::from_ymd(2023, 12, 1), Date::from_ymd(2023, 12, 2)};
    a.mean = {2.0, 5.0};
    const auto table = emit_comparison({{"m", a}}, actual);
    REQUIRE(table.rows.size() == 2);
    CHECK(table.rows[0].method == "m");
    CHECK(table.rows[0].mse == 2.5);
    CHECK(table.rows[0].pr_index == 3.5);
    CHECK(table.rows[1].method == "actual");
    CHECK(table.rows[1].pr_index == 2.0);
    CHECK(table.to_csv().rfind("method,mse,pr_index\n", 0) == 0);

    Forecast shifted = a;
    shifted.dates[1] = Date::from_ymd(2023, 12, 3);
    try {
        emit_comparison({{"m", shifted}}, actual);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("2023-12-03") != std::string::npos);
    }
}

TEST_CASE("temperature pipeline end to end") {
    const auto csv = temperature_csv();
    const auto out = fixtures::scratch_dir("pipeline_temp");
    const RunConfig c = parse_run_config(temperature_config(csv, out));
    const auto res = run_pipeline(c);
    REQUIRE_MESSAGE(res.exit_code == 0, res.error);
    for (const char* f : {"train.csv", "actual.csv", "stats.json", "harmonic.json", "arma_order_table.csv", "arma.json",
                          "forecast_harmonic.json", "forecast_harmonic_arma.json", "nn_model.json",
                          "forecast_neural_network.json", "comparison.csv", "comparison.txt", "price_hba.json",
                          "price_forecast_neural_network.json", "payoff_surface.csv"}) {
        CHECK_MESSAGE(fs::exists(out / f), f);
    }
    check_manifest_digests(out);
    const auto cmp = slurp(out / "comparison.csv");
    CHECK(cmp.find("harmonic_arma,") != std::string::npos);
    CHECK(cmp.find("actual,") != std::string::npos);

    // Same config, second directory: identical artifacts.
    const auto out2 = fixtures::scratch_dir("pipeline_temp2");
    const RunConfig c2 = parse_run_config(temperature_config(csv, out2));
    REQUIRE(run_pipeline(c2).exit_code == 0);
    for (const auto& e : fs::directory_iterator(out)) {
        const auto name = e.path().filename();
        if (name == kManifestName) continue;
        CHECK_MESSAGE(slurp(e.path()) == slurp(out2 / name), name.string());
    }

    // Running the stages one at a time gives the same artifacts as `run`.
    const auto out3 = fixtures::scratch_dir("pipeline_temp3");
    const RunConfig c3 = parse_run_config(temperature_config(csv, out3));
    for (const auto& stage : default_stages(Variable::temperature_c)) run_stage(c3, stage);
    for (const auto& e : fs::directory_iterator(out)) {
        const auto name = e.path().filename();
        if (name == kManifestName) continue;
        CHECK_MESSAGE(slurp(e.path()) == slurp(out3 / name), name.string());
    }
}

TEST_CASE("precipitation pipeline end to end") {
    const auto csv = precipitation_csv();
    const auto out = fixtures::scratch_dir("pipeline_precip");
    const RunConfig c = parse_run_config(precipitation_config(csv, out));
    const auto res = run_pipeline(c);
    REQUIRE_MESSAGE(res.exit_code == 0, res.error);
    check_manifest_digests(out);
    const auto fits = read(out / "gamma_fits.json");
    CHECK(fits.at("selected").at("alpha").get<double>() == doctest::Approx(0.6).epsilon(0.15));
    CHECK(fits.at("lambda").get<double>() == doctest::Approx(0.4 * 31).epsilon(0.2));
    const auto cf = read(out / "price_closed_form.json");
    const auto mc = read(out / "price_monte_carlo.json");
    CHECK(cf.at("price").get<double>() > 0.0);
    CHECK(mc.at("std_error").get<double>() > 0.0);
    CHECK(std::abs(cf.at("components").at("poisson_price").get<double>() - mc.at("price").get<double>()) <
          4.0 * mc.at("std_error").get<double>());
    CHECK(fs::exists(out / "simulation_paths.csv"));
}

TEST_CASE("failures are recorded with exit codes") {
    const auto csv = temperature_csv();
    const auto out = fixtures::scratch_dir("pipeline_fail");
    auto j = temperature_config(csv, out);
    j["train"]["start"] = "1990-01-01";
    const RunConfig c = parse_run_config(j);
    const auto res = run_pipeline(c);
    CHECK(res.exit_code == 3);
    CHECK(res.failed_stage == "fetch");
    const auto m = read(out / kManifestName);
    CHECK(m.at("status") == "failed");
    CHECK(m.at("failed_stage") == "fetch");

    CHECK(exit_code_for(ConfigError("x")) == 2);
    CHECK(exit_code_for(DataError("x")) == 3);
    CHECK(exit_code_for(NumericalError("x")) == 4);
    CHECK(exit_code_for(std::runtime_error("x")) == 1);

    // A stage whose inputs are missing fails with a data error.
    const auto empty = fixtures::scratch_dir("pipeline_missing");
    const RunConfig c2 = parse_run_config(temperature_config(csv, empty));
    CHECK_THROWS(run_stage(c2, "fit-arma"));
}
