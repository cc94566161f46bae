#include "wxd/pipeline.hpp"

#include "wxd/arma.hpp"
#include "wxd/digest.hpp"
#include "wxd/error.hpp"
#include "wxd/harmonic_regression.hpp"
#include "wxd/neural_forecaster.hpp"
#include "wxd/power_client.hpp"
#include "wxd/precipitation_model.hpp"
#include "wxd/rng.hpp"
#include "wxd/series_tests.hpp"
#include "wxd/special_functions.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace wxd {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------- config

namespace {

/// Typed access to one JSON object with unknown-key detection.
class Section {
public:
    Section(const json& j, std::string path, std::set<std::string> allowed) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
        for (const auto& [key, value] : j_.items()) {
            if (!allowed.count(key)) throw ConfigError(path_ + "." + key + ": unknown field");
        }
    }

    bool has(const std::string& key) const { return j_.contains(key); }
    std::string path(const std::string& key) const { return path_ + "." + key; }
    const json& raw(const std::string& key) const {
        if (!has(key)) throw ConfigError(path(key) + ": missing required field");
        return j_.at(key);
    }

    double number(const std::string& key) const {
        const json& v = raw(key);
        if (!v.is_number()) throw ConfigError(path(key) + ": expected a number");
        return v.get<double>();
    }
    double number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

    long long integer(const std::string& key) const {
        const json& v = raw(key);
        if (!v.is_number_integer()) throw ConfigError(path(key) + ": expected an integer");
        return v.get<long long>();
    }
    long long integer(const std::string& key, long long fallback) const { return has(key) ? integer(key) : fallback; }

    std::string text(const std::string& key) const {
        const json& v = raw(key);
        if (!v.is_string()) throw ConfigError(path(key) + ": expected a string");
        return v.get<std::string>();
    }
    std::string text(const std::string& key, const std::string& fallback) const {
        return has(key) ? text(key) : fallback;
    }

    bool boolean(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const json& v = raw(key);
        if (!v.is_boolean()) throw ConfigError(path(key) + ": expected true or false");
        return v.get<bool>();
    }

    Date date(const std::string& key) const {
        try {
            return Date::parse(text(key));
        } catch (const DataError& e) {
            throw ConfigError(path(key) + ": " + e.what());
        }
    }

    std::vector<double> numbers(const std::string& key) const {
        const json& v = raw(key);
        if (!v.is_array()) throw ConfigError(path(key) + ": expected an array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) throw ConfigError(path(key) + "[" + std::to_string(i) + "]: expected a number");
            out.push_back(v[i].get<double>());
        }
        return out;
    }

    Section child(const std::string& key, std::set<std::string> allowed) const {
        return Section(raw(key), path(key), std::move(allowed));
    }

private:
    const json& j_;
    std::string path_;
};

void require(bool ok, const std::string& path, const std::string& message) {
    if (!ok) throw ConfigError(path + ": " + message);
}

}  // namespace

RunConfig parse_run_config(const json& j) {
    const Section root(j, "config",
                       {"location", "variable", "train", "forecast", "data", "arma", "nn", "precipitation",
                        "contract", "surface_levels", "band_levels", "seed", "output_dir", "stages"});
    RunConfig c;

    const Section loc = root.child("location", {"name", "latitude", "longitude"});
    c.location.name = loc.text("name", "site");
    c.location.latitude = loc.number("latitude");
    c.location.longitude = loc.number("longitude");
    require(c.location.latitude >= -90 && c.location.latitude <= 90, loc.path("latitude"), "outside [-90, 90]");
    require(c.location.longitude >= -180 && c.location.longitude <= 180, loc.path("longitude"),
            "outside [-180, 180]");

    try {
        c.variable = variable_from_string(root.text("variable"));
    } catch (const DataError& e) {
        throw ConfigError(root.path("variable") + ": " + e.what());
    }

    const Section train = root.child("train", {"start", "end"});
    c.train_start = train.date("start");
    c.train_end = train.date("end");
    require(c.train_start < c.train_end, train.path("end"), "must be after train.start");
    const Section fc = root.child("forecast", {"start", "end"});
    c.forecast_start = fc.date("start");
    c.forecast_end = fc.date("end");
    require(c.forecast_start == c.train_end + 1, fc.path("start"), "must be the day after train.end");
    require(!(c.forecast_end < c.forecast_start), fc.path("end"), "must not precede forecast.start");

    if (root.has("data")) {
        const Section data = root.child("data", {"csv", "cache_dir", "offline"});
        if (data.has("csv")) {
            c.data_csv = data.text("csv");
            require(fs::exists(*c.data_csv), data.path("csv"), "file not found: " + c.data_csv->string());
        }
        c.cache_dir = data.text("cache_dir", c.cache_dir.string());
        c.offline = data.boolean("offline", false);
    }

    if (root.has("arma")) {
        const Section arma = root.child("arma", {"p_max", "q_max"});
        c.arma_p_max = static_cast<int>(arma.integer("p_max", c.arma_p_max));
        c.arma_q_max = static_cast<int>(arma.integer("q_max", c.arma_q_max));
        require(c.arma_p_max >= 0 && c.arma_p_max <= 5, arma.path("p_max"), "must lie in [0, 5]");
        require(c.arma_q_max >= 0 && c.arma_q_max <= 5, arma.path("q_max"), "must lie in [0, 5]");
    }

    if (root.has("nn")) {
        const Section nn = root.child("nn", {"hidden", "rprop"});
        if (nn.has("hidden")) {
            c.nn_hidden.clear();
            for (double h : nn.numbers("hidden")) {
                require(h >= 1 && h == std::floor(h), nn.path("hidden"), "layer sizes must be positive integers");
                c.nn_hidden.push_back(static_cast<std::size_t>(h));
            }
        }
        if (nn.has("rprop")) {
            const Section rp = nn.child("rprop", {"eta_plus", "eta_minus", "delta_init", "delta_max", "delta_min",
                                                  "max_epochs"});
            c.rprop.eta_plus = rp.number("eta_plus", c.rprop.eta_plus);
            c.rprop.eta_minus = rp.number("eta_minus", c.rprop.eta_minus);
            c.rprop.delta_init = rp.number("delta_init", c.rprop.delta_init);
            c.rprop.delta_max = rp.number("delta_max", c.rprop.delta_max);
            c.rprop.delta_min = rp.number("delta_min", c.rprop.delta_min);
            c.rprop.max_epochs = static_cast<int>(rp.integer("max_epochs", c.rprop.max_epochs));
            try {
                c.rprop.validate();
            } catch (const std::invalid_argument& e) {
                throw ConfigError(nn.path("rprop") + ": " + e.what());
            }
        }
    }

    if (root.has("precipitation")) {
        const Section pr = root.child("precipitation", {"season", "n_sim", "threshold"});
        try {
            c.precip_season = season_from_string(pr.text("season", "winter"));
        } catch (const DataError& e) {
            throw ConfigError(pr.path("season") + ": " + e.what());
        }
        const long long n_sim = pr.integer("n_sim", static_cast<long long>(c.precip_n_sim));
        require(n_sim >= 100, pr.path("n_sim"), "must be at least 100");
        c.precip_n_sim = static_cast<std::size_t>(n_sim);
        c.wet_threshold = pr.number("threshold", c.wet_threshold);
        require(c.wet_threshold > 0, pr.path("threshold"), "must be positive");
    }

    const Section ct = root.child("contract", {"r", "tau", "d_call", "d_put", "k_call", "k_put", "strike_levels"});
    c.contract.kind = c.variable == Variable::temperature_c ? ContractKind::temperature : ContractKind::precipitation;
    c.contract.r = ct.number("r");
    c.contract.tau = ct.number("tau");
    require(c.contract.tau >= 0, ct.path("tau"), "must be non-negative");
    const double tick = c.variable == Variable::temperature_c ? kTickCelsius : 1.0;
    c.contract.d_call = ct.number("d_call", tick);
    c.contract.d_put = ct.number("d_put", tick);
    require(c.contract.d_call >= 0, ct.path("d_call"), "must be non-negative");
    require(c.contract.d_put >= 0, ct.path("d_put"), "must be non-negative");
    c.contract.n_days = (c.forecast_end - c.forecast_start) + 1;
    const bool explicit_strikes = ct.has("k_call") || ct.has("k_put");
    if (ct.has("strike_levels")) {
        require(!explicit_strikes, ct.path("strike_levels"), "give either strike_levels or k_call/k_put");
        const auto lv = ct.numbers("strike_levels");
        require(lv.size() == 2, ct.path("strike_levels"), "expected [call_level, put_level]");
        for (double l : lv) require(l >= 0 && l <= 100, ct.path("strike_levels"), "levels must lie in [0, 100]");
        require(lv[0] >= lv[1], ct.path("strike_levels"), "call level must not be below the put level");
        c.strike_levels = std::make_pair(lv[0], lv[1]);
    } else {
        c.contract.k_call = ct.number("k_call");
        c.contract.k_put = ct.number("k_put");
        require(c.contract.k_call >= c.contract.k_put, ct.path("k_call"), "must not be below k_put");
    }

    if (root.has("surface_levels")) {
        c.surface_levels = root.numbers("surface_levels");
        require(!c.surface_levels.empty(), root.path("surface_levels"), "must not be empty");
        for (double l : c.surface_levels) {
            require(l >= 0 && l <= 100, root.path("surface_levels"), "levels must lie in [0, 100]");
        }
    }
    if (root.has("band_levels")) {
        c.band_levels = root.numbers("band_levels");
        for (double l : c.band_levels) require(l > 0 && l < 1, root.path("band_levels"), "levels must lie in (0, 1)");
    }

    const long long seed = root.integer("seed");
    require(seed >= 0, root.path("seed"), "must be non-negative");
    c.seed = static_cast<std::uint64_t>(seed);
    c.rprop.seed = derive_seed(c.seed, "nn");
    c.output_dir = root.text("output_dir", "out");

    if (root.has("stages")) {
        const json& st = root.raw("stages");
        require(st.is_array(), root.path("stages"), "expected an array of stage names");
        const auto valid = default_stages(c.variable);
        for (const auto& s : st) {
            require(s.is_string(), root.path("stages"), "expected stage names");
            const auto name = s.get<std::string>();
            require(std::find(valid.begin(), valid.end(), name) != valid.end(), root.path("stages"),
                    "stage '" + name + "' does not apply to " + std::string(to_string(c.variable)));
            c.stages.push_back(name);
        }
    }
    return c;
}

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return parse_run_config(j);
}

json to_json(const RunConfig& c) {
    json j{{"location", {{"name", c.location.name}, {"latitude", c.location.latitude},
                         {"longitude", c.location.longitude}}},
           {"variable", std::string(to_string(c.variable))},
           {"train", {{"start", c.train_start.iso()}, {"end", c.train_end.iso()}}},
           {"forecast", {{"start", c.forecast_start.iso()}, {"end", c.forecast_end.iso()}}},
           {"arma", {{"p_max", c.arma_p_max}, {"q_max", c.arma_q_max}}},
           {"nn", {{"hidden", c.nn_hidden},
                   {"rprop", {{"eta_plus", c.rprop.eta_plus}, {"eta_minus", c.rprop.eta_minus},
                              {"delta_init", c.rprop.delta_init}, {"delta_max", c.rprop.delta_max},
                              {"delta_min", c.rprop.delta_min}, {"max_epochs", c.rprop.max_epochs}}}}},
           {"precipitation", {{"season", std::string(to_string(c.precip_season))}, {"n_sim", c.precip_n_sim},
                              {"threshold", c.wet_threshold}}},
           {"surface_levels", c.surface_levels},
           {"band_levels", c.band_levels},
           {"seed", c.seed},
           {"output_dir", c.output_dir.string()}};
    json contract{{"r", c.contract.r}, {"tau", c.contract.tau}, {"d_call", c.contract.d_call},
                  {"d_put", c.contract.d_put}};
    if (c.strike_levels) {
        contract["strike_levels"] = {c.strike_levels->first, c.strike_levels->second};
    } else {
        contract["k_call"] = c.contract.k_call;
        contract["k_put"] = c.contract.k_put;
    }
    j["contract"] = contract;
    json data{{"cache_dir", c.cache_dir.string()}, {"offline", c.offline}};
    if (c.data_csv) data["csv"] = c.data_csv->string();
    j["data"] = data;
    if (!c.stages.empty()) j["stages"] = c.stages;
    return j;
}

// ---------------------------------------------------------------- comparison

ComparisonTable emit_comparison(const std::map<std::string, Forecast>& forecasts, const DailySeries& actual) {
    if (actual.empty()) throw DataError("no actual values to compare against");
    const std::vector<double> values = actual.values();
    ComparisonTable table;
    for (const auto& [method, f] : forecasts) {
        const std::size_t n = std::min(f.dates.size(), actual.size());
        for (std::size_t i = 0; i < n; ++i) {
            if (f.dates[i] != actual[i].date) {
                throw DataError("forecast '" + method + "' date " + f.dates[i].iso() + " does not match actual date " +
                                actual[i].date.iso() + " at position " + std::to_string(i));
            }
        }
        if (f.dates.size() != actual.size()) {
            const std::string first = f.dates.size() > n ? f.dates[n].iso() : actual[n].date.iso();
            throw DataError("forecast '" + method + "' covers " + std::to_string(f.dates.size()) +
                            " dates but actual has " + std::to_string(actual.size()) + "; first unmatched date " +
                            first);
        }
        table.rows.push_back({method, forecast_mse(f.mean, values), pacific_rim_index(f.mean)});
    }
    table.rows.push_back({"actual", 0.0, pacific_rim_index(values)});
    return table;
}

std::string ComparisonTable::to_csv() const {
    std::ostringstream out;
    out << "method,mse,pr_index\n" << std::setprecision(10);
    for (const auto& r : rows) out << r.method << ',' << r.mse << ',' << r.pr_index << '\n';
    return out.str();
}

std::string ComparisonTable::to_text() const {
    std::size_t width = 6;
    for (const auto& r : rows) width = std::max(width, r.method.size());
    std::ostringstream out;
    out << std::left << std::setw(static_cast<int>(width)) << "method" << "  " << std::right << std::setw(12) << "mse"
        << "  " << std::setw(12) << "pr_index" << '\n';
    out << std::fixed << std::setprecision(6);
    for (const auto& r : rows) {
        out << std::left << std::setw(static_cast<int>(width)) << r.method << "  " << std::right << std::setw(12);
        if (r.method == "actual") out << "-";
        else out << r.mse;
        out << "  " << std::setw(12) << r.pr_index << '\n';
    }
    return out.str();
}

// ---------------------------------------------------------------- stages

std::vector<std::string> default_stages(Variable variable) {
    if (variable == Variable::temperature_c) {
        return {"fetch", "stats", "fit-harmonic", "fit-arma", "train-nn", "compare", "price"};
    }
    return {"fetch", "stats", "fit-precip", "simulate", "price"};
}

namespace {

const char* kTrainCsv = "train.csv";
const char* kActualCsv = "actual.csv";

fs::path out_path(const RunConfig& c, const std::string& name) { return c.output_dir / name; }

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("missing artifact " + path.string() + " (run the earlier stage first)");
    return json::parse(in);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("write failed for " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json load_manifest(const RunConfig& c) {
    const fs::path p = out_path(c, kManifestName);
    if (!fs::exists(p)) return json{{"status", "partial"}, {"stages", json::object()}};
    return read_json(p);
}

void save_manifest(const RunConfig& c, const json& m) { write_json(out_path(c, kManifestName), m); }

json artifact_entry(const RunConfig& c, const std::string& name) {
    return {{"path", name}, {"sha256", sha256_file(out_path(c, name))}};
}

/// Artifacts and inputs of one stage, recorded in the manifest on completion.
struct StageRecord {
    std::vector<std::string> outputs;
    std::vector<std::string> inputs;
    json notes = json::object();
};

DailySeries load_train(const RunConfig& c) {
    return load_csv(out_path(c, kTrainCsv), c.variable, c.location);
}

std::optional<DailySeries> load_actual(const RunConfig& c) {
    const fs::path p = out_path(c, kActualCsv);
    if (!fs::exists(p)) return std::nullopt;
    return load_csv(p, c.variable, c.location);
}

std::vector<Date> forecast_dates(const RunConfig& c) {
    std::vector<Date> out;
    for (Date d = c.forecast_start; !(c.forecast_end < d); d = d + 1) out.push_back(d);
    return out;
}

/// Index value of the contract window in each earlier year with complete data.
std::vector<double> historical_indices(const RunConfig& c, const DailySeries& series) {
    std::vector<double> out;
    const int span_years = c.forecast_end.year() - c.forecast_start.year();
    for (int y = series[0].date.year(); y < c.forecast_start.year(); ++y) {
        Date start, end;
        try {
            start = Date::from_ymd(y, c.forecast_start.month(), c.forecast_start.day());
            end = Date::from_ymd(y + span_years, c.forecast_end.month(), c.forecast_end.day());
        } catch (const DataError&) {
            continue;  // Feb 29 in a non-leap year
        }
        const DailySeries window = series.slice(start, end);
        if (static_cast<std::int32_t>(window.size()) != (end - start) + 1) continue;
        out.push_back(pacific_rim_index(window.values()));
    }
    return out;
}

ContractSpec resolve_contract(const RunConfig& c, const std::vector<double>& history, json& notes) {
    ContractSpec spec = c.contract;
    if (c.strike_levels) {
        spec.k_call = percentile_strike(history, c.strike_levels->first);
        spec.k_put = percentile_strike(history, c.strike_levels->second);
    }
    spec.validate();
    notes["contract"] = spec;
    return spec;
}

Forecast harmonic_forecast(const HarmonicFit& fit, const std::vector<Date>& dates, const std::vector<double>& levels) {
    Forecast f;
    f.dates = dates;
    f.mean = predict_harmonic(fit, dates);
    const double sd = std::sqrt(fit.residual_variance);
    for (double level : levels) {
        const double z = normal_quantile(0.5 * (1.0 + level));
        Band b;
        for (double m : f.mean) {
            b.lower.push_back(m - z * sd);
            b.upper.push_back(m + z * sd);
        }
        f.bands[level] = std::move(b);
    }
    return f;
}

void stage_fetch(const RunConfig& c, StageRecord& rec) {
    DailySeries train, actual;
    bool have_actual = false;
    if (c.data_csv) {
        const DailySeries all = load_csv(*c.data_csv, c.variable, c.location);
        rec.notes["source"] = {{"csv", c.data_csv->string()}, {"sha256", sha256_file(*c.data_csv)}};
        train = all.slice(c.train_start, c.train_end);
        actual = all.slice(c.forecast_start, c.forecast_end);
        have_actual = !actual.empty();
    } else {
        PowerClientOptions opts;
        opts.cache_dir = c.cache_dir;
        opts.offline = c.offline;
        const PowerClient client(opts);
        train = client.fetch(c.location, c.train_start, c.train_end, c.variable);
        rec.notes["source"] = {{"url", PowerClient::request_url(c.location, c.train_start, c.train_end, c.variable)}};
        try {
            actual = client.fetch(c.location, c.forecast_start, c.forecast_end, c.variable);
            have_actual = !actual.empty();
        } catch (const DataError& e) {
            rec.notes["actual_unavailable"] = e.what();
        }
    }
    require_coverage(train, c.train_start, c.train_end);
    write_csv(train, out_path(c, kTrainCsv));
    rec.outputs.push_back(kTrainCsv);
    if (have_actual) {
        write_csv(actual, out_path(c, kActualCsv));
        rec.outputs.push_back(kActualCsv);
    }
    rec.notes["dropped_sentinels"] = train.dropped_count();
    rec.notes["gaps"] = train.gap_count();
}

void stage_stats(const RunConfig& c, StageRecord& rec) {
    const DailySeries train = load_train(c);
    rec.inputs.push_back(kTrainCsv);
    const StatsSummary s = summary_stats(train);
    json out{{"n", train.size()}, {"min", s.min}, {"max", s.max}, {"mean", s.mean}, {"std_dev", s.std_dev}};
    out["skewness"] = s.skewness ? json(*s.skewness) : json(nullptr);
    out["excess_kurtosis"] = s.excess_kurtosis ? json(*s.excess_kurtosis) : json(nullptr);
    const std::vector<double> v = train.values();
    if (c.variable == Variable::temperature_c) {
        const AdfResult adf = adf_test(v);
        out["adf"] = {{"statistic", adf.statistic}, {"lags", adf.lags}, {"critical_value_5", adf.critical_value_5},
                      {"reject_unit_root", adf.reject_unit_root}};
        const KsResult ks = ks_normal_test(v);
        out["ks_normal"] = {{"statistic", ks.statistic}, {"p_value", ks.p_value},
                            {"parameters_estimated", ks.parameters_estimated}};
    } else {
        json rates = json::object();
        for (int m = 1; m <= 12; ++m) {
            try {
                rates[std::to_string(m)] = rainy_day_rate(train, m, c.wet_threshold);
            } catch (const DataError&) {
                rates[std::to_string(m)] = nullptr;
            }
        }
        out["rainy_day_rate"] = rates;
    }
    write_json(out_path(c, "stats.json"), out);
    rec.outputs.push_back("stats.json");
}

void stage_fit_harmonic(const RunConfig& c, StageRecord& rec) {
    const DailySeries train = load_train(c);
    rec.inputs.push_back(kTrainCsv);
    const HarmonicFit fit = fit_harmonic(train);
    write_json(out_path(c, "harmonic.json"), fit);
    rec.outputs.push_back("harmonic.json");
}

void stage_fit_arma(const RunConfig& c, StageRecord& rec) {
    const DailySeries train = load_train(c);
    HarmonicFit fit;
    from_json(read_json(out_path(c, "harmonic.json")), fit);
    rec.inputs = {kTrainCsv, "harmonic.json"};
    const std::vector<double> resid = harmonic_residuals(fit, train);
    const OrderSelection sel = select_order(resid, c.arma_p_max, c.arma_q_max);
    write_text(out_path(c, "arma_order_table.csv"), order_table_csv(sel));
    const ArmaModel model = fit_arma(resid, sel.p, sel.q);
    write_json(out_path(c, "arma.json"), model);
    const std::vector<Date> dates = forecast_dates(c);
    write_json(out_path(c, "forecast_harmonic.json"), harmonic_forecast(fit, dates, c.band_levels));
    write_json(out_path(c, "forecast_harmonic_arma.json"),
               forecast_arma(model, fit, c.forecast_start, dates.size(), c.band_levels));
    rec.outputs = {"arma_order_table.csv", "arma.json", "forecast_harmonic.json", "forecast_harmonic_arma.json"};
    rec.notes["order"] = {sel.p, sel.q};
}

void stage_train_nn(const RunConfig& c, StageRecord& rec) {
    const DailySeries train = load_train(c);
    HarmonicFit fit;
    from_json(read_json(out_path(c, "harmonic.json")), fit);
    rec.inputs = {kTrainCsv, "harmonic.json"};
    const auto rows = build_features(train, fit);
    NeuralForecasterOptions opts;
    opts.rprop = c.rprop;
    opts.hidden = c.nn_hidden;
    const NeuralForecasterFit nf = fit_neural_forecaster(rows, opts);
    json model = nf.model;
    model["test_year"] = nf.test_year;
    model["validation_year"] = nf.validation_year;
    model["test_mse"] = nf.test_mse;
    write_json(out_path(c, "nn_model.json"), model);
    const auto frows = build_forecast_rows(train, fit, forecast_dates(c));
    write_json(out_path(c, "forecast_neural_network.json"), neural_forecast(nf, frows, c.band_levels));
    rec.outputs = {"nn_model.json", "forecast_neural_network.json"};
}

std::map<std::string, Forecast> load_forecasts(const RunConfig& c, StageRecord& rec) {
    std::map<std::string, Forecast> out;
    for (const std::string name : {"harmonic", "harmonic_arma", "neural_network"}) {
        const std::string file = "forecast_" + name + ".json";
        if (!fs::exists(out_path(c, file))) continue;
        Forecast f;
        from_json(read_json(out_path(c, file)), f);
        out[name] = std::move(f);
        rec.inputs.push_back(file);
    }
    return out;
}

void stage_compare(const RunConfig& c, StageRecord& rec) {
    const auto actual = load_actual(c);
    if (!actual) {
        rec.notes["skipped"] = "no actual data for the forecast window";
        return;
    }
    rec.inputs.push_back(kActualCsv);
    const auto forecasts = load_forecasts(c, rec);
    if (forecasts.empty()) throw DataError("no forecasts to compare (run fit-arma or train-nn first)");
    const ComparisonTable table = emit_comparison(forecasts, *actual);
    write_text(out_path(c, "comparison.csv"), table.to_csv());
    write_text(out_path(c, "comparison.txt"), table.to_text());
    rec.outputs = {"comparison.csv", "comparison.txt"};
}

void stage_price_temperature(const RunConfig& c, StageRecord& rec) {
    const DailySeries train = load_train(c);
    rec.inputs.push_back(kTrainCsv);
    const std::vector<double> history = historical_indices(c, train);
    if (history.size() < 2) throw DataError("fewer than two historical contract periods in the training data");
    const ContractSpec spec = resolve_contract(c, history, rec.notes);

    std::vector<double> payoffs;
    for (double xi : history) payoffs.push_back(strangle_payoff(xi, spec));
    write_json(out_path(c, "price_hba.json"), hba_price(payoffs, spec.r, spec.tau));
    rec.outputs.push_back("price_hba.json");

    const auto forecasts = load_forecasts(c, rec);
    for (const auto& [name, f] : forecasts) {
        const std::string file = "price_forecast_" + name + ".json";
        write_json(out_path(c, file), forecast_plugin_price(f.mean, spec));
        rec.outputs.push_back(file);
    }
    // The surface uses the neural forecast when present, else the best available.
    for (const std::string name : {"neural_network", "harmonic_arma", "harmonic"}) {
        auto it = forecasts.find(name);
        if (it == forecasts.end()) continue;
        write_surface_csv(temp_payoff_surface(it->second.mean, history, c.surface_levels, spec),
                          out_path(c, "payoff_surface.csv"));
        rec.outputs.push_back("payoff_surface.csv");
        rec.notes["surface_forecast"] = name;
        break;
    }
}

struct PrecipParams {
    double lambda = 0.0;
    GammaFit fit;
};

PrecipParams precip_params(const RunConfig& c) {
    const json j = read_json(out_path(c, "gamma_fits.json"));
    PrecipParams p;
    p.lambda = j.at("lambda").get<double>();
    const json& f = j.at("selected");
    p.fit.alpha = f.at("alpha").get<double>();
    p.fit.beta = f.at("beta").get<double>();
    return p;
}

void stage_fit_precip(const RunConfig& c, StageRecord& rec) {
    const DailySeries train = load_train(c);
    rec.inputs.push_back(kTrainCsv);
    const auto fits = seasonal_fits(train, c.wet_threshold);
    json out{{"seasons", json::object()}};
    for (const auto& [season, entry] : fits) {
        out["seasons"][std::string(to_string(season))] =
            entry.fit ? json(*entry.fit) : json{{"error", entry.error}};
    }
    const auto& chosen = fits.at(c.precip_season);
    if (!chosen.fit) {
        throw DataError("gamma fit failed for season " + std::string(to_string(c.precip_season)) + ": " +
                        chosen.error);
    }
    out["selected_season"] = std::string(to_string(c.precip_season));
    out["selected"] = *chosen.fit;
    out["lambda"] = rainy_day_rate(train, c.forecast_start.month(), c.wet_threshold);
    out["lambda_month"] = c.forecast_start.month();
    write_json(out_path(c, "gamma_fits.json"), out);
    rec.outputs.push_back("gamma_fits.json");
}

void stage_simulate(const RunConfig& c, StageRecord& rec) {
    const PrecipParams p = precip_params(c);
    rec.inputs.push_back("gamma_fits.json");
    const SimulationResult sim = simulate_precip_month(p.lambda, p.fit.alpha, p.fit.beta, c.contract.n_days,
                                                       c.precip_n_sim, derive_seed(c.seed, "simulate"));
    write_json(out_path(c, "simulation.json"), summary_json(sim));
    write_paths_csv(sim, out_path(c, "simulation_paths.csv"));
    rec.outputs = {"simulation.json", "simulation_paths.csv"};
}

void stage_price_precip(const RunConfig& c, StageRecord& rec) {
    const DailySeries train = load_train(c);
    const PrecipParams p = precip_params(c);
    rec.inputs = {kTrainCsv, "gamma_fits.json"};
    const std::vector<double> history = historical_indices(c, train);
    if (history.size() < 2) throw DataError("fewer than two historical contract periods in the training data");
    const ContractSpec spec = resolve_contract(c, history, rec.notes);

    const int n_wet = std::clamp(static_cast<int>(std::lround(p.lambda)), 1, spec.n_days);
    write_json(out_path(c, "price_closed_form.json"),
               closed_form_precip_price(p.fit.alpha, p.fit.beta, n_wet, spec, p.lambda));
    write_json(out_path(c, "price_monte_carlo.json"),
               mc_precip_price(p.lambda, p.fit.alpha, p.fit.beta, spec, c.precip_n_sim, derive_seed(c.seed, "mc")));
    std::vector<double> payoffs;
    for (double xi : history) payoffs.push_back(strangle_payoff(xi, spec));
    write_json(out_path(c, "price_hba.json"), hba_price(payoffs, spec.r, spec.tau));
    rec.outputs = {"price_closed_form.json", "price_monte_carlo.json", "price_hba.json"};
}

}  // namespace

void run_stage(const RunConfig& c, const std::string& stage) {
    fs::create_directories(c.output_dir);
    StageRecord rec;
    const bool temp = c.variable == Variable::temperature_c;
    if (stage == "fetch") stage_fetch(c, rec);
    else if (stage == "stats") stage_stats(c, rec);
    else if (stage == "fit-harmonic" && temp) stage_fit_harmonic(c, rec);
    else if (stage == "fit-arma" && temp) stage_fit_arma(c, rec);
    else if (stage == "train-nn" && temp) stage_train_nn(c, rec);
    else if (stage == "compare" && temp) stage_compare(c, rec);
    else if (stage == "price") temp ? stage_price_temperature(c, rec) : stage_price_precip(c, rec);
    else if (stage == "fit-precip" && !temp) stage_fit_precip(c, rec);
    else if (stage == "simulate" && !temp) stage_simulate(c, rec);
    else throw ConfigError("stage '" + stage + "' does not apply to " + std::string(to_string(c.variable)));

    json manifest = load_manifest(c);
    json entry{{"status", "ok"}, {"artifacts", json::array()}, {"inputs", json::array()}, {"notes", rec.notes}};
    for (const auto& name : rec.outputs) entry["artifacts"].push_back(artifact_entry(c, name));
    for (const auto& name : rec.inputs) entry["inputs"].push_back(artifact_entry(c, name));
    manifest["stages"][stage] = entry;
    manifest["config_digest"] = sha256_hex(to_json(c).dump());
    save_manifest(c, manifest);
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return 2;
    if (dynamic_cast<const DataError*>(&e)) return 3;
    if (dynamic_cast<const NumericalError*>(&e)) return 4;
    return 1;
}

PipelineResult run_pipeline(const RunConfig& c) {
    fs::create_directories(c.output_dir);
    fs::remove(out_path(c, kManifestName));
    const auto stages = c.stages.empty() ? default_stages(c.variable) : c.stages;
    PipelineResult result;
    for (const auto& stage : stages) {
        try {
            run_stage(c, stage);
        } catch (const std::exception& e) {
            result.exit_code = exit_code_for(e);
            result.failed_stage = stage;
            result.error = e.what();
            json manifest = load_manifest(c);
            manifest["status"] = "failed";
            manifest["failed_stage"] = stage;
            manifest["error"] = e.what();
            save_manifest(c, manifest);
            return result;
        }
    }
    json manifest = load_manifest(c);
    manifest["status"] = "ok";
    save_manifest(c, manifest);
    return result;
}

}  // namespace wxd
