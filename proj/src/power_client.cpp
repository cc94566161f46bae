#include "wxd/power_client.hpp"

#include "wxd/error.hpp"

#include <curl/curl.h>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>

namespace wxd {

namespace {

std::size_t append_body(char* data, std::size_t size, std::size_t nmemb, void* user) {
    static_cast<std::string*>(user)->append(data, size * nmemb);
    return size * nmemb;
}

struct CurlGlobal {
    CurlGlobal() { curl_global_init(CURL_GLOBAL_ALL); }
    ~CurlGlobal() { curl_global_cleanup(); }
};

// One mutex per cache file so concurrent fetches of the same file serialize.
std::mutex& cache_mutex(const std::filesystem::path& path) {
    static std::mutex registry_mutex;
    static std::map<std::string, std::mutex> registry;
    std::lock_guard lock(registry_mutex);
    return registry[path.string()];
}

std::string slug(std::string_view name) {
    std::string out;
    for (char c : name) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!out.empty() && out.back() != '_') {
            out.push_back('_');
        }
    }
    return out.empty() ? "site" : out;
}

}  // namespace

HttpResponse curl_get(const std::string& url, std::chrono::seconds timeout) {
    static CurlGlobal global;
    HttpResponse response;
    std::unique_ptr<CURL, decltype(&curl_easy_cleanup)> curl(curl_easy_init(), curl_easy_cleanup);
    if (!curl) {
        response.error = "curl_easy_init failed";
        return response;
    }
    curl_easy_setopt(curl.get(), CURLOPT_URL, url.c_str());
    curl_easy_setopt(curl.get(), CURLOPT_TIMEOUT, static_cast<long>(timeout.count()));
    curl_easy_setopt(curl.get(), CURLOPT_FOLLOWLOCATION, 1L);
    curl_easy_setopt(curl.get(), CURLOPT_WRITEFUNCTION, append_body);
    curl_easy_setopt(curl.get(), CURLOPT_WRITEDATA, &response.body);
    const CURLcode rc = curl_easy_perform(curl.get());
    if (rc != CURLE_OK) {
        response.error = curl_easy_strerror(rc);
        return response;
    }
    curl_easy_getinfo(curl.get(), CURLINFO_RESPONSE_CODE, &response.status);
    return response;
}

std::string_view power_parameter(Variable variable) {
    return variable == Variable::temperature_c ? "T2M" : "PRECTOTCORR";
}

PowerClient::PowerClient(PowerClientOptions options) : options_(std::move(options)) {}

std::string PowerClient::request_url(const Location& location, Date start, Date end, Variable variable) {
    std::ostringstream url;
    url << std::fixed << std::setprecision(4)
        << "https://power.larc.nasa.gov/api/temporal/daily/point?parameters=" << power_parameter(variable)
        << "&community=RE&longitude=" << location.longitude << "&latitude=" << location.latitude
        << "&start=" << start.compact() << "&end=" << end.compact() << "&format=JSON";
    return url.str();
}

std::filesystem::path PowerClient::cache_path(const Location& location, Date start, Date end,
                                              Variable variable) const {
    char coords[64];
    std::snprintf(coords, sizeof coords, "%.4f_%.4f", location.latitude, location.longitude);
    const std::string file = slug(location.name) + "_" + coords + "_" + std::string(power_parameter(variable)) +
                             "_" + start.compact() + "_" + end.compact() + ".csv";
    return options_.cache_dir / file;
}

DailySeries PowerClient::fetch(const Location& location, Date start, Date end, Variable variable) const {
    if (end < start) throw DataError("invalid range " + start.iso() + ".." + end.iso());
    location.validate();

    const auto path = cache_path(location, start, end, variable);
    std::lock_guard lock(cache_mutex(path));
    if (std::filesystem::exists(path)) return load_csv(path, variable, location);
    if (options_.offline) throw DataError("offline and no cached data at " + path.string());

    const std::string url = request_url(location, start, end, variable);
    auto backoff = options_.initial_backoff;
    HttpResponse response;
    for (int attempt = 1; attempt <= options_.max_attempts; ++attempt) {
        response = options_.http(url);
        if (response.status == 200) break;
        // Client errors other than rate limiting will not improve on retry.
        if (response.status >= 400 && response.status < 500 && response.status != 429) break;
        if (attempt < options_.max_attempts) {
            options_.sleep(backoff);
            backoff *= 2;
        }
    }
    if (response.status != 200) {
        throw DataError("POWER request failed (status " + std::to_string(response.status) +
                        (response.error.empty() ? "" : ", " + response.error) + ") for " + url);
    }

    // Parse before touching the cache so a malformed payload leaves no file behind.
    [[maybe_unused]] const DailySeries parsed = parse_power_payload(response.body, location, variable);
    const nlohmann::json doc = nlohmann::json::parse(response.body);
    const auto& raw = doc["properties"]["parameter"][std::string(power_parameter(variable))];

    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw DataError("cannot write cache " + tmp.string());
        // Provider fill values are kept in the cache so reloading reproduces dropped_count.
        out << "date,value\n" << std::setprecision(17);
        for (const auto& [key, value] : raw.items()) {
            out << Date::parse(key).iso() << ',' << value.get<double>() << '\n';
        }
    }
    std::filesystem::rename(tmp, path);
    return load_csv(path, variable, location);
}

DailySeries parse_power_payload(const std::string& body, const Location& location, Variable variable) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed POWER payload: ") + e.what());
    }
    const std::string param(power_parameter(variable));
    const auto props = doc.find("properties");
    if (props == doc.end() || !props->contains("parameter") || !(*props)["parameter"].contains(param)) {
        throw DataError("malformed POWER payload: missing properties.parameter." + param);
    }
    double fill = kMissingSentinel;
    if (doc.contains("header") && doc["header"].contains("fill_value")) {
        fill = doc["header"]["fill_value"].get<double>();
    }
    const auto& raw = (*props)["parameter"][param];
    if (!raw.is_object()) throw DataError("malformed POWER payload: parameter block is not an object");

    std::vector<Observation> rows;
    std::size_t dropped = 0;
    for (const auto& [key, value] : raw.items()) {
        if (!value.is_number()) throw DataError("malformed POWER payload: non-numeric value for " + key);
        const double v = value.get<double>();
        if (v == fill || v <= kMissingSentinel) {
            ++dropped;
            continue;
        }
        rows.push_back({Date::parse(key), v});
    }
    return DailySeries(location, variable, std::move(rows), dropped);
}

}  // namespace wxd
