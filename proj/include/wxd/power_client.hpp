#pragma once

#include "wxd/climate_data.hpp"

#include <chrono>
#include <filesystem>
#include <functional>
#include <string>
#include <thread>

namespace wxd {

struct HttpResponse {
    long status = 0;  // 0 means transport failure
    std::string body;
    std::string error;
};

using HttpGet = std::function<HttpResponse(const std::string& url)>;

/// Blocking HTTPS GET via libcurl.
HttpResponse curl_get(const std::string& url, std::chrono::seconds timeout = std::chrono::seconds(60));

struct PowerClientOptions {
    std::filesystem::path cache_dir = "cache";
    bool offline = false;  // cache only, never touch the network
    int max_attempts = 4;
    std::chrono::milliseconds initial_backoff{500};
    HttpGet http = [](const std::string& url) { return curl_get(url); };
    std::function<void(std::chrono::milliseconds)> sleep =
        [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
};

/// Client for the NASA POWER daily point API (community RE) with a CSV cache:
/// one `date,value` file per (location, variable, range).
class PowerClient {
public:
    explicit PowerClient(PowerClientOptions options = {});

    /// Cached series if present, otherwise downloaded and cached. Throws
    /// DataError on invalid ranges, HTTP failure after retries, malformed
    /// payloads, and cache misses in offline mode.
    DailySeries fetch(const Location& location, Date start, Date end, Variable variable) const;

    std::filesystem::path cache_path(const Location& location, Date start, Date end,
                                     Variable variable) const;

    static std::string request_url(const Location& location, Date start, Date end, Variable variable);

private:
    PowerClientOptions options_;
};

/// POWER parameter name: T2M or PRECTOTCORR.
std::string_view power_parameter(Variable variable);

/// Parse a POWER JSON payload. Fill values are dropped and counted.
DailySeries parse_power_payload(const std::string& body, const Location& location, Variable variable);

}  // namespace wxd
