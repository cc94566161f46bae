#include "fixtures.hpp"
#include "wxd/error.hpp"
#include "wxd/power_client.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace wxd;

namespace {

std::string payload(const std::string& param, const std::vector<std::pair<std::string, double>>& values) {
    std::ostringstream s;
    s << R"({"header":{"fill_value":-999.0},"properties":{"parameter":{")" << param << R"(":{)";
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) s << ',';
        s << '"' << values[i].first << "\":" << values[i].second;
    }
    s << "}}}}";
    return s.str();
}

struct FakeHttp {
    std::vector<HttpResponse> script;
    std::vector<std::string> urls;
    HttpResponse operator()(const std::string& url) {
        urls.push_back(url);
        const std::size_t i = std::min(urls.size() - 1, script.size() - 1);
        return script[i];
    }
};

PowerClientOptions options_for(const std::filesystem::path& dir, std::shared_ptr<FakeHttp> http,
                               std::vector<std::chrono::milliseconds>* sleeps = nullptr) {
    PowerClientOptions o;
    o.cache_dir = dir;
    o.http = [http](const std::string& url) { return (*http)(url); };
    o.sleep = [sleeps](std::chrono::milliseconds d) {
        if (sleeps) sleeps->push_back(d);
    };
    return o;
}

}  // namespace

TEST_CASE("request url carries the point query") {
    const auto url = PowerClient::request_url(toronto(), Date::from_ymd(1981, 1, 1), Date::from_ymd(2023, 12, 31),
                                              Variable::temperature_c);
    CHECK(url.find("parameters=T2M") != std::string::npos);
    CHECK(url.find("community=RE") != std::string::npos);
    CHECK(url.find("latitude=43.6523") != std::string::npos);
    CHECK(url.find("longitude=-79.3839") != std::string::npos);
    CHECK(url.find("start=19810101&end=20231231") != std::string::npos);
    CHECK(power_parameter(Variable::precipitation_mm) == "PRECTOTCORR");
}

TEST_CASE("fetch caches, drops fill values and serves the cache afterwards") {
    const auto dir = fixtures::scratch_dir("power_cache");
    auto http = std::make_shared<FakeHttp>();
    http->script = {{200, payload("T2M", {{"20200101", 1.5}, {"20200102", -999.0}, {"20200103", 2.5}}), ""}};
    const PowerClient client(options_for(dir, http));
    const auto a = client.fetch(toronto(), Date::from_ymd(2020, 1, 1), Date::from_ymd(2020, 1, 3),
                                Variable::temperature_c);
    CHECK(a.size() == 2);
    CHECK(a.dropped_count() == 1);
    CHECK(http->urls.size() == 1);
    const auto b = client.fetch(toronto(), Date::from_ymd(2020, 1, 1), Date::from_ymd(2020, 1, 3),
                                Variable::temperature_c);
    CHECK(http->urls.size() == 1);
    CHECK(a == b);
    CHECK(b.dropped_count() == 1);
}

TEST_CASE("fetch retries server errors with doubling backoff") {
    const auto dir = fixtures::scratch_dir("power_retry");
    auto http = std::make_shared<FakeHttp>();
    http->script = {{503, "", ""}, {0, "", "timeout"}, {200, payload("PRECTOTCORR", {{"20200101", 0.0}}), ""}};
    std::vector<std::chrono::milliseconds> sleeps;
    const PowerClient client(options_for(dir, http, &sleeps));
    const auto s = client.fetch(chicago(), Date::from_ymd(2020, 1, 1), Date::from_ymd(2020, 1, 1),
                                Variable::precipitation_mm);
    CHECK(s.size() == 1);
    CHECK(http->urls.size() == 3);
    REQUIRE(sleeps.size() == 2);
    CHECK(sleeps[1] == 2 * sleeps[0]);
}

TEST_CASE("fetch failures") {
    const auto dir = fixtures::scratch_dir("power_fail");
    auto http = std::make_shared<FakeHttp>();
    http->script = {{404, "not found", ""}};
    const PowerClient client(options_for(dir, http));
    CHECK_THROWS_AS(client.fetch(toronto(), Date::from_ymd(2020, 1, 1), Date::from_ymd(2020, 1, 2),
                                 Variable::temperature_c),
                    DataError);
    CHECK(http->urls.size() == 1);  // 4xx is not retried

    try {
        client.fetch(toronto(), Date::from_ymd(2020, 1, 2), Date::from_ymd(2020, 1, 1), Variable::temperature_c);
        FAIL("expected an error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("invalid range") != std::string::npos);
    }

    http->script = {{200, "{not json", ""}};
    CHECK_THROWS_AS(client.fetch(toronto(), Date::from_ymd(2021, 1, 1), Date::from_ymd(2021, 1, 2),
                                 Variable::temperature_c),
                    DataError);
    CHECK_FALSE(std::filesystem::exists(
        client.cache_path(toronto(), Date::from_ymd(2021, 1, 1), Date::from_ymd(2021, 1, 2), Variable::temperature_c)));

    PowerClientOptions off = options_for(dir, http);
    off.offline = true;
    const PowerClient offline(off);
    const auto before = http->urls.size();
    CHECK_THROWS_AS(offline.fetch(toronto(), Date::from_ymd(2022, 1, 1), Date::from_ymd(2022, 1, 2),
                                  Variable::temperature_c),
                    DataError);
    CHECK(http->urls.size() == before);
}

TEST_CASE("payload parsing") {
    CHECK_THROWS_AS(parse_power_payload(R"({"properties":{}})", toronto(), Variable::temperature_c), DataError);
    CHECK_THROWS_AS(parse_power_payload(payload("PRECTOTCORR", {{"20200101", 1.0}}), toronto(),
                                        Variable::temperature_c),
                    DataError);
    const auto s = parse_power_payload(payload("T2M", {{"20200102", 2.0}, {"20200101", 1.0}}), toronto(),
                                       Variable::temperature_c);
    CHECK(s[0].date == Date::from_ymd(2020, 1, 1));
}
