#include "wxd/forecast.hpp"

#include <sstream>
#include <string>

namespace wxd {

void to_json(nlohmann::json& j, const Forecast& f) {
    nlohmann::json dates = nlohmann::json::array();
    for (Date d : f.dates) dates.push_back(d.iso());
    nlohmann::json bands = nlohmann::json::object();
    for (const auto& [level, band] : f.bands) {
        std::ostringstream key;
        key << level;
        bands[key.str()] = {{"lower", band.lower}, {"upper", band.upper}};
    }
    j = nlohmann::json{{"dates", dates}, {"mean", f.mean}, {"bands", bands}};
}

void from_json(const nlohmann::json& j, Forecast& f) {
    f = Forecast{};
    for (const auto& d : j.at("dates")) f.dates.push_back(Date::parse(d.get<std::string>()));
    j.at("mean").get_to(f.mean);
    for (const auto& [key, band] : j.at("bands").items()) {
        Band b;
        band.at("lower").get_to(b.lower);
        band.at("upper").get_to(b.upper);
        f.bands[std::stod(key)] = std::move(b);
    }
}

}  // namespace wxd
