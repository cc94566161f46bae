#pragma once

#include "wxd/date.hpp"

#include <json.hpp>
#include <map>
#include <vector>

namespace wxd {

struct Band {
    std::vector<double> lower;
    std::vector<double> upper;
};

struct Forecast {
    std::vector<Date> dates;
    std::vector<double> mean;
    std::map<double, Band> bands;  // keyed by confidence level in (0, 1)
};

void to_json(nlohmann::json& j, const Forecast& f);
void from_json(const nlohmann::json& j, Forecast& f);

}  // namespace wxd
