#pragma once

// JSON and CSV forms of integrands, reports, fits and sequences.

#include <string>

#include <json.hpp>

#include "wicklab/error_engine.hpp"
#include "wicklab/verification.hpp"
#include "wicklab/weyl_rates.hpp"

namespace wicklab {

using Json = nlohmann::ordered_json;

Json time_to_json(const TimePoint& t);
/// Accepts {"value": number|string, "exact": [p, q]}, a bare number, or a
/// string understood by TimePoint::parse ("1/pi", "1/sqrt2", "p/q", decimals).
TimePoint time_from_json(const Json& j);

Json spec_to_json(const IntegrandSpec& u);
IntegrandSpec spec_from_json(const Json& j);

Json report_to_json(const ErrorReport& r);
Json fit_to_json(const RateFit& f);
Json weyl_to_json(const WeylSequence& w);
Json projection_to_json(const ProjectionReport& p);

/// Shortest decimal that reads back to the same double; non-finite values
/// become "nan", "inf" or "-inf".
std::string csv_number(double v);
/// Finite numbers as is, everything else as null.
Json json_number(double v);

}  // namespace wicklab
