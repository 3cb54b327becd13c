#include <doctest.h>

#include <cmath>
#include <limits>

#include "wicklab/io.hpp"

using namespace wicklab;

TEST_CASE("time points round trip") {
  for (const TimePoint& t : {inv_pi(), inv_sqrt2(), TimePoint::exact(3, 7), TimePoint::approx(0.123456789L)}) {
    const TimePoint back = time_from_json(time_to_json(t));
    CHECK(back.value() == t.value());
    CHECK(back.is_exact() == t.is_exact());
  }
  CHECK(time_from_json(Json("1/3")).is_exact());
  CHECK(time_from_json(Json(0.25)).value() == 0.25L);
}

TEST_CASE("integrand specs round trip byte for byte") {
  for (const IntegrandSpec& u : {sko_exp(inv_pi(), 6), ito_exp(inv_pi(), 4), abs_integrand(TimePoint::exact(1, 2), 5, true),
                                 xt_process(inv_pi(), 3)}) {
    const std::string a = spec_to_json(u).dump();
    const IntegrandSpec back = spec_from_json(Json::parse(a));
    CHECK(spec_to_json(back).dump() == a);
    CHECK(back.terms.size() == u.terms.size());
  }
  CHECK_THROWS_AS(spec_from_json(Json::parse(R"({"terms": [{"coeff": 1, "l1": 0, "l": [1]}]})")), Error);
  CHECK_THROWS_AS(spec_from_json(Json::parse(R"({"taus": "x"})")), Error);
}

TEST_CASE("numbers") {
  CHECK(csv_number(0.1) == "0.1");
  CHECK(std::stod(csv_number(1.0 / 3)) == 1.0 / 3);
  CHECK(csv_number(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(csv_number(std::nan("")) == "nan");
  CHECK(json_number(std::nan("")).is_null());
}

TEST_CASE("reports") {
  const ErrorReport r = mse(sko_exp(inv_pi(), 4), std::make_shared<const NodeSet>(NodeSet::equidistant(5)));
  const Json j = report_to_json(r);
  CHECK(j.at("n") == 5);
  CHECK(j.at("e2").get<double>() == r.e2);
  RateFit f;
  f.alpha = -0.25;
  CHECK(fit_to_json(f).at("alpha").get<double>() == -0.25);
}
