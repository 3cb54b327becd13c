#include "wicklab/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

namespace wicklab {

namespace {

std::string long_decimal(long double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.21Lg", v);
  return buf;
}

}  // namespace

std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

Json json_number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json time_to_json(const TimePoint& t) {
  Json j;
  j["value"] = long_decimal(t.value());
  if (t.is_exact()) j["exact"] = {t.rational()->num, t.rational()->den};
  return j;
}

TimePoint time_from_json(const Json& j) {
  if (j.is_number()) return TimePoint::approx(j.get<long double>());
  if (j.is_string()) return TimePoint::parse(j.get<std::string>());
  if (!j.is_object()) throw Error(Errc::invalid_argument, "time must be a number, string or object");
  if (j.contains("exact")) {
    const auto& e = j.at("exact");
    if (!e.is_array() || e.size() != 2) throw Error(Errc::invalid_argument, "\"exact\" must be [p, q]");
    return TimePoint::exact(e[0].get<std::int64_t>(), e[1].get<std::int64_t>());
  }
  if (!j.contains("value")) throw Error(Errc::invalid_argument, "time object needs \"value\" or \"exact\"");
  return time_from_json(j.at("value"));
}

Json spec_to_json(const IntegrandSpec& u) {
  Json j;
  if (!u.label.empty()) j["label"] = u.label;
  j["horizon"] = time_to_json(u.horizon);
  j["taus"] = Json::array();
  for (const auto& t : u.taus) j["taus"].push_back(time_to_json(t));
  j["terms"] = Json::array();
  for (const auto& t : u.terms) {
    Json c = Json::array();
    for (const auto& x : t.coeff.terms()) c.push_back({{"c", x.c}, {"p", x.p}, {"r", x.r}});
    j["terms"].push_back({{"coeff", c}, {"l1", t.l1}, {"l", t.l}});
  }
  j["tail_bound"] = json_number(u.tail_bound);
  return j;
}

IntegrandSpec spec_from_json(const Json& j) {
  try {
    IntegrandSpec u;
    if (j.contains("label")) u.label = j.at("label").get<std::string>();
    if (j.contains("horizon")) u.horizon = time_from_json(j.at("horizon"));
    if (j.contains("taus"))
      for (const auto& t : j.at("taus")) u.taus.push_back(time_from_json(t));
    for (const auto& t : j.at("terms")) {
      IntegrandSpec::Term term;
      std::vector<CoeffFn::Term> c;
      const auto& cj = t.at("coeff");
      if (cj.is_number()) {
        c.push_back({cj.get<double>(), 0, 0.0});
      } else {
        for (const auto& x : cj) c.push_back({x.at("c").get<double>(), x.value("p", 0), x.value("r", 0.0)});
      }
      term.coeff = CoeffFn(std::move(c));
      term.l1 = t.value("l1", 0);
      if (t.contains("l")) term.l = t.at("l").get<std::vector<int>>();
      else term.l.assign(u.taus.size(), 0);
      u.terms.push_back(std::move(term));
    }
    if (j.contains("tail_bound")) {
      const auto& b = j.at("tail_bound");
      u.tail_bound = b.is_null() ? INFINITY : b.get<double>();
    }
    u.validate();
    return u;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_argument, std::string("integrand JSON: ") + e.what());
  }
}

Json report_to_json(const ErrorReport& r) {
  Json j;
  j["nodes"] = r.descriptor;
  j["n"] = r.n;
  j["e2"] = json_number(r.e2);
  j["e"] = json_number(r.e);
  j["truncation_bound"] = json_number(r.truncation_bound);
  j["components"] = Json::array();
  for (const auto& [k, v] : r.components) j["components"].push_back({k, json_number(v)});
  j["i1"] = json_number(r.i1);
  j["i2"] = json_number(r.i2);
  j["i3"] = json_number(r.i3);
  if (r.projection_checked) {
    j["ey2"] = json_number(r.ey2);
    j["eyhat2"] = json_number(r.eyhat2);
    j["discrepancy"] = json_number(r.discrepancy);
  }
  j["pre_asymptotic"] = r.pre_asymptotic;
  return j;
}

Json fit_to_json(const RateFit& f) {
  return {{"alpha", json_number(f.alpha)},
          {"c", json_number(f.c)},
          {"r2", json_number(f.r2)},
          {"window", {f.window.first, f.window.second}},
          {"points", f.used}};
}

Json weyl_to_json(const WeylSequence& w) {
  Json j;
  j["t"] = time_to_json(w.t);
  j["indices"] = w.indices;
  j["gaps"] = Json::array();
  for (long double g : w.gaps) j["gaps"].push_back(json_number(static_cast<double>(g)));
  return j;
}

Json projection_to_json(const ProjectionReport& p) {
  Json j;
  j["count"] = p.count;
  j["seed"] = p.seed;
  j["passed"] = p.passed();
  j["estimates"] = Json::array();
  for (const auto& e : p.estimates)
    j["estimates"].push_back({{"phi", e.label},
                              {"mean", json_number(e.mean)},
                              {"se", json_number(e.se)},
                              {"z", json_number(e.z)},
                              {"pass", e.pass}});
  return j;
}

}  // namespace wicklab
