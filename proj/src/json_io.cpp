#include "arfal/json_io.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>

namespace arfal::io {

json to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Eigen::VectorXd vector_from_json(const json& j) {
  if (!j.is_array()) throw ConfigError("expected a numeric array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  Eigen::Index i = 0;
  for (const auto& x : j) v(i++) = x.get<double>();
  return v;
}

json to_json(const signals::InputProfile& profile) {
  json channels = json::array();
  for (const auto& ch : profile.channels()) {
    json c{{"name", ch.name},
           {"kind", signals::to_string(ch.interp.kind)},
           {"n", ch.count},
           {"range", {ch.lo, ch.hi}},
           {"times", ch.policy == signals::ControlTimePolicy::EquallySpaced ? "equal" : "random"}};
    if (ch.interp.kind == signals::InterpKind::Pulse) {
      c["period"] = ch.interp.pulse_period;
      c["duty"] = ch.interp.pulse_duty;
    }
    channels.push_back(std::move(c));
  }
  return json{{"end_time", profile.domain().end_time()}, {"step", profile.domain().step()},
              {"channels", std::move(channels)}};
}

signals::InputProfile profile_from_json(const json& j) {
  const signals::TimeDomain domain(j.at("end_time").get<double>(), j.at("step").get<double>());
  std::vector<signals::InputChannelSpec> channels;
  for (const auto& c : j.at("channels")) {
    signals::InputChannelSpec spec;
    spec.name = c.at("name").get<std::string>();
    spec.interp.kind = signals::interp_kind_from_string(c.at("kind").get<std::string>());
    spec.count = c.at("n").get<int>();
    spec.lo = c.at("range").at(0).get<double>();
    spec.hi = c.at("range").at(1).get<double>();
    if (c.contains("times")) {
      const auto policy = c.at("times").get<std::string>();
      if (policy == "equal") {
        spec.policy = signals::ControlTimePolicy::EquallySpaced;
      } else if (policy == "random") {
        spec.policy = signals::ControlTimePolicy::Random;
      } else {
        throw ConfigError("channel '" + spec.name + "': times must be 'equal' or 'random'");
      }
    }
    if (c.contains("period")) spec.interp.pulse_period = c.at("period").get<double>();
    if (c.contains("duty")) spec.interp.pulse_duty = c.at("duty").get<double>();
    channels.push_back(std::move(spec));
  }
  return signals::InputProfile(domain, std::move(channels));
}

json to_json(const search::CandidateTest& candidate) {
  json channels = json::array();
  for (Eigen::Index c = 0; c < candidate.rendered.size(); ++c) {
    channels.push_back(json{{"name", candidate.rendered.at(c).name},
                            {"times", to_json(candidate.points[static_cast<std::size_t>(c)].times)},
                            {"values", to_json(candidate.points[static_cast<std::size_t>(c)].values)}});
  }
  return json{{"channels", std::move(channels)}};
}

search::CandidateTest candidate_from_json(const json& j, const signals::InputProfile& profile) {
  search::CandidateTest candidate;
  const auto& channels = j.at("channels");
  if (channels.size() != profile.channels().size()) {
    throw ConfigError("candidate has " + std::to_string(channels.size()) + " channels, profile has " +
                      std::to_string(profile.channels().size()));
  }
  for (std::size_t c = 0; c < channels.size(); ++c) {
    if (channels[c].at("name").get<std::string>() != profile.channels()[c].name) {
      throw ConfigError("candidate channel order does not match the profile");
    }
    signals::ControlPoints cp;
    cp.times = vector_from_json(channels[c].at("times"));
    cp.values = vector_from_json(channels[c].at("values"));
    candidate.points.push_back(std::move(cp));
  }
  candidate.rendered = signals::render(profile, candidate.points);
  return candidate;
}

json to_json(const search::SearchStrategy& strategy) {
  return std::visit(
      [](const auto& s) -> json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, search::UniformRandom>) {
          return json{{"kind", "uniform_random"}};
        } else if constexpr (std::is_same_v<T, search::HillClimbRestart>) {
          return json{{"kind", "hill_climb_restart"},
                      {"step_fraction", s.step_fraction},
                      {"restarts_after_k_failures", s.restarts_after_k_failures}};
        } else {
          return json{{"kind", "simulated_annealing"},
                      {"initial_temperature", s.initial_temperature},
                      {"cooling_rate", s.cooling_rate},
                      {"proposal_sigma_fraction", s.proposal_sigma_fraction}};
        }
      },
      strategy);
}

search::SearchStrategy strategy_from_json(const json& j) {
  if (j.is_string()) return search::strategy_from_string(j.get<std::string>());
  const auto kind = j.at("kind").get<std::string>();
  search::SearchStrategy s = search::strategy_from_string(kind);
  if (auto* hc = std::get_if<search::HillClimbRestart>(&s)) {
    if (j.contains("step_fraction")) hc->step_fraction = j.at("step_fraction").get<double>();
    if (j.contains("restarts_after_k_failures")) {
      hc->restarts_after_k_failures = j.at("restarts_after_k_failures").get<int>();
    }
  } else if (auto* sa = std::get_if<search::SimulatedAnnealing>(&s)) {
    if (j.contains("initial_temperature")) sa->initial_temperature = j.at("initial_temperature").get<double>();
    if (j.contains("cooling_rate")) sa->cooling_rate = j.at("cooling_rate").get<double>();
    if (j.contains("proposal_sigma_fraction")) {
      sa->proposal_sigma_fraction = j.at("proposal_sigma_fraction").get<double>();
    }
  }
  search::validate(s);
  return s;
}

json to_json(const sysid::SurrogateModel& model) {
  json j{{"format", "arfal-surrogate"},
         {"version", 1},
         {"structure", sysid::structure_name(model.structure())},
         {"orders", sysid::structure_orders(model.structure())},
         {"step", model.step()},
         {"inputs", model.input_names()},
         {"outputs", model.output_names()},
         {"spectral_radius", model.spectral_radius()}};
  if (model.is_state_space()) {
    const auto& ss = model.state_space();
    auto mat = [](const Eigen::MatrixXd& m) {
      json rows = json::array();
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
      }
      return rows;
    };
    j["ss"] = json{{"F", mat(ss.F)}, {"G", mat(ss.G)}, {"H", mat(ss.H)}, {"D", mat(ss.D)}, {"x0", to_json(ss.x0)}};
  } else {
    json outputs = json::array();
    for (const auto& po : model.poly()) {
      json b = json::array(), f = json::array();
      for (const auto& bi : po.b) b.push_back(to_json(bi));
      for (const auto& fi : po.f) f.push_back(to_json(fi));
      outputs.push_back(json{{"a", to_json(po.a)},
                             {"b", std::move(b)},
                             {"c", to_json(po.c)},
                             {"d", to_json(po.d)},
                             {"f", std::move(f)}});
    }
    j["coefficients"] = std::move(outputs);
  }
  return j;
}

sysid::SurrogateModel surrogate_from_json(const json& j) {
  if (j.at("format").get<std::string>() != "arfal-surrogate") throw ConfigError("not a surrogate model file");
  if (j.at("version").get<int>() != 1) throw ConfigError("unsupported surrogate model version");
  const auto structure =
      sysid::make_structure(j.at("structure").get<std::string>(), j.at("orders").get<std::vector<int>>());
  const double step = j.at("step").get<double>();
  auto inputs = j.at("inputs").get<std::vector<std::string>>();
  auto outputs = j.at("outputs").get<std::vector<std::string>>();

  if (j.contains("ss")) {
    auto mat = [](const json& rows) {
      const auto r = static_cast<Eigen::Index>(rows.size());
      const auto c = r > 0 ? static_cast<Eigen::Index>(rows.at(0).size()) : 0;
      Eigen::MatrixXd m(r, c);
      for (Eigen::Index i = 0; i < r; ++i) {
        for (Eigen::Index k = 0; k < c; ++k) m(i, k) = rows.at(i).at(k).get<double>();
      }
      return m;
    };
    sysid::StateSpaceCoeffs ss;
    const auto& js = j.at("ss");
    ss.F = mat(js.at("F"));
    ss.G = mat(js.at("G"));
    ss.H = mat(js.at("H"));
    ss.D = mat(js.at("D"));
    ss.x0 = vector_from_json(js.at("x0"));
    return sysid::SurrogateModel(structure, step, std::move(inputs), std::move(outputs), std::move(ss));
  }

  std::vector<sysid::PolyOutput> per_output;
  for (const auto& po : j.at("coefficients")) {
    sysid::PolyOutput out;
    out.a = vector_from_json(po.at("a"));
    out.c = vector_from_json(po.at("c"));
    out.d = vector_from_json(po.at("d"));
    for (const auto& bi : po.at("b")) out.b.push_back(vector_from_json(bi));
    for (const auto& fi : po.at("f")) out.f.push_back(vector_from_json(fi));
    per_output.push_back(std::move(out));
  }
  return sysid::SurrogateModel(structure, step, std::move(inputs), std::move(outputs), std::move(per_output));
}

json to_json(const aristeo::AristeoReport& report) {
  json iterations = json::array();
  for (const auto& it : report.iterations) {
    iterations.push_back(json{{"surrogate_falsified", it.surrogate_falsified},
                              {"surrogate_objective", it.surrogate_objective},
                              {"mut_objective", it.mut_objective},
                              {"train_mse", it.train_mse}});
  }
  json j{{"outcome", report.outcome == aristeo::Outcome::ViolationFound ? "violation_found" : "budget_exhausted"},
         {"mut_executions", report.mut_executions},
         {"refinements_performed", report.refinements_performed},
         {"iterations", std::move(iterations)}};
  if (report.failing_input.has_value()) j["failing_input"] = to_json(*report.failing_input);
  return j;
}

std::string normalize_time_suffixes(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  auto is_ident = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
  while (i < text.size()) {
    const char c = text[i];
    const bool boundary = i == 0 || !is_ident(text[i - 1]);
    if (boundary && (std::isdigit(static_cast<unsigned char>(c)) || c == '.')) {
      std::size_t consumed = 0;
      double value = 0.0;
      try {
        value = std::stod(text.substr(i), &consumed);
      } catch (const std::exception&) {
        consumed = 0;
      }
      if (consumed > 0) {
        std::size_t k = i + consumed;
        double scale = -1.0;
        std::size_t suffix_len = 0;
        auto suffix_is = [&](const char* s, std::size_t len) {
          return text.compare(k, len, s) == 0 && (k + len >= text.size() || !is_ident(text[k + len]));
        };
        if (suffix_is("ms", 2)) {
          scale = 1e-3;
          suffix_len = 2;
        } else if (suffix_is("min", 3)) {
          scale = 60.0;
          suffix_len = 3;
        } else if (suffix_is("h", 1)) {
          scale = 3600.0;
          suffix_len = 1;
        } else if (suffix_is("s", 1)) {
          scale = 1.0;
          suffix_len = 1;
        }
        if (scale > 0.0) {
          char buf[40];
          std::snprintf(buf, sizeof(buf), "%.17g", value * scale);
          out += buf;
          i = k + suffix_len;
          continue;
        }
        out += text.substr(i, consumed);
        i = k;
        continue;
      }
    }
    out += c;
    ++i;
  }
  return out;
}

}  // namespace arfal::io
