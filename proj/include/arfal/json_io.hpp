#ifndef ARFAL_JSON_IO_HPP
#define ARFAL_JSON_IO_HPP

#include <json.hpp>

#include "arfal/aristeo.hpp"
#include "arfal/search.hpp"
#include "arfal/signals.hpp"
#include "arfal/sysid.hpp"

namespace arfal::io {

using json = nlohmann::ordered_json;

json to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const json& j);

json to_json(const signals::InputProfile& profile);
signals::InputProfile profile_from_json(const json& j);

json to_json(const search::CandidateTest& candidate);
// Rebuilding a candidate needs the profile to re-render its signals.
search::CandidateTest candidate_from_json(const json& j, const signals::InputProfile& profile);

json to_json(const search::SearchStrategy& strategy);
search::SearchStrategy strategy_from_json(const json& j);

// Versioned surrogate model file: structure tag, orders, coefficient arrays,
// channel names and sample step.
json to_json(const sysid::SurrogateModel& model);
sysid::SurrogateModel surrogate_from_json(const json& j);

json to_json(const aristeo::AristeoReport& report);

// Config-layer time suffixes: rewrites "24h" / "30min" / "250ms" to seconds
// so the STL grammar itself stays unit-free.
std::string normalize_time_suffixes(const std::string& text);

}  // namespace arfal::io

#endif  // ARFAL_JSON_IO_HPP
