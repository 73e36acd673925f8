#pragma once

#include <json.hpp>

#include "conjure/alignment.hpp"
#include "conjure/estimators.hpp"
#include "conjure/oracle.hpp"
#include "conjure/toy_net.hpp"

namespace conjure {

using ordered_json = nlohmann::ordered_json;

ordered_json to_json(const DistanceEstimate& e);
ordered_json to_json(const oracle::OracleReport& r);
// Timings are only included when asked for; everything else is deterministic.
ordered_json to_json(const AblationReport& r, bool include_runtimes = true);
ordered_json to_json(const TrainingLog& log);

}  // namespace conjure
