#pragma once

#include <string>
#include <vector>

#include "regram/model.hpp"
#include "regram/records.hpp"

namespace regram {

// Case-study document for one appraised target: a GeoJSON FeatureCollection
// of Point features ([longitude, latitude] order) with a role property —
// "target", "neighbor" (with attention weight and distance) or
// "non-neighbor" (history records within context_radius_m that are not
// neighbors).  Output is deterministic: neighbors sorted by descending
// attention, non-neighbors by distance.
std::string case_study_geojson(const TransactionRecord& target, const Prediction& prediction,
                               const std::vector<TransactionRecord>& history,
                               double context_radius_m = 800.0);

}  // namespace regram
