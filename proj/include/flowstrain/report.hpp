// report.hpp - JSON serialisation of every report type.
//
// Each document carries "schema_version" and "kind". Wall-clock measurements
// and thread counts live under a single "timing" key; everything else is a
// deterministic function of the inputs and seed.
#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "flowstrain/imaging.hpp"
#include "flowstrain/netbench.hpp"
#include "flowstrain/objective.hpp"
#include "flowstrain/registration.hpp"
#include "flowstrain/strain.hpp"

namespace flowstrain {

inline constexpr int kSchemaVersion = 1;

using Json = nlohmann::ordered_json;

Json to_json(const LossBreakdown &loss);
Json to_json(const AgreementStats &stats);
Json to_json(const CascadeConfig &cfg);
Json to_json(const RegReport &report, const CascadeConfig &cfg);
Json to_json(const StrainReport &report);
Json to_json(const CostTable &table);
Json to_json(const BenchReport &report);
Json to_json(const SliceImageInfo &info);

// The document without its "timing" member.
Json deterministic_part(const Json &doc);

// Two-space indented dump with a trailing newline.
std::string dump(const Json &doc);

const char *to_string(StrainKind kind);
const char *to_string(CoordSystem coords);
const char *to_string(AngleConvention angle);
const char *to_string(PeakMode mode);
const char *to_string(DifferenceMode mode);

}  // namespace flowstrain
