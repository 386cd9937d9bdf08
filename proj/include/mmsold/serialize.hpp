#pragma once

#include <string>

#include "json.hpp"
#include "mmsold/baselines.hpp"
#include "mmsold/datasets.hpp"
#include "mmsold/metrics.hpp"
#include "mmsold/sampler.hpp"
#include "mmsold/tilting.hpp"

namespace mmsold {

using Json = nlohmann::ordered_json;

Json matrix_to_json(const MatrixRef& m);  // array of rows
Matrix matrix_from_json(const Json& j, const std::string& what);
Json vector_to_json(const VectorRef& v);
Vector vector_from_json(const Json& j, const std::string& what);

/// Throws InvalidArgument naming the first key of `j` not in `allowed`.
void reject_unknown_keys(const Json& j, std::initializer_list<const char*> allowed,
                         const std::string& where);

Json to_json(const TiltingParams& p);
TiltingParams tilting_from_json(const Json& j);

Json to_json(const MetricReport& r);

Json to_json(const SmoothingConfig& c);
SmoothingConfig smoothing_from_json(const Json& j);

Json to_json(const SamplerConfig& c);
/// Seed and thread count are not part of the block; they come from the run.
SamplerConfig sampler_from_json(const Json& j);

Json to_json(const CfdmConfig& c);
CfdmConfig cfdm_from_json(const Json& j);

Json to_json(const BaoabConfig& c);
BaoabConfig baoab_from_json(const Json& j);

Json to_json(const Dataset2DSpec& s);
Dataset2DSpec dataset_from_json(const Json& j);

Json to_json(const IterationDiagnostics& d);

/// Class model file: training points, smoothing, tilt, frozen noise seed and bias.
Json to_json(const EnergyModel& m);
EnergyModel energy_model_from_json(const Json& j);

Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);

}  // namespace mmsold
