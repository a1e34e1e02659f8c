#pragma once

#include <json.hpp>

#include "launderscope/degradations.hpp"
#include "launderscope/scorer.hpp"
#include "launderscope/spectral.hpp"

namespace launderscope::detail {

using Json = nlohmann::ordered_json;

Json denoiser_to_json(const Denoiser& d);
Denoiser denoiser_from_json(const Json& j);

Json model_json(const ScorerModel& model);
ScorerModel model_from(const Json& j);

}  // namespace launderscope::detail
