#pragma once

// JSON checkpoints of a policy family.
//
//   {
//     "format": "mfls-policy", "version": 1,
//     "metadata": {...},                       // free-form run information
//     "networks": [
//       { "role": "alpha" | "beta", "step": i,
//         "input_dim": n, "hidden": [..], "output_dim": q,
//         "activation": "tanh" | "identity",
//         "transform": {"kind": "identity"} | {"kind": "box", "lo": [..], "hi": [..]},
//         "input_offset": [..], "input_scale": [..],
//         "layers": [ {"weights": [[row], ...], "biases": [..]}, ... ] }, ... ]
//   }
//
// Weight rows are output units; each row holds one weight per layer input.

#include <string>

#include "json.hpp"
#include "mfls/levelset/policy.hpp"

namespace mfls::levelset {

nlohmann::json policies_to_json(const PolicySet& set, const nlohmann::json& metadata = nlohmann::json::object());
PolicySet policies_from_json(const nlohmann::json& j);

void save_checkpoint(const std::string& path, const PolicySet& set,
                     const nlohmann::json& metadata = nlohmann::json::object());
/// Throws ConfigError when the file is missing or malformed.
PolicySet load_checkpoint(const std::string& path, nlohmann::json* metadata = nullptr);

}  // namespace mfls::levelset
