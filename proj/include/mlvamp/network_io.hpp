#pragma once

#include "mlvamp/network.hpp"

#include "json.hpp"

#include <string>

namespace mlvamp {

using Json = nlohmann::json;

// Seeded documents store the generator and its config in place of the orthogonal factors;
// loading one rebuilds the network and checks s, b_bar and nu against the stored values.
// Explicit documents carry v_out, v_in, s and b for every linear stage. A loader also accepts
// a dense "w" in place of the factors.
Json network_to_json(const NetworkSpec& net, bool explicit_matrices = false);
NetworkSpec network_from_json(const Json& doc);

std::string dump_json(const Json& doc);
Json parse_json(const std::string& text);
Json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

Json synthetic_config_to_json(const SyntheticConfig& c);
// Missing keys keep their defaults; unknown keys are rejected.
SyntheticConfig synthetic_config_from_json(const Json& j, SyntheticConfig base = {});

Json gaussian_chain_config_to_json(const GaussianChainConfig& c);
GaussianChainConfig gaussian_chain_config_from_json(const Json& j, GaussianChainConfig base = {});

// z_0..z_L; "y" duplicates the last layer so an observation file can omit the rest.
Json trajectory_to_json(const Trajectory& traj);
// Reads "z" if present, otherwise only "y" (the returned trajectory then holds y alone).
Trajectory trajectory_from_json(const Json& doc);

Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j);

// +inf is written as the string "inf".
Json precision_to_json(double x);
double precision_from_json(const Json& j);

}  // namespace mlvamp
