#pragma once

#include <string>
#include <vector>

#include "spii/sim.hpp"

namespace spii {

// YAML experiment configs. Matrices are inline row lists (entries numeric, or
// "p/q" strings for exact rationals) or {file: path} references with
// whitespace-separated rows; all paths are relative to the config file.

ExperimentConfig load_experiment(const std::string& path);

// Grid file for sweeps: either explicit per-point lambdas or rho values along
// a direction.
std::vector<SweepPoint> load_grid(const std::string& path);

}  // namespace spii
