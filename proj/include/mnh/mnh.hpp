#pragma once

// Numerical core.
#include "errors.hpp"
#include "lattice.hpp"
#include "matching.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "spectrum.hpp"
#include "ep_analysis.hpp"
#include "ribbon.hpp"

// Configuration, export and presets (need yaml-cpp and nlohmann_json).
#include "config.hpp"
#include "io.hpp"
#include "presets.hpp"
#include "commands.hpp"
