#pragma once

#include <string>

#include "djcm/toy_model.hpp"

namespace djcm::toy {

// Writes <prefix>.manifest (text) and <prefix>.bin (little-endian float64).
void save_checkpoint(const ToyModel& model, const std::string& prefix);
// Throws Io on missing or malformed files, Shape on array mismatches.
ToyModel load_checkpoint(const std::string& prefix);

}  // namespace djcm::toy
