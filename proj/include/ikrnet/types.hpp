#pragma once

#include <array>
#include <string>
#include <string_view>

namespace ikrnet {

// Sot- = recorded before drug intake, Sot+ = after.
enum class Label : int { SotMinus = 0, SotPlus = 1 };

enum class Zone : int { Baseline = 0, StMinusDgPlus = 1, StPlusDgPlus = 2, Unassigned = 3 };

inline constexpr std::array<Zone, 3> kProtocolZones = {Zone::Baseline, Zone::StMinusDgPlus,
                                                       Zone::StPlusDgPlus};

std::string_view to_string(Label label);
std::string_view to_string(Zone zone);

// Accepts the names produced by to_string; throws InvalidArgument otherwise.
Label label_from_string(std::string_view s);
Zone zone_from_string(std::string_view s);

inline int to_int(Label label) { return static_cast<int>(label); }

}  // namespace ikrnet
