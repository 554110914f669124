#include "ikrnet/types.hpp"

#include "ikrnet/errors.hpp"

namespace ikrnet {

std::string_view to_string(Label label) { return label == Label::SotPlus ? "Sot+" : "Sot-"; }

std::string_view to_string(Zone zone) {
    switch (zone) {
        case Zone::Baseline: return "Baseline";
        case Zone::StMinusDgPlus: return "StMinusDgPlus";
        case Zone::StPlusDgPlus: return "StPlusDgPlus";
        case Zone::Unassigned: return "Unassigned";
    }
    return "Unassigned";
}

Label label_from_string(std::string_view s) {
    if (s == "Sot+") return Label::SotPlus;
    if (s == "Sot-") return Label::SotMinus;
    throw InvalidArgument("unknown label '" + std::string(s) + "'");
}

Zone zone_from_string(std::string_view s) {
    for (Zone z : {Zone::Baseline, Zone::StMinusDgPlus, Zone::StPlusDgPlus, Zone::Unassigned}) {
        if (s == to_string(z)) return z;
    }
    throw InvalidArgument("unknown zone '" + std::string(s) + "'");
}

}  // namespace ikrnet
