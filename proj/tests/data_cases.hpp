#pragma once

#include <cmath>

#include "ikrnet/data/synthetic.hpp"
#include "ikrnet/signal.hpp"

namespace ikrnet::test {

// Fraction of generated records whose detected average HR lies within
// tol_bpm of the generator's RR ground truth.
inline double hr_oracle_fraction(const data::GeneratedDataset& ds, double tol_bpm = 1.0) {
    std::size_t hits = 0;
    for (const auto& sr : ds.records) {
        const auto windows = signal::detect_beat_windows(sr.record);
        if (windows.size() < 2) continue;
        const double estimate = signal::estimate_heart_rate(sr.record, windows).average_bpm;
        const auto rr = sr.extra.at("rr_s").get<std::vector<double>>();
        double truth = 0.0;
        for (double r : rr) truth += 60.0 / r;
        truth /= static_cast<double>(rr.size());
        if (std::abs(estimate - truth) <= tol_bpm) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(ds.records.size());
}

}  // namespace ikrnet::test
