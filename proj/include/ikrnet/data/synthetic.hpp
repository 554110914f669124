#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "ikrnet/data/dataset.hpp"
#include "ikrnet/record_io.hpp"
#include "ikrnet/types.hpp"

namespace ikrnet::data {

// Times are minutes relative to drug intake (negative = before intake).
struct TimeRange {
    double start_min = 0.0;
    double end_min = 0.0;
    bool contains(double t) const { return t >= start_min && t < end_min; }
    bool operator==(const TimeRange&) const = default;
};

struct DrugEffectSpec {
    double qt_prolongation_ms = 80.0;
    double hr_reduction_bpm = 10.0;
    double onset_tau_minutes = 20.0;
    double decay_tau_minutes = 60.0;
    // Plateau lasts until this many hours after intake, then decays.
    double decay_start_hours = 5.0;
    bool operator==(const DrugEffectSpec&) const = default;
};

struct NormalSpec {
    double mean = 0.0;
    double sd = 0.0;
    bool operator==(const NormalSpec&) const = default;
};

struct SyntheticProtocolSpec {
    std::size_t n_patients = 60;
    std::uint64_t seed = 7;
    double baseline_minutes = 120.0;
    double post_drug_hours = 5.0;
    double record_interval_s = 600.0;
    double record_duration_s = 10.0;
    double fs = 500.0;
    std::vector<TimeRange> stress_windows{{-20.0, -5.0}, {180.0, 195.0}};
    double stress_delta_bpm = 25.0;
    double stress_recovery_minutes = 10.0;
    double stplus_zone_minutes = 30.0;
    DrugEffectSpec drug_effect;
    NormalSpec hr_baseline_bpm{68.0, 7.0};
    double hr_drift_bpm = 3.0;
    double hr_drift_period_minutes = 90.0;
    // Per-beat HR jitter, sigma as a fraction of the current HR.
    double rr_jitter = 0.03;
    NormalSpec qt_baseline_ms{400.0, 12.0};
    // Additive white noise, in units of the clean record's standard deviation.
    double noise_sigma = 0.02;

    bool operator==(const SyntheticProtocolSpec&) const = default;

    // Throws ConfigError naming the offending field.
    void validate() const;
    nlohmann::json to_json() const;
    // Missing keys keep their defaults; unknown keys throw ConfigError.
    static SyntheticProtocolSpec from_json(const nlohmann::json& j);
};

struct ProtocolTimeline {
    double start_min = -120.0;
    double end_min = 300.0;
    std::vector<TimeRange> stress_windows;
    double stplus_zone_minutes = 30.0;

    static ProtocolTimeline from_spec(const SyntheticProtocolSpec& spec);
};

// Baseline: recording start up to the first stress test. St-Dg+: T+2h to T+3h.
// St+Dg+: the stplus_zone_minutes right after the first stress test that
// starts at or after intake. Anything else is Unassigned.
Zone assign_zone(double t_min, const ProtocolTimeline& timeline);

inline Label label_at(double t_min) { return t_min < 0.0 ? Label::SotMinus : Label::SotPlus; }

// Drug effect in [0,1]: exponential onset, plateau, exponential decay.
double drug_effect_at(double t_min, const DrugEffectSpec& drug);
// 1 inside a stress window, exponential recovery after it, 0 otherwise.
double stress_level_at(double t_min, const SyntheticProtocolSpec& spec);

struct GeneratedDataset {
    // Sidecar extras carry the ground truth: t_min, r_peaks_s, rr_s, qt_ms,
    // mean_hr_bpm, drug_effect, stress_level, patient_hr_base_bpm, patient_qt_base_ms.
    std::vector<io::StoredRecord> records;
    DatasetManifest manifest;
};

// Deterministic given spec.seed; patients draw from independent streams.
GeneratedDataset generate(const SyntheticProtocolSpec& spec);

}  // namespace ikrnet::data
