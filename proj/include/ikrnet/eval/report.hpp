#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ikrnet/eval/metrics.hpp"

namespace ikrnet::eval {

struct PatientRow {
    std::string patient_id;
    double accuracy = 0.0;
    std::size_t n = 0;
    std::map<Zone, GroupAccuracy> zones;
};

struct OhrSection {
    std::map<std::string, YoudenResult> per_patient;
    std::optional<YoudenResult> pooled;
    std::optional<double> pooled_auc;
    std::vector<std::string> excluded_patients;  // single-class ROC input or no heart rate
    std::optional<OhrErrorRates> errors_per_patient;
    std::optional<OhrErrorRates> errors_pooled;
};

struct EvalReport {
    BasicMetrics overall;
    std::map<std::string, GroupAccuracy> per_zone;
    std::map<std::string, GroupAccuracy> per_rate;
    std::optional<double> apd_zones;
    std::optional<double> apd_rates;
    std::optional<RateApdSummary> apd_by_rate;
    std::vector<PatientRow> patients;
    OhrSection ohr;
    ThresholdCurve threshold_curve;
    std::vector<std::string> diagnostics;  // sections that could not be computed, and why
};

// Validates the prediction set first. Sections whose preconditions fail are
// left empty and explained in diagnostics.
EvalReport build_report(const PredictionSet& preds,
                        const std::vector<double>& thresholds = default_threshold_grid());

nlohmann::json to_json(const EvalReport& report);

// Column order is fixed: zone,n,accuracy / rate,n,accuracy / threshold,<zones...>.
std::string per_zone_csv(const EvalReport& report);
std::string per_rate_csv(const EvalReport& report);
std::string threshold_curve_csv(const EvalReport& report);

// Writes report.json, per_zone.csv, per_rate.csv and threshold_curve.csv.
void write_report(const EvalReport& report, const std::filesystem::path& dir);

nlohmann::json predictions_to_json(const PredictionSet& preds);
PredictionSet predictions_from_json(const nlohmann::json& j);

}  // namespace ikrnet::eval
