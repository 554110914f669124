#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ikrnet/types.hpp"

namespace ikrnet::eval {

struct Prediction {
    std::string record_id;
    std::string patient_id;
    Zone zone = Zone::Unassigned;
    double fs = 500.0;  // sampling rate the signal was degraded to (source_fs)
    int true_label = 0;
    int predicted_label = 0;
    double score = 0.0;
    double average_bpm = std::numeric_limits<double>::quiet_NaN();  // NaN when unavailable

    bool correct() const { return true_label == predicted_label; }
};

using PredictionSet = std::vector<Prediction>;

// Throws InvalidArgument on duplicate record ids, scores outside [0,1] or labels outside {0,1}.
void validate(const PredictionSet& preds);

struct BasicMetrics {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    double accuracy = 0.0;
    std::optional<double> precision;  // absent without positive predictions
    std::optional<double> recall;     // absent without positive labels
    std::optional<double> f1;

    std::size_t total() const { return tp + fp + tn + fn; }
};

// Positive class = Sot+. Throws InvalidArgument on an empty set.
BasicMetrics basic_metrics(const PredictionSet& preds);

enum class Grouping { Zone, SamplingRate };

struct GroupAccuracy {
    double accuracy = 0.0;
    std::size_t n = 0;
};

std::string rate_key(double fs);

// Zone grouping uses the three protocol zones and skips Unassigned records.
std::map<std::string, GroupAccuracy> group_accuracies(const PredictionSet& preds, Grouping grouping);

// |max - min| over the given accuracies; throws InvalidArgument with fewer than 2.
double apd_from_accuracies(const std::vector<double>& accuracies);
double accuracy_parity_difference(const PredictionSet& preds, Grouping grouping);

struct RateApdSummary {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation
    std::map<std::string, double> per_rate;
    std::vector<std::string> excluded_rates;  // rates lacking one of the observed zones
};

// Zone-wise APD per sampling rate, then mean and std across rates. Throws
// InvalidArgument with fewer than 2 rates or 2 zones, or when no rate has every zone.
RateApdSummary report_apd(const PredictionSet& preds);

std::vector<double> default_threshold_grid();

struct ThresholdCurve {
    std::vector<double> thresholds;
    std::map<Zone, std::vector<std::size_t>> counts;  // patients with zone accuracy > threshold
    std::map<Zone, std::size_t> patients;             // patients with records in the zone
};

ThresholdCurve per_patient_threshold_curve(const PredictionSet& preds, const std::vector<double>& thresholds);

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = 0.0;
};

struct RocCurve {
    std::vector<RocPoint> points;
    std::size_t positives = 0;
    std::size_t negatives = 0;
};

// Positive = misclassified. Thresholds sweep the distinct predictor values in
// descending order, predicting positive when predictor >= threshold; the curve
// starts at (0,0,+inf) and ends at (1,1,-inf). Throws UndefinedRoc when only
// one class is present, InvalidArgument on size mismatch or NaN predictors.
RocCurve roc_curve(const std::vector<bool>& misclassified, const std::vector<double>& predictor);

double auc(const RocCurve& roc);

struct YoudenResult {
    double threshold_bpm = 0.0;
    double j = 0.0;
    bool informative = false;  // max J >= kInformativeYouden
};

inline constexpr double kInformativeYouden = 0.1;

// Maximizes tpr - fpr over the swept thresholds; ties go to the lowest threshold.
YoudenResult youden_ohr(const RocCurve& roc);

struct OhrErrorRates {
    double err_above = 0.0;  // misclassification rate where bpm > OHR
    double err_below = 0.0;  // where bpm <= OHR
    std::size_t n_above = 0;
    std::size_t n_below = 0;
    std::vector<std::string> excluded_patients;
};

// Records of patients missing from `ohr`, or with NaN bpm, are skipped;
// skipped patients are listed.
OhrErrorRates error_rates_by_ohr(const PredictionSet& preds, const std::map<std::string, double>& ohr);

}  // namespace ikrnet::eval
