#include "ikrnet/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "ikrnet/errors.hpp"

namespace ikrnet::eval {

void validate(const PredictionSet& preds) {
    std::set<std::string> ids;
    for (const auto& p : preds) {
        if (!ids.insert(p.record_id).second) throw InvalidArgument("duplicate record id " + p.record_id);
        if (!(p.score >= 0.0 && p.score <= 1.0)) throw InvalidArgument("score outside [0,1] for " + p.record_id);
        if ((p.true_label != 0 && p.true_label != 1) || (p.predicted_label != 0 && p.predicted_label != 1)) {
            throw InvalidArgument("labels must be 0 or 1 for " + p.record_id);
        }
    }
}

BasicMetrics basic_metrics(const PredictionSet& preds) {
    if (preds.empty()) throw InvalidArgument("basic_metrics needs at least one prediction");
    BasicMetrics m;
    for (const auto& p : preds) {
        if (p.true_label == 1) {
            (p.predicted_label == 1 ? m.tp : m.fn)++;
        } else {
            (p.predicted_label == 1 ? m.fp : m.tn)++;
        }
    }
    const auto d = [](std::size_t v) { return static_cast<double>(v); };
    m.accuracy = d(m.tp + m.tn) / d(m.total());
    if (m.tp + m.fp > 0) m.precision = d(m.tp) / d(m.tp + m.fp);
    if (m.tp + m.fn > 0) m.recall = d(m.tp) / d(m.tp + m.fn);
    if (m.precision && m.recall) {
        const double s = *m.precision + *m.recall;
        m.f1 = s > 0.0 ? 2.0 * *m.precision * *m.recall / s : 0.0;
    }
    return m;
}

std::string rate_key(double fs) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", fs);
    return buf;
}

namespace {

std::string group_key(const Prediction& p, Grouping g) {
    return g == Grouping::Zone ? std::string(to_string(p.zone)) : rate_key(p.fs);
}

bool in_grouping(const Prediction& p, Grouping g) { return g == Grouping::SamplingRate || p.zone != Zone::Unassigned; }

}  // namespace

std::map<std::string, GroupAccuracy> group_accuracies(const PredictionSet& preds, Grouping grouping) {
    std::map<std::string, std::pair<std::size_t, std::size_t>> tally;
    for (const auto& p : preds) {
        if (!in_grouping(p, grouping)) continue;
        auto& t = tally[group_key(p, grouping)];
        t.first += p.correct() ? 1 : 0;
        t.second += 1;
    }
    std::map<std::string, GroupAccuracy> out;
    for (const auto& [key, t] : tally) {
        out[key] = {static_cast<double>(t.first) / static_cast<double>(t.second), t.second};
    }
    return out;
}

double apd_from_accuracies(const std::vector<double>& accuracies) {
    if (accuracies.size() < 2) {
        throw InvalidArgument("accuracy parity needs at least 2 groups, got " + std::to_string(accuracies.size()));
    }
    const auto [lo, hi] = std::minmax_element(accuracies.begin(), accuracies.end());
    return std::abs(*hi - *lo);
}

double accuracy_parity_difference(const PredictionSet& preds, Grouping grouping) {
    std::vector<double> acc;
    for (const auto& [key, g] : group_accuracies(preds, grouping)) acc.push_back(g.accuracy);
    return apd_from_accuracies(acc);
}

RateApdSummary report_apd(const PredictionSet& preds) {
    std::map<std::string, PredictionSet> by_rate;
    std::set<Zone> zones;
    for (const auto& p : preds) {
        by_rate[rate_key(p.fs)].push_back(p);
        if (p.zone != Zone::Unassigned) zones.insert(p.zone);
    }
    if (by_rate.size() < 2) throw InvalidArgument("report_apd needs predictions at 2 or more sampling rates");
    if (zones.size() < 2) throw InvalidArgument("report_apd needs predictions in 2 or more protocol zones");
    RateApdSummary s;
    for (const auto& [rate, subset] : by_rate) {
        const auto groups = group_accuracies(subset, Grouping::Zone);
        if (groups.size() != zones.size()) {
            s.excluded_rates.push_back(rate);
            continue;
        }
        std::vector<double> acc;
        for (const auto& [key, g] : groups) acc.push_back(g.accuracy);
        s.per_rate[rate] = apd_from_accuracies(acc);
    }
    if (s.per_rate.empty()) throw InvalidArgument("no sampling rate covers every observed protocol zone");
    double sum = 0.0;
    for (const auto& [rate, v] : s.per_rate) sum += v;
    s.mean = sum / static_cast<double>(s.per_rate.size());
    double ss = 0.0;
    for (const auto& [rate, v] : s.per_rate) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(s.per_rate.size()));
    return s;
}

std::vector<double> default_threshold_grid() {
    std::vector<double> grid;
    for (int i = 50; i <= 100; ++i) grid.push_back(i / 100.0);
    return grid;
}

ThresholdCurve per_patient_threshold_curve(const PredictionSet& preds, const std::vector<double>& thresholds) {
    for (double t : thresholds) {
        if (!(t >= 0.0 && t <= 1.0)) throw InvalidArgument("threshold grid must lie within [0,1]");
    }
    std::map<Zone, std::map<std::string, std::pair<std::size_t, std::size_t>>> tally;
    for (const auto& p : preds) {
        if (p.zone == Zone::Unassigned) continue;
        auto& t = tally[p.zone][p.patient_id];
        t.first += p.correct() ? 1 : 0;
        t.second += 1;
    }
    ThresholdCurve c;
    c.thresholds = thresholds;
    for (Zone z : kProtocolZones) {
        auto& counts = c.counts[z];
        counts.assign(thresholds.size(), 0);
        const auto it = tally.find(z);
        c.patients[z] = it == tally.end() ? 0 : it->second.size();
        if (it == tally.end()) continue;
        for (const auto& [patient, t] : it->second) {
            const double acc = static_cast<double>(t.first) / static_cast<double>(t.second);
            for (std::size_t i = 0; i < thresholds.size(); ++i) {
                if (acc > thresholds[i]) ++counts[i];
            }
        }
    }
    return c;
}

RocCurve roc_curve(const std::vector<bool>& misclassified, const std::vector<double>& predictor) {
    if (misclassified.size() != predictor.size()) {
        throw InvalidArgument("roc_curve: indicator and predictor sizes differ");
    }
    RocCurve roc;
    for (std::size_t i = 0; i < predictor.size(); ++i) {
        if (std::isnan(predictor[i])) throw InvalidArgument("roc_curve: predictor contains NaN");
        (misclassified[i] ? roc.positives : roc.negatives)++;
    }
    if (roc.positives == 0 || roc.negatives == 0) {
        throw UndefinedRoc("ROC needs both misclassified and correct records");
    }
    std::vector<std::size_t> order(predictor.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return predictor[a] > predictor[b]; });

    const double inf = std::numeric_limits<double>::infinity();
    roc.points.push_back({0.0, 0.0, inf});
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < order.size();) {
        const double thr = predictor[order[i]];
        for (; i < order.size() && predictor[order[i]] == thr; ++i) (misclassified[order[i]] ? tp : fp)++;
        roc.points.push_back({static_cast<double>(fp) / static_cast<double>(roc.negatives),
                              static_cast<double>(tp) / static_cast<double>(roc.positives), thr});
    }
    roc.points.push_back({1.0, 1.0, -inf});
    return roc;
}

double auc(const RocCurve& roc) {
    double a = 0.0;
    for (std::size_t i = 1; i < roc.points.size(); ++i) {
        const auto& p = roc.points[i - 1];
        const auto& q = roc.points[i];
        a += (q.fpr - p.fpr) * (q.tpr + p.tpr) / 2.0;
    }
    return a;
}

YoudenResult youden_ohr(const RocCurve& roc) {
    std::optional<YoudenResult> best;
    for (const auto& p : roc.points) {
        if (!std::isfinite(p.threshold)) continue;
        const double j = p.tpr - p.fpr;
        if (!best || j > best->j || (j == best->j && p.threshold < best->threshold_bpm)) {
            best = YoudenResult{p.threshold, j, false};
        }
    }
    if (!best) throw UndefinedRoc("ROC has no finite thresholds");
    best->informative = best->j >= kInformativeYouden;
    return *best;
}

OhrErrorRates error_rates_by_ohr(const PredictionSet& preds, const std::map<std::string, double>& ohr) {
    OhrErrorRates r;
    std::set<std::string> excluded;
    std::size_t err_above = 0, err_below = 0;
    for (const auto& p : preds) {
        const auto it = ohr.find(p.patient_id);
        if (it == ohr.end()) {
            excluded.insert(p.patient_id);
            continue;
        }
        if (std::isnan(p.average_bpm)) continue;
        if (p.average_bpm > it->second) {
            ++r.n_above;
            err_above += p.correct() ? 0 : 1;
        } else {
            ++r.n_below;
            err_below += p.correct() ? 0 : 1;
        }
    }
    if (r.n_above) r.err_above = static_cast<double>(err_above) / static_cast<double>(r.n_above);
    if (r.n_below) r.err_below = static_cast<double>(err_below) / static_cast<double>(r.n_below);
    r.excluded_patients.assign(excluded.begin(), excluded.end());
    return r;
}

}  // namespace ikrnet::eval
