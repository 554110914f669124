#include "ikrnet/eval/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "ikrnet/errors.hpp"
#include "ikrnet/record_io.hpp"

namespace ikrnet::eval {

namespace {

using nlohmann::json;

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json groups_json(const std::map<std::string, GroupAccuracy>& g) {
    json out = json::object();
    for (const auto& [k, v] : g) out[k] = {{"accuracy", v.accuracy}, {"n", v.n}};
    return out;
}

json youden_json(const YoudenResult& y) {
    return {{"threshold_bpm", y.threshold_bpm}, {"youden_j", y.j}, {"informative", y.informative}};
}

json errors_json(const std::optional<OhrErrorRates>& e) {
    if (!e) return nullptr;
    return {{"err_above", e->err_above},
            {"err_below", e->err_below},
            {"n_above", e->n_above},
            {"n_below", e->n_below},
            {"excluded_patients", e->excluded_patients}};
}

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

// Records with a usable heart rate, split into the ROC inputs.
struct RocInput {
    std::vector<bool> misclassified;
    std::vector<double> bpm;
};

void add(RocInput& in, const Prediction& p) {
    if (std::isnan(p.average_bpm)) return;
    in.misclassified.push_back(!p.correct());
    in.bpm.push_back(p.average_bpm);
}

void build_ohr(const PredictionSet& preds, EvalReport& r) {
    std::map<std::string, RocInput> per_patient;
    RocInput pooled;
    for (const auto& p : preds) {
        add(per_patient[p.patient_id], p);
        add(pooled, p);
    }
    std::map<std::string, double> ohr_map;
    for (const auto& [patient, in] : per_patient) {
        try {
            const auto y = youden_ohr(roc_curve(in.misclassified, in.bpm));
            r.ohr.per_patient[patient] = y;
            ohr_map[patient] = y.threshold_bpm;
        } catch (const UndefinedRoc&) {
            r.ohr.excluded_patients.push_back(patient);
        }
    }
    if (!ohr_map.empty()) r.ohr.errors_per_patient = error_rates_by_ohr(preds, ohr_map);
    try {
        const auto roc = roc_curve(pooled.misclassified, pooled.bpm);
        r.ohr.pooled = youden_ohr(roc);
        r.ohr.pooled_auc = auc(roc);
        std::map<std::string, double> pooled_map;
        for (const auto& [patient, in] : per_patient) pooled_map[patient] = r.ohr.pooled->threshold_bpm;
        r.ohr.errors_pooled = error_rates_by_ohr(preds, pooled_map);
    } catch (const UndefinedRoc& e) {
        r.diagnostics.push_back(std::string("pooled OHR undefined: ") + e.what());
    }
    if (!r.ohr.excluded_patients.empty()) {
        r.diagnostics.push_back(std::to_string(r.ohr.excluded_patients.size()) +
                                " patient(s) excluded from per-patient OHR (single-class ROC input)");
    }
}

}  // namespace

EvalReport build_report(const PredictionSet& preds, const std::vector<double>& thresholds) {
    validate(preds);
    EvalReport r;
    r.overall = basic_metrics(preds);
    r.per_zone = group_accuracies(preds, Grouping::Zone);
    r.per_rate = group_accuracies(preds, Grouping::SamplingRate);
    try {
        r.apd_zones = accuracy_parity_difference(preds, Grouping::Zone);
    } catch (const InvalidArgument& e) {
        r.diagnostics.push_back(std::string("apd_zones: ") + e.what());
    }
    try {
        r.apd_rates = accuracy_parity_difference(preds, Grouping::SamplingRate);
    } catch (const InvalidArgument& e) {
        r.diagnostics.push_back(std::string("apd_rates: ") + e.what());
    }
    try {
        r.apd_by_rate = report_apd(preds);
        for (const auto& rate : r.apd_by_rate->excluded_rates) {
            r.diagnostics.push_back("rate " + rate + " lacks a protocol zone; excluded from APD mean/std");
        }
    } catch (const InvalidArgument& e) {
        r.diagnostics.push_back(std::string("apd mean/std: ") + e.what());
    }

    std::map<std::string, PredictionSet> by_patient;
    for (const auto& p : preds) by_patient[p.patient_id].push_back(p);
    for (const auto& [patient, subset] : by_patient) {
        PatientRow row;
        row.patient_id = patient;
        row.n = subset.size();
        std::size_t ok = 0;
        for (const auto& p : subset) ok += p.correct() ? 1 : 0;
        row.accuracy = static_cast<double>(ok) / static_cast<double>(row.n);
        for (const auto& [zone, g] : group_accuracies(subset, Grouping::Zone)) row.zones[zone_from_string(zone)] = g;
        r.patients.push_back(std::move(row));
    }

    build_ohr(preds, r);
    r.threshold_curve = per_patient_threshold_curve(preds, thresholds);
    return r;
}

nlohmann::json to_json(const EvalReport& r) {
    json j;
    j["overall"] = {{"n", r.overall.total()},
                    {"tp", r.overall.tp},
                    {"fp", r.overall.fp},
                    {"tn", r.overall.tn},
                    {"fn", r.overall.fn},
                    {"accuracy", r.overall.accuracy},
                    {"precision", opt(r.overall.precision)},
                    {"recall", opt(r.overall.recall)},
                    {"f1", opt(r.overall.f1)}};
    j["per_zone"] = groups_json(r.per_zone);
    j["per_rate"] = groups_json(r.per_rate);
    j["apd_zones"] = opt(r.apd_zones);
    j["apd_rates"] = opt(r.apd_rates);
    if (r.apd_by_rate) {
        j["apd_zone_by_rate"] = {{"mean", r.apd_by_rate->mean},
                                 {"std", r.apd_by_rate->std},
                                 {"per_rate", r.apd_by_rate->per_rate},
                                 {"excluded_rates", r.apd_by_rate->excluded_rates}};
    } else {
        j["apd_zone_by_rate"] = nullptr;
    }
    json patients = json::array();
    for (const auto& row : r.patients) {
        json zones = json::object();
        for (const auto& [z, g] : row.zones) zones[std::string(to_string(z))] = {{"accuracy", g.accuracy}, {"n", g.n}};
        patients.push_back({{"patient_id", row.patient_id}, {"accuracy", row.accuracy}, {"n", row.n}, {"zones", zones}});
    }
    j["patients"] = patients;

    json per_patient = json::object();
    for (const auto& [p, y] : r.ohr.per_patient) per_patient[p] = youden_json(y);
    j["ohr"] = {{"per_patient", per_patient},
                {"pooled", r.ohr.pooled ? youden_json(*r.ohr.pooled) : json(nullptr)},
                {"pooled_auc", opt(r.ohr.pooled_auc)},
                {"excluded_patients", r.ohr.excluded_patients},
                {"errors_per_patient_ohr", errors_json(r.ohr.errors_per_patient)},
                {"errors_pooled_ohr", errors_json(r.ohr.errors_pooled)}};

    json counts = json::object(), npat = json::object();
    for (const auto& [z, c] : r.threshold_curve.counts) counts[std::string(to_string(z))] = c;
    for (const auto& [z, n] : r.threshold_curve.patients) npat[std::string(to_string(z))] = n;
    j["threshold_curve"] = {{"thresholds", r.threshold_curve.thresholds}, {"counts", counts}, {"patients", npat}};
    j["diagnostics"] = r.diagnostics;
    return j;
}

std::string per_zone_csv(const EvalReport& r) {
    std::string out = "zone,n,accuracy\n";
    for (Zone z : kProtocolZones) {
        const auto it = r.per_zone.find(std::string(to_string(z)));
        if (it == r.per_zone.end()) continue;
        out += std::string(to_string(z)) + "," + std::to_string(it->second.n) + "," + num(it->second.accuracy) + "\n";
    }
    return out;
}

std::string per_rate_csv(const EvalReport& r) {
    std::vector<std::pair<double, std::string>> rates;
    for (const auto& [k, g] : r.per_rate) rates.emplace_back(std::stod(k), k);
    std::sort(rates.begin(), rates.end());
    std::string out = "rate_hz,n,accuracy,apd_zones\n";
    for (const auto& [v, k] : rates) {
        const auto& g = r.per_rate.at(k);
        std::string apd;
        if (r.apd_by_rate) {
            const auto it = r.apd_by_rate->per_rate.find(k);
            if (it != r.apd_by_rate->per_rate.end()) apd = num(it->second);
        }
        out += k + "," + std::to_string(g.n) + "," + num(g.accuracy) + "," + apd + "\n";
    }
    return out;
}

std::string threshold_curve_csv(const EvalReport& r) {
    std::string out = "threshold";
    for (Zone z : kProtocolZones) out += "," + std::string(to_string(z));
    out += "\n";
    const auto& c = r.threshold_curve;
    for (std::size_t i = 0; i < c.thresholds.size(); ++i) {
        out += num(c.thresholds[i]);
        for (Zone z : kProtocolZones) {
            const auto it = c.counts.find(z);
            out += "," + std::to_string(it == c.counts.end() ? 0 : it->second[i]);
        }
        out += "\n";
    }
    return out;
}

void write_report(const EvalReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    io::write_text(dir / "report.json", to_json(report).dump(2) + "\n");
    io::write_text(dir / "per_zone.csv", per_zone_csv(report));
    io::write_text(dir / "per_rate.csv", per_rate_csv(report));
    io::write_text(dir / "threshold_curve.csv", threshold_curve_csv(report));
}

nlohmann::json predictions_to_json(const PredictionSet& preds) {
    json arr = json::array();
    for (const auto& p : preds) {
        arr.push_back({{"record_id", p.record_id},
                       {"patient_id", p.patient_id},
                       {"zone", std::string(to_string(p.zone))},
                       {"fs", p.fs},
                       {"true_label", p.true_label},
                       {"predicted_label", p.predicted_label},
                       {"score", p.score},
                       {"average_bpm", std::isnan(p.average_bpm) ? json(nullptr) : json(p.average_bpm)}});
    }
    return arr;
}

PredictionSet predictions_from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw InvalidArgument("predictions: expected a JSON array");
    PredictionSet preds;
    try {
        for (const auto& e : j) {
            Prediction p;
            p.record_id = e.at("record_id").get<std::string>();
            p.patient_id = e.at("patient_id").get<std::string>();
            p.zone = zone_from_string(e.at("zone").get<std::string>());
            p.fs = e.at("fs").get<double>();
            p.true_label = e.at("true_label").get<int>();
            p.predicted_label = e.at("predicted_label").get<int>();
            p.score = e.at("score").get<double>();
            if (!e.at("average_bpm").is_null()) p.average_bpm = e.at("average_bpm").get<double>();
            preds.push_back(std::move(p));
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed predictions: ") + e.what());
    }
    validate(preds);
    return preds;
}

}  // namespace ikrnet::eval
