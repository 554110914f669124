#include "ikrnet/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <set>

#include "ikrnet/errors.hpp"
#include "ikrnet/rng.hpp"
#include "ikrnet/signal.hpp"

namespace ikrnet::data {

using nlohmann::json;

namespace {

void require(bool ok, const std::string& message) {
    if (!ok) throw ConfigError("generator spec: " + message);
}

json normal_json(const NormalSpec& n) { return {{"mean", n.mean}, {"sd", n.sd}}; }

NormalSpec normal_from_json(const json& j) {
    NormalSpec n;
    n.mean = j.at("mean").get<double>();
    n.sd = j.at("sd").get<double>();
    return n;
}

}  // namespace

void SyntheticProtocolSpec::validate() const {
    require(n_patients >= 1, "n_patients must be >= 1");
    require(baseline_minutes > 0.0, "baseline_minutes must be positive");
    require(post_drug_hours > 0.0, "post_drug_hours must be positive");
    require(record_interval_s > 0.0, "record_interval_s must be positive");
    require(record_duration_s > 0.0, "record_duration_s must be positive");
    require(fs > 0.0, "fs must be positive");
    require(stress_delta_bpm >= 0.0, "stress_delta_bpm must be >= 0");
    require(stress_recovery_minutes > 0.0, "stress_recovery_minutes must be positive");
    require(stplus_zone_minutes > 0.0, "stplus_zone_minutes must be positive");
    for (const auto& w : stress_windows) {
        require(w.start_min < w.end_min, "stress windows need start < end");
        require(w.start_min >= -baseline_minutes && w.end_min <= post_drug_hours * 60.0,
                "stress windows must lie inside the recording");
    }
    for (std::size_t i = 1; i < stress_windows.size(); ++i) {
        require(stress_windows[i - 1].end_min <= stress_windows[i].start_min,
                "stress windows must be ordered and disjoint");
    }
    require(drug_effect.qt_prolongation_ms >= 0.0, "drug_effect.qt_prolongation_ms must be >= 0");
    require(drug_effect.hr_reduction_bpm >= 0.0, "drug_effect.hr_reduction_bpm must be >= 0");
    require(drug_effect.onset_tau_minutes > 0.0, "drug_effect.onset_tau_minutes must be positive");
    require(drug_effect.decay_tau_minutes > 0.0, "drug_effect.decay_tau_minutes must be positive");
    require(drug_effect.decay_start_hours > 0.0, "drug_effect.decay_start_hours must be positive");
    require(hr_baseline_bpm.mean > 0.0 && hr_baseline_bpm.sd >= 0.0, "hr_baseline_bpm needs mean > 0, sd >= 0");
    require(qt_baseline_ms.mean > 0.0 && qt_baseline_ms.sd >= 0.0, "qt_baseline_ms needs mean > 0, sd >= 0");
    require(hr_drift_bpm >= 0.0, "hr_drift_bpm must be >= 0");
    require(hr_drift_period_minutes > 0.0, "hr_drift_period_minutes must be positive");
    require(rr_jitter >= 0.0 && rr_jitter < 0.5, "rr_jitter must be in [0, 0.5)");
    require(noise_sigma >= 0.0, "noise_sigma must be >= 0");
}

json SyntheticProtocolSpec::to_json() const {
    json windows = json::array();
    for (const auto& w : stress_windows) windows.push_back({w.start_min, w.end_min});
    return {{"n_patients", n_patients},
            {"seed", seed},
            {"baseline_minutes", baseline_minutes},
            {"post_drug_hours", post_drug_hours},
            {"record_interval_s", record_interval_s},
            {"record_duration_s", record_duration_s},
            {"fs", fs},
            {"stress_windows", windows},
            {"stress_delta_bpm", stress_delta_bpm},
            {"stress_recovery_minutes", stress_recovery_minutes},
            {"stplus_zone_minutes", stplus_zone_minutes},
            {"drug_effect",
             {{"qt_prolongation_ms", drug_effect.qt_prolongation_ms},
              {"hr_reduction_bpm", drug_effect.hr_reduction_bpm},
              {"onset_tau_minutes", drug_effect.onset_tau_minutes},
              {"decay_tau_minutes", drug_effect.decay_tau_minutes},
              {"decay_start_hours", drug_effect.decay_start_hours}}},
            {"hr_baseline_bpm", normal_json(hr_baseline_bpm)},
            {"hr_drift_bpm", hr_drift_bpm},
            {"hr_drift_period_minutes", hr_drift_period_minutes},
            {"rr_jitter", rr_jitter},
            {"qt_baseline_ms", normal_json(qt_baseline_ms)},
            {"noise_sigma", noise_sigma}};
}

SyntheticProtocolSpec SyntheticProtocolSpec::from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("generator spec must be a JSON object");
    const SyntheticProtocolSpec defaults;
    const json known = defaults.to_json();
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) throw ConfigError("generator spec: unknown key '" + key + "'");
    }
    SyntheticProtocolSpec s;
    try {
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
        };
        get("n_patients", s.n_patients);
        get("seed", s.seed);
        get("baseline_minutes", s.baseline_minutes);
        get("post_drug_hours", s.post_drug_hours);
        get("record_interval_s", s.record_interval_s);
        get("record_duration_s", s.record_duration_s);
        get("fs", s.fs);
        get("stress_delta_bpm", s.stress_delta_bpm);
        get("stress_recovery_minutes", s.stress_recovery_minutes);
        get("stplus_zone_minutes", s.stplus_zone_minutes);
        get("hr_drift_bpm", s.hr_drift_bpm);
        get("hr_drift_period_minutes", s.hr_drift_period_minutes);
        get("rr_jitter", s.rr_jitter);
        get("noise_sigma", s.noise_sigma);
        if (j.contains("stress_windows")) {
            s.stress_windows.clear();
            for (const auto& w : j.at("stress_windows")) {
                if (!w.is_array() || w.size() != 2) throw ConfigError("generator spec: stress window must be [start, end]");
                s.stress_windows.push_back({w[0].get<double>(), w[1].get<double>()});
            }
        }
        if (j.contains("drug_effect")) {
            const auto& d = j.at("drug_effect");
            const json dk = known.at("drug_effect");
            for (const auto& [key, value] : d.items()) {
                if (!dk.contains(key)) throw ConfigError("generator spec: unknown drug_effect key '" + key + "'");
            }
            auto dget = [&](const char* key, double& field) {
                if (d.contains(key)) field = d.at(key).get<double>();
            };
            dget("qt_prolongation_ms", s.drug_effect.qt_prolongation_ms);
            dget("hr_reduction_bpm", s.drug_effect.hr_reduction_bpm);
            dget("onset_tau_minutes", s.drug_effect.onset_tau_minutes);
            dget("decay_tau_minutes", s.drug_effect.decay_tau_minutes);
            dget("decay_start_hours", s.drug_effect.decay_start_hours);
        }
        if (j.contains("hr_baseline_bpm")) s.hr_baseline_bpm = normal_from_json(j.at("hr_baseline_bpm"));
        if (j.contains("qt_baseline_ms")) s.qt_baseline_ms = normal_from_json(j.at("qt_baseline_ms"));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("generator spec: ") + e.what());
    }
    s.validate();
    return s;
}

ProtocolTimeline ProtocolTimeline::from_spec(const SyntheticProtocolSpec& spec) {
    return {-spec.baseline_minutes, spec.post_drug_hours * 60.0, spec.stress_windows, spec.stplus_zone_minutes};
}

Zone assign_zone(double t_min, const ProtocolTimeline& tl) {
    if (t_min < tl.start_min || t_min >= tl.end_min) return Zone::Unassigned;
    for (const auto& w : tl.stress_windows) {
        if (w.start_min >= 0.0) {
            if (t_min >= w.end_min && t_min < w.end_min + tl.stplus_zone_minutes) return Zone::StPlusDgPlus;
            break;
        }
    }
    const double baseline_end = tl.stress_windows.empty() ? 0.0 : std::min(0.0, tl.stress_windows.front().start_min);
    if (t_min < baseline_end) return Zone::Baseline;
    if (t_min >= 120.0 && t_min < 180.0) return Zone::StMinusDgPlus;
    return Zone::Unassigned;
}

double drug_effect_at(double t_min, const DrugEffectSpec& d) {
    if (t_min < 0.0) return 0.0;
    const double decay_start = d.decay_start_hours * 60.0;
    if (t_min <= decay_start) return 1.0 - std::exp(-t_min / d.onset_tau_minutes);
    const double peak = 1.0 - std::exp(-decay_start / d.onset_tau_minutes);
    return peak * std::exp(-(t_min - decay_start) / d.decay_tau_minutes);
}

double stress_level_at(double t_min, const SyntheticProtocolSpec& spec) {
    double level = 0.0;
    for (const auto& w : spec.stress_windows) {
        if (w.contains(t_min)) return 1.0;
        if (t_min >= w.end_min) {
            level = std::max(level, std::exp(-(t_min - w.end_min) / spec.stress_recovery_minutes));
        }
    }
    return level;
}

namespace {

struct Morphology {
    // P, Q, R, S relative to the R time; T is placed from the QT interval.
    signal::GaussianWave p, q, r, s;
    double t_amplitude = 0.25;
    double t_width = 0.045;
};

struct PatientParams {
    double hr_base = 68.0;
    double qt_base = 400.0;
    double drift_phase = 0.0;
    Morphology morph;
};

constexpr double kOnsetBeforeR = 0.2;   // beat onset t_{i-1} = R_i - 0.2 s
constexpr double kQOnsetBeforeR = 0.04;  // QT is measured from R - 40 ms

PatientParams draw_patient(const SyntheticProtocolSpec& spec, std::mt19937_64& rng) {
    auto U = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
    auto N = [&](double m, double s) { return s > 0.0 ? std::normal_distribution<double>(m, s)(rng) : m; };
    PatientParams p;
    p.hr_base = std::max(40.0, N(spec.hr_baseline_bpm.mean, spec.hr_baseline_bpm.sd));
    p.qt_base = std::max(250.0, N(spec.qt_baseline_ms.mean, spec.qt_baseline_ms.sd));
    p.drift_phase = U(0.0, 2.0 * std::numbers::pi);
    p.morph.p = {-0.16, U(0.022, 0.030), U(0.10, 0.20)};
    p.morph.q = {-0.03, U(0.008, 0.012), U(-0.20, -0.08)};
    p.morph.r = {0.0, U(0.010, 0.014), U(0.9, 1.5)};
    p.morph.s = {0.03, U(0.010, 0.014), U(-0.40, -0.15)};
    p.morph.t_amplitude = U(0.15, 0.35);
    p.morph.t_width = U(0.040, 0.050);
    return p;
}

double hr_target(double t_min, const SyntheticProtocolSpec& spec, const PatientParams& p) {
    const double drift =
        spec.hr_drift_bpm * std::sin(2.0 * std::numbers::pi * t_min / spec.hr_drift_period_minutes + p.drift_phase);
    const double hr = p.hr_base + drift + spec.stress_delta_bpm * stress_level_at(t_min, spec) -
                      spec.drug_effect.hr_reduction_bpm * drug_effect_at(t_min, spec.drug_effect);
    return std::max(35.0, hr);
}

io::StoredRecord make_record(const SyntheticProtocolSpec& spec, const PatientParams& p, const std::string& patient_id,
                             const std::string& record_id, double t_min, std::mt19937_64& rng) {
    const double effect = drug_effect_at(t_min, spec.drug_effect);
    const double qt_ms = p.qt_base + spec.drug_effect.qt_prolongation_ms * effect;
    const double hr = hr_target(t_min, spec, p);
    const double duration = spec.record_duration_s;

    // R times: one virtual beat before the record and one after, so every
    // beat inside sees its neighbours' wave tails.
    std::normal_distribution<double> jitter(0.0, 1.0);
    auto next_rr = [&] { return 60.0 / std::clamp(hr * (1.0 + spec.rr_jitter * jitter(rng)), 30.0, 220.0); };
    std::vector<double> r_times{kOnsetBeforeR - next_rr(), kOnsetBeforeR};
    while (r_times.back() - kOnsetBeforeR < duration) r_times.push_back(r_times.back() + next_rr());

    std::vector<signal::GaussianWave> waves{p.morph.p, p.morph.q, p.morph.r, p.morph.s};
    const double t_offset = -kQOnsetBeforeR + qt_ms / 1000.0 - 2.0 * p.morph.t_width;
    waves.push_back({t_offset, p.morph.t_width, p.morph.t_amplitude});

    // The waveform is one smooth sum over all beats; each beat interval
    // evaluates it over its own neighbours.
    auto sum_beats = [waves, r_times](std::size_t lo, std::size_t hi) {
        return [waves, r_times, lo, hi](double t) {
            double v = 0.0;
            for (std::size_t j = lo; j < hi; ++j) {
                for (const auto& w : waves) {
                    const double z = (t - r_times[j] - w.offset_s) / w.width_s;
                    v += w.amplitude * std::exp(-0.5 * z * z);
                }
            }
            return v;
        };
    };
    std::vector<signal::Beat> beats;
    for (std::size_t i = 1; i + 1 < r_times.size(); ++i) {
        const double onset = r_times[i] - kOnsetBeforeR;
        const double offset = std::min(duration, r_times[i + 1] - kOnsetBeforeR);
        if (onset >= duration) break;
        beats.push_back({onset, offset, sum_beats(i - 1, std::min(r_times.size(), i + 2))});
    }
    beats.back().offset_s = duration;
    const signal::ContinuousBeatModel model(std::move(beats));

    signal::EcgRecord rec = signal::sample(model, spec.fs);
    if (spec.noise_sigma > 0.0) {
        double mean = 0.0;
        for (double v : rec.samples) mean += v;
        mean /= static_cast<double>(rec.samples.size());
        double ss = 0.0;
        for (double v : rec.samples) ss += (v - mean) * (v - mean);
        const double sd = std::sqrt(ss / static_cast<double>(rec.samples.size()));
        std::normal_distribution<double> noise(0.0, spec.noise_sigma * sd);
        for (double& v : rec.samples) v += noise(rng);
    }
    rec.fs = spec.fs;
    rec.source_fs = spec.fs;
    rec.patient_id = patient_id;
    rec.record_id = record_id;
    rec.label = label_at(t_min);
    rec.zone = assign_zone(t_min, ProtocolTimeline::from_spec(spec));
    rec.beat_onsets_s = model.onsets();

    // Ground-truth peaks: R times strictly inside the sampled span.
    const double last_t = (static_cast<double>(rec.samples.size()) - 1.5) / spec.fs;
    std::vector<double> peaks, rr;
    for (std::size_t i = 1; i < r_times.size(); ++i) {
        if (r_times[i] > 0.0 && r_times[i] < last_t) peaks.push_back(r_times[i]);
    }
    double hr_sum = 0.0;
    for (std::size_t i = 1; i < peaks.size(); ++i) {
        rr.push_back(peaks[i] - peaks[i - 1]);
        hr_sum += 60.0 / rr.back();
    }
    json extra = {{"t_min", t_min},
                  {"r_peaks_s", peaks},
                  {"rr_s", rr},
                  {"mean_hr_bpm", rr.empty() ? 0.0 : hr_sum / static_cast<double>(rr.size())},
                  {"target_hr_bpm", hr},
                  {"qt_ms", qt_ms},
                  {"drug_effect", effect},
                  {"stress_level", stress_level_at(t_min, spec)},
                  {"patient_hr_base_bpm", p.hr_base},
                  {"patient_qt_base_ms", p.qt_base}};
    return {std::move(rec), std::move(extra)};
}

std::string numbered(const char* prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%03zu", prefix, i);
    return buf;
}

}  // namespace

GeneratedDataset generate(const SyntheticProtocolSpec& spec) {
    spec.validate();
    std::vector<double> times;
    const double step_min = spec.record_interval_s / 60.0;
    const double end_min = spec.post_drug_hours * 60.0;
    for (std::size_t k = 0;; ++k) {
        const double t = -spec.baseline_minutes + static_cast<double>(k) * step_min;
        if (t + spec.record_duration_s / 60.0 > end_min + 1e-9) break;
        times.push_back(t);
    }

    std::vector<std::vector<io::StoredRecord>> per_patient(spec.n_patients);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t pi = 0; pi < static_cast<std::ptrdiff_t>(spec.n_patients); ++pi) {
        const auto p_idx = static_cast<std::size_t>(pi);
        std::mt19937_64 prng(derive_seed(spec.seed, p_idx));
        const PatientParams params = draw_patient(spec, prng);
        const std::string patient_id = numbered("p", p_idx);
        for (std::size_t k = 0; k < times.size(); ++k) {
            std::mt19937_64 rrng(derive_seed(spec.seed, p_idx, k + 1));
            per_patient[p_idx].push_back(
                make_record(spec, params, patient_id, patient_id + "_" + numbered("r", k), times[k], rrng));
        }
    }

    GeneratedDataset out;
    out.manifest.seed = spec.seed;
    out.manifest.generator = spec.to_json();
    for (auto& recs : per_patient) {
        for (auto& sr : recs) {
            const auto& r = sr.record;
            out.manifest.records.push_back({r.record_id, r.patient_id, "records/" + r.record_id, r.label, r.zone, r.fs,
                                            r.source_fs, Partition::None, sr.extra.at("t_min").get<double>(), ""});
            out.records.push_back(std::move(sr));
        }
    }
    return out;
}

}  // namespace ikrnet::data
