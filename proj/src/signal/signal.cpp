#include "ikrnet/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <utility>

#include "ikrnet/errors.hpp"

namespace ikrnet::signal {

namespace {

// Absorbs representation error in products such as 10.0 * 180.0.
constexpr double kLengthSlack = 1e-9;

}  // namespace

Beat gaussian_beat(double onset_s, double offset_s, double r_time_s, std::vector<GaussianWave> waves) {
    Beat beat;
    beat.onset_s = onset_s;
    beat.offset_s = offset_s;
    beat.waveform = [r_time_s, waves = std::move(waves)](double t) {
        double v = 0.0;
        for (const auto& w : waves) {
            const double z = (t - r_time_s - w.offset_s) / w.width_s;
            v += w.amplitude * std::exp(-0.5 * z * z);
        }
        return v;
    };
    return beat;
}

ContinuousBeatModel::ContinuousBeatModel(std::vector<Beat> beats) : beats_(std::move(beats)) {
    if (beats_.empty()) {
        throw InvalidArgument("beat model needs at least one beat");
    }
    for (std::size_t i = 0; i < beats_.size(); ++i) {
        const auto& b = beats_[i];
        if (!(b.onset_s < b.offset_s)) {
            throw InvalidArgument("beat " + std::to_string(i) + " has non-increasing bounds");
        }
        if (i > 0 && beats_[i - 1].offset_s != b.onset_s) {
            throw InvalidArgument("beat " + std::to_string(i) + " is not contiguous with its predecessor");
        }
        if (!b.waveform) {
            throw InvalidArgument("beat " + std::to_string(i) + " has no waveform");
        }
    }
}

ContinuousBeatModel ContinuousBeatModel::from_function(double t0, double tK, std::function<double(double)> fn) {
    std::vector<Beat> beats(1);
    beats[0].onset_s = t0;
    beats[0].offset_s = tK;
    beats[0].waveform = std::move(fn);
    return ContinuousBeatModel(std::move(beats));
}

double ContinuousBeatModel::operator()(double t) const {
    if (beats_.empty() || t < start() || t > end()) {
        throw InvalidArgument("time outside the beat model span");
    }
    // First beat whose offset is beyond t; t == t_K belongs to the last beat.
    auto it = std::upper_bound(beats_.begin(), beats_.end(), t,
                               [](double v, const Beat& b) { return v < b.offset_s; });
    if (it == beats_.end()) {
        it = std::prev(beats_.end());
    }
    return it->waveform(t);
}

std::vector<double> ContinuousBeatModel::onsets() const {
    std::vector<double> out;
    out.reserve(beats_.size());
    for (const auto& b : beats_) out.push_back(b.onset_s);
    return out;
}

EcgRecord sample(const ContinuousBeatModel& model, double fs) {
    if (!(fs > 0.0)) {
        throw InvalidArgument("sampling rate must be positive");
    }
    if (model.empty()) {
        throw InvalidArgument("cannot sample an empty beat model");
    }
    const double t0 = model.start();
    const auto n = static_cast<std::size_t>(std::floor((model.end() - t0) * fs + kLengthSlack));
    EcgRecord rec;
    rec.fs = fs;
    rec.source_fs = fs;
    rec.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        rec.samples[i] = model(t0 + static_cast<double>(i) / fs);
    }
    for (double onset : model.onsets()) {
        rec.beat_onsets_s.push_back(onset - t0);
    }
    return rec;
}

bool check_nyquist(double model_fmax_hz, double fs_hz) { return fs_hz >= 2.0 * model_fmax_hz; }

NaturalCubicSpline::NaturalCubicSpline(std::span<const double> values)
    : values_(values.begin(), values.end()), second_(values.size(), 0.0) {
    const std::size_t n = values_.size();
    if (n < 2) {
        throw InvalidArgument("spline needs at least two knots");
    }
    if (n < 3) return;
    // Thomas algorithm on M_{i-1} + 4 M_i + M_{i+1} = 6 (y_{i+1} - 2 y_i + y_{i-1}).
    const std::size_t m = n - 2;
    std::vector<double> c(m), d(m);
    for (std::size_t k = 0; k < m; ++k) {
        const std::size_t i = k + 1;
        const double rhs = 6.0 * (values_[i + 1] - 2.0 * values_[i] + values_[i - 1]);
        if (k == 0) {
            c[k] = 1.0 / 4.0;
            d[k] = rhs / 4.0;
        } else {
            const double denom = 4.0 - c[k - 1];
            c[k] = 1.0 / denom;
            d[k] = (rhs - d[k - 1]) / denom;
        }
    }
    second_[m] = d[m - 1];
    for (std::size_t k = m - 1; k-- > 0;) {
        second_[k + 1] = d[k] - c[k] * second_[k + 2];
    }
}

double NaturalCubicSpline::operator()(double pos) const {
    const std::size_t n = values_.size();
    const double last = static_cast<double>(n - 1);
    pos = std::clamp(pos, 0.0, last);
    auto i = static_cast<std::size_t>(std::floor(pos));
    if (i >= n - 1) i = n - 2;
    const double b = pos - static_cast<double>(i);
    const double a = 1.0 - b;
    return a * values_[i] + b * values_[i + 1] +
           ((a * a * a - a) * second_[i] + (b * b * b - b) * second_[i + 1]) / 6.0;
}

std::size_t resampled_length(std::size_t n, double fs, double target_fs) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * target_fs / fs + kLengthSlack));
}

EcgRecord resample(const EcgRecord& record, double target_fs) {
    if (!(target_fs > 0.0)) {
        throw InvalidArgument("target sampling rate must be positive");
    }
    if (record.samples.size() < 4) {
        throw InvalidArgument("resampling needs at least 4 samples, got " +
                              std::to_string(record.samples.size()));
    }
    const NaturalCubicSpline spline(record.samples);
    const std::size_t m = resampled_length(record.samples.size(), record.fs, target_fs);
    EcgRecord out = record;
    out.fs = target_fs;
    out.samples.resize(m);
    const double ratio = record.fs / target_fs;
    for (std::size_t j = 0; j < m; ++j) {
        out.samples[j] = spline(static_cast<double>(j) * ratio);
    }
    return out;
}

EcgRecord standardize(const EcgRecord& record) {
    const auto& x = record.samples;
    if (x.empty()) {
        throw DegenerateSignal("cannot standardize an empty record");
    }
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / n);
    if (!(sd > 0.0) || !std::isfinite(sd)) {
        throw DegenerateSignal("record '" + record.record_id + "' has zero variance");
    }
    EcgRecord out = record;
    for (auto& v : out.samples) v = (v - mean) / sd;
    return out;
}

HeartRateSeries estimate_heart_rate(const EcgRecord& record, std::span<const IndexRange> beat_windows) {
    if (beat_windows.size() < 2) {
        throw InsufficientBeats("heart rate needs at least two beat windows, got " +
                                std::to_string(beat_windows.size()));
    }
    const auto& x = record.samples;
    HeartRateSeries hr;
    hr.peak_indices.reserve(beat_windows.size());
    std::size_t prev_end = 0;
    for (std::size_t w = 0; w < beat_windows.size(); ++w) {
        const auto& win = beat_windows[w];
        if (win.begin >= win.end || win.end > x.size()) {
            throw InvalidArgument("beat window " + std::to_string(w) + " is empty or outside the record");
        }
        if (w > 0 && win.begin < prev_end) {
            throw InvalidArgument("beat windows must be disjoint and ordered");
        }
        prev_end = win.end;
        std::size_t best = win.begin;
        for (std::size_t n = win.begin + 1; n < win.end; ++n) {
            if (std::abs(x[n]) > std::abs(x[best])) best = n;
        }
        hr.peak_indices.push_back(best);
    }
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < hr.peak_indices.size(); ++i) {
        const double rr = static_cast<double>(hr.peak_indices[i + 1] - hr.peak_indices[i]);
        hr.instantaneous_bpm.push_back(60.0 * record.fs / rr);
        sum += hr.instantaneous_bpm.back();
    }
    hr.average_bpm = sum / static_cast<double>(hr.instantaneous_bpm.size());
    return hr;
}

std::vector<IndexRange> detect_beat_windows(const EcgRecord& record, double refractory_s,
                                            double threshold_fraction) {
    std::vector<IndexRange> windows;
    const auto& x = record.samples;
    if (x.size() < 3) return windows;
    EcgRecord z;
    try {
        z = standardize(record);
    } catch (const DegenerateSignal&) {
        return windows;
    }
    std::vector<double> mag(z.samples.size());
    std::transform(z.samples.begin(), z.samples.end(), mag.begin(), [](double v) { return std::abs(v); });
    const double threshold = threshold_fraction * *std::max_element(mag.begin(), mag.end());
    const auto refractory = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(refractory_s * record.fs)));

    std::vector<std::size_t> peaks;
    // Maxima on the first or last sample belong to beats cut by the record
    // edge: they are not beats, but the neighbouring window stops short of them.
    std::optional<std::size_t> cut_front, cut_back;
    std::size_t i = 0;
    while (i < mag.size()) {
        if (mag[i] < threshold) {
            ++i;
            continue;
        }
        // Crossing found: the peak is the earliest maximum within one refractory span.
        const std::size_t stop = std::min(mag.size(), i + refractory);
        std::size_t best = i;
        for (std::size_t n = i + 1; n < stop; ++n) {
            if (mag[n] > mag[best]) best = n;
        }
        if (best == 0) {
            cut_front = best;
        } else if (best + 1 == mag.size()) {
            cut_back = best;
        } else {
            peaks.push_back(best);
        }
        i = best + refractory;
    }
    if (peaks.empty()) return windows;

    std::size_t begin = cut_front ? (*cut_front + peaks.front()) / 2 + 1 : 0;
    for (std::size_t p = 0; p < peaks.size(); ++p) {
        std::size_t end = x.size();
        if (p + 1 < peaks.size()) {
            end = (peaks[p] + peaks[p + 1]) / 2 + 1;
        } else if (cut_back) {
            end = (peaks[p] + *cut_back) / 2 + 1;
        }
        windows.push_back({begin, end});
        begin = end;
    }
    return windows;
}

}  // namespace ikrnet::signal
