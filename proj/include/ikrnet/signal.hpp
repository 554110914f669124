#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ikrnet/types.hpp"

namespace ikrnet::signal {

// One heartbeat of a continuous-time signal. The waveform is evaluated at
// absolute time t (seconds) for t in [onset_s, offset_s).
struct Beat {
    double onset_s = 0.0;
    double offset_s = 0.0;
    std::function<double(double)> waveform;
};

// Single Gaussian component of a beat (P, Q, R, S or T wave), positioned
// relative to the beat's R time.
struct GaussianWave {
    double offset_s = 0.0;
    double width_s = 0.01;
    double amplitude = 0.0;
};

Beat gaussian_beat(double onset_s, double offset_s, double r_time_s,
                   std::vector<GaussianWave> waves);

// Piecewise signal x(t): beat i owns [t_{i-1}, t_i), the last beat also owns t_K.
class ContinuousBeatModel {
public:
    ContinuousBeatModel() = default;
    // Throws InvalidArgument unless beats are non-empty, contiguous and
    // strictly increasing.
    explicit ContinuousBeatModel(std::vector<Beat> beats);

    static ContinuousBeatModel from_function(double t0, double tK, std::function<double(double)> fn);

    double operator()(double t) const;

    double start() const { return beats_.front().onset_s; }
    double end() const { return beats_.back().offset_s; }
    std::size_t size() const { return beats_.size(); }
    bool empty() const { return beats_.empty(); }
    const std::vector<Beat>& beats() const { return beats_; }
    std::vector<double> onsets() const;

private:
    std::vector<Beat> beats_;
};

struct EcgRecord {
    std::vector<double> samples;
    double fs = 500.0;
    std::string patient_id;
    Label label = Label::SotMinus;
    Zone zone = Zone::Unassigned;
    double source_fs = 500.0;
    std::string record_id;
    // Beat delimiters t_i in seconds from the first sample, when known.
    std::vector<double> beat_onsets_s;

    double duration_s() const { return static_cast<double>(samples.size()) / fs; }
};

// Half-open sample index range [begin, end).
struct IndexRange {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const { return end - begin; }
    bool operator==(const IndexRange&) const = default;
};

struct HeartRateSeries {
    std::vector<std::size_t> peak_indices;
    std::vector<double> instantaneous_bpm;
    double average_bpm = 0.0;
};

// x[n] = x(t_0 + n/fs), n in [0, N), N = floor((t_K - t_0) * fs).
EcgRecord sample(const ContinuousBeatModel& model, double fs);

bool check_nyquist(double model_fmax_hz, double fs_hz);

// Natural cubic spline through the input samples, evaluated on a uniform grid
// at target_fs over the same duration. Evaluation is clamped to the knot span.
EcgRecord resample(const EcgRecord& record, double target_fs);

// Output length for a resample of n samples from fs to target_fs.
std::size_t resampled_length(std::size_t n, double fs, double target_fs);

// Per-record population z-score. Throws DegenerateSignal on zero variance.
EcgRecord standardize(const EcgRecord& record);

// R peak per window is the earliest argmax of |x|; instantaneous HR between
// consecutive peaks is 60 fs / (n_{i+1} - n_i); the average is their mean.
HeartRateSeries estimate_heart_rate(const EcgRecord& record, std::span<const IndexRange> beat_windows);

// Amplitude threshold plus refractory period on the standardized signal.
// Windows split the record at midpoints between detected R peaks. A maximum
// on the first or last sample is treated as a beat cut by the record edge.
std::vector<IndexRange> detect_beat_windows(const EcgRecord& record, double refractory_s = 0.2,
                                            double threshold_fraction = 0.5);

// Uniform-knot natural cubic spline (knots at 0, 1, ..., n-1 in index units).
class NaturalCubicSpline {
public:
    explicit NaturalCubicSpline(std::span<const double> values);

    // pos is clamped to [0, n-1].
    double operator()(double pos) const;
    std::size_t size() const { return values_.size(); }

private:
    std::vector<double> values_;
    std::vector<double> second_;
};

}  // namespace ikrnet::signal
