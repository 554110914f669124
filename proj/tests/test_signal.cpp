#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "ikrnet/errors.hpp"
#include "ikrnet/record_io.hpp"
#include "ikrnet/signal.hpp"
#include "support.hpp"

using namespace ikrnet;
using namespace ikrnet::signal;

namespace {

EcgRecord from_samples(std::vector<double> x, double fs) {
    EcgRecord r;
    r.samples = std::move(x);
    r.fs = fs;
    r.source_fs = fs;
    return r;
}

// Sum of sines below f_max, sampled at fs for the given duration.
std::vector<double> bandlimited(std::size_t n, double fs, double fmax, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> f(0.5, fmax), ph(0.0, 2 * std::numbers::pi), a(0.1, 1.0);
    std::vector<std::tuple<double, double, double>> comps;
    for (int i = 0; i < 8; ++i) comps.emplace_back(f(rng), ph(rng), a(rng));
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / fs;
        for (const auto& [fr, p, amp] : comps) x[i] += amp * std::sin(2 * std::numbers::pi * fr * t + p);
    }
    return x;
}

}  // namespace

TEST_SUITE("signal") {

TEST_CASE("sample: constant model gives N = floor(tK fs) ones") {
    const auto m = ContinuousBeatModel::from_function(0.0, 1.0, [](double) { return 1.0; });
    const auto r = sample(m, 10.0);
    REQUIRE(r.samples.size() == 10);
    for (double v : r.samples) CHECK(v == 1.0);
    CHECK(r.fs == 10.0);
}

TEST_CASE("sample: 5 Hz sine matches closed form") {
    const auto m = ContinuousBeatModel::from_function(
        0.0, 1.0, [](double t) { return std::sin(2 * std::numbers::pi * 5 * t); });
    const auto r = sample(m, 500.0);
    REQUIRE(r.samples.size() == 500);
    for (std::size_t n = 0; n < 500; ++n) {
        CHECK(r.samples[n] == doctest::Approx(std::sin(2 * std::numbers::pi * 5 * n / 500.0)).epsilon(1e-12));
    }
}

TEST_CASE("sample: two-beat model peaks located by dense brute force") {
    const std::vector<GaussianWave> qrs{{0.0, 0.012, 1.0}, {0.2, 0.04, 0.25}};
    std::vector<Beat> beats{gaussian_beat(0.0, 0.6, 0.2, qrs), gaussian_beat(0.6, 1.4, 1.0, qrs)};
    const ContinuousBeatModel m(beats);
    const double fs = 250.0;
    const auto r = sample(m, fs);
    CHECK(r.samples.size() == 350);
    // Oracle: dense evaluation at 100 kHz, then nearest sample index of each maximum.
    for (const auto& [lo, hi] : std::vector<std::pair<double, double>>{{0.0, 0.6}, {0.6, 1.4}}) {
        double best_t = lo, best_v = -1.0;
        for (double t = lo; t < hi; t += 1e-5) {
            if (std::abs(m(t)) > best_v) best_v = std::abs(m(t)), best_t = t;
        }
        const auto expect = static_cast<std::size_t>(std::lround(best_t * fs));
        std::size_t arg = static_cast<std::size_t>(lo * fs);
        for (auto n = arg; n < static_cast<std::size_t>(hi * fs); ++n) {
            if (std::abs(r.samples[n]) > std::abs(r.samples[arg])) arg = n;
        }
        CHECK(arg == expect);
    }
    CHECK(r.beat_onsets_s == std::vector<double>{0.0, 0.6});
}

TEST_CASE("sample: invalid inputs") {
    const auto m = ContinuousBeatModel::from_function(0.0, 1.0, [](double) { return 0.0; });
    CHECK_THROWS_AS(sample(m, 0.0), InvalidArgument);
    CHECK_THROWS_AS(sample(m, -5.0), InvalidArgument);
    CHECK_THROWS_AS(sample(ContinuousBeatModel{}, 10.0), InvalidArgument);
}

TEST_CASE("beat model: contiguity and piecewise evaluation") {
    std::vector<Beat> ok{{0.0, 1.0, [](double) { return 1.0; }}, {1.0, 2.0, [](double) { return 2.0; }}};
    const ContinuousBeatModel m(ok);
    CHECK(m(0.0) == 1.0);
    CHECK(m(0.999) == 1.0);
    CHECK(m(1.0) == 2.0);
    CHECK(m(2.0) == 2.0);
    CHECK_THROWS_AS(m(2.1), InvalidArgument);
    std::vector<Beat> gap{{0.0, 1.0, [](double) { return 1.0; }}, {1.1, 2.0, [](double) { return 2.0; }}};
    CHECK_THROWS_AS(ContinuousBeatModel{gap}, InvalidArgument);
    std::vector<Beat> backwards{{1.0, 0.5, [](double) { return 1.0; }}};
    CHECK_THROWS_AS(ContinuousBeatModel{backwards}, InvalidArgument);
}

TEST_CASE("check_nyquist") {
    CHECK(check_nyquist(40, 500));
    CHECK(check_nyquist(40, 80));
    CHECK_FALSE(check_nyquist(40, 79));
}

TEST_CASE("resample: constant stays constant at the new length") {
    const auto r = resample(from_samples(std::vector<double>(100, 3.5), 100.0), 37.0);
    CHECK(r.samples.size() == 37);
    CHECK(r.fs == 37.0);
    for (double v : r.samples) CHECK(v == doctest::Approx(3.5).epsilon(1e-12));
}

TEST_CASE("resample: length mapping 5000 @ 500 Hz -> 180 Hz") {
    const auto r = resample(from_samples(bandlimited(5000, 500, 40, 1), 500.0), 180.0);
    CHECK(r.samples.size() == 1800);
    CHECK(resampled_length(5000, 500, 215) == 2150);
}

TEST_CASE("resample: 5 Hz sine round trip 500 -> 250 -> 500 within 1e-3 on interior samples") {
    std::vector<double> x(5000);
    for (std::size_t n = 0; n < x.size(); ++n) x[n] = std::sin(2 * std::numbers::pi * 5 * n / 500.0);
    const auto back = resample(resample(from_samples(x, 500.0), 250.0), 500.0);
    REQUIRE(back.samples.size() == 5000);
    double worst = 0.0;
    for (std::size_t n = 5; n + 5 < x.size(); ++n) worst = std::max(worst, std::abs(back.samples[n] - x[n]));
    CHECK(worst < 1e-3);
}

TEST_CASE("resample: same rate is identity, provenance kept, short input rejected") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto rec = from_samples(bandlimited(777, 500, 60, seed), 500.0);
        rec.source_fs = 180.0;
        const auto same = resample(rec, 500.0);
        REQUIRE(same.samples.size() == rec.samples.size());
        for (std::size_t i = 0; i < rec.samples.size(); ++i) CHECK(std::abs(same.samples[i] - rec.samples[i]) <= 1e-9);
        CHECK(same.source_fs == 180.0);
    }
    CHECK_THROWS_AS(resample(from_samples({1, 2, 3}, 10.0), 5.0), InvalidArgument);
    CHECK_THROWS_AS(resample(from_samples({1, 2, 3, 4}, 10.0), 0.0), InvalidArgument);
}

TEST_CASE("resample: band-limited round trip SNR above 40 dB") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto x = bandlimited(5000, 500, 40, seed);
        const auto back = resample(resample(from_samples(x, 500.0), 250.0), 500.0);
        double sig = 0.0, err = 0.0;
        for (std::size_t n = 5; n + 5 < x.size(); ++n) {
            sig += x[n] * x[n];
            err += (back.samples[n] - x[n]) * (back.samples[n] - x[n]);
        }
        CHECK(10.0 * std::log10(sig / err) > 40.0);
    }
}

TEST_CASE("standardize: closed form, idempotence, degenerate input") {
    const auto z = standardize(from_samples({1, 2, 3}, 1.0));
    CHECK(z.samples[0] == doctest::Approx(-1.224744871391589).epsilon(1e-12));
    CHECK(z.samples[1] == doctest::Approx(0.0));
    CHECK(z.samples[2] == doctest::Approx(1.224744871391589).epsilon(1e-12));
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto once = standardize(from_samples(bandlimited(1000, 500, 40, seed), 500));
        const auto twice = standardize(once);
        for (std::size_t i = 0; i < once.samples.size(); ++i) CHECK(std::abs(twice.samples[i] - once.samples[i]) <= 1e-9);
        const auto [mean, sd] = test::mean_std(once.samples);
        CHECK(std::abs(mean) <= 1e-9);
        CHECK(std::abs(sd - 1.0) <= 1e-9);
        CHECK(once.fs == 500);
    }
    CHECK_THROWS_AS(standardize(from_samples({2, 2, 2}, 1.0)), DegenerateSignal);
    CHECK_THROWS_AS(standardize(from_samples({}, 1.0)), DegenerateSignal);
}

TEST_CASE("estimate_heart_rate: hand examples") {
    std::vector<double> x(1001, 0.0);
    x[200] = 1.0;
    x[700] = 1.0;
    auto rec = from_samples(x, 500.0);
    const std::vector<IndexRange> w{{0, 450}, {450, 1001}};
    const auto hr = estimate_heart_rate(rec, w);
    CHECK(hr.peak_indices == std::vector<std::size_t>{200, 700});
    CHECK(hr.average_bpm == doctest::Approx(60.0));

    std::vector<double> y(700, 0.0);
    y[100] = 2.0;
    y[350] = -2.5;
    y[600] = 1.0;
    const std::vector<IndexRange> w3{{0, 200}, {200, 500}, {500, 700}};
    const auto hr3 = estimate_heart_rate(from_samples(y, 250.0), w3);
    CHECK(hr3.instantaneous_bpm == std::vector<double>{60.0, 60.0});
    CHECK(hr3.average_bpm == 60.0);
}

TEST_CASE("estimate_heart_rate: earliest argmax wins and errors") {
    std::vector<double> x(100, 0.0);
    x[10] = 1.0;
    x[20] = -1.0;
    x[70] = 1.0;
    const std::vector<IndexRange> w{{0, 50}, {50, 100}};
    CHECK(estimate_heart_rate(from_samples(x, 100.0), w).peak_indices[0] == 10);
    const std::vector<IndexRange> one{{0, 100}};
    CHECK_THROWS_AS(estimate_heart_rate(from_samples(x, 100.0), one), InsufficientBeats);
    const std::vector<IndexRange> overlap{{0, 60}, {50, 100}};
    CHECK_THROWS_AS(estimate_heart_rate(from_samples(x, 100.0), overlap), InvalidArgument);
    const std::vector<IndexRange> outside{{0, 50}, {50, 101}};
    CHECK_THROWS_AS(estimate_heart_rate(from_samples(x, 100.0), outside), InvalidArgument);
}

TEST_CASE("estimate_heart_rate: amplitude scaling invariance and brute-force recount") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> x(2000);
        for (auto& v : x) v = nd(rng);
        std::vector<IndexRange> w;
        for (std::size_t b = 0; b < 2000; b += 250) w.push_back({b, b + 250});
        auto rec = from_samples(x, 500.0);
        const auto hr = estimate_heart_rate(rec, w);
        for (auto& v : rec.samples) v *= 3.7;
        const auto scaled = estimate_heart_rate(rec, w);
        CHECK(scaled.peak_indices == hr.peak_indices);
        REQUIRE(hr.instantaneous_bpm.size() == hr.peak_indices.size() - 1);
        double sum = 0.0;
        for (std::size_t i = 0; i + 1 < hr.peak_indices.size(); ++i) {
            const double expect = 60.0 * 500.0 / static_cast<double>(hr.peak_indices[i + 1] - hr.peak_indices[i]);
            CHECK(hr.instantaneous_bpm[i] == expect);
            sum += expect;
        }
        CHECK(hr.average_bpm == doctest::Approx(sum / static_cast<double>(hr.instantaneous_bpm.size())).epsilon(1e-15));
    }
}

TEST_CASE("detect_beat_windows: beat counts on synthetic beat trains") {
    const std::vector<GaussianWave> waves{{-0.16, 0.025, 0.12}, {0.0, 0.012, 1.0}, {0.25, 0.04, 0.3}};
    for (std::size_t nbeats : {1u, 5u, 12u}) {
        std::vector<Beat> beats;
        const double rr = 0.8;
        for (std::size_t i = 0; i < nbeats; ++i) {
            beats.push_back(gaussian_beat(i * rr, (i + 1) * rr, i * rr + 0.35, waves));
        }
        auto rec = sample(ContinuousBeatModel(beats), 500.0);
        std::mt19937_64 rng(nbeats);
        std::normal_distribution<double> nd(0.0, 0.02);
        for (auto& v : rec.samples) v += nd(rng);
        const auto w = detect_beat_windows(rec);
        CHECK(w.size() == nbeats);
        for (std::size_t i = 0; i + 1 < w.size(); ++i) CHECK(w[i].end == w[i + 1].begin);
        if (nbeats == 1) {
            const auto r_idx = static_cast<std::size_t>(0.35 * 500);
            CHECK(w[0].begin <= r_idx);
            CHECK(w[0].end > r_idx);
        }
    }
}

TEST_CASE("detect_beat_windows: flat input gives no windows") {
    CHECK(detect_beat_windows(from_samples(std::vector<double>(1000, 0.0), 500.0)).empty());
    CHECK(detect_beat_windows(from_samples({}, 500.0)).empty());
}

TEST_CASE("record io: sidecar round trip is bit exact") {
    EcgRecord r;
    r.samples = {0.1, -1.0 / 3.0, 2.5e-17, 12345.678901234567};
    r.fs = 215.0;
    r.source_fs = 180.0;
    r.patient_id = "p007";
    r.record_id = "p007_r011@180";
    r.label = Label::SotPlus;
    r.zone = Zone::StMinusDgPlus;
    r.beat_onsets_s = {0.0, 0.1 + 0.2, 1.0 / 7.0};
    const auto dir = test::temp_dir("record_io");
    io::write_record(dir / "rec", r, {{"qt_ms", 433.25}});
    const auto back = io::read_record(dir / "rec");
    CHECK(back.record.samples == r.samples);
    CHECK(back.record.fs == r.fs);
    CHECK(back.record.source_fs == r.source_fs);
    CHECK(back.record.patient_id == r.patient_id);
    CHECK(back.record.record_id == r.record_id);
    CHECK(back.record.label == r.label);
    CHECK(back.record.zone == r.zone);
    CHECK(back.record.beat_onsets_s == r.beat_onsets_s);
    CHECK(back.extra.at("qt_ms").get<double>() == 433.25);
    CHECK(io::read_text(dir / "rec.csv").rfind("n,amplitude\n", 0) == 0);
}

}  // TEST_SUITE
