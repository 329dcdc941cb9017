#include <doctest.h>

#include <cmath>

#include "kinpred/rng.hpp"
#include "kinpred/signals.hpp"

using namespace kinpred;

namespace {

TimeSeries sine_series(double freq, double rate, double duration, double amp = 1.0) {
    const std::size_t n = std::size_t(duration * rate);
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = amp * std::sin(2.0 * M_PI * freq * i / rate);
    return TimeSeries(0.0, rate, 1, std::move(d));
}

double rms_of(const std::vector<double>& x, std::size_t from, std::size_t to) {
    double s = 0.0;
    for (std::size_t i = from; i < to; ++i) s += x[i] * x[i];
    return std::sqrt(s / double(to - from));
}

} // namespace

TEST_CASE("TimeSeries rejects bad construction") {
    CHECK_THROWS_AS(TimeSeries(0.0, -1.0, 1, {1.0}), InvalidInput);
    CHECK_THROWS_AS(TimeSeries(0.0, 1.0, 2, {1.0}), InvalidInput);
    CHECK_THROWS_AS(TimeSeries(0.0, 1.0, 1, {std::nan("")}), InvalidInput);
}

TEST_CASE("sample_at: grid points, midpoints, range errors") {
    TimeSeries s(0.0, 100.0, 1, {10.0, 20.0});
    CHECK(sample_at(s, 0.01)[0] == doctest::Approx(20.0));
    CHECK(sample_at(s, 0.005)[0] == doctest::Approx(15.0));
    CHECK(sample_at(s, 0.0)[0] == doctest::Approx(10.0));
    CHECK_THROWS_AS(sample_at(s, 0.02), OutOfRange);
    CHECK_THROWS_AS(sample_at(s, -0.01), OutOfRange);
}

TEST_CASE("resample preserves endpoints and lines") {
    std::vector<double> ramp(165);
    for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = double(i);
    TimeSeries s(0.0, 1111.11, 1, ramp);
    const TimeSeries r = resample(s, 60);
    CHECK(r.length() == 60);
    CHECK(r.at(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.at(59, 0) == doctest::Approx(164.0).epsilon(1e-12));
    // linear input -> exact linear output
    for (std::size_t j = 0; j < 60; ++j) {
        const double expect = double(j) * 164.0 / 59.0;
        CHECK(std::abs(r.at(j, 0) - expect) < 1e-12);
    }
    CHECK_THROWS_AS(resample(s, 1), InvalidInput);

    TimeSeries c(0.0, 10.0, 1, std::vector<double>(20, 7.5));
    const TimeSeries rc = resample(c, 7);
    for (std::size_t j = 0; j < 7; ++j) CHECK(rc.at(j, 0) == doctest::Approx(7.5));
}

TEST_CASE("resample back to the original grid is the identity") {
    Rng rng(7);
    std::vector<double> d(50);
    for (auto& v : d) v = rng.normal();
    TimeSeries s(0.5, 25.0, 1, d);
    const TimeSeries r = resample(s, 50);
    for (std::size_t i = 0; i < 50; ++i) CHECK(std::abs(r.at(i, 0) - d[i]) < 1e-12);
}

TEST_CASE("butterworth: DC gain is exactly one") {
    TimeSeries s(0.0, 100.0, 1, std::vector<double>(64, 5.0));
    for (auto mode : {FilterMode::ZeroPhase, FilterMode::Causal}) {
        const TimeSeries f = butterworth_lowpass(s, 4, 6.0, mode);
        for (std::size_t i = 0; i < f.length(); ++i)
            CHECK(f.at(i, 0) == doctest::Approx(5.0).epsilon(1e-12));
    }
}

TEST_CASE("butterworth: -3 dB at cutoff, single pass") {
    const double rate = 1000.0, fc = 6.0;
    const TimeSeries s = sine_series(fc, rate, 30.0);
    const TimeSeries f = butterworth_lowpass(s, 4, fc, FilterMode::Causal);
    const auto& x = f.data();
    const std::size_t n = x.size();
    const double ratio = rms_of(x, n / 2, n) / rms_of(s.data(), n / 2, n);
    CHECK(ratio == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.02));
}

TEST_CASE("butterworth: 30 Hz attenuation matches the analytic magnitude") {
    // |H|^2 = 1 / (1 + (f/fc)^8): 10*log10(1 + 5^8) = 55.92 dB.
    const double rate = 1000.0, fc = 6.0;
    const TimeSeries s = sine_series(30.0, rate, 30.0);
    const TimeSeries f = butterworth_lowpass(s, 4, fc, FilterMode::Causal);
    const auto& x = f.data();
    const std::size_t n = x.size();
    const double att_db =
        -20.0 * std::log10(rms_of(x, n / 2, n) / rms_of(s.data(), n / 2, n));
    CHECK(att_db == doctest::Approx(55.92).epsilon(1.0 / 55.92));
}

TEST_CASE("butterworth: zero-phase pass adds no lag") {
    // Band-limited signal: sum of low-frequency sines.
    const double rate = 100.0;
    const std::size_t n = 1024;
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = double(i) / rate;
        d[i] = std::sin(2.0 * M_PI * 1.0 * t) + 0.5 * std::sin(2.0 * M_PI * 2.3 * t + 0.7);
    }
    TimeSeries s(0.0, rate, 1, d);
    const TimeSeries f = butterworth_lowpass(s, 4, 6.0, FilterMode::ZeroPhase);
    // cross-correlation peak over small lags
    int best_lag = -100;
    double best = -1e300;
    for (int lag = -20; lag <= 20; ++lag) {
        double c = 0.0;
        for (std::size_t i = 100; i + 100 < n; ++i)
            c += f.at(i, 0) * s.at(std::size_t(int(i) + lag), 0);
        if (c > best) {
            best = c;
            best_lag = lag;
        }
    }
    CHECK(best_lag == 0);
}

TEST_CASE("butterworth is linear") {
    Rng rng(42);
    const double rate = 100.0;
    const std::size_t n = 256;
    std::vector<double> xa(n), xb(n), xc(n);
    const double a = 1.7, b = -0.6;
    for (std::size_t i = 0; i < n; ++i) {
        xa[i] = rng.normal();
        xb[i] = rng.normal();
        xc[i] = a * xa[i] + b * xb[i];
    }
    const auto fa = butterworth_lowpass(xa, rate, 4, 6.0);
    const auto fb = butterworth_lowpass(xb, rate, 4, 6.0);
    const auto fc = butterworth_lowpass(xc, rate, 4, 6.0);
    for (std::size_t i = 0; i < n; ++i)
        CHECK(std::abs(fc[i] - (a * fa[i] + b * fb[i])) < 1e-9);
}

TEST_CASE("butterworth parameter validation") {
    TimeSeries s(0.0, 100.0, 1, std::vector<double>(64, 1.0));
    CHECK_THROWS_AS(butterworth_lowpass(s, 3, 6.0), InvalidInput);  // odd order
    CHECK_THROWS_AS(butterworth_lowpass(s, 4, 50.0), InvalidInput); // at nyquist
    CHECK_THROWS_AS(butterworth_lowpass(s, 4, 60.0), InvalidInput); // beyond nyquist
    TimeSeries tiny(0.0, 100.0, 1, std::vector<double>(11, 1.0));
    CHECK_THROWS_AS(butterworth_lowpass(tiny, 4, 6.0), TooShort);
}

TEST_CASE("resample_to_rate hits the requested rate exactly") {
    const TimeSeries s = sine_series(1.0, 100.0, 10.0);
    const TimeSeries r = resample_to_rate(s, 74.0);
    CHECK(r.rate() == doctest::Approx(74.0));
    CHECK(r.length() == 740); // 74 Hz grid points inside [0, 9.99]
    for (std::size_t i = 0; i < r.length(); ++i) {
        const double expect = std::sin(2.0 * M_PI * r.time_at(i));
        CHECK(std::abs(r.at(i, 0) - expect) < 2e-3); // linear interp error
    }
}
