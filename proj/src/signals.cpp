#include "kinpred/signals.hpp"

#include <algorithm>
#include <cmath>

namespace kinpred {

TimeSeries::TimeSeries(double start_time, double rate, std::size_t channels,
                       std::vector<double> data)
    : start_time_(start_time), rate_(rate), channels_(channels), data_(std::move(data)) {
    if (rate_ <= 0.0 || !std::isfinite(rate_))
        throw InvalidInput("TimeSeries: rate must be positive, got " + std::to_string(rate_));
    if (channels_ == 0)
        throw InvalidInput("TimeSeries: channel count must be positive");
    if (data_.size() % channels_ != 0)
        throw InvalidInput("TimeSeries: data size not a multiple of channel count");
    for (double v : data_)
        if (!std::isfinite(v)) throw InvalidInput("TimeSeries: non-finite sample");
}

std::vector<double> TimeSeries::channel(std::size_t c) const {
    std::vector<double> out(length());
    for (std::size_t i = 0; i < length(); ++i) out[i] = at(i, c);
    return out;
}

void SensorRecording::validate() const {
    if (emg.channels() != 9)
        throw InvalidInput("SensorRecording: emg must have 9 channels");
    if (imu_angle.channels() != 1)
        throw InvalidInput("SensorRecording: imu_angle must have 1 channel");
    if (markers.channels() % 3 != 0)
        throw InvalidInput("SensorRecording: marker width must be a multiple of 3");
    if (measured_angle && measured_angle->channels() != 1)
        throw InvalidInput("SensorRecording: measured_angle must have 1 channel");
}

std::vector<double> sample_at(const TimeSeries& series, double t) {
    if (series.length() == 0) throw InvalidInput("sample_at: empty series");
    const double rel = (t - series.start_time()) * series.rate();
    const double last = double(series.length() - 1);
    // One grid-spacing worth of slack in ULPs so t computed as start + i/rate
    // round-trips; anything clearly outside the span is an error.
    const double eps = 1e-9;
    if (rel < -eps || rel > last + eps)
        throw OutOfRange("sample_at: t=" + std::to_string(t) + " outside series span");
    const double clamped = std::clamp(rel, 0.0, last);
    const std::size_t i0 = std::min(std::size_t(clamped), series.length() - 1);
    const std::size_t i1 = std::min(i0 + 1, series.length() - 1);
    const double frac = clamped - double(i0);
    std::vector<double> out(series.channels());
    auto f0 = series.frame(i0);
    auto f1 = series.frame(i1);
    for (std::size_t c = 0; c < series.channels(); ++c)
        out[c] = f0[c] + frac * (f1[c] - f0[c]);
    return out;
}

double sample_at_scalar(const TimeSeries& series, double t) {
    if (series.channels() != 1) throw InvalidInput("sample_at_scalar: series is not 1-channel");
    return sample_at(series, t)[0];
}

TimeSeries resample(const TimeSeries& series, std::size_t n_out) {
    if (n_out < 2) throw InvalidInput("resample: n_out must be >= 2");
    if (series.length() < 2) throw TooShort("resample: need at least 2 input frames");
    const std::size_t nc = series.channels();
    const double span = double(series.length() - 1) / series.rate();
    std::vector<double> data(n_out * nc);
    for (std::size_t j = 0; j < n_out; ++j) {
        // Interpolate in index space; endpoints land exactly on input frames.
        const double pos = double(j) * double(series.length() - 1) / double(n_out - 1);
        const std::size_t i0 = std::min(std::size_t(pos), series.length() - 2);
        const double frac = pos - double(i0);
        auto f0 = series.frame(i0);
        auto f1 = series.frame(i0 + 1);
        for (std::size_t c = 0; c < nc; ++c)
            data[j * nc + c] = f0[c] + frac * (f1[c] - f0[c]);
    }
    const double new_rate = double(n_out - 1) / span;
    return TimeSeries(series.start_time(), new_rate, nc, std::move(data));
}

TimeSeries resample_to_rate(const TimeSeries& series, double new_rate) {
    if (new_rate <= 0.0) throw InvalidInput("resample_to_rate: rate must be positive");
    if (series.length() < 2) throw TooShort("resample_to_rate: need at least 2 input frames");
    const double last = series.end_time();
    const std::size_t nc = series.channels();
    std::vector<double> data;
    for (std::size_t j = 0;; ++j) {
        const double t = series.start_time() + double(j) / new_rate;
        if (t > last + 1e-12) break;
        auto f = sample_at(series, std::min(t, last));
        data.insert(data.end(), f.begin(), f.end());
    }
    return TimeSeries(series.start_time(), new_rate, nc, std::move(data));
}

namespace {

struct Biquad {
    double b0, b1, b2, a1, a2;
};

// Low-pass Butterworth biquad cascade via bilinear transform with
// pre-warped cutoff. order must be even.
std::vector<Biquad> design_butterworth(int order, double cutoff_hz, double rate) {
    const double k = 2.0 * rate;
    const double warped = k * std::tan(M_PI * cutoff_hz / rate);
    std::vector<Biquad> sections;
    sections.reserve(order / 2);
    for (int m = 0; m < order / 2; ++m) {
        // Conjugate pole pair at angle gamma off the negative real axis.
        const double gamma = M_PI * (2.0 * m + 1.0) / (2.0 * order);
        const double a = k * k;
        const double b = 2.0 * std::sin(gamma) * warped * k;
        const double c = warped * warped;
        const double d = a + b + c;
        sections.push_back({c / d, 2.0 * c / d, c / d, (2.0 * c - 2.0 * a) / d,
                            (a - b + c) / d});
    }
    return sections;
}

// Direct form II transposed, states preloaded to the steady-state
// response for the first input value.
void run_cascade(const std::vector<Biquad>& sections, std::vector<double>& x) {
    for (const auto& s : sections) {
        double v = x.empty() ? 0.0 : x[0];
        // Unit DC gain per section, so steady-state output equals input.
        double z1 = (s.b1 + s.b2) * v - (s.a1 + s.a2) * v;
        double z2 = s.b2 * v - s.a2 * v;
        for (double& xi : x) {
            const double in = xi;
            const double out = s.b0 * in + z1;
            z1 = s.b1 * in - s.a1 * out + z2;
            z2 = s.b2 * in - s.a2 * out;
            xi = out;
        }
    }
}

std::vector<double> filter_channel(const std::vector<Biquad>& sections,
                                   std::span<const double> x, int order, FilterMode mode) {
    const std::size_t n = x.size();
    const std::size_t pad = std::min(std::size_t(3 * order), n - 1);
    // Odd reflection about the endpoints kills the boundary step.
    std::vector<double> work;
    work.reserve(n + 2 * pad);
    for (std::size_t i = 0; i < pad; ++i) work.push_back(2.0 * x[0] - x[pad - i]);
    work.insert(work.end(), x.begin(), x.end());
    for (std::size_t i = 0; i < pad; ++i) work.push_back(2.0 * x[n - 1] - x[n - 2 - i]);

    run_cascade(sections, work);
    if (mode == FilterMode::ZeroPhase) {
        std::reverse(work.begin(), work.end());
        run_cascade(sections, work);
        std::reverse(work.begin(), work.end());
    }
    return {work.begin() + pad, work.begin() + pad + n};
}

} // namespace

std::vector<double> butterworth_lowpass(std::span<const double> x, double rate,
                                        int order, double cutoff_hz, FilterMode mode) {
    if (order < 2 || order % 2 != 0)
        throw InvalidInput("butterworth_lowpass: order must be even and >= 2");
    if (cutoff_hz <= 0.0 || cutoff_hz >= rate / 2.0)
        throw InvalidInput("butterworth_lowpass: cutoff must lie in (0, rate/2)");
    if (x.size() < std::size_t(3 * order))
        throw TooShort("butterworth_lowpass: series shorter than 3x filter order");
    const auto sections = design_butterworth(order, cutoff_hz, rate);
    return filter_channel(sections, x, order, mode);
}

TimeSeries butterworth_lowpass(const TimeSeries& series, int order, double cutoff_hz,
                               FilterMode mode) {
    const std::size_t nc = series.channels();
    std::vector<double> out(series.data().size());
    for (std::size_t c = 0; c < nc; ++c) {
        auto ch = series.channel(c);
        auto filtered = butterworth_lowpass(ch, series.rate(), order, cutoff_hz, mode);
        for (std::size_t i = 0; i < series.length(); ++i) out[i * nc + c] = filtered[i];
    }
    return TimeSeries(series.start_time(), series.rate(), nc, std::move(out));
}

} // namespace kinpred
