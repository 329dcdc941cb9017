#include "kinpred/gait_synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "kinpred/rng.hpp"

namespace kinpred {

namespace {

constexpr std::uint64_t kTagKnee = 1;
constexpr std::uint64_t kTagActivation = 2;
constexpr std::uint64_t kTagEmg = 3;
constexpr std::uint64_t kTagMarkers = 4;
constexpr std::uint64_t kTagImu = 5;

// Three-harmonic flexion profile: stance bump plus dominant swing peak.
// Coefficients keep the peak swing velocity below 3 deg per 10 ms sample
// at the default amplitude, including jitter headroom.
double knee_shape_raw(double phase) {
    const double w = 2.0 * M_PI * phase;
    return std::cos(w - 4.00) + 0.35 * std::cos(2.0 * w - 1.10) +
           0.10 * std::cos(3.0 * w + 0.90);
}

struct ShapeScale {
    double lo, hi;
};

ShapeScale knee_shape_range() {
    double lo = 1e9, hi = -1e9;
    for (int i = 0; i < 4096; ++i) {
        const double v = knee_shape_raw(double(i) / 4096.0);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return {lo, hi};
}

// Normalized to [0, 1] over one cycle.
double knee_shape(double phase) {
    static const ShapeScale s = knee_shape_range();
    return (knee_shape_raw(phase) - s.lo) / (s.hi - s.lo);
}

double smoothstep(double x) { return x * x * (3.0 - 2.0 * x); }

// Clamped per-channel linear interpolation on a uniform series.
double lerp_channel(const TimeSeries& s, double t, std::size_t c) {
    const double pos =
        std::clamp((t - s.start_time()) * s.rate(), 0.0, double(s.length() - 1));
    const std::size_t i0 = std::min(std::size_t(pos), s.length() - 1);
    const std::size_t i1 = std::min(i0 + 1, s.length() - 1);
    const double frac = pos - double(i0);
    return s.at(i0, c) + frac * (s.at(i1, c) - s.at(i0, c));
}

Eigen::Matrix3d rot_z(double rad) {
    Eigen::Matrix3d r;
    r << std::cos(rad), -std::sin(rad), 0.0, std::sin(rad), std::cos(rad), 0.0, 0.0, 0.0, 1.0;
    return r;
}

} // namespace

void SyntheticSubjectSpec::validate() const {
    if (gait_period <= 0.0)
        throw InvalidInput("SyntheticSubjectSpec: gait_period must be positive");
    if (duration < 3.0 * gait_period)
        throw InvalidInput("SyntheticSubjectSpec: duration must cover at least 3 gait cycles");
    if (emg_noise_floor < 0.0 || imu_angle_rmse < 0.0 || marker_noise_sigma < 0.0 ||
        period_jitter < 0.0 || gain_drift < 0.0)
        throw InvalidInput("SyntheticSubjectSpec: noise parameters must be non-negative");
    if (emd_lead < 0.0)
        throw InvalidInput("SyntheticSubjectSpec: emd_lead must be non-negative");
}

SegmentModel synth_thigh_model() {
    SegmentModel m;
    m.local_markers = {{60.0, -80.0, 25.0},
                       {-45.0, -160.0, 35.0},
                       {40.0, -280.0, -30.0},
                       {-55.0, -330.0, -20.0}};
    m.weights = {1.0, 1.0, 1.0, 1.0};
    m.joint_axis = Eigen::Vector3d(0.0, 0.0, 1.0);
    return m;
}

SegmentModel synth_shank_model() {
    SegmentModel m;
    m.local_markers = {{45.0, -60.0, 30.0},
                       {-40.0, -150.0, 25.0},
                       {50.0, -260.0, -35.0},
                       {-35.0, -380.0, -15.0}};
    m.weights = {1.0, 1.0, 1.0, 1.0};
    m.joint_axis = Eigen::Vector3d(0.0, 0.0, 1.0);
    return m;
}

TimeSeries gen_knee_trajectory(const SyntheticSubjectSpec& spec) {
    spec.validate();
    Rng rng(derive_seed(spec.seed, kTagKnee));

    const std::size_t n = std::size_t(std::llround(spec.duration * kMarkerRate));
    const double dt = 1.0 / kMarkerRate;

    auto draw_period = [&] {
        return spec.gait_period * (1.0 + spec.period_jitter * (2.0 * rng.uniform() - 1.0));
    };
    auto draw_amp = [&] {
        return 1.0 + 2.0 * spec.period_jitter * (2.0 * rng.uniform() - 1.0);
    };

    double phase = 0.0;
    double period = draw_period();
    double amp_prev = draw_amp();
    double amp_cur = draw_amp();

    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double a = amp_prev + (amp_cur - amp_prev) * smoothstep(phase);
        out[i] = spec.knee_offset + spec.knee_amplitude * a * knee_shape(phase);
        phase += dt / period;
        if (phase >= 1.0) {
            phase -= 1.0;
            period = draw_period();
            amp_prev = amp_cur;
            amp_cur = draw_amp();
        }
    }
    return TimeSeries(0.0, kMarkerRate, 1, std::move(out));
}

TimeSeries gen_activations(const TimeSeries& angle, const SyntheticSubjectSpec& spec) {
    if (angle.channels() != 1) throw InvalidInput("gen_activations: angle must be 1-channel");
    Rng rng(derive_seed(spec.seed, kTagActivation));

    const std::size_t n = angle.length();
    const double rate = angle.rate();

    // Central-difference angular velocity; no phase shift.
    std::vector<double> vel(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t a = i > 0 ? i - 1 : 0;
        const std::size_t b = i + 1 < n ? i + 1 : n - 1;
        vel[i] = b > a ? (angle.at(b, 0) - angle.at(a, 0)) * rate / double(b - a) : 0.0;
    }
    TimeSeries vel_series(angle.start_time(), rate, 1, vel);

    double vmax = 0.0;
    for (double v : vel_series.data()) vmax = std::max(vmax, std::abs(v));

    // Per-channel gains plus crosstalk: strong within a muscle group,
    // faint across groups.
    std::array<double, kEmgChannels> gain{};
    for (auto& g : gain) g = 0.55 + 0.5 * rng.uniform();
    std::array<std::array<double, kEmgChannels>, kEmgChannels> mix{};
    for (int c = 0; c < kEmgChannels; ++c) {
        double row_sum = 0.0;
        for (int k = 0; k < kEmgChannels; ++k) {
            const bool same_group = (c < kExtensorChannels) == (k < kExtensorChannels);
            const double w = (k == c) ? 1.0
                                      : (same_group ? 0.25 * rng.uniform()
                                                    : 0.03 * rng.uniform());
            mix[c][k] = w;
            row_sum += w;
        }
        for (int k = 0; k < kEmgChannels; ++k) mix[c][k] /= row_sum;
    }

    // Slow multiplicative per-channel drift stands in for electrode and
    // fatigue effects: single-window amplitude alone cannot pin down the
    // drive, while a sequence of windows can track the drift.
    std::vector<double> drift(n * kEmgChannels, 0.0);
    if (spec.gain_drift > 0.0) {
        std::vector<double> white(n);
        for (int c = 0; c < kEmgChannels; ++c) {
            for (auto& w : white) w = rng.normal();
            auto slow = butterworth_lowpass(white, rate, 2, 0.12, FilterMode::ZeroPhase);
            double ss = 0.0;
            for (double v : slow) ss += v * v;
            const double inv = ss > 0.0 ? 1.0 / std::sqrt(ss / double(n)) : 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = 1.0 + spec.gain_drift * slow[i] * inv;
                drift[i * kEmgChannels + c] = std::max(d, 0.1);
            }
        }
    } else {
        for (auto& d : drift) d = 1.0;
    }

    std::vector<double> data(n * kEmgChannels, 0.0);
    if (vmax > 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
            const double t = angle.time_at(i) + spec.emd_lead;
            const double v = lerp_channel(vel_series, t, 0) / vmax;
            const double ext = std::max(v, 0.0);
            const double flex = std::max(-v, 0.0);
            double drive[kEmgChannels];
            for (int c = 0; c < kEmgChannels; ++c)
                drive[c] = gain[c] * drift[i * kEmgChannels + c] *
                           (c < kExtensorChannels ? ext : flex);
            for (int c = 0; c < kEmgChannels; ++c) {
                double acc = 0.0;
                for (int k = 0; k < kEmgChannels; ++k) acc += mix[c][k] * drive[k];
                data[i * kEmgChannels + c] = acc;
            }
        }
    }

    TimeSeries mixed(angle.start_time(), rate, kEmgChannels, std::move(data));
    TimeSeries smoothed = butterworth_lowpass(mixed, 2, 7.0, FilterMode::ZeroPhase);
    for (double& v : smoothed.data()) v = std::max(v, 0.0);
    return smoothed;
}

TimeSeries gen_emg(const TimeSeries& envelopes, const SyntheticSubjectSpec& spec) {
    if (envelopes.channels() != std::size_t(kEmgChannels))
        throw InvalidInput("gen_emg: expected 9 envelope channels");
    for (double v : envelopes.data())
        if (v < 0.0) throw InvalidInput("gen_emg: envelopes must be non-negative");
    Rng rng(derive_seed(spec.seed, kTagEmg));

    const std::size_t n = std::size_t(std::llround(spec.duration * kEmgRate));
    double peak = 0.0;
    for (double v : envelopes.data()) peak = std::max(peak, v);
    const double floor_level = spec.emg_noise_floor * peak;

    std::vector<double> data(n * kEmgChannels, 0.0);
    std::vector<double> white(n);
    for (int c = 0; c < kEmgChannels; ++c) {
        for (auto& w : white) w = rng.normal();
        // 20-450 Hz shaping: wideband low-pass minus the sub-20 Hz part.
        auto carrier = butterworth_lowpass(white, kEmgRate, 4, 450.0, FilterMode::Causal);
        auto low = butterworth_lowpass(white, kEmgRate, 4, 20.0, FilterMode::Causal);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            carrier[i] -= low[i];
            ss += carrier[i] * carrier[i];
        }
        const double inv_rms = ss > 0.0 ? 1.0 / std::sqrt(ss / double(n)) : 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double t = envelopes.start_time() + double(i) / kEmgRate;
            const double env = lerp_channel(envelopes, t, c) + floor_level;
            data[i * kEmgChannels + c] = carrier[i] * inv_rms * env;
        }
    }
    return TimeSeries(envelopes.start_time(), kEmgRate, kEmgChannels, std::move(data));
}

TimeSeries gen_markers(const TimeSeries& angle, const SyntheticSubjectSpec& spec) {
    if (angle.channels() != 1) throw InvalidInput("gen_markers: angle must be 1-channel");
    Rng rng(derive_seed(spec.seed, kTagMarkers));

    const SegmentModel thigh = synth_thigh_model();
    const SegmentModel shank = synth_shank_model();
    const Eigen::Vector3d knee_in_thigh(0.0, -400.0, 0.0);
    const std::size_t n = angle.length();
    const std::size_t nc = 3 * (thigh.marker_count() + shank.marker_count());

    double mean = 0.0;
    for (double v : angle.data()) mean += v;
    mean /= double(n);

    // Thigh swings about the hip as a scaled, phase-led copy of the knee
    // trajectory; the knee hinge carries the configured angle on top.
    const double hip_gain = 0.35;
    const double hip_lead = 0.25 * spec.gait_period;
    const double deg = M_PI / 180.0;

    std::vector<double> data(n * nc);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = angle.time_at(i);
        const double hip =
            hip_gain * (lerp_channel(angle, t + hip_lead, 0) - mean) * deg;
        const double knee = angle.at(i, 0) * deg;
        const Eigen::Matrix3d r_thigh = rot_z(hip);
        const Eigen::Matrix3d r_shank = rot_z(hip + knee);
        const Eigen::Vector3d knee_world = r_thigh * knee_in_thigh;

        double* row = data.data() + i * nc;
        std::size_t k = 0;
        for (const auto& p : thigh.local_markers) {
            Eigen::Vector3d w = r_thigh * p;
            for (int d = 0; d < 3; ++d)
                row[k++] = w[d] + spec.marker_noise_sigma * rng.normal();
        }
        for (const auto& p : shank.local_markers) {
            Eigen::Vector3d w = r_shank * p + knee_world;
            for (int d = 0; d < 3; ++d)
                row[k++] = w[d] + spec.marker_noise_sigma * rng.normal();
        }
    }
    return TimeSeries(angle.start_time(), angle.rate(), nc, std::move(data));
}

TimeSeries gen_imu_angle(const TimeSeries& angle, const SyntheticSubjectSpec& spec) {
    if (angle.channels() != 1) throw InvalidInput("gen_imu_angle: angle must be 1-channel");
    Rng rng(derive_seed(spec.seed, kTagImu));

    TimeSeries out = resample_to_rate(angle, kImuRate);
    if (spec.imu_angle_rmse <= 0.0) return out;

    const std::size_t n = out.length();
    // ~20% of the error power in a slow bias, the rest white: the white
    // part is what history-aware models can average away.
    const double bias_period = 9.7; // s, deliberately incommensurate with gait
    const double bias_phase = 2.0 * M_PI * rng.uniform();
    const double bias_amp = spec.imu_angle_rmse * std::sqrt(2.0 * 0.2);
    const double white_sigma = spec.imu_angle_rmse * std::sqrt(0.8);

    std::vector<double> noise(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = out.time_at(i);
        noise[i] = bias_amp * std::sin(2.0 * M_PI * t / bias_period + bias_phase) +
                   white_sigma * rng.normal();
        ss += noise[i] * noise[i];
    }
    // Rescale so the realized error level matches the spec exactly.
    const double scale = ss > 0.0 ? spec.imu_angle_rmse / std::sqrt(ss / double(n)) : 0.0;
    for (std::size_t i = 0; i < n; ++i) out.at(i, 0) += noise[i] * scale;
    return out;
}

SensorRecording synth_recording(const SyntheticSubjectSpec& spec,
                                const std::string& subject_id) {
    spec.validate();
    SensorRecording rec;
    rec.subject_id = subject_id.empty() ? "s" + std::to_string(spec.seed) : subject_id;
    TimeSeries truth = gen_knee_trajectory(spec);
    TimeSeries envelopes = gen_activations(truth, spec);
    rec.emg = gen_emg(envelopes, spec);
    rec.markers = gen_markers(truth, spec);
    rec.imu_angle = gen_imu_angle(truth, spec);
    rec.measured_angle = std::move(truth);
    rec.validate();
    return rec;
}

} // namespace kinpred
