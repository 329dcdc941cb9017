#ifndef KINPRED_SIGNALS_HPP
#define KINPRED_SIGNALS_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kinpred/errors.hpp"

namespace kinpred {

/// Uniform-rate multi-channel series. Frame i is implicitly stamped
/// t_i = start_time + i / rate; data is frame-major (row = one frame).
class TimeSeries {
public:
    TimeSeries() = default;
    TimeSeries(double start_time, double rate, std::size_t channels,
               std::vector<double> data);

    double start_time() const { return start_time_; }
    double rate() const { return rate_; }
    std::size_t channels() const { return channels_; }
    std::size_t length() const { return channels_ ? data_.size() / channels_ : 0; }
    bool empty() const { return data_.empty(); }

    double time_at(std::size_t i) const { return start_time_ + double(i) / rate_; }
    double end_time() const { return time_at(length() - 1); }

    std::span<const double> frame(std::size_t i) const {
        return {data_.data() + i * channels_, channels_};
    }
    double at(std::size_t i, std::size_t c) const { return data_[i * channels_ + c]; }
    double& at(std::size_t i, std::size_t c) { return data_[i * channels_ + c]; }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    /// One channel copied out as a contiguous vector.
    std::vector<double> channel(std::size_t c) const;

private:
    double start_time_ = 0.0;
    double rate_ = 1.0;
    std::size_t channels_ = 0;
    std::vector<double> data_;
};

/// One subject/trial worth of synchronized streams. All series share a
/// common clock; emg is 9-channel, marker width is a multiple of 3.
struct SensorRecording {
    std::string subject_id;
    TimeSeries emg;          // 9 ch @ 1111.11 Hz
    TimeSeries imu_angle;    // 1 ch @ 74 Hz, deg
    TimeSeries markers;      // 3*M ch @ 100 Hz, mm
    std::optional<TimeSeries> measured_angle; // 1 ch @ 100 Hz, deg

    void validate() const;
};

inline constexpr double kEmgRate = 1111.11;
inline constexpr double kImuRate = 74.0;
inline constexpr double kMarkerRate = 100.0;

/// Linear interpolation at time t; exact on grid points; throws
/// OutOfRange outside [start, end] (never extrapolates).
std::vector<double> sample_at(const TimeSeries& series, double t);

/// Scalar convenience for 1-channel series.
double sample_at_scalar(const TimeSeries& series, double t);

/// n_out frames spanning [first, last] timestamp uniformly; endpoints
/// are preserved exactly.
TimeSeries resample(const TimeSeries& series, std::size_t n_out);

/// Resample onto a fresh uniform grid at new_rate starting at the series
/// start; emits every grid point that falls inside the input span.
TimeSeries resample_to_rate(const TimeSeries& series, double new_rate);

enum class FilterMode {
    ZeroPhase, // forward-backward pass, no group delay
    Causal     // single forward pass, streaming-compatible
};

/// Butterworth low-pass (bilinear transform with frequency pre-warping,
/// cascaded biquads). Even order >= 2; cutoff below Nyquist. Boundary
/// transients are suppressed by odd reflection padding (3x order) plus
/// steady-state section initialization.
TimeSeries butterworth_lowpass(const TimeSeries& series, int order, double cutoff_hz,
                               FilterMode mode = FilterMode::ZeroPhase);

/// Same filter on a raw channel at a given rate (helper for generators).
std::vector<double> butterworth_lowpass(std::span<const double> x, double rate,
                                        int order, double cutoff_hz,
                                        FilterMode mode = FilterMode::ZeroPhase);

} // namespace kinpred

#endif
