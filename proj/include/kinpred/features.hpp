#ifndef KINPRED_FEATURES_HPP
#define KINPRED_FEATURES_HPP

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "kinpred/signals.hpp"

namespace kinpred {

inline constexpr std::size_t kWindowLen = 165; // 148.5 ms @ 1111.11 Hz
inline constexpr std::size_t kWindowHop = 15;  // 13.5 ms
inline constexpr std::size_t kSequenceLen = 60; // predictor time steps
inline constexpr std::size_t kExtractorSteps = 60;

enum class FeatureMode { FT, FL, FTL };

inline constexpr std::size_t kFtBlock = 36; // 4 features x 9 channels

std::size_t feature_width(FeatureMode mode); // 37 / 10 / 46 incl. theta
const char* feature_mode_name(FeatureMode mode);
FeatureMode feature_mode_from_name(const std::string& name);

/// One analysis window: 165 frames x 9 channels, frame-major, stamped by
/// the time of its last frame.
struct Window {
    std::vector<double> samples; // kWindowLen * 9
    double end_time = 0.0;
};

struct FeatureVector {
    FeatureMode mode = FeatureMode::FT;
    std::vector<double> values; // feature_width(mode); last entry is theta
    double end_time = 0.0;
};

struct LabeledSample {
    FeatureVector features;
    double label = 0.0;           // deg, measured angle at end_time + T
    double prediction_time = 0.0; // s
};

/// Number of hop-aligned windows in an L-frame stream.
inline std::size_t window_count(std::size_t len) {
    return len < kWindowLen ? 0 : (len - kWindowLen) / kWindowHop + 1;
}

/// Slice a 9-channel EMG stream into overlapping windows.
std::vector<Window> segment_windows(const TimeSeries& emg);

// Classical time-domain features, one channel at a time.
double mav(std::span<const double> channel);
std::size_t zero_crossings(std::span<const double> channel, double eps);
std::size_t slope_sign_changes(std::span<const double> channel, double eps);
double waveform_length(std::span<const double> channel);

/// Noise guards for zero_crossings / slope_sign_changes, one per channel.
struct FtParams {
    std::array<double, 9> eps{};
};

/// Per-channel [mav, zc, ssc, wl] blocks in channel order (36 values).
std::array<double, kFtBlock> ft_features(const Window& window, const FtParams& params);

/// Build the windowed feature vector for a mode; theta comes from the IMU
/// angle series interpolated at the window end.
FeatureVector assemble_vector(const Window& window,
                              const std::optional<std::array<double, 9>>& fl_features,
                              const TimeSeries& imu_angle, FeatureMode mode,
                              const FtParams& params = {});

struct LabelResult {
    std::vector<LabeledSample> samples;
    std::size_t dropped = 0; // vectors whose target time fell past the span
};

/// Attach the measured angle at end_time + T to each vector; vectors whose
/// target lies beyond the measured span are dropped (counted, not an error).
LabelResult label_samples(const std::vector<FeatureVector>& vectors,
                          const TimeSeries& measured, double prediction_time);

} // namespace kinpred

#endif
