#ifndef KINPRED_GAIT_SYNTH_HPP
#define KINPRED_GAIT_SYNTH_HPP

#include <cstdint>
#include <string>

#include "kinpred/mocap_ik.hpp"
#include "kinpred/signals.hpp"

namespace kinpred {

/// Parameters for one synthetic subject. Defaults emulate level walking
/// with a 60 ms electromechanical lead of muscle activity over motion.
struct SyntheticSubjectSpec {
    std::uint64_t seed = 0;
    double gait_period = 1.1;      // s
    double knee_amplitude = 60.0;  // deg
    double knee_offset = 5.0;      // deg
    double emd_lead = 0.060;       // s, activity precedes motion by this much
    double emg_noise_floor = 0.05; // fraction of peak envelope
    double imu_angle_rmse = 1.67;  // deg
    double marker_noise_sigma = 1.0; // mm
    double period_jitter = 0.03;   // fractional per-cycle period variation
    double gain_drift = 0.25;      // slow per-channel amplitude drift (electrode/fatigue)
    double duration = 30.0;        // s

    void validate() const;
};

/// Two-segment planar leg used by the marker generator; shared with the
/// supervision path so round trips are exact.
SegmentModel synth_thigh_model();
SegmentModel synth_shank_model();

/// Pseudo-periodic knee flexion trajectory @ 100 Hz: three gait
/// harmonics, per-cycle period jitter, smooth amplitude drift.
TimeSeries gen_knee_trajectory(const SyntheticSubjectSpec& spec);

/// Nine non-negative muscle activation envelopes @ 100 Hz. Extensor
/// channels follow rectified positive angular velocity, flexor channels
/// the negative half, both advanced in time by emd_lead and smoothed.
TimeSeries gen_activations(const TimeSeries& angle, const SyntheticSubjectSpec& spec);

/// Channel group split used by gen_activations (extensors first).
inline constexpr int kExtensorChannels = 4; // channels [0, 4)
inline constexpr int kEmgChannels = 9;      // flexors are [4, 9)

/// Raw-EMG stand-in @ 1111.11 Hz: band-limited Gaussian carrier (20-450 Hz)
/// amplitude-modulated by the upsampled envelope plus a noise floor.
TimeSeries gen_emg(const TimeSeries& envelopes, const SyntheticSubjectSpec& spec);

/// World positions of 8 markers (4 per segment) @ 100 Hz with isotropic
/// Gaussian noise; thigh oscillates about the hip, shank follows the knee.
TimeSeries gen_markers(const TimeSeries& angle, const SyntheticSubjectSpec& spec);

/// IMU-derived knee angle @ 74 Hz: resampled truth plus slowly varying
/// bias and white noise mixed to hit the configured RMSE.
TimeSeries gen_imu_angle(const TimeSeries& angle, const SyntheticSubjectSpec& spec);

/// Compose the full recording; measured_angle carries the ground truth.
SensorRecording synth_recording(const SyntheticSubjectSpec& spec,
                                const std::string& subject_id = "");

} // namespace kinpred

#endif
