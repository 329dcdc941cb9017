#ifndef KINPRED_DATASET_HPP
#define KINPRED_DATASET_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "kinpred/features.hpp"
#include "kinpred/neural.hpp"
#include "kinpred/signals.hpp"

namespace kinpred {

/// A subject ready for featurization: markers have already been turned
/// into the measured angle stream by the supervision path.
struct SubjectData {
    std::string id;
    TimeSeries emg;
    TimeSeries imu_angle;
    TimeSeries measured; // gold-standard angle @ 100 Hz
};

/// Per-channel EMG normalization from a training fold, plus the derived
/// noise guards for the threshold features.
struct EmgNormStats {
    std::array<double, 9> mean{};
    std::array<double, 9> std{};
    std::array<double, 9> eps{}; // 0.01 x normalized-channel MAV
};

EmgNormStats compute_emg_stats(const std::vector<const SubjectData*>& train);

/// Static layout of the predictor input vector for a feature mode (and
/// the kinematics-only ablation, which strips every EMG-derived entry).
struct FeatureLayout {
    FeatureMode mode = FeatureMode::FT;
    bool kinematics_only = false;
    int width = 0;
    int ft_offset = -1;
    int fl_offset = -1;
    int theta_offset = 0;

    bool uses_extractor() const { return fl_offset >= 0; }
    bool uses_ft() const { return ft_offset >= 0; }
};

FeatureLayout make_feature_layout(FeatureMode mode, bool kinematics_only);

/// Everything windowed once per (subject, fold): raw time-domain feature
/// blocks, theta, window end times, and the extractor inputs (normalized
/// EMG resampled to the extractor step count). Windows whose theta lies
/// past the IMU span are truncated so window indices stay contiguous.
struct WindowFeatures {
    std::string subject;
    std::size_t count = 0;
    std::vector<double> end_times; // count
    std::vector<double> theta_raw; // count, deg
    std::vector<double> ft_raw;    // count * 36 (empty when not needed)
    std::vector<float> ext_inputs; // count * (60*9) (empty when not needed)
};

WindowFeatures compute_window_features(const SubjectData& subject, bool need_ft,
                                       bool need_extractor, const EmgNormStats& stats);

/// z-score statistics for the static feature dims: 36 FT values then theta.
struct FeatStats {
    std::array<double, kFtBlock + 1> mean{};
    std::array<double, kFtBlock + 1> std{};
};

FeatStats compute_feat_stats(const std::vector<const WindowFeatures*>& train);

/// Normalized static feature rows for the neural path (FT and theta
/// z-scored; learned-feature slots left zero for the runner to fill).
std::vector<float> build_static_feats(const WindowFeatures& wf, const FeatureLayout& layout,
                                      const FeatStats& stats);

struct Labels {
    std::vector<double> value;       // deg; meaningful where valid
    std::vector<std::uint8_t> valid; // label inside the measured span
    std::size_t dropped = 0;
};

Labels compute_labels(const WindowFeatures& wf, const TimeSeries& measured,
                      double prediction_time);

/// One subject's assembled tensors for a specific layout.
struct SubjectTensors {
    const WindowFeatures* wf = nullptr;
    std::vector<float> static_feats; // count * layout.width
};

/// Sequence samples ending at hop-aligned windows (first valid end index
/// is kSequenceLen - 1), stepping by stride.
std::vector<SeqSample<float>> make_sequence_samples(const SubjectTensors& tensors,
                                                    const FeatureLayout& layout,
                                                    const Labels& labels,
                                                    std::size_t stride);

/// Mean/std of the labels attached to a set of samples.
void label_stats(const std::vector<SeqSample<float>>& samples, double& mean, double& std);

/// Run a trained extractor over every window (batched); returns count x
/// channels learned features.
std::vector<float> extract_fl_features(const KinPreNet<float>& net,
                                       const WindowFeatures& wf);

/// Per-window SVR input vectors: z-scored FT block and/or learned
/// features, with theta left in degrees.
std::vector<std::vector<double>> build_svr_vectors(const WindowFeatures& wf,
                                                   const FeatureLayout& layout,
                                                   const FeatStats& stats,
                                                   const std::vector<float>* fl_features);

} // namespace kinpred

#endif
