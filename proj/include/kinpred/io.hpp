#ifndef KINPRED_IO_HPP
#define KINPRED_IO_HPP

#include <string>
#include <vector>

#include "kinpred/crossval.hpp"
#include "kinpred/dataset.hpp"
#include "kinpred/eval.hpp"
#include "kinpred/mocap_ik.hpp"
#include "kinpred/signals.hpp"
#include "kinpred/svr.hpp"

namespace kinpred {

/// Streams are CSVs with a header row; first column is t in seconds
/// (monotone), the rest are channels. Rates live in the manifest.
void write_series_csv(const TimeSeries& series, const std::string& path);
TimeSeries read_series_csv(const std::string& path, double rate);

struct RecordingManifest {
    std::string subject_id;
    std::string emg_csv;
    std::string imu_csv;
    std::string markers_csv;
    std::string measured_csv; // empty until supervision has run
    double rate_emg = kEmgRate;
    double rate_imu = kImuRate;
    double rate_markers = kMarkerRate;
    double rate_measured = kMarkerRate;
};

void write_manifest(const RecordingManifest& manifest, const std::string& path);
RecordingManifest read_manifest(const std::string& path);

/// Load the streams a manifest points at (paths resolved relative to the
/// manifest file).
SensorRecording load_recording(const std::string& manifest_path);

/// Write one recording as CSVs plus a manifest under dir; returns the
/// manifest path. measured_angle is only written when write_measured.
std::string save_recording(const SensorRecording& rec, const std::string& dir,
                           bool write_measured);

/// All parseable recording manifests in a directory, sorted by path.
std::vector<std::string> list_manifests(const std::string& dir);

/// SubjectData view for crossval: emg + imu + measured (must be present).
SubjectData load_subject_data(const std::string& manifest_path);

void write_grid_csv(const ResultsGrid& grid, const std::string& path);
ResultsGrid read_grid_csv(const std::string& path);

/// Feature dataset rows (featurize command output). subject_ids runs
/// parallel to samples; a single-element vector tags every row.
void write_feature_csv(const std::vector<LabeledSample>& samples,
                       const std::vector<std::string>& subject_ids, FeatureMode mode,
                       const std::string& path);

struct ReportOptions {
    double alpha = 0.05;
};

/// Axis averages plus one-way ANOVA tables (feature and time effects per
/// predictor), with significance flags at the configured alpha.
void write_report_json(const ResultsGrid& grid, const ReportOptions& options,
                       const std::string& path);

SegmentModel load_segment_model_json(const std::string& path);
void save_segment_model_json(const SegmentModel& model, const std::string& path);

/// A trained network together with the fold statistics needed to run it
/// on fresh recordings.
struct LstmBundle {
    KinPreNet<float> net;
    FeatureLayout layout;
    EmgNormStats emg_stats;
    FeatStats feat_stats;
};

void save_lstm_bundle(const LstmBundle& bundle, const std::string& path);
LstmBundle load_lstm_bundle(const std::string& path);

struct SvrBundle {
    SvrModel model;
    FeatureLayout layout;
    EmgNormStats emg_stats;
    FeatStats feat_stats;
};

void save_svr_bundle(const SvrBundle& bundle, const std::string& path);
SvrBundle load_svr_bundle(const std::string& path);

} // namespace kinpred

#endif
