#include <doctest.h>

#include <cmath>

#include "kinpred/crossval.hpp"
#include "kinpred/gait_synth.hpp"

using namespace kinpred;

namespace {

SubjectData make_subject(std::uint64_t seed, double duration, double knee_amplitude = 60.0) {
    SyntheticSubjectSpec spec;
    spec.seed = seed;
    spec.duration = duration;
    spec.knee_amplitude = knee_amplitude;
    char name[8];
    std::snprintf(name, sizeof(name), "s%02d", int(seed % 100));
    const SensorRecording rec = synth_recording(spec, name);
    SubjectData s;
    s.id = rec.subject_id;
    s.emg = rec.emg;
    s.imu_angle = rec.imu_angle;
    s.measured = *rec.measured_angle; // generator truth as the gold standard
    return s;
}

CrossvalConfig quick_config() {
    CrossvalConfig cfg;
    cfg.seed = 99;
    cfg.train.epochs = 2;
    cfg.train_stride = 25;
    cfg.eval_stride = 3;
    cfg.svr_stride = 20;
    return cfg;
}

} // namespace

TEST_CASE("dataset plumbing: stats, layouts, labels, sequences") {
    const SubjectData s0 = make_subject(1, 8.0);
    const SubjectData s1 = make_subject(2, 8.0);
    const EmgNormStats stats = compute_emg_stats({&s0, &s1});
    for (int c = 0; c < 9; ++c) {
        CHECK(stats.std[c] > 0.0);
        CHECK(stats.eps[c] > 0.0);
        CHECK(stats.eps[c] < 0.1);
    }

    const FeatureLayout ftl = make_feature_layout(FeatureMode::FTL, false);
    CHECK(ftl.width == 46);
    CHECK(ftl.ft_offset == 0);
    CHECK(ftl.fl_offset == 36);
    CHECK(ftl.theta_offset == 45);
    const FeatureLayout kin = make_feature_layout(FeatureMode::FL, true);
    CHECK(kin.width == 1);
    CHECK_FALSE(kin.uses_extractor());

    const WindowFeatures wf = compute_window_features(s0, true, true, stats);
    CHECK(wf.count > 500);
    CHECK(wf.ft_raw.size() == wf.count * kFtBlock);
    CHECK(wf.ext_inputs.size() == wf.count * kExtractorSteps * 9);
    // window end times advance by the hop
    for (std::size_t k = 1; k < wf.count; ++k)
        CHECK(wf.end_times[k] - wf.end_times[k - 1] ==
              doctest::Approx(15.0 / kEmgRate).epsilon(1e-9));

    const FeatStats fstats = compute_feat_stats({&wf});
    const auto feats = build_static_feats(wf, ftl, fstats);
    CHECK(feats.size() == wf.count * 46);
    // z-scored dims have roughly unit scale
    double ss = 0.0;
    for (std::size_t k = 0; k < wf.count; ++k) ss += double(feats[k * 46]) * feats[k * 46];
    CHECK(std::sqrt(ss / double(wf.count)) == doctest::Approx(1.0).epsilon(0.2));

    const Labels labels = compute_labels(wf, s0.measured, 0.054);
    CHECK(labels.value.size() == wf.count);
    CHECK(labels.dropped > 0); // tail windows past the measured span
    CHECK(labels.dropped < 30);

    SubjectTensors tensors;
    tensors.wf = &wf;
    tensors.static_feats = feats;
    const auto samples = make_sequence_samples(tensors, ftl, labels, 10);
    CHECK(samples.size() > 10);
    for (const auto& s : samples) CHECK(std::isfinite(s.label));
}

TEST_CASE("loso: each subject held out once per cell; determinism") {
    std::vector<SubjectData> subjects{make_subject(1, 8.0), make_subject(2, 8.0),
                                      make_subject(3, 8.0)};
    CrossvalConfig cfg = quick_config();
    cfg.cells = {{Predictor::LSTM, FeatureMode::FT, 54}, {Predictor::SVR, FeatureMode::FT, 54}};

    const CrossvalResult run1 = loso_crossval(subjects, cfg);
    CHECK(run1.failures.empty());
    CHECK(run1.grid.size() == 6); // 2 cells x 3 subjects
    for (const auto& s : {"s01", "s02", "s03"}) {
        CHECK(run1.grid.contains({Predictor::LSTM, FeatureMode::FT, 54, s}));
        CHECK(run1.grid.contains({Predictor::SVR, FeatureMode::FT, 54, s}));
    }

    // shuffle the subject order: identical grid
    std::vector<SubjectData> shuffled{subjects[2], subjects[0], subjects[1]};
    const CrossvalResult run2 = loso_crossval(shuffled, cfg);
    REQUIRE(run2.grid.size() == run1.grid.size());
    for (const auto& [k, m] : run1.grid.cells()) {
        const MetricSet& o = run2.grid.at(k);
        CHECK(m.rmse == o.rmse);
        CHECK(m.r == o.r);
    }

    CHECK_THROWS_AS(loso_crossval({subjects[0]}, cfg), InvalidInput);
}

TEST_CASE("loso: constant-angle subjects give zero rmse for svr") {
    std::vector<SubjectData> subjects{make_subject(5, 6.0, 0.0), make_subject(6, 6.0, 0.0)};
    CrossvalConfig cfg = quick_config();
    cfg.cells = {{Predictor::SVR, FeatureMode::FT, 54}};
    const CrossvalResult res = loso_crossval(subjects, cfg);
    REQUIRE(res.failures.empty());
    REQUIRE(res.grid.size() == 2);
    for (const auto& [k, m] : res.grid.cells()) {
        CHECK(m.rmse < 1e-6);
        CHECK(std::isnan(m.r)); // undefined on constant references
    }
}

TEST_CASE("loso: kinematics-only ablation uses width-1 inputs and still runs") {
    std::vector<SubjectData> subjects{make_subject(7, 8.0), make_subject(8, 8.0)};
    CrossvalConfig cfg = quick_config();
    cfg.kinematics_only = true;
    cfg.train.epochs = 2;
    cfg.cells = {{Predictor::LSTM, FeatureMode::FL, 54}};
    const CrossvalResult res = loso_crossval(subjects, cfg);
    CHECK(res.failures.empty());
    CHECK(res.grid.size() == 2);
    for (const auto& log : res.logs) CHECK(log.train.epoch_rmse.size() == 2);
}

TEST_CASE("loso: failures are recorded and the run continues") {
    // One subject's measured stream is too short to label any full
    // sequence: its own fold fails, the other folds proceed (it simply
    // contributes no training sequences).
    std::vector<SubjectData> subjects{make_subject(9, 8.0), make_subject(10, 8.0),
                                      make_subject(11, 8.0)};
    subjects[1].measured = TimeSeries(0.0, 100.0, 1, std::vector<double>(50, 10.0));
    CrossvalConfig cfg = quick_config();
    cfg.cells = {{Predictor::LSTM, FeatureMode::FT, 54}};
    const CrossvalResult res = loso_crossval(subjects, cfg);
    REQUIRE(res.failures.size() == 1);
    CHECK(res.failures[0].subject == "s10");
    CHECK(res.grid.size() == 2);
}
