// Acceptance suite: exercises every gate end to end and prints one
// PASS/FAIL line per criterion. The pipeline criteria run on a scaled
// synthetic dataset (see --scale); the full paper-protocol scale is
// available but takes hours on a laptop-class core.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "kinpred/crossval.hpp"
#include "kinpred/gait_synth.hpp"
#include "kinpred/io.hpp"
#include "kinpred/rng.hpp"

using namespace kinpred;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int criterion, const char* sub, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d%s: %s\n", pass ? "PASS" : "FAIL", criterion, sub,
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

double mean_of(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / double(v.size());
}

// ---------------------------------------------------------------- 1
void criterion_gradcheck() {
    const GradCheckReport rep = grad_check(2024, 1e-5);
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "gradcheck max rel err %.3e over %zu params in %.1f s (< 1e-4, < 30 s)",
                  rep.max_rel_err, rep.params_checked, rep.seconds);
    report(1, "", rep.max_rel_err < 1e-4 && rep.seconds < 30.0, buf);
}

// ---------------------------------------------------------------- 2
void criterion_pose_oracle() {
    SyntheticSubjectSpec spec;
    spec.seed = 31;
    spec.duration = 12.0;
    spec.marker_noise_sigma = 0.0;
    const TimeSeries truth = gen_knee_trajectory(spec);
    const TimeSeries markers = gen_markers(truth, spec);
    const SegmentModel thigh = synth_thigh_model();
    const SegmentModel shank = synth_shank_model();

    // Noiseless round trip; the low-pass stays out of the way (a wide
    // passband) because any 6 Hz filtering attenuates real harmonics by
    // ~1e-2 deg, far above this tolerance.
    const TimeSeries recovered =
        measured_angle_series(markers, thigh, shank, 4, 49.9, FilterMode::ZeroPhase);
    double worst = 0.0;
    for (std::size_t i = 0; i < truth.length(); ++i)
        worst = std::max(worst, std::abs(recovered.at(i, 0) - truth.at(i, 0)));
    char buf[160];
    std::snprintf(buf, sizeof(buf), "noiseless round trip max |err| %.2e deg (< 1e-6)", worst);
    report(2, "a", worst < 1e-6, buf);

    // 1 mm marker noise through the production 6 Hz supervision path.
    SyntheticSubjectSpec noisy = spec;
    noisy.marker_noise_sigma = 1.0;
    const TimeSeries markers_noisy = gen_markers(truth, noisy);
    const TimeSeries rec_noisy = measured_angle_series(markers_noisy, thigh, shank);
    double se = 0.0;
    const std::size_t n = std::min<std::size_t>(1000, rec_noisy.length());
    for (std::size_t i = 0; i < n; ++i) {
        const double e = rec_noisy.at(i, 0) - truth.at(i, 0);
        se += e * e;
    }
    const double rmse_v = std::sqrt(se / double(n));
    std::snprintf(buf, sizeof(buf), "1 mm noise rmse %.3f deg over %zu frames (< 0.5)",
                  rmse_v, n);
    report(2, "b", rmse_v < 0.5, buf);
}

// ---------------------------------------------------------------- 3
void criterion_filter_response() {
    const double rate = 1000.0, fc = 6.0;
    auto sine = [&](double f) {
        std::vector<double> d(std::size_t(30.0 * rate));
        for (std::size_t i = 0; i < d.size(); ++i)
            d[i] = std::sin(2.0 * M_PI * f * double(i) / rate);
        return d;
    };
    auto rms_tail = [](const std::vector<double>& x) {
        double s = 0;
        for (std::size_t i = x.size() / 2; i < x.size(); ++i) s += x[i] * x[i];
        return std::sqrt(s / double(x.size() - x.size() / 2));
    };

    const auto at_fc = sine(fc);
    const auto flt_fc = butterworth_lowpass(at_fc, rate, 4, fc, FilterMode::Causal);
    const double db_fc = -20.0 * std::log10(rms_tail(flt_fc) / rms_tail(at_fc));

    const auto at_30 = sine(30.0);
    const auto flt_30 = butterworth_lowpass(at_30, rate, 4, fc, FilterMode::Causal);
    const double db_30 = -20.0 * std::log10(rms_tail(flt_30) / rms_tail(at_30));

    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "cutoff %.2f dB (3 +- 0.5), 30 Hz %.2f dB (55.9 +- 1, analytic "
                  "10*log10(1+(30/6)^8) = 55.92)",
                  db_fc, db_30);
    report(3, "", std::abs(db_fc - 3.0) < 0.5 && std::abs(db_30 - 55.9) <= 1.0, buf);
}

// ---------------------------------------------------------------- 4
// Naive re-implementations, independent of src/eval.cpp.
namespace naive {
double mean(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / double(v.size());
}
double rmse(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s / double(a.size()));
}
double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double ma = mean(a), mb = mean(b);
    double num = 0, da = 0, db = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - ma) * (b[i] - mb);
        da += (a[i] - ma) * (a[i] - ma);
        db += (b[i] - mb) * (b[i] - mb);
    }
    return num / (std::sqrt(da) * std::sqrt(db));
}
double snr(const std::vector<double>& p, const std::vector<double>& r) {
    const double mr = mean(r);
    double var = 0, mse = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        var += (r[i] - mr) * (r[i] - mr);
        mse += (p[i] - r[i]) * (p[i] - r[i]);
    }
    const double db = 10.0 * std::log10(var / mse);
    return db > 60.0 ? 60.0 : db;
}
double adj_r2(const std::vector<double>& p, const std::vector<double>& r, std::size_t k) {
    const double mr = mean(r);
    double res = 0, tot = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        res += (p[i] - r[i]) * (p[i] - r[i]);
        tot += (r[i] - mr) * (r[i] - mr);
    }
    const double r2 = 1.0 - res / tot;
    const double n = double(r.size());
    return 1.0 - (1.0 - r2) * (n - 1.0) / (n - double(k) - 1.0);
}
AnovaResult anova(const std::vector<std::vector<double>>& groups) {
    std::size_t n = 0;
    double gs = 0;
    for (const auto& g : groups) {
        n += g.size();
        for (double v : g) gs += v;
    }
    const double gm = gs / double(n);
    double ssb = 0, ssw = 0;
    for (const auto& g : groups) {
        const double m = mean(g);
        ssb += double(g.size()) * (m - gm) * (m - gm);
        for (double v : g) ssw += (v - m) * (v - m);
    }
    AnovaResult r;
    r.df_between = groups.size() - 1;
    r.df_within = n - groups.size();
    r.f = (ssb / double(r.df_between)) / (ssw / double(r.df_within));
    r.p = incomplete_beta(double(r.df_within) / 2, double(r.df_between) / 2,
                          double(r.df_within) /
                              (double(r.df_within) + double(r.df_between) * r.f));
    return r;
}
} // namespace naive

void criterion_metric_oracles() {
    Rng rng(404);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 16 + rng.below(64);
        std::vector<double> p(n), r(n);
        for (std::size_t i = 0; i < n; ++i) {
            r[i] = 25.0 * rng.normal();
            p[i] = r[i] + 4.0 * rng.normal();
        }
        worst = std::max(worst, std::abs(rmse(p, r) - naive::rmse(p, r)));
        worst = std::max(worst, std::abs(pearson_r(p, r) - naive::pearson(p, r)));
        worst = std::max(worst, std::abs(snr_db(p, r) - naive::snr(p, r)));
        worst = std::max(worst, std::abs(adjusted_r2(p, r, 7) - naive::adj_r2(p, r, 7)));

        std::vector<std::vector<double>> groups(2 + rng.below(3));
        for (auto& g : groups) {
            g.resize(4 + rng.below(8));
            for (auto& v : g) v = rng.normal() * 2.0 + double(rng.below(2));
        }
        const AnovaResult a = anova_oneway(groups);
        const AnovaResult b = naive::anova(groups);
        worst = std::max(worst, std::abs(a.f - b.f));
        worst = std::max(worst, std::abs(a.p - b.p));
    }
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "metrics vs naive oracles: worst |diff| %.2e over 1000 trials (< 1e-10)",
                  worst);
    report(4, "a", worst < 1e-10, buf);

    // The spec prose quotes F = 2.5, p = 0.1525 for {1..5} vs {2..6}; the
    // reference computation (scipy.stats.f_oneway and the naive oracle
    // above) yields F = 1.0, p = 0.3466. The quoted F equals the
    // between-group mean square, which coincidentally matches the pooled
    // within-group mean square of 2.5 here. The implementation is gated
    // against the reference computation.
    const AnovaResult got = anova_oneway({{1, 2, 3, 4, 5}, {2, 3, 4, 5, 6}});
    const AnovaResult ref = naive::anova({{1, 2, 3, 4, 5}, {2, 3, 4, 5, 6}});
    char buf2[240];
    std::snprintf(buf2, sizeof(buf2),
                  "anova {1..5} vs {2..6}: F=%.6f p=%.6f vs reference F=%.6f p=%.6f "
                  "(+-1e-3; spec prose quotes F=2.5/p=0.1525, which is MSB, not F)",
                  got.f, got.p, ref.f, ref.p);
    report(4, "b", std::abs(got.f - ref.f) < 1e-3 && std::abs(got.p - ref.p) < 1e-3, buf2);
}

// ---------------------------------------------------------------- 9
void criterion_latency() {
    NetLayout lay;
    lay.feat_width = 10;
    lay.fl_offset = 0;
    KinPreNet<float> net = KinPreNet<float>::init(lay, 99);
    Rng rng(100);
    std::vector<float> ext(std::size_t(lay.seq_len) * lay.ext_steps * lay.channels);
    for (auto& v : ext) v = float(rng.normal());
    std::vector<float> feats(std::size_t(lay.seq_len) * lay.feat_width, 0.1f);
    SeqSample<float> sample;
    sample.ext = ext.data();
    sample.feats = feats.data();

    NetRunner<float> runner(&net);
    runner.forward(sample); // warm up
    std::vector<double> ms;
    for (int i = 0; i < 51; ++i) {
        const auto t0 = Clock::now();
        runner.forward(sample);
        ms.push_back(std::chrono::duration<double>(Clock::now() - t0).count() * 1e3);
    }
    std::sort(ms.begin(), ms.end());
    const double median = ms[ms.size() / 2];
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "extractor(60 windows)+predictor forward median %.2f ms "
                  "(informational < 7, hard < 20)",
                  median);
    report(9, "", median < 20.0, buf);
}

// ---------------------------------------------------------- pipeline 5-8
struct Scale {
    int subjects = 5;
    double duration = 16.0;
    int epochs = 30;
    std::size_t train_stride = 36;
    std::size_t eval_stride = 4;
    std::size_t svr_stride = 8;
};

std::vector<SubjectData> build_dataset(const Scale& sc, std::uint64_t seed,
                                       const std::string& out_dir) {
    const SegmentModel thigh = synth_thigh_model();
    const SegmentModel shank = synth_shank_model();
    std::vector<SubjectData> subjects;
    for (int i = 0; i < sc.subjects; ++i) {
        SyntheticSubjectSpec spec;
        spec.seed = seed + std::uint64_t(i);
        spec.duration = sc.duration;
        spec.emd_lead = 0.060;
        spec.emg_noise_floor = 0.25; // harder amplitude decoding than the default
        char nm[8];
        std::snprintf(nm, sizeof(nm), "s%02d", i);
        const SensorRecording rec = synth_recording(spec, nm);
        // Cross-modal supervision: the labels come from the marker path,
        // not from the generator truth.
        SubjectData s;
        s.id = rec.subject_id;
        s.emg = rec.emg;
        s.imu_angle = rec.imu_angle;
        s.measured = measured_angle_series(rec.markers, thigh, shank);
        subjects.push_back(std::move(s));
    }
    if (!out_dir.empty()) fs::create_directories(out_dir);
    return subjects;
}

CrossvalConfig base_config(const Scale& sc, std::uint64_t seed) {
    CrossvalConfig cfg;
    cfg.seed = seed;
    cfg.train.epochs = sc.epochs;
    cfg.train_stride = sc.train_stride;
    cfg.eval_stride = sc.eval_stride;
    cfg.svr_stride = sc.svr_stride;
    cfg.progress = [](const std::string& m) {
        std::fprintf(stderr, "  [crossval] %s\n", m.c_str());
    };
    return cfg;
}

std::vector<double> subject_rmse(const ResultsGrid& grid, Predictor p, FeatureMode f,
                                 int t_ms) {
    std::vector<double> out;
    for (const auto& s : grid.subjects()) out.push_back(grid.at({p, f, t_ms, s}).rmse);
    return out;
}

void run_pipeline(const Scale& sc, std::uint64_t seed, const std::string& out_dir) {
    const auto t_start = Clock::now();
    std::fprintf(stderr, "building %d-subject dataset (%.0f s each)...\n", sc.subjects,
                 sc.duration);
    const auto subjects = build_dataset(sc, seed, out_dir);

    // Run A: the T=54 comparison grid (criterion 5, reused by 8).
    CrossvalConfig cfg_a = base_config(sc, seed);
    cfg_a.cells = {{Predictor::LSTM, FeatureMode::FL, 54},
                   {Predictor::LSTM, FeatureMode::FTL, 54},
                   {Predictor::LSTM, FeatureMode::FT, 54},
                   {Predictor::SVR, FeatureMode::FT, 54}};
    std::fprintf(stderr, "run A: T=54 predictor/feature grid...\n");
    const CrossvalResult run_a = loso_crossval(subjects, cfg_a);

    // Run B: LSTM-FL across the prediction-time boundary (criterion 6,
    // fusion side of criterion 7).
    CrossvalConfig cfg_b = base_config(sc, seed);
    cfg_b.cells = {{Predictor::LSTM, FeatureMode::FL, 27},
                   {Predictor::LSTM, FeatureMode::FL, 135},
                   {Predictor::LSTM, FeatureMode::FL, 162}};
    std::fprintf(stderr, "run B: prediction-time sweep...\n");
    const CrossvalResult run_b = loso_crossval(subjects, cfg_b);

    // Run C: kinematics-only ablation over every configured T.
    CrossvalConfig cfg_c = base_config(sc, seed);
    cfg_c.kinematics_only = true;
    cfg_c.cells = {{Predictor::LSTM, FeatureMode::FL, 27},
                   {Predictor::LSTM, FeatureMode::FL, 54},
                   {Predictor::LSTM, FeatureMode::FL, 135},
                   {Predictor::LSTM, FeatureMode::FL, 162}};
    std::fprintf(stderr, "run C: kinematics-only ablation...\n");
    const CrossvalResult run_c = loso_crossval(subjects, cfg_c);

    const double wall = std::chrono::duration<double>(Clock::now() - t_start).count();

    char buf[320];
    const bool complete =
        run_a.failures.empty() && run_b.failures.empty() && run_c.failures.empty();
    if (!complete) {
        for (const auto& f : run_a.failures)
            std::fprintf(stderr, "failure: %s %s\n", f.subject.c_str(), f.message.c_str());
        report(5, "", false, "pipeline folds failed; see stderr");
        report(6, "", false, "pipeline folds failed");
        report(7, "", false, "pipeline folds failed");
        report(8, "", false, "pipeline folds failed");
        return;
    }

    // ----- criterion 5: qualitative ordering at T = 54 ms
    const double fl = mean_of(subject_rmse(run_a.grid, Predictor::LSTM, FeatureMode::FL, 54));
    const double ftl =
        mean_of(subject_rmse(run_a.grid, Predictor::LSTM, FeatureMode::FTL, 54));
    const double ft = mean_of(subject_rmse(run_a.grid, Predictor::LSTM, FeatureMode::FT, 54));
    const double svr_ft =
        mean_of(subject_rmse(run_a.grid, Predictor::SVR, FeatureMode::FT, 54));
    std::snprintf(buf, sizeof(buf),
                  "mean rmse @54ms: lstm-fl %.3f < lstm-ftl %.3f < lstm-ft %.3f, "
                  "lstm-fl <= 0.6*svr-ft (%.3f); wall %.0f s (< 7200)",
                  fl, ftl, ft, 0.6 * svr_ft, wall);
    report(5, "", fl < ftl && ftl < ft && fl <= 0.6 * svr_ft && wall < 7200.0, buf);

    if (!out_dir.empty()) {
        write_grid_csv(run_a.grid, out_dir + "/grid_t54.csv");
        write_grid_csv(run_b.grid, out_dir + "/grid_sweep.csv");
        write_grid_csv(run_c.grid, out_dir + "/grid_kinematics_only.csv");
    }

    // ----- criterion 6: prediction-time boundary
    std::vector<double> early, late;
    {
        const auto r27 = subject_rmse(run_b.grid, Predictor::LSTM, FeatureMode::FL, 27);
        const auto r54 = subject_rmse(run_a.grid, Predictor::LSTM, FeatureMode::FL, 54);
        const auto r135 = subject_rmse(run_b.grid, Predictor::LSTM, FeatureMode::FL, 135);
        const auto r162 = subject_rmse(run_b.grid, Predictor::LSTM, FeatureMode::FL, 162);
        for (std::size_t i = 0; i < r27.size(); ++i) {
            early.push_back(0.5 * (r27[i] + r54[i]));
            late.push_back(0.5 * (r135[i] + r162[i]));
        }
    }
    const AnovaResult boundary = anova_oneway({early, late});
    std::snprintf(buf, sizeof(buf),
                  "rmse early {27,54} %.3f < late {135,162} %.3f, anova p %.4f (< 0.05)",
                  mean_of(early), mean_of(late), boundary.p);
    report(6, "", mean_of(early) < mean_of(late) && boundary.p < 0.05, buf);

    // ----- criterion 7: EMG fusion benefit at every configured T
    bool fusion_wins = true;
    std::string detail7;
    for (int t : {27, 54, 135, 162}) {
        const ResultsGrid& fusion_grid = (t == 54) ? run_a.grid : run_b.grid;
        const auto fus = subject_rmse(fusion_grid, Predictor::LSTM, FeatureMode::FL, t);
        const auto kin = subject_rmse(run_c.grid, Predictor::LSTM, FeatureMode::FL, t);
        const AnovaResult a = anova_oneway({fus, kin});
        const bool ok = mean_of(kin) > mean_of(fus) && a.p < 0.05;
        fusion_wins = fusion_wins && ok;
        char part[96];
        std::snprintf(part, sizeof(part), " T=%d: kin %.2f vs fus %.2f p=%.4f%s", t,
                      mean_of(kin), mean_of(fus), a.p, ok ? "" : " (!)");
        detail7 += part;
    }
    report(7, "", fusion_wins, "kinematics-only worse at every T with p<0.05:" + detail7);

    // ----- criterion 8: byte-identical grids across reruns
    std::fprintf(stderr, "rerun of run A for determinism...\n");
    const CrossvalResult run_a2 = loso_crossval(subjects, cfg_a);
    const std::string p1 = out_dir.empty() ? "/tmp/kinpred_grid_run1.csv"
                                           : out_dir + "/grid_t54.csv";
    const std::string p2 = out_dir.empty() ? "/tmp/kinpred_grid_run2.csv"
                                           : out_dir + "/grid_t54_rerun.csv";
    if (out_dir.empty()) write_grid_csv(run_a.grid, p1);
    write_grid_csv(run_a2.grid, p2);
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    const std::string s1((std::istreambuf_iterator<char>(f1)),
                         std::istreambuf_iterator<char>());
    const std::string s2((std::istreambuf_iterator<char>(f2)),
                         std::istreambuf_iterator<char>());
    std::snprintf(buf, sizeof(buf), "grid csvs byte-identical across reruns (%zu bytes)",
                  s1.size());
    report(8, "", !s1.empty() && s1 == s2, buf);
}

} // namespace

int main(int argc, char** argv) {
    std::string scale_name = "small";
    std::string out_dir;
    std::uint64_t seed = 7000;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        auto next = [&] { return std::string(i + 1 < argc ? argv[++i] : ""); };
        if (arg == "--scale")
            scale_name = next();
        else if (arg == "--out")
            out_dir = next();
        else if (arg == "--seed")
            seed = std::stoull(next());
        else {
            std::fprintf(stderr, "usage: %s [--scale smoke|small|full] [--out DIR] [--seed N]\n",
                         argv[0]);
            return 1;
        }
    }

    Scale sc;
    if (scale_name == "smoke") {
        sc = {3, 12.0, 8, 60, 6, 12};
    } else if (scale_name == "small") {
        sc = {5, 16.0, 30, 36, 4, 8};
    } else if (scale_name == "full") {
        // The protocol scale: 10 subjects x 180 s, every sequence.
        sc = {10, 180.0, 30, 1, 1, 8};
    } else {
        std::fprintf(stderr, "unknown scale '%s'\n", scale_name.c_str());
        return 1;
    }

    std::printf("acceptance (scale %s, seed %llu)\n", scale_name.c_str(),
                static_cast<unsigned long long>(seed));
    criterion_gradcheck();
    criterion_pose_oracle();
    criterion_filter_response();
    criterion_metric_oracles();
    criterion_latency();
    run_pipeline(sc, seed, out_dir);

    std::printf("%d criteria failed\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
