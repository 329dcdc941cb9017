// kinpred: synthetic gait data, cross-modal supervision, feature
// extraction, predictor training and leave-one-subject-out evaluation in
// one binary. Exit codes: 0 ok, 1 usage/config, 2 data, 3 numerical.

#include <cstdio>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "kinpred/config.hpp"
#include "kinpred/gait_synth.hpp"
#include "kinpred/io.hpp"

namespace fs = std::filesystem;
using namespace kinpred;

namespace {

int classify_error(const Error& e) {
    if (dynamic_cast<const ConvergenceFailure*>(&e) || dynamic_cast<const Divergence*>(&e) ||
        dynamic_cast<const Degenerate*>(&e) || dynamic_cast<const RankDeficient*>(&e))
        return 3;
    return 2;
}

SyntheticSubjectSpec make_spec(const RunConfig& cfg, int idx) {
    SyntheticSubjectSpec spec;
    spec.seed = cfg.seed + std::uint64_t(idx);
    spec.duration = cfg.duration;
    spec.emd_lead = cfg.emd_lead_ms / 1000.0;
    return spec;
}

std::string subject_name(int idx) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "s%02d", idx);
    return buf;
}

int cmd_synth(const RunConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    for (int i = 0; i < cfg.subjects; ++i) {
        const SyntheticSubjectSpec spec = make_spec(cfg, i);
        const SensorRecording rec = synth_recording(spec, subject_name(i));
        save_recording(rec, out_dir, /*write_measured=*/false);
        // Generator truth, kept out of the manifest: supervision produces
        // the measured stream the pipeline actually trains on.
        write_series_csv(*rec.measured_angle, out_dir + "/" + rec.subject_id + "_truth.csv");
        std::cout << "wrote " << rec.subject_id << " (duration " << cfg.duration
                  << " s, emd lead " << cfg.emd_lead_ms << " ms)\n";
    }
    write_config_echo(cfg, out_dir + "/synth_config.txt");
    return 0;
}

int cmd_supervise(const std::string& data_dir, const std::string& thigh_json,
                  const std::string& shank_json) {
    const SegmentModel thigh =
        thigh_json.empty() ? synth_thigh_model() : load_segment_model_json(thigh_json);
    const SegmentModel shank =
        shank_json.empty() ? synth_shank_model() : load_segment_model_json(shank_json);

    const auto manifests = list_manifests(data_dir);
    if (manifests.empty()) throw IoError("no recording manifests in " + data_dir);
    for (const auto& mpath : manifests) {
        RecordingManifest manifest = read_manifest(mpath);
        const fs::path dir = fs::path(mpath).parent_path();
        const TimeSeries markers =
            read_series_csv((dir / manifest.markers_csv).string(), manifest.rate_markers);
        std::vector<std::size_t> bad;
        const TimeSeries measured = measured_angle_series(
            markers, thigh, shank, 4, 6.0, FilterMode::ZeroPhase, &bad);
        for (std::size_t b : bad)
            std::cerr << manifest.subject_id << ": degenerate marker frame " << b
                      << " dropped\n";
        manifest.measured_csv = manifest.subject_id + "_measured.csv";
        manifest.rate_measured = measured.rate();
        write_series_csv(measured, (dir / manifest.measured_csv).string());
        write_manifest(manifest, mpath);
        std::cout << "supervised " << manifest.subject_id << " (" << measured.length()
                  << " frames @ " << measured.rate() << " Hz)\n";
    }
    return 0;
}

std::vector<SubjectData> load_dataset(const std::string& data_dir) {
    const auto manifests = list_manifests(data_dir);
    if (manifests.empty()) throw IoError("no recording manifests in " + data_dir);
    std::vector<SubjectData> subjects;
    for (const auto& m : manifests) subjects.push_back(load_subject_data(m));
    return subjects;
}

int cmd_featurize(const RunConfig& cfg, const std::string& data_dir,
                  const std::string& mode_name, int t_ms, const std::string& net_path,
                  const std::string& out_path) {
    const FeatureMode mode = feature_mode_from_name(mode_name);
    const auto subjects = load_dataset(data_dir);
    std::vector<const SubjectData*> all;
    for (const auto& s : subjects) all.push_back(&s);
    const EmgNormStats stats = compute_emg_stats(all);

    LstmBundle bundle;
    const bool needs_net = mode != FeatureMode::FT;
    if (needs_net) {
        if (net_path.empty())
            throw InvalidInput("mode '" + mode_name + "' needs --net (a trained extractor)");
        bundle = load_lstm_bundle(net_path);
        if (!bundle.net.layout.has_extractor())
            throw InvalidInput("--net model has no extractor");
    }

    FtParams params;
    params.eps = stats.eps;
    std::vector<LabeledSample> rows;
    std::vector<std::string> row_subjects;
    for (const auto& subj : subjects) {
        // Normalized windows, matching the training-path features.
        TimeSeries norm_emg = subj.emg;
        for (std::size_t i = 0; i < norm_emg.length(); ++i)
            for (std::size_t c = 0; c < 9; ++c)
                norm_emg.at(i, c) = (norm_emg.at(i, c) - stats.mean[c]) / stats.std[c];
        const auto windows = segment_windows(norm_emg);

        std::vector<float> fl;
        if (needs_net) {
            const WindowFeatures wf =
                compute_window_features(subj, false, true, stats);
            fl = extract_fl_features(bundle.net, wf);
        }

        std::vector<FeatureVector> vectors;
        for (std::size_t k = 0; k < windows.size(); ++k) {
            if (windows[k].end_time > subj.imu_angle.end_time() + 1e-12) break;
            std::optional<std::array<double, 9>> fl_k;
            if (needs_net && k * 9 + 9 <= fl.size()) {
                std::array<double, 9> a{};
                for (int j = 0; j < 9; ++j) a[j] = fl[k * 9 + j];
                fl_k = a;
            } else if (needs_net) {
                break; // windows past the extractor's theta truncation
            }
            vectors.push_back(assemble_vector(windows[k], fl_k, subj.imu_angle, mode, params));
        }
        const LabelResult labeled =
            label_samples(vectors, subj.measured, double(t_ms) / 1000.0);
        std::cout << subj.id << ": " << labeled.samples.size() << " samples, "
                  << labeled.dropped << " dropped past the measured span\n";
        rows.insert(rows.end(), labeled.samples.begin(), labeled.samples.end());
        row_subjects.insert(row_subjects.end(), labeled.samples.size(), subj.id);
    }
    (void)cfg;
    write_feature_csv(rows, row_subjects, mode, out_path);
    std::cout << "wrote " << rows.size() << " rows to " << out_path << "\n";
    return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& data_dir,
              const std::string& predictor, const std::string& mode_name, int t_ms,
              const std::string& out_path) {
    const auto subjects = load_dataset(data_dir);
    std::vector<const SubjectData*> all;
    for (const auto& s : subjects) all.push_back(&s);
    const EmgNormStats emg_stats = compute_emg_stats(all);

    const FeatureLayout layout = make_feature_layout(
        feature_mode_from_name(mode_name), cfg.ablation == "kinematics_only");

    std::vector<WindowFeatures> wfs;
    for (const auto& s : subjects)
        wfs.push_back(compute_window_features(s, layout.uses_ft(),
                                              layout.uses_extractor(), emg_stats));
    std::vector<const WindowFeatures*> wf_ptrs;
    for (const auto& w : wfs) wf_ptrs.push_back(&w);
    const FeatStats fstats = compute_feat_stats(wf_ptrs);

    std::vector<Labels> labels;
    for (std::size_t i = 0; i < subjects.size(); ++i)
        labels.push_back(compute_labels(wfs[i], subjects[i].measured, double(t_ms) / 1000.0));

    const CrossvalConfig cc = to_crossval_config(cfg);

    if (predictor == "lstm" || layout.uses_extractor()) {
        std::vector<SubjectTensors> tensors(subjects.size());
        std::vector<SeqSample<float>> samples;
        for (std::size_t i = 0; i < subjects.size(); ++i) {
            tensors[i].wf = &wfs[i];
            tensors[i].static_feats = build_static_feats(wfs[i], layout, fstats);
            auto s = make_sequence_samples(tensors[i], layout, labels[i], cfg.train_stride);
            samples.insert(samples.end(), s.begin(), s.end());
        }
        if (samples.empty()) throw InvalidInput("no training sequences");

        NetLayout nl;
        nl.feat_width = layout.width;
        nl.fl_offset = layout.fl_offset;
        KinPreNet<float> net = KinPreNet<float>::init(nl, cfg.seed);
        label_stats(samples, net.label_mean, net.label_std);
        const TrainLog log = train_net(net, samples, cc.train);
        std::cout << "trained on " << samples.size() << " sequences; rmse "
                  << log.epoch_rmse.front() << " -> " << log.epoch_rmse.back()
                  << " deg over " << cfg.epochs << " epochs\n";
        if (predictor == "lstm") {
            save_lstm_bundle({net, layout, emg_stats, fstats}, out_path);
            std::cout << "wrote " << out_path << "\n";
            return 0;
        }
        // SVR on learned features
        std::vector<std::vector<double>> x;
        std::vector<double> y;
        for (std::size_t i = 0; i < subjects.size(); ++i) {
            const auto fl = extract_fl_features(net, wfs[i]);
            const auto vecs = build_svr_vectors(wfs[i], layout, fstats, &fl);
            for (std::size_t k = 0; k < vecs.size(); k += cfg.svr_stride) {
                if (!labels[i].valid[k]) continue;
                x.push_back(vecs[k]);
                y.push_back(labels[i].value[k]);
            }
        }
        SvrFitOptions opts = cc.svr;
        if (cfg.svr_search) opts = svr_grid_search(x, y, opts, cfg.seed);
        const SvrModel model = svr_fit(x, y, opts);
        save_svr_bundle({model, layout, emg_stats, fstats}, out_path);
        std::cout << "wrote " << out_path << " (" << model.support_vectors.size()
                  << " support vectors)\n";
        return 0;
    }

    // SVR on static features only
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    for (std::size_t i = 0; i < subjects.size(); ++i) {
        const auto vecs = build_svr_vectors(wfs[i], layout, fstats, nullptr);
        for (std::size_t k = 0; k < vecs.size(); k += cfg.svr_stride) {
            if (!labels[i].valid[k]) continue;
            x.push_back(vecs[k]);
            y.push_back(labels[i].value[k]);
        }
    }
    if (x.size() < 2) throw InvalidInput("no training vectors");
    SvrFitOptions opts = cc.svr;
    if (cfg.svr_search) opts = svr_grid_search(x, y, opts, cfg.seed);
    const SvrModel model = svr_fit(x, y, opts);
    save_svr_bundle({model, layout, emg_stats, fstats}, out_path);
    std::cout << "fit " << x.size() << " vectors, " << model.support_vectors.size()
              << " support vectors, kkt residual " << model.kkt_residual << "\n"
              << "wrote " << out_path << "\n";
    return 0;
}

int cmd_predict(const std::string& model_path, const std::string& manifest_path,
                std::size_t stride, const std::string& out_path) {
    const SensorRecording rec = load_recording(manifest_path);
    SubjectData subj;
    subj.id = rec.subject_id;
    subj.emg = rec.emg;
    subj.imu_angle = rec.imu_angle;
    const bool has_labels = rec.measured_angle.has_value();
    if (has_labels) subj.measured = *rec.measured_angle;

    std::ofstream out(out_path);
    if (!out) throw IoError("cannot write " + out_path);
    out << "end_time,prediction" << (has_labels ? ",measured\n" : "\n");

    // Try the LSTM bundle first, fall back to SVR.
    bool is_lstm = true;
    LstmBundle lstm;
    SvrBundle svr;
    try {
        lstm = load_lstm_bundle(model_path);
    } catch (const IoError&) {
        svr = load_svr_bundle(model_path);
        is_lstm = false;
    }
    const FeatureLayout& layout = is_lstm ? lstm.layout : svr.layout;
    const EmgNormStats& emg_stats = is_lstm ? lstm.emg_stats : svr.emg_stats;
    const FeatStats& fstats = is_lstm ? lstm.feat_stats : svr.feat_stats;

    const WindowFeatures wf =
        compute_window_features(subj, layout.uses_ft(), layout.uses_extractor(), emg_stats);

    std::size_t n = 0;
    char buf[64];
    auto emit = [&](double t, double pred, std::size_t k) {
        std::snprintf(buf, sizeof(buf), "%.10g,%.10g", t, pred);
        out << buf;
        if (has_labels) {
            const double tv = std::min(t, subj.measured.end_time());
            std::snprintf(buf, sizeof(buf), ",%.10g", sample_at_scalar(subj.measured, tv));
            out << buf;
        }
        out << "\n";
        ++n;
        (void)k;
    };

    if (is_lstm) {
        SubjectTensors tensors;
        tensors.wf = &wf;
        tensors.static_feats = build_static_feats(wf, layout, fstats);
        NetRunner<float> runner(&lstm.net);
        const std::size_t wstride_ext = kExtractorSteps * 9;
        for (std::size_t k = kSequenceLen - 1; k < wf.count; k += stride) {
            SeqSample<float> s;
            const std::size_t first = k - (kSequenceLen - 1);
            if (layout.uses_extractor()) s.ext = wf.ext_inputs.data() + first * wstride_ext;
            s.feats = tensors.static_feats.data() + first * layout.width;
            emit(wf.end_times[k], runner.forward(s), k);
        }
    } else {
        std::vector<float> fl;
        if (layout.uses_extractor())
            throw InvalidInput("svr bundle with learned features needs the paired lstm "
                               "bundle for extraction; not supported standalone");
        const auto vecs = build_svr_vectors(wf, layout, fstats, nullptr);
        for (std::size_t k = kSequenceLen - 1; k < wf.count; k += stride)
            emit(wf.end_times[k], svr_predict(svr.model, vecs[k]), k);
    }
    std::cout << "wrote " << n << " predictions to " << out_path << "\n";
    return 0;
}

int cmd_crossval(const RunConfig& cfg, const std::string& data_dir,
                 const std::string& out_dir) {
    const auto subjects = load_dataset(data_dir);
    CrossvalConfig cc = to_crossval_config(cfg);
    cc.progress = [](const std::string& msg) { std::cerr << "[crossval] " << msg << "\n"; };

    const CrossvalResult result = loso_crossval(subjects, cc);

    fs::create_directories(out_dir);
    write_config_echo(cfg, out_dir + "/config.txt");
    write_grid_csv(result.grid, out_dir + "/grid.csv");
    if (result.grid.size() > 0)
        write_report_json(result.grid, {}, out_dir + "/report.json");

    if (!result.failures.empty()) {
        std::ofstream flog(out_dir + "/failures.txt");
        for (const auto& f : result.failures) {
            flog << predictor_name(f.cell.predictor) << "/" << feature_mode_name(f.cell.feature)
                 << "/" << f.cell.t_ms << "ms subject " << f.subject << ": " << f.message
                 << "\n";
            std::cerr << "fold failure: " << f.subject << ": " << f.message << "\n";
        }
    }
    const std::size_t expected = cc.cells.size() * subjects.size();
    std::cout << "grid cells: " << result.grid.size() << "/" << expected
              << (result.failures.empty() ? "" : " (failures logged)") << "\n";
    if (result.grid.size() == 0) return 3; // every fold failed
    return 0;
}

int cmd_gradcheck(std::uint64_t seed, double fd_step) {
    const GradCheckReport rep = grad_check(seed, fd_step);
    const bool pass = rep.max_rel_err < 1e-4;
    std::printf("gradcheck: max relative error %.3e over %zu parameters (%.2f s): %s\n",
                rep.max_rel_err, rep.params_checked, rep.seconds, pass ? "PASS" : "FAIL");
    return pass ? 0 : 3;
}

int cmd_report(const std::string& grid_path, const std::string& out_path) {
    const ResultsGrid grid = read_grid_csv(grid_path);
    write_report_json(grid, {}, out_path);
    std::cout << "wrote " << out_path << " (" << grid.size() << " cells)\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ahead-of-time knee angle prediction from EMG and IMU signals"};
    app.require_subcommand(1);
    app.set_config("--config", "", "flat key=value config file; flags take precedence");

    RunConfig cfg;
    app.add_option("--seed", cfg.seed, "master seed")->envname("KINPRED_SEED");
    app.add_option("--subjects", cfg.subjects, "synthetic subject count");
    app.add_option("--duration", cfg.duration, "seconds per subject");
    app.add_option("--emd-lead", cfg.emd_lead_ms, "electromechanical lead, ms");
    app.add_option("--predictors", cfg.predictors, "subset of {lstm,svr}")->delimiter(',');
    app.add_option("--features", cfg.features, "subset of {ft,fl,ftl}")->delimiter(',');
    app.add_option("--times", cfg.times_ms, "prediction times, ms")->delimiter(',');
    app.add_option("--epochs", cfg.epochs, "training epochs");
    app.add_option("--lr-extractor", cfg.lr_extractor, "extractor learning rate");
    app.add_option("--lr-predictor", cfg.lr_predictor, "predictor learning rate");
    app.add_option("--lr-decay", cfg.lr_decay, "learning rate decay factor");
    app.add_option("--decay-interval", cfg.decay_interval, "updates between decays");
    app.add_option("--grad-clip", cfg.grad_clip, "gradient norm clip (0 = off)");
    app.add_option("--svr-c", cfg.svr_c, "SVR box constraint");
    app.add_option("--svr-epsilon", cfg.svr_epsilon, "SVR tube width, deg");
    app.add_option("--svr-gamma", cfg.svr_gamma, "RBF gamma (0 = auto)");
    app.add_flag("--svr-search", cfg.svr_search, "coarse SVR hyperparameter search");
    app.add_option("--ablation", cfg.ablation, "emg_plus_kinematics | kinematics_only");
    app.add_option("--train-stride", cfg.train_stride, "training sequence stride");
    app.add_option("--eval-stride", cfg.eval_stride, "evaluation stride");
    app.add_option("--svr-stride", cfg.svr_stride, "SVR training vector stride");
    app.add_option("--jobs", cfg.jobs, "parallel fold jobs");

    std::string data_dir, out_path, mode_name = "fl", predictor = "lstm";
    std::string net_path, model_path, manifest_path, thigh_json, shank_json, grid_path;
    int t_ms = 54;
    std::size_t stride = 1;
    double fd_step = 1e-5;

    auto* synth = app.add_subcommand("synth", "generate synthetic subject recordings");
    synth->add_option("--out", out_path, "output directory")->required();

    auto* supervise =
        app.add_subcommand("supervise", "markers -> measured angle (gold standard)");
    supervise->add_option("--data", data_dir, "dataset directory")->required();
    supervise->add_option("--thigh-model", thigh_json, "thigh segment model json");
    supervise->add_option("--shank-model", shank_json, "shank segment model json");

    auto* featurize = app.add_subcommand("featurize", "windowed feature dataset as CSV");
    featurize->add_option("--data", data_dir)->required();
    featurize->add_option("--mode", mode_name, "ft | fl | ftl");
    featurize->add_option("--t-ms", t_ms, "prediction time, ms");
    featurize->add_option("--net", net_path, "trained lstm bundle (for fl/ftl)");
    featurize->add_option("--out", out_path)->required();

    auto* train = app.add_subcommand("train", "train one predictor on a dataset");
    train->add_option("--data", data_dir)->required();
    train->add_option("--predictor", predictor, "lstm | svr");
    train->add_option("--mode", mode_name, "ft | fl | ftl");
    train->add_option("--t-ms", t_ms, "prediction time, ms");
    train->add_option("--out", out_path, "output model json")->required();

    auto* predict = app.add_subcommand("predict", "run a trained model over a recording");
    predict->add_option("--model", model_path)->required();
    predict->add_option("--manifest", manifest_path)->required();
    predict->add_option("--stride", stride, "window stride");
    predict->add_option("--out", out_path)->required();

    auto* crossval = app.add_subcommand("crossval", "leave-one-subject-out grid");
    crossval->add_option("--data", data_dir)->required();
    crossval->add_option("--out", out_path, "output directory")->required();

    auto* gradcheck = app.add_subcommand("gradcheck", "BPTT vs finite differences");
    gradcheck->add_option("--fd-step", fd_step, "central difference step");

    auto* report = app.add_subcommand("report", "rebuild report.json from a grid CSV");
    report->add_option("--grid", grid_path)->required();
    report->add_option("--out", out_path)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synth(cfg, out_path);
        if (supervise->parsed()) return cmd_supervise(data_dir, thigh_json, shank_json);
        if (featurize->parsed())
            return cmd_featurize(cfg, data_dir, mode_name, t_ms, net_path, out_path);
        if (train->parsed())
            return cmd_train(cfg, data_dir, predictor, mode_name, t_ms, out_path);
        if (predict->parsed()) return cmd_predict(model_path, manifest_path, stride, out_path);
        if (crossval->parsed()) return cmd_crossval(cfg, data_dir, out_path);
        if (gradcheck->parsed()) return cmd_gradcheck(cfg.seed, fd_step);
        if (report->parsed()) return cmd_report(grid_path, out_path);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return classify_error(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
