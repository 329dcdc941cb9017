#include "kinpred/crossval.hpp"

#include <algorithm>
#include <atomic>
#include <limits>
#include <mutex>
#include <thread>

namespace kinpred {

namespace {

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t cell_tag(const CrossvalCell& cell, bool kin_only) {
    return std::uint64_t(cell.predictor == Predictor::SVR ? 1 : 2) * 1000000 +
           std::uint64_t(cell.feature) * 10000 + std::uint64_t(cell.t_ms) * 2 +
           (kin_only ? 1 : 0);
}

struct FoldOutput {
    std::vector<std::pair<GridKey, MetricSet>> cells;
    std::vector<FoldFailure> failures;
    std::vector<CellLog> logs;
};

struct CellContext {
    const FeatureLayout layout;
    std::vector<Labels> labels; // per subject index
};

// Degenerate folds (constant references) leave r/snr/adjusted R^2
// undefined; rmse is always computable, so record NaN rather than failing
// the fold.
MetricSet compute_metrics_lenient(std::span<const double> pred, std::span<const double> ref,
                                  std::size_t predictor_count) {
    MetricSet m;
    m.rmse = rmse(pred, ref);
    try {
        m.r = pearson_r(pred, ref);
    } catch (const Degenerate&) {
        m.r = std::numeric_limits<double>::quiet_NaN();
    }
    try {
        m.snr_db = snr_db(pred, ref);
    } catch (const Degenerate&) {
        m.snr_db = std::numeric_limits<double>::quiet_NaN();
    }
    try {
        m.adj_r2 = adjusted_r2(pred, ref, predictor_count);
    } catch (const Degenerate&) {
        m.adj_r2 = std::numeric_limits<double>::quiet_NaN();
    }
    return m;
}

NetLayout to_net_layout(const FeatureLayout& l) {
    NetLayout n;
    n.feat_width = l.width;
    n.fl_offset = l.fl_offset;
    n.channels = 9;
    n.ext_steps = int(kExtractorSteps);
    n.seq_len = int(kSequenceLen);
    return n;
}

KinPreNet<float> train_lstm_for_cell(const CrossvalCell& cell, const FeatureLayout& layout,
                                     const std::vector<std::size_t>& train_idx,
                                     const std::vector<WindowFeatures>& wfs,
                                     const std::vector<Labels>& labels,
                                     const FeatStats& fstats, const CrossvalConfig& config,
                                     std::uint64_t net_seed, TrainLog& log_out) {
    std::vector<SubjectTensors> tensors(wfs.size());
    std::vector<SeqSample<float>> samples;
    for (std::size_t si : train_idx) {
        tensors[si].wf = &wfs[si];
        tensors[si].static_feats = build_static_feats(wfs[si], layout, fstats);
        auto s = make_sequence_samples(tensors[si], layout, labels[si], config.train_stride);
        samples.insert(samples.end(), s.begin(), s.end());
    }
    if (samples.empty()) throw InvalidInput("no training sequences for cell");

    KinPreNet<float> net = KinPreNet<float>::init(to_net_layout(layout), net_seed);
    label_stats(samples, net.label_mean, net.label_std);

    TrainConfig tc = config.train;
    tc.seed = net_seed;
    log_out = train_net(net, samples, tc);
    return net;
}

FoldOutput run_fold(const std::vector<SubjectData>& subjects, std::size_t held,
                    const CrossvalConfig& config) {
    FoldOutput out;
    const std::size_t n_subj = subjects.size();

    std::vector<std::size_t> train_idx;
    std::vector<const SubjectData*> train_ptrs;
    for (std::size_t i = 0; i < n_subj; ++i)
        if (i != held) {
            train_idx.push_back(i);
            train_ptrs.push_back(&subjects[i]);
        }

    bool need_ft = false, need_ext = false;
    for (const auto& cell : config.cells) {
        const FeatureLayout l = make_feature_layout(cell.feature, config.kinematics_only);
        need_ft |= l.uses_ft();
        need_ext |= l.uses_extractor();
    }

    EmgNormStats emg_stats;
    std::vector<WindowFeatures> wfs;
    FeatStats fstats;
    try {
        emg_stats = compute_emg_stats(train_ptrs);
        wfs.reserve(n_subj);
        for (const auto& s : subjects)
            wfs.push_back(compute_window_features(s, need_ft, need_ext, emg_stats));
        std::vector<const WindowFeatures*> train_wfs;
        for (std::size_t si : train_idx) train_wfs.push_back(&wfs[si]);
        fstats = compute_feat_stats(train_wfs);
    } catch (const Error& e) {
        for (const auto& cell : config.cells)
            out.failures.push_back({subjects[held].id, cell, e.what()});
        return out;
    }

    for (const auto& cell : config.cells) {
        const GridKey key{cell.predictor, cell.feature, cell.t_ms,
                          subjects[held].id};
        try {
            const FeatureLayout layout =
                make_feature_layout(cell.feature, config.kinematics_only);
            const double t_s = double(cell.t_ms) / 1000.0;
            std::vector<Labels> labels(n_subj);
            for (std::size_t i = 0; i < n_subj; ++i)
                labels[i] = compute_labels(wfs[i], subjects[i].measured, t_s);

            const std::uint64_t cell_seed = derive_seed(
                derive_seed(config.seed, cell_tag(cell, config.kinematics_only)),
                fnv1a(subjects[held].id));

            std::vector<double> pred, ref;
            if (cell.predictor == Predictor::LSTM) {
                TrainLog log;
                KinPreNet<float> net =
                    train_lstm_for_cell(cell, layout, train_idx, wfs, labels, fstats,
                                        config, cell_seed, log);
                out.logs.push_back({cell, subjects[held].id, log});

                SubjectTensors tensors;
                tensors.wf = &wfs[held];
                tensors.static_feats = build_static_feats(wfs[held], layout, fstats);
                const auto eval_samples = make_sequence_samples(
                    tensors, layout, labels[held], config.eval_stride);
                if (eval_samples.empty())
                    throw InvalidInput("no evaluation sequences for held-out subject");
                NetRunner<float> runner(&net);
                for (const auto& s : eval_samples) {
                    pred.push_back(runner.forward(s));
                    ref.push_back(s.label);
                }
            } else {
                // The learned-feature modes feed SVR from an extractor
                // trained end-to-end on the same fold.
                std::vector<std::vector<float>> fl(n_subj);
                if (layout.uses_extractor()) {
                    TrainLog log;
                    KinPreNet<float> net =
                        train_lstm_for_cell(cell, layout, train_idx, wfs, labels, fstats,
                                            config, cell_seed, log);
                    out.logs.push_back({cell, subjects[held].id, log});
                    for (std::size_t i = 0; i < n_subj; ++i)
                        fl[i] = extract_fl_features(net, wfs[i]);
                }

                std::vector<std::vector<double>> x;
                std::vector<double> y;
                for (std::size_t si : train_idx) {
                    const auto vecs = build_svr_vectors(
                        wfs[si], layout, fstats,
                        layout.uses_extractor() ? &fl[si] : nullptr);
                    for (std::size_t k = 0; k < vecs.size(); k += config.svr_stride) {
                        if (!labels[si].valid[k]) continue;
                        x.push_back(vecs[k]);
                        y.push_back(labels[si].value[k]);
                    }
                }
                if (x.size() < 2) throw InvalidInput("no SVR training vectors for cell");

                SvrFitOptions opts = config.svr;
                if (config.svr_search) opts = svr_grid_search(x, y, opts, cell_seed);
                const SvrModel model = svr_fit(x, y, opts);

                const auto held_vecs = build_svr_vectors(
                    wfs[held], layout, fstats,
                    layout.uses_extractor() ? &fl[held] : nullptr);
                // Same evaluation instants as the sequence models.
                for (std::size_t k = kSequenceLen - 1; k < held_vecs.size();
                     k += config.eval_stride) {
                    if (!labels[held].valid[k]) continue;
                    pred.push_back(svr_predict(model, held_vecs[k]));
                    ref.push_back(labels[held].value[k]);
                }
                if (pred.empty()) throw InvalidInput("no SVR evaluation points");
            }

            const MetricSet m =
                compute_metrics_lenient(pred, ref, std::size_t(layout.width));
            out.cells.emplace_back(key, m);
        } catch (const Error& e) {
            out.failures.push_back({subjects[held].id, cell, e.what()});
        }
    }
    return out;
}

} // namespace

CrossvalResult loso_crossval(const std::vector<SubjectData>& subjects,
                             const CrossvalConfig& config) {
    if (subjects.size() < 2) throw InvalidInput("loso_crossval: need at least 2 subjects");
    if (config.cells.empty()) throw InvalidInput("loso_crossval: no cells configured");

    // Canonical subject order makes results independent of caller order.
    std::vector<SubjectData> ordered(subjects);
    std::sort(ordered.begin(), ordered.end(),
              [](const SubjectData& a, const SubjectData& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < ordered.size(); ++i)
        if (ordered[i].id == ordered[i - 1].id)
            throw InvalidInput("loso_crossval: duplicate subject id " + ordered[i].id);

    const std::size_t n_folds = ordered.size();
    std::vector<FoldOutput> outputs(n_folds);

    const int jobs = std::max(1, config.jobs);
    std::atomic<std::size_t> next{0};
    std::mutex progress_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t fold = next.fetch_add(1);
            if (fold >= n_folds) return;
            if (config.progress) {
                std::lock_guard<std::mutex> lock(progress_mutex);
                config.progress("fold " + std::to_string(fold + 1) + "/" +
                                std::to_string(n_folds) + " (held-out " +
                                ordered[fold].id + ")");
            }
            outputs[fold] = run_fold(ordered, fold, config);
        }
    };
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    CrossvalResult result;
    for (auto& out : outputs) {
        for (auto& [key, m] : out.cells) result.grid.insert(key, m);
        result.failures.insert(result.failures.end(), out.failures.begin(),
                               out.failures.end());
        result.logs.insert(result.logs.end(), out.logs.begin(), out.logs.end());
    }
    return result;
}

} // namespace kinpred
