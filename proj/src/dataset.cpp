#include "kinpred/dataset.hpp"

#include <cmath>

namespace kinpred {

EmgNormStats compute_emg_stats(const std::vector<const SubjectData*>& train) {
    if (train.empty()) throw InvalidInput("compute_emg_stats: no training subjects");
    EmgNormStats stats;
    std::array<double, 9> sum{}, sumsq{};
    std::size_t n = 0;
    for (const auto* s : train) {
        if (s->emg.channels() != 9) throw InvalidInput("compute_emg_stats: emg must be 9-channel");
        const auto& d = s->emg.data();
        for (std::size_t i = 0; i < s->emg.length(); ++i)
            for (int c = 0; c < 9; ++c) {
                const double v = d[i * 9 + c];
                sum[c] += v;
                sumsq[c] += v * v;
            }
        n += s->emg.length();
    }
    for (int c = 0; c < 9; ++c) {
        stats.mean[c] = sum[c] / double(n);
        const double var = sumsq[c] / double(n) - stats.mean[c] * stats.mean[c];
        stats.std[c] = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    // Noise guards follow the normalized-channel mean absolute value.
    std::array<double, 9> mad{};
    for (const auto* s : train) {
        const auto& d = s->emg.data();
        for (std::size_t i = 0; i < s->emg.length(); ++i)
            for (int c = 0; c < 9; ++c)
                mad[c] += std::abs((d[i * 9 + c] - stats.mean[c]) / stats.std[c]);
    }
    for (int c = 0; c < 9; ++c) stats.eps[c] = 0.01 * mad[c] / double(n);
    return stats;
}

FeatureLayout make_feature_layout(FeatureMode mode, bool kinematics_only) {
    FeatureLayout l;
    l.mode = mode;
    l.kinematics_only = kinematics_only;
    if (kinematics_only) {
        l.width = 1;
        l.theta_offset = 0;
        return l;
    }
    switch (mode) {
        case FeatureMode::FT:
            l.width = int(kFtBlock) + 1;
            l.ft_offset = 0;
            break;
        case FeatureMode::FL:
            l.width = 9 + 1;
            l.fl_offset = 0;
            break;
        case FeatureMode::FTL:
            l.width = int(kFtBlock) + 9 + 1;
            l.ft_offset = 0;
            l.fl_offset = int(kFtBlock);
            break;
    }
    l.theta_offset = l.width - 1;
    return l;
}

WindowFeatures compute_window_features(const SubjectData& subject, bool need_ft,
                                       bool need_extractor, const EmgNormStats& stats) {
    const TimeSeries& emg = subject.emg;
    if (emg.channels() != 9) throw InvalidInput("compute_window_features: emg must be 9-channel");
    if (emg.length() < kWindowLen)
        throw TooShort("compute_window_features: recording shorter than one window");

    WindowFeatures wf;
    wf.subject = subject.id;
    const std::size_t total = window_count(emg.length());

    // Index/fraction table for the 165 -> 60 linear resample.
    std::array<std::pair<std::size_t, double>, kExtractorSteps> resample_tab;
    for (std::size_t j = 0; j < kExtractorSteps; ++j) {
        const double pos = double(j) * double(kWindowLen - 1) / double(kExtractorSteps - 1);
        std::size_t i0 = std::min(std::size_t(pos), kWindowLen - 2);
        resample_tab[j] = {i0, pos - double(i0)};
    }

    FtParams ft_params;
    ft_params.eps = stats.eps;

    std::array<double, kWindowLen> ch{};
    const auto& raw = emg.data();
    for (std::size_t k = 0; k < total; ++k) {
        const std::size_t start = k * kWindowHop;
        const double end_time = emg.time_at(start + kWindowLen - 1);
        if (end_time > subject.imu_angle.end_time() + 1e-12) break; // theta unavailable
        wf.end_times.push_back(end_time);
        wf.theta_raw.push_back(sample_at_scalar(subject.imu_angle, end_time));

        if (need_ft) {
            for (int c = 0; c < 9; ++c) {
                const double m = stats.mean[c], inv = 1.0 / stats.std[c];
                for (std::size_t i = 0; i < kWindowLen; ++i)
                    ch[i] = (raw[(start + i) * 9 + c] - m) * inv;
                wf.ft_raw.push_back(mav(ch));
                wf.ft_raw.push_back(double(zero_crossings(ch, ft_params.eps[c])));
                wf.ft_raw.push_back(double(slope_sign_changes(ch, ft_params.eps[c])));
                wf.ft_raw.push_back(waveform_length(ch));
            }
        }
        if (need_extractor) {
            for (std::size_t j = 0; j < kExtractorSteps; ++j) {
                const auto [i0, frac] = resample_tab[j];
                const double* r0 = raw.data() + (start + i0) * 9;
                const double* r1 = raw.data() + (start + i0 + 1) * 9;
                for (int c = 0; c < 9; ++c) {
                    const double v = r0[c] + frac * (r1[c] - r0[c]);
                    wf.ext_inputs.push_back(float((v - stats.mean[c]) / stats.std[c]));
                }
            }
        }
        ++wf.count;
    }
    if (wf.count == 0) throw TooShort("compute_window_features: no windows with IMU coverage");
    return wf;
}

FeatStats compute_feat_stats(const std::vector<const WindowFeatures*>& train) {
    if (train.empty()) throw InvalidInput("compute_feat_stats: no training subjects");
    FeatStats fs;
    std::array<double, kFtBlock + 1> sum{}, sumsq{};
    std::size_t n = 0;
    const bool has_ft = !train.front()->ft_raw.empty();
    for (const auto* wf : train) {
        for (std::size_t k = 0; k < wf->count; ++k) {
            if (has_ft)
                for (std::size_t j = 0; j < kFtBlock; ++j) {
                    const double v = wf->ft_raw[k * kFtBlock + j];
                    sum[j] += v;
                    sumsq[j] += v * v;
                }
            sum[kFtBlock] += wf->theta_raw[k];
            sumsq[kFtBlock] += wf->theta_raw[k] * wf->theta_raw[k];
        }
        n += wf->count;
    }
    for (std::size_t j = 0; j <= kFtBlock; ++j) {
        fs.mean[j] = sum[j] / double(n);
        const double var = sumsq[j] / double(n) - fs.mean[j] * fs.mean[j];
        fs.std[j] = var > 1e-24 ? std::sqrt(var) : 1.0;
    }
    return fs;
}

std::vector<float> build_static_feats(const WindowFeatures& wf, const FeatureLayout& layout,
                                      const FeatStats& stats) {
    std::vector<float> out(wf.count * std::size_t(layout.width), 0.0f);
    for (std::size_t k = 0; k < wf.count; ++k) {
        float* row = out.data() + k * layout.width;
        if (layout.uses_ft()) {
            const double* ft = wf.ft_raw.data() + k * kFtBlock;
            for (std::size_t j = 0; j < kFtBlock; ++j)
                row[layout.ft_offset + j] = float((ft[j] - stats.mean[j]) / stats.std[j]);
        }
        row[layout.theta_offset] =
            float((wf.theta_raw[k] - stats.mean[kFtBlock]) / stats.std[kFtBlock]);
    }
    return out;
}

Labels compute_labels(const WindowFeatures& wf, const TimeSeries& measured,
                      double prediction_time) {
    if (prediction_time < 0.0)
        throw InvalidInput("compute_labels: prediction time must be non-negative");
    Labels labels;
    labels.value.assign(wf.count, 0.0);
    labels.valid.assign(wf.count, 0);
    for (std::size_t k = 0; k < wf.count; ++k) {
        const double target = wf.end_times[k] + prediction_time;
        if (target > measured.end_time() + 1e-12 || target < measured.start_time()) {
            ++labels.dropped;
            continue;
        }
        labels.value[k] = sample_at_scalar(measured, target);
        labels.valid[k] = 1;
    }
    return labels;
}

std::vector<SeqSample<float>> make_sequence_samples(const SubjectTensors& tensors,
                                                    const FeatureLayout& layout,
                                                    const Labels& labels,
                                                    std::size_t stride) {
    if (stride == 0) throw InvalidInput("make_sequence_samples: stride must be positive");
    const WindowFeatures& wf = *tensors.wf;
    std::vector<SeqSample<float>> out;
    const std::size_t wstride_ext = kExtractorSteps * 9;
    for (std::size_t k = kSequenceLen - 1; k < wf.count; k += stride) {
        if (!labels.valid[k]) continue;
        SeqSample<float> s;
        const std::size_t first = k - (kSequenceLen - 1);
        if (layout.uses_extractor()) s.ext = wf.ext_inputs.data() + first * wstride_ext;
        s.feats = tensors.static_feats.data() + first * layout.width;
        s.label = labels.value[k];
        out.push_back(s);
    }
    return out;
}

void label_stats(const std::vector<SeqSample<float>>& samples, double& mean, double& std) {
    if (samples.empty()) throw InvalidInput("label_stats: no samples");
    double s = 0.0, ss = 0.0;
    for (const auto& x : samples) {
        s += x.label;
        ss += x.label * x.label;
    }
    mean = s / double(samples.size());
    const double var = ss / double(samples.size()) - mean * mean;
    std = var > 1e-12 ? std::sqrt(var) : 1.0;
}

std::vector<float> extract_fl_features(const KinPreNet<float>& net,
                                       const WindowFeatures& wf) {
    if (!net.layout.has_extractor())
        throw InvalidInput("extract_fl_features: net has no extractor");
    const int ch = net.layout.channels;
    const int steps = net.layout.ext_steps;
    const std::size_t wstride = std::size_t(steps) * ch;

    std::vector<float> out(wf.count * std::size_t(ch));
    LstmCache<float> cache;
    Mat<float> fl;
    const std::size_t chunk = 128;
    std::vector<Mat<float>> input(steps);
    for (std::size_t base = 0; base < wf.count; base += chunk) {
        const int b = int(std::min(chunk, wf.count - base));
        for (int t = 0; t < steps; ++t) input[t].resize(b, ch);
        for (int w = 0; w < b; ++w) {
            const float* src = wf.ext_inputs.data() + (base + w) * wstride;
            for (int t = 0; t < steps; ++t)
                for (int c = 0; c < ch; ++c) input[t](w, c) = src[t * ch + c];
        }
        const Mat<float>& hf = lstm_forward(net.extractor.layers, input, cache);
        net.extractor.head.forward(hf, fl);
        for (int w = 0; w < b; ++w)
            for (int c = 0; c < ch; ++c) out[(base + w) * ch + c] = fl(w, c);
    }
    return out;
}

std::vector<std::vector<double>> build_svr_vectors(const WindowFeatures& wf,
                                                   const FeatureLayout& layout,
                                                   const FeatStats& stats,
                                                   const std::vector<float>* fl_features) {
    if (layout.uses_extractor() && !fl_features)
        throw InvalidInput("build_svr_vectors: layout needs learned features");
    std::vector<std::vector<double>> out(wf.count);
    for (std::size_t k = 0; k < wf.count; ++k) {
        std::vector<double>& row = out[k];
        row.assign(std::size_t(layout.width), 0.0);
        if (layout.uses_ft()) {
            const double* ft = wf.ft_raw.data() + k * kFtBlock;
            for (std::size_t j = 0; j < kFtBlock; ++j)
                row[layout.ft_offset + j] = (ft[j] - stats.mean[j]) / stats.std[j];
        }
        if (layout.uses_extractor())
            for (int j = 0; j < 9; ++j)
                row[layout.fl_offset + j] = double((*fl_features)[k * 9 + j]);
        // theta scaled like every other dimension; in raw degrees it
        // dominates the kernel distance and the SVR degenerates into an
        // IMU-angle extrapolator.
        row[layout.theta_offset] =
            (wf.theta_raw[k] - stats.mean[kFtBlock]) / stats.std[kFtBlock];
    }
    return out;
}

} // namespace kinpred
