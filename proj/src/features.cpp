#include "kinpred/features.hpp"

#include <cmath>

namespace kinpred {

std::size_t feature_width(FeatureMode mode) {
    switch (mode) {
        case FeatureMode::FT: return kFtBlock + 1;
        case FeatureMode::FL: return 9 + 1;
        case FeatureMode::FTL: return kFtBlock + 9 + 1;
    }
    throw InvalidInput("feature_width: bad mode");
}

const char* feature_mode_name(FeatureMode mode) {
    switch (mode) {
        case FeatureMode::FT: return "ft";
        case FeatureMode::FL: return "fl";
        case FeatureMode::FTL: return "ftl";
    }
    return "?";
}

FeatureMode feature_mode_from_name(const std::string& name) {
    if (name == "ft") return FeatureMode::FT;
    if (name == "fl") return FeatureMode::FL;
    if (name == "ftl") return FeatureMode::FTL;
    throw InvalidInput("unknown feature mode '" + name + "'");
}

std::vector<Window> segment_windows(const TimeSeries& emg) {
    if (emg.channels() != 9) throw InvalidInput("segment_windows: emg must have 9 channels");
    if (emg.length() < kWindowLen)
        throw TooShort("segment_windows: stream shorter than one window");
    const std::size_t count = window_count(emg.length());
    std::vector<Window> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t start = k * kWindowHop;
        Window w;
        w.samples.assign(emg.data().begin() + start * 9,
                         emg.data().begin() + (start + kWindowLen) * 9);
        w.end_time = emg.time_at(start + kWindowLen - 1);
        out.push_back(std::move(w));
    }
    return out;
}

double mav(std::span<const double> channel) {
    if (channel.empty()) throw InvalidInput("mav: empty channel");
    double s = 0.0;
    for (double v : channel) s += std::abs(v);
    return s / double(channel.size());
}

namespace {
int sign_of(double v) { return (v > 0.0) - (v < 0.0); }
} // namespace

std::size_t zero_crossings(std::span<const double> channel, double eps) {
    if (eps < 0.0) throw InvalidInput("zero_crossings: eps must be non-negative");
    std::size_t count = 0;
    for (std::size_t i = 0; i + 1 < channel.size(); ++i)
        if (sign_of(channel[i]) != sign_of(channel[i + 1]) &&
            std::abs(channel[i] - channel[i + 1]) >= eps)
            ++count;
    return count;
}

std::size_t slope_sign_changes(std::span<const double> channel, double eps) {
    if (channel.size() < 3) throw InvalidInput("slope_sign_changes: need at least 3 samples");
    std::size_t count = 0;
    for (std::size_t i = 1; i + 1 < channel.size(); ++i) {
        const double dl = channel[i] - channel[i - 1];
        const double dr = channel[i] - channel[i + 1];
        if (dl * dr > 0.0 && std::max(std::abs(dl), std::abs(dr)) >= eps) ++count;
    }
    return count;
}

double waveform_length(std::span<const double> channel) {
    if (channel.size() < 2) throw InvalidInput("waveform_length: need at least 2 samples");
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < channel.size(); ++i)
        s += std::abs(channel[i + 1] - channel[i]);
    return s;
}

std::array<double, kFtBlock> ft_features(const Window& window, const FtParams& params) {
    if (window.samples.size() != kWindowLen * 9)
        throw InvalidInput("ft_features: window must be 165x9");
    std::array<double, kFtBlock> out{};
    std::array<double, kWindowLen> ch{};
    for (std::size_t c = 0; c < 9; ++c) {
        for (std::size_t i = 0; i < kWindowLen; ++i) ch[i] = window.samples[i * 9 + c];
        out[c * 4 + 0] = mav(ch);
        out[c * 4 + 1] = double(zero_crossings(ch, params.eps[c]));
        out[c * 4 + 2] = double(slope_sign_changes(ch, params.eps[c]));
        out[c * 4 + 3] = waveform_length(ch);
    }
    return out;
}

FeatureVector assemble_vector(const Window& window,
                              const std::optional<std::array<double, 9>>& fl_features,
                              const TimeSeries& imu_angle, FeatureMode mode,
                              const FtParams& params) {
    if ((mode == FeatureMode::FL || mode == FeatureMode::FTL) && !fl_features)
        throw InvalidInput("assemble_vector: mode requires extractor features");
    FeatureVector fv;
    fv.mode = mode;
    fv.end_time = window.end_time;
    fv.values.reserve(feature_width(mode));
    if (mode == FeatureMode::FT || mode == FeatureMode::FTL) {
        const auto ft = ft_features(window, params);
        fv.values.insert(fv.values.end(), ft.begin(), ft.end());
    }
    if (mode == FeatureMode::FL || mode == FeatureMode::FTL)
        fv.values.insert(fv.values.end(), fl_features->begin(), fl_features->end());
    fv.values.push_back(sample_at_scalar(imu_angle, window.end_time));
    return fv;
}

LabelResult label_samples(const std::vector<FeatureVector>& vectors,
                          const TimeSeries& measured, double prediction_time) {
    if (prediction_time < 0.0)
        throw InvalidInput("label_samples: prediction time must be non-negative");
    LabelResult result;
    result.samples.reserve(vectors.size());
    for (const auto& fv : vectors) {
        const double target = fv.end_time + prediction_time;
        if (target > measured.end_time() + 1e-12) {
            ++result.dropped;
            continue;
        }
        LabeledSample s;
        s.features = fv;
        s.label = sample_at_scalar(measured, target);
        s.prediction_time = prediction_time;
        result.samples.push_back(std::move(s));
    }
    return result;
}

} // namespace kinpred
