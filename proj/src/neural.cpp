#include "kinpred/neural.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "kinpred/errors.hpp"

namespace kinpred {

template <class T>
double NetRunner<T>::forward(const SeqSample<T>& sample) {
    const NetLayout& lay = net_->layout;
    const int seq = lay.seq_len;
    const int width = lay.feat_width;

    if (lay.has_extractor()) {
        const int ch = lay.channels;
        const int steps = lay.ext_steps;
        ext_in_.resize(steps);
        for (int t = 0; t < steps; ++t) ext_in_[t].resize(seq, ch);
        const std::size_t wstride = std::size_t(steps) * ch;
        for (int b = 0; b < seq; ++b) {
            const T* win = sample.ext + std::size_t(b) * wstride;
            for (int t = 0; t < steps; ++t) {
                T* dst = ext_in_[t].row(b);
                const T* src = win + std::size_t(t) * ch;
                for (int c = 0; c < ch; ++c) dst[c] = src[c];
            }
        }
        const Mat<T>& hf = lstm_forward(net_->extractor.layers, ext_in_, ext_cache_);
        net_->extractor.head.forward(hf, fl_out_);
    }

    pred_in_.resize(seq);
    for (int t = 0; t < seq; ++t) {
        pred_in_[t].resize(1, width);
        const T* src = sample.feats + std::size_t(t) * width;
        T* dst = pred_in_[t].row(0);
        for (int j = 0; j < width; ++j) dst[j] = src[j];
        if (lay.has_extractor()) {
            const T* fl = fl_out_.row(t);
            for (int j = 0; j < lay.channels; ++j) dst[lay.fl_offset + j] = fl[j];
        }
    }

    const Mat<T>& hf = lstm_forward(net_->predictor.layers, pred_in_, pred_cache_);
    net_->predictor.fc1.forward(hf, fc1_out_);
    fc1_act_.resize(1, fc1_out_.cols);
    for (int j = 0; j < fc1_out_.cols; ++j) fc1_act_(0, j) = tanh_approx(fc1_out_(0, j));
    net_->predictor.fc2.forward(fc1_act_, fc2_out_);
    y_norm_ = double(fc2_out_(0, 0));
    return net_->denormalize(y_norm_);
}

template <class T>
void NetRunner<T>::backward(double d_loss, KinPreNetGrads<T>& grads) {
    const NetLayout& lay = net_->layout;
    const int seq = lay.seq_len;

    dfc2_.resize(1, 1);
    dfc2_(0, 0) = T(d_loss);
    affine_backward(net_->predictor.fc2, fc1_act_, dfc2_, grads.fc2, &dfc1_act_);
    for (int j = 0; j < dfc1_act_.cols; ++j) {
        const T a = fc1_act_(0, j);
        dfc1_act_(0, j) *= (T(1) - a * a);
    }
    const Mat<T>& pred_hf = pred_cache_.hidden.back().back();
    affine_backward(net_->predictor.fc1, pred_hf, dfc1_act_, grads.fc1, &dhf_);

    dh_pred_.resize(seq);
    for (int t = 0; t < seq; ++t) {
        dh_pred_[t].resize(1, net_->predictor.layers.back().hid);
        dh_pred_[t].zero();
    }
    dh_pred_[seq - 1] = dhf_;
    lstm_backward(net_->predictor.layers, pred_in_, pred_cache_, dh_pred_,
                  grads.pred_layers, pred_ws_, lay.has_extractor());

    if (!lay.has_extractor()) return;

    // Gradient on the learned-feature slots flows into the extractor; the
    // remaining entries are inputs, not parameters.
    dfl_.resize(seq, lay.channels);
    for (int t = 0; t < seq; ++t) {
        const T* dx = pred_ws_.dx[0][t].row(0);
        T* row = dfl_.row(t);
        for (int j = 0; j < lay.channels; ++j) row[j] = dx[lay.fl_offset + j];
    }
    const Mat<T>& ext_hf = ext_cache_.hidden.back().back();
    affine_backward(net_->extractor.head, ext_hf, dfl_, grads.ext_head, &dhf_);

    const int steps = lay.ext_steps;
    dh_ext_.resize(steps);
    for (int t = 0; t < steps; ++t) {
        dh_ext_[t].resize(seq, net_->extractor.layers.back().hid);
        dh_ext_[t].zero();
    }
    dh_ext_[steps - 1] = dhf_;
    lstm_backward(net_->extractor.layers, ext_in_, ext_cache_, dh_ext_,
                  grads.ext_layers, ext_ws_, false);
}

template class NetRunner<float>;
template class NetRunner<double>;

namespace {

template <class T>
double grad_norm(KinPreNet<T>& net, KinPreNetGrads<T>& grads) {
    double ss = 0.0;
    for (bool group : {true, false}) {
        if (group && !net.layout.has_extractor()) continue;
        for_each_param(net, grads, group, [&](T*, T* g, std::size_t n) {
            for (std::size_t i = 0; i < n; ++i) ss += double(g[i]) * double(g[i]);
        });
    }
    return std::sqrt(ss);
}

template <class T>
void scale_grads(KinPreNet<T>& net, KinPreNetGrads<T>& grads, double s) {
    for (bool group : {true, false}) {
        if (group && !net.layout.has_extractor()) continue;
        for_each_param(net, grads, group, [&](T*, T* g, std::size_t n) {
            for (std::size_t i = 0; i < n; ++i) g[i] = T(double(g[i]) * s);
        });
    }
}

} // namespace

TrainLog train_net(KinPreNet<float>& net, const std::vector<SeqSample<float>>& samples,
                   const TrainConfig& config) {
    if (samples.empty()) throw InvalidInput("train_net: empty dataset");

    NetRunner<float> runner(&net);
    KinPreNetGrads<float> grads;
    grads.match(net);

    Adam<float> opt_ext(net.layout.has_extractor() ? param_count(net, true) : 0,
                        config.extractor_opt);
    Adam<float> opt_pred(param_count(net, false), config.predictor_opt);

    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);

    TrainLog log;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(config.seed, 0x5eed0000 + std::uint64_t(epoch)));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.below(i)]);

        double se_sum = 0.0;
        for (std::size_t idx : order) {
            const SeqSample<float>& s = samples[idx];
            const double y_hat = runner.forward(s);
            if (!std::isfinite(y_hat))
                throw Divergence("train_net: non-finite output at epoch " +
                                 std::to_string(epoch) + ", sample " + std::to_string(idx));
            const double err_deg = y_hat - s.label;
            se_sum += err_deg * err_deg;

            const double y_norm = runner.last_norm_output();
            const double d_loss = 2.0 * (y_norm - net.normalize_label(s.label));
            grads.zero();
            runner.backward(d_loss, grads);
            if (config.grad_clip > 0.0) {
                const double gn = grad_norm(net, grads);
                if (gn > config.grad_clip) scale_grads(net, grads, config.grad_clip / gn);
            }
            if (net.layout.has_extractor()) opt_ext.step(net, grads, true);
            opt_pred.step(net, grads, false);
            net.refresh_transposes();
            ++log.updates;
        }
        log.epoch_rmse.push_back(std::sqrt(se_sum / double(samples.size())));
    }
    return log;
}

GradCheckReport grad_check(std::uint64_t seed, double fd_step, const GradCheckSpec& spec) {
    const auto t0 = std::chrono::steady_clock::now();

    NetLayout lay;
    lay.channels = spec.channels;
    lay.ext_steps = spec.steps;
    lay.seq_len = spec.steps;
    lay.fl_offset = 0;
    lay.feat_width = spec.channels + 1; // learned block plus theta

    KinPreNet<double> net =
        KinPreNet<double>::init(lay, seed, spec.hidden, 3, spec.fc_width);

    Rng rng(derive_seed(seed, 0xfd));
    const int n_ext = lay.seq_len * lay.ext_steps * lay.channels;
    std::vector<double> ext(n_ext);
    for (auto& v : ext) v = rng.normal();
    std::vector<double> feats(std::size_t(lay.seq_len) * lay.feat_width);
    for (auto& v : feats) v = rng.normal();

    SeqSample<double> sample;
    sample.ext = ext.data();
    sample.feats = feats.data();
    sample.label = 10.0 * rng.normal();

    NetRunner<double> runner(&net);
    const double y_target = net.normalize_label(sample.label);
    auto loss = [&] {
        runner.forward(sample);
        const double d = runner.last_norm_output() - y_target;
        return d * d;
    };

    KinPreNetGrads<double> grads;
    grads.match(net);
    grads.zero();
    loss();
    runner.backward(2.0 * (runner.last_norm_output() - y_target), grads);

    // Central differences cannot resolve entries far below the gradient
    // scale: truncation is ~h^2 f'''/6 and roundoff ~eps/h in absolute
    // terms, so the comparison floors the denominator at a small fraction
    // of the largest gradient.
    double g_scale = 0.0;
    for (bool group : {true, false})
        for_each_param(net, grads, group, [&](double*, double* g, std::size_t n) {
            for (std::size_t i = 0; i < n; ++i) g_scale = std::max(g_scale, std::abs(g[i]));
        });
    const double floor = std::max(1e-8, 1e-4 * g_scale);

    GradCheckReport rep;
    for (bool group : {true, false}) {
        for_each_param(net, grads, group, [&](double* p, double* g, std::size_t n) {
            for (std::size_t i = 0; i < n; ++i) {
                const double keep = p[i];
                p[i] = keep + fd_step;
                const double lp = loss();
                p[i] = keep - fd_step;
                const double lm = loss();
                p[i] = keep;
                const double fd = (lp - lm) / (2.0 * fd_step);
                const double denom = std::max({std::abs(fd), std::abs(g[i]), floor});
                rep.max_rel_err = std::max(rep.max_rel_err, std::abs(fd - g[i]) / denom);
                ++rep.params_checked;
            }
        });
    }
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

} // namespace kinpred
