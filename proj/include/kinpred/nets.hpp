#ifndef KINPRED_NETS_HPP
#define KINPRED_NETS_HPP

#include <optional>
#include <string>
#include <vector>

#include "kinpred/errors.hpp"
#include "kinpred/lstm.hpp"

namespace kinpred {

template <class T>
struct Affine {
    int in = 0, out = 0;
    Mat<T> wt;           // canonical: in x out
    std::vector<T> bias; // out
    Mat<T> w;            // derived: out x in

    void init(int input, int output, Rng& rng) {
        in = input;
        out = output;
        wt.resize(in, out);
        bias.assign(out, T(0));
        const double bound = 1.0 / std::sqrt(double(in));
        for (auto& x : wt.v) x = T(rng.uniform(-bound, bound));
        refresh_transposes();
    }

    void refresh_transposes() {
        w.resize(out, in);
        for (int i = 0; i < in; ++i)
            for (int j = 0; j < out; ++j) w(j, i) = wt(i, j);
    }

    // y (B x out) = x (B x in) * wt + bias
    void forward(const Mat<T>& x, Mat<T>& y) const {
        y.resize(x.rows, out);
        broadcast_rows(y, bias);
        matmul_nn_acc(y, x, wt);
    }

    std::size_t param_count() const { return wt.size() + bias.size(); }
};

template <class T>
struct AffineGrad {
    Mat<T> wt;
    std::vector<T> bias;

    void match(const Affine<T>& a) {
        wt.resize(a.in, a.out);
        bias.assign(std::size_t(a.out), T(0));
    }
    void zero() {
        wt.zero();
        std::fill(bias.begin(), bias.end(), T(0));
    }
};

// dx (B x in) += dy * w; parameter grads accumulate.
template <class T>
void affine_backward(const Affine<T>& a, const Mat<T>& x, const Mat<T>& dy,
                     AffineGrad<T>& g, Mat<T>* dx) {
    matmul_tn_acc(g.wt, x, dy);
    colsum_acc(g.bias, dy);
    if (dx) {
        dx->resize(dy.rows, a.in);
        dx->zero();
        matmul_nn_acc(*dx, dy, a.w);
    }
}

/// EMG feature extractor: stacked LSTM over the resampled window followed
/// by an affine head whose output width equals the channel count.
template <class T>
struct ExtractorNet {
    std::vector<LstmLayer<T>> layers;
    Affine<T> head;

    static ExtractorNet init(int channels, int hidden, int n_layers, Rng& rng) {
        ExtractorNet net;
        net.layers.resize(n_layers);
        for (int l = 0; l < n_layers; ++l)
            net.layers[l].init(l == 0 ? channels : hidden, hidden, rng);
        net.head.init(hidden, channels, rng);
        return net;
    }
};

/// Angle predictor: stacked LSTM over the feature-vector sequence, then
/// affine -> tanh -> affine down to a scalar.
template <class T>
struct PredictorNet {
    std::vector<LstmLayer<T>> layers;
    Affine<T> fc1;
    Affine<T> fc2;

    static PredictorNet init(int width, int hidden, int n_layers, int fc_width, Rng& rng) {
        PredictorNet net;
        net.layers.resize(n_layers);
        for (int l = 0; l < n_layers; ++l)
            net.layers[l].init(l == 0 ? width : hidden, hidden, rng);
        net.fc1.init(hidden, fc_width, rng);
        net.fc2.init(fc_width, 1, rng);
        return net;
    }
};

/// Where the learned features sit inside the predictor input vector.
struct NetLayout {
    int feat_width = 0; // predictor input width, theta last
    int fl_offset = -1; // start of the 9 extractor outputs; -1 = no extractor
    int channels = 9;   // EMG channels seen by the extractor
    int ext_steps = 60; // extractor time steps per window
    int seq_len = 60;   // predictor time steps

    bool has_extractor() const { return fl_offset >= 0; }
};

/// The end-to-end network plus the label normalization it was trained
/// with. Immutable after training; safe to share across threads, with
/// each thread running its own NetRunner.
template <class T>
struct KinPreNet {
    NetLayout layout;
    ExtractorNet<T> extractor; // unused when layout.fl_offset < 0
    PredictorNet<T> predictor;
    double label_mean = 0.0;
    double label_std = 1.0;

    static KinPreNet init(const NetLayout& layout, std::uint64_t seed, int hidden = 40,
                          int n_layers = 3, int fc_width = 80) {
        Rng rng(derive_seed(seed, 0xbeef));
        KinPreNet net;
        net.layout = layout;
        if (layout.has_extractor())
            net.extractor = ExtractorNet<T>::init(layout.channels, hidden, n_layers, rng);
        net.predictor = PredictorNet<T>::init(layout.feat_width, hidden, n_layers, fc_width, rng);
        return net;
    }

    void refresh_transposes() {
        for (auto& l : extractor.layers) l.refresh_transposes();
        extractor.head.refresh_transposes();
        for (auto& l : predictor.layers) l.refresh_transposes();
        predictor.fc1.refresh_transposes();
        predictor.fc2.refresh_transposes();
    }

    double denormalize(double y_norm) const { return label_mean + label_std * y_norm; }
    double normalize_label(double y) const { return (y - label_mean) / label_std; }
};

template <class T>
struct KinPreNetGrads {
    std::vector<LstmLayerGrad<T>> ext_layers;
    AffineGrad<T> ext_head;
    std::vector<LstmLayerGrad<T>> pred_layers;
    AffineGrad<T> fc1, fc2;

    void match(const KinPreNet<T>& net) {
        ext_layers.resize(net.extractor.layers.size());
        for (std::size_t i = 0; i < ext_layers.size(); ++i)
            ext_layers[i].match(net.extractor.layers[i]);
        if (net.layout.has_extractor()) ext_head.match(net.extractor.head);
        pred_layers.resize(net.predictor.layers.size());
        for (std::size_t i = 0; i < pred_layers.size(); ++i)
            pred_layers[i].match(net.predictor.layers[i]);
        fc1.match(net.predictor.fc1);
        fc2.match(net.predictor.fc2);
    }

    void zero() {
        for (auto& g : ext_layers) g.zero();
        ext_head.zero();
        for (auto& g : pred_layers) g.zero();
        fc1.zero();
        fc2.zero();
    }
};

/// Visit every (param, grad) tensor pair in a fixed order. The optimizer
/// walks this the same way every step, so moment buffers line up.
template <class T, class Fn>
void for_each_param(KinPreNet<T>& net, KinPreNetGrads<T>& grads, bool extractor_group, Fn fn) {
    if (extractor_group) {
        for (std::size_t i = 0; i < net.extractor.layers.size(); ++i) {
            auto& l = net.extractor.layers[i];
            auto& g = grads.ext_layers[i];
            fn(l.wxt.v.data(), g.wxt.v.data(), l.wxt.size());
            fn(l.wht.v.data(), g.wht.v.data(), l.wht.size());
            fn(l.bias.data(), g.bias.data(), l.bias.size());
        }
        if (net.layout.has_extractor()) {
            fn(net.extractor.head.wt.v.data(), grads.ext_head.wt.v.data(),
               net.extractor.head.wt.size());
            fn(net.extractor.head.bias.data(), grads.ext_head.bias.data(),
               net.extractor.head.bias.size());
        }
    } else {
        for (std::size_t i = 0; i < net.predictor.layers.size(); ++i) {
            auto& l = net.predictor.layers[i];
            auto& g = grads.pred_layers[i];
            fn(l.wxt.v.data(), g.wxt.v.data(), l.wxt.size());
            fn(l.wht.v.data(), g.wht.v.data(), l.wht.size());
            fn(l.bias.data(), g.bias.data(), l.bias.size());
        }
        fn(net.predictor.fc1.wt.v.data(), grads.fc1.wt.v.data(), net.predictor.fc1.wt.size());
        fn(net.predictor.fc1.bias.data(), grads.fc1.bias.data(), net.predictor.fc1.bias.size());
        fn(net.predictor.fc2.wt.v.data(), grads.fc2.wt.v.data(), net.predictor.fc2.wt.size());
        fn(net.predictor.fc2.bias.data(), grads.fc2.bias.data(), net.predictor.fc2.bias.size());
    }
}

/// Bias-corrected Adam with stepwise exponential learning-rate decay
/// (lr multiplied by decay_factor every decay_interval updates).
template <class T>
class Adam {
public:
    struct Config {
        double lr = 1e-3;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
        double decay_factor = 0.8;
        long decay_interval = 20000;
    };

    Adam(std::size_t n_params, const Config& cfg) : cfg_(cfg), m_(n_params, 0), v_(n_params, 0) {}

    double current_lr() const {
        const long k = cfg_.decay_interval > 0 ? step_ / cfg_.decay_interval : 0;
        return cfg_.lr * std::pow(cfg_.decay_factor, double(k));
    }

    long steps_taken() const { return step_; }

    /// One update over a parameter group; call via for_each_param so the
    /// tensor order matches the moment layout.
    template <class Net>
    void step(Net& net, KinPreNetGrads<T>& grads, bool extractor_group) {
        const double lr = current_lr();
        ++step_;
        const double b1t = 1.0 - std::pow(cfg_.beta1, double(step_));
        const double b2t = 1.0 - std::pow(cfg_.beta2, double(step_));
        std::size_t off = 0;
        for_each_param(net, grads, extractor_group,
                       [&](T* p, T* g, std::size_t n) {
                           for (std::size_t i = 0; i < n; ++i) {
                               const double gi = double(g[i]);
                               double& m = m_[off + i];
                               double& v = v_[off + i];
                               m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * gi;
                               v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * gi * gi;
                               const double mhat = m / b1t;
                               const double vhat = v / b2t;
                               p[i] -= T(lr * mhat / (std::sqrt(vhat) + cfg_.eps));
                           }
                           off += n;
                       });
        if (off != m_.size()) throw InvalidInput("Adam: parameter layout changed");
    }

private:
    Config cfg_;
    long step_ = 0;
    std::vector<double> m_, v_;
};

template <class T>
std::size_t param_count(const KinPreNet<T>& net, bool extractor_group) {
    std::size_t n = 0;
    if (extractor_group) {
        for (const auto& l : net.extractor.layers) n += l.param_count();
        if (net.layout.has_extractor()) n += net.extractor.head.param_count();
    } else {
        for (const auto& l : net.predictor.layers) n += l.param_count();
        n += net.predictor.fc1.param_count() + net.predictor.fc2.param_count();
    }
    return n;
}

} // namespace kinpred

#endif
