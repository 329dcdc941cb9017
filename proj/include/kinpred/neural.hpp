#ifndef KINPRED_NEURAL_HPP
#define KINPRED_NEURAL_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "kinpred/nets.hpp"

namespace kinpred {

/// One training/evaluation sequence: pointers into per-subject window
/// storage, starting at the first window of the sequence. ext may be null
/// when the layout has no extractor.
template <class T>
struct SeqSample {
    const T* ext = nullptr;  // seq_len windows x (ext_steps * channels)
    const T* feats = nullptr; // seq_len windows x feat_width
    double label = 0.0;       // deg
};

/// Per-thread scratch for running one network. The net stays const; all
/// mutable state lives here, so concurrent evaluation is one runner per
/// thread.
template <class T>
class NetRunner {
public:
    explicit NetRunner(const KinPreNet<T>* net) : net_(net) {}

    /// Full forward pass; returns the prediction in degrees.
    double forward(const SeqSample<T>& sample);

    /// Backward for the most recent forward; d_loss is dL/d(y_norm).
    void backward(double d_loss, KinPreNetGrads<T>& grads);

    double last_norm_output() const { return y_norm_; }

private:
    const KinPreNet<T>* net_;
    // forward state
    std::vector<Mat<T>> ext_in_, pred_in_;
    LstmCache<T> ext_cache_, pred_cache_;
    Mat<T> fl_out_, fc1_out_, fc1_act_, fc2_out_;
    double y_norm_ = 0.0;
    // backward scratch
    std::vector<Mat<T>> dh_ext_, dh_pred_;
    LstmWorkspace<T> ext_ws_, pred_ws_;
    Mat<T> dfc2_, dfc1_act_, dfc1_in_, dhf_, dfl_;
};

struct TrainConfig {
    int epochs = 30;
    std::uint64_t seed = 0;
    Adam<float>::Config extractor_opt{1e-3, 0.9, 0.999, 1e-8, 0.8, 20000};
    Adam<float>::Config predictor_opt{1e-4, 0.9, 0.999, 1e-8, 0.8, 20000};
    double grad_clip = 0.0; // 0 disables clipping
};

struct TrainLog {
    std::vector<double> epoch_rmse; // deg, training error per epoch
    long updates = 0;
};

/// Sample-by-sample (batch 1) end-to-end training. Deterministic for a
/// fixed seed: the per-epoch shuffle is derived from (seed, epoch).
/// Throws Divergence naming the epoch/sample if the loss goes non-finite.
TrainLog train_net(KinPreNet<float>& net, const std::vector<SeqSample<float>>& samples,
                   const TrainConfig& config);

struct GradCheckSpec {
    int hidden = 8;
    int channels = 3;
    int steps = 5; // extractor steps, predictor sequence length
    int fc_width = 16;
};

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::size_t params_checked = 0;
    double seconds = 0.0;
};

/// Analytic BPTT vs central finite differences on a shrunken end-to-end
/// net, all in double.
GradCheckReport grad_check(std::uint64_t seed, double fd_step = 1e-5,
                           const GradCheckSpec& spec = {});

} // namespace kinpred

#endif
