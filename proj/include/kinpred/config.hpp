#ifndef KINPRED_CONFIG_HPP
#define KINPRED_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "kinpred/crossval.hpp"

namespace kinpred {

/// Everything a pipeline run needs; populated by the CLI (flags > config
/// file > defaults) and echoed into the output directory.
struct RunConfig {
    std::uint64_t seed = 0;
    int subjects = 10;
    double duration = 180.0;   // s per subject
    double emd_lead_ms = 60.0;
    std::vector<std::string> predictors = {"lstm", "svr"};
    std::vector<std::string> features = {"ft", "fl", "ftl"};
    std::vector<int> times_ms = {27, 54, 81, 108, 135, 162};
    int epochs = 30;
    double lr_extractor = 1e-3;
    double lr_predictor = 1e-4;
    double lr_decay = 0.8;
    long decay_interval = 20000; // sample updates between decays
    double grad_clip = 0.0;
    double svr_c = 10.0;
    double svr_epsilon = 0.5;
    double svr_gamma = 0.0; // auto
    bool svr_search = false;
    std::string ablation = "emg_plus_kinematics"; // or kinematics_only
    std::size_t train_stride = 1;
    std::size_t eval_stride = 1;
    std::size_t svr_stride = 8;
    int jobs = 1;
};

/// Expand the predictor/feature/time sets into grid cells and carry the
/// training knobs across.
CrossvalConfig to_crossval_config(const RunConfig& cfg);

/// Flat key=value echo of the effective configuration.
void write_config_echo(const RunConfig& cfg, const std::string& path);

} // namespace kinpred

#endif
