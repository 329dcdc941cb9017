#include "kinpred/config.hpp"

#include <fstream>
#include <sstream>

namespace kinpred {

CrossvalConfig to_crossval_config(const RunConfig& cfg) {
    CrossvalConfig cc;
    if (cfg.predictors.empty() || cfg.features.empty() || cfg.times_ms.empty())
        throw InvalidInput("config: predictor/feature/time sets must be non-empty");
    for (const auto& p : cfg.predictors)
        for (const auto& f : cfg.features)
            for (int t : cfg.times_ms) {
                if (t < 0) throw InvalidInput("config: prediction times must be >= 0");
                cc.cells.push_back(
                    {predictor_from_name(p), feature_mode_from_name(f), t});
            }
    if (cfg.ablation == "kinematics_only")
        cc.kinematics_only = true;
    else if (cfg.ablation != "emg_plus_kinematics")
        throw InvalidInput("config: unknown ablation '" + cfg.ablation + "'");

    cc.seed = cfg.seed;
    cc.train.epochs = cfg.epochs;
    cc.train.seed = cfg.seed;
    cc.train.extractor_opt.lr = cfg.lr_extractor;
    cc.train.predictor_opt.lr = cfg.lr_predictor;
    cc.train.extractor_opt.decay_factor = cfg.lr_decay;
    cc.train.predictor_opt.decay_factor = cfg.lr_decay;
    cc.train.extractor_opt.decay_interval = cfg.decay_interval;
    cc.train.predictor_opt.decay_interval = cfg.decay_interval;
    cc.train.grad_clip = cfg.grad_clip;
    cc.svr.c = cfg.svr_c;
    cc.svr.epsilon = cfg.svr_epsilon;
    cc.svr.gamma = cfg.svr_gamma;
    cc.svr_search = cfg.svr_search;
    cc.train_stride = cfg.train_stride;
    cc.eval_stride = cfg.eval_stride;
    cc.svr_stride = cfg.svr_stride;
    cc.jobs = cfg.jobs;
    return cc;
}

namespace {
template <class T>
std::string join(const std::vector<T>& xs) {
    std::ostringstream os;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) os << ",";
        os << xs[i];
    }
    return os.str();
}
} // namespace

void write_config_echo(const RunConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "seed=" << cfg.seed << "\n"
        << "subjects=" << cfg.subjects << "\n"
        << "duration=" << cfg.duration << "\n"
        << "emd-lead=" << cfg.emd_lead_ms << "\n"
        << "predictors=" << join(cfg.predictors) << "\n"
        << "features=" << join(cfg.features) << "\n"
        << "times=" << join(cfg.times_ms) << "\n"
        << "epochs=" << cfg.epochs << "\n"
        << "lr-extractor=" << cfg.lr_extractor << "\n"
        << "lr-predictor=" << cfg.lr_predictor << "\n"
        << "lr-decay=" << cfg.lr_decay << "\n"
        << "decay-interval=" << cfg.decay_interval << "\n"
        << "grad-clip=" << cfg.grad_clip << "\n"
        << "svr-c=" << cfg.svr_c << "\n"
        << "svr-epsilon=" << cfg.svr_epsilon << "\n"
        << "svr-gamma=" << cfg.svr_gamma << "\n"
        << "svr-search=" << (cfg.svr_search ? 1 : 0) << "\n"
        << "ablation=" << cfg.ablation << "\n"
        << "train-stride=" << cfg.train_stride << "\n"
        << "eval-stride=" << cfg.eval_stride << "\n"
        << "svr-stride=" << cfg.svr_stride << "\n"
        << "jobs=" << cfg.jobs << "\n";
}

} // namespace kinpred
