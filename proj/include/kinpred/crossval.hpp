#ifndef KINPRED_CROSSVAL_HPP
#define KINPRED_CROSSVAL_HPP

#include <functional>
#include <string>
#include <vector>

#include "kinpred/dataset.hpp"
#include "kinpred/eval.hpp"
#include "kinpred/svr.hpp"

namespace kinpred {

struct CrossvalCell {
    Predictor predictor = Predictor::LSTM;
    FeatureMode feature = FeatureMode::FL;
    int t_ms = 54;
};

struct CrossvalConfig {
    std::vector<CrossvalCell> cells;
    bool kinematics_only = false; // strip EMG-derived entries from the inputs
    std::uint64_t seed = 0;
    TrainConfig train;
    SvrFitOptions svr;
    bool svr_search = false;
    std::size_t train_stride = 1; // sequence subsampling for neural training
    std::size_t eval_stride = 1;
    std::size_t svr_stride = 8;   // window subsampling for SVR fitting
    int jobs = 1;
    std::function<void(const std::string&)> progress; // optional
};

struct FoldFailure {
    std::string subject;
    CrossvalCell cell;
    std::string message;
};

struct CellLog {
    CrossvalCell cell;
    std::string subject; // held-out
    TrainLog train;
};

struct CrossvalResult {
    ResultsGrid grid;
    std::vector<FoldFailure> failures;
    std::vector<CellLog> logs;
};

/// Leave-one-subject-out over the configured cells. Each (cell, fold) is
/// trained with normalization statistics from the remaining subjects and
/// scored on the held-out one. Deterministic for a fixed seed and subject
/// set regardless of input order or job count. Individual failures are
/// recorded and the run continues.
CrossvalResult loso_crossval(const std::vector<SubjectData>& subjects,
                             const CrossvalConfig& config);

} // namespace kinpred

#endif
