#ifndef KINPRED_SVR_HPP
#define KINPRED_SVR_HPP

#include <span>
#include <string>
#include <vector>

#include "kinpred/errors.hpp"

namespace kinpred {

double rbf_kernel(std::span<const double> x, std::span<const double> y, double gamma);

struct SvrModel {
    std::vector<std::vector<double>> support_vectors;
    std::vector<double> dual_coefs; // alpha_i - alpha_i^*
    double bias = 0.0;
    double gamma = 1.0;
    double c = 10.0;
    double epsilon = 0.5;
    double kkt_residual = 0.0; // of the stored solution

    std::size_t width() const {
        return support_vectors.empty() ? 0 : support_vectors.front().size();
    }
};

struct SvrFitOptions {
    double c = 10.0;
    double epsilon = 0.5;  // deg
    double gamma = 0.0;    // <= 0 selects 1 / (d * mean feature variance)
    double tol = 1e-3;
    long max_iter = 200000;
    std::vector<double>* objective_log = nullptr; // dual objective per outer iteration
};

/// Epsilon-insensitive SVR with RBF kernel, solved in the beta
/// (alpha - alpha*) form by pairwise coordinate ascent on the maximal
/// KKT-violating pair. Throws ConvergenceFailure carrying the residual
/// if max_iter is exhausted.
SvrModel svr_fit(const std::vector<std::vector<double>>& x, std::span<const double> y,
                 const SvrFitOptions& options = {});

double svr_predict(const SvrModel& model, std::span<const double> x);

/// Coarse log-grid search on a deterministic validation split; returns
/// the options minimizing validation RMSE.
SvrFitOptions svr_grid_search(const std::vector<std::vector<double>>& x,
                              std::span<const double> y, const SvrFitOptions& base,
                              std::uint64_t seed);

void save_svr_json(const SvrModel& model, const std::string& path);
SvrModel load_svr_json(const std::string& path);

} // namespace kinpred

#endif
