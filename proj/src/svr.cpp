#include "kinpred/svr.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "kinpred/rng.hpp"

namespace kinpred {

double rbf_kernel(std::span<const double> x, std::span<const double> y, double gamma) {
    if (x.size() != y.size()) throw InvalidInput("rbf_kernel: width mismatch");
    if (gamma <= 0.0) throw InvalidInput("rbf_kernel: gamma must be positive");
    double d2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        d2 += d * d;
    }
    return std::exp(-gamma * d2);
}

namespace {

double default_gamma(const std::vector<std::vector<double>>& x) {
    const std::size_t n = x.size(), d = x.front().size();
    double total_var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        double s = 0.0, ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            s += x[i][j];
            ss += x[i][j] * x[i][j];
        }
        const double m = s / double(n);
        total_var += ss / double(n) - m * m;
    }
    const double mean_var = total_var / double(d);
    return mean_var > 0.0 ? 1.0 / (double(d) * mean_var) : 1.0 / double(d);
}

double dual_objective(const std::vector<double>& beta, const std::vector<double>& u,
                      std::span<const double> y, double epsilon) {
    // W = y'beta - 1/2 beta'K beta - eps * |beta|_1, with u = K beta.
    double w = 0.0;
    for (std::size_t i = 0; i < beta.size(); ++i)
        w += y[i] * beta[i] - 0.5 * beta[i] * u[i] - epsilon * std::abs(beta[i]);
    return w;
}

} // namespace

SvrModel svr_fit(const std::vector<std::vector<double>>& x, std::span<const double> y,
                 const SvrFitOptions& options) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) throw InvalidInput("svr_fit: need >= 2 samples with labels");
    const std::size_t d = x.front().size();
    for (const auto& row : x)
        if (row.size() != d) throw InvalidInput("svr_fit: inconsistent feature widths");
    if (options.c <= 0.0 || options.epsilon <= 0.0)
        throw InvalidInput("svr_fit: C and epsilon must be positive");

    const double c = options.c;
    const double eps = options.epsilon;
    const double gamma = options.gamma > 0.0 ? options.gamma : default_gamma(x);

    // Dense kernel matrix; at this project's scale (a few thousand
    // samples) this is the fastest simple option.
    std::vector<double> kmat(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        kmat[i * n + i] = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double k = rbf_kernel(x[i], x[j], gamma);
            kmat[i * n + j] = k;
            kmat[j * n + i] = k;
        }
    }

    std::vector<double> beta(n, 0.0), u(n, 0.0);
    const double bound_slack = 1e-12 * c;

    double violation = 0.0;
    double b_lo = 0.0, b_hi = 0.0;
    long iter = 0;
    for (;; ++iter) {
        // Admissible bias interval per sample; optimality means the
        // intervals intersect.
        double max_lo = -std::numeric_limits<double>::infinity();
        double min_hi = std::numeric_limits<double>::infinity();
        std::size_t arg_lo = 0, arg_hi = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = y[i] - u[i];
            if (beta[i] < c - bound_slack) { // can increase
                const double lo = r - eps * (beta[i] >= 0.0 ? 1.0 : -1.0);
                if (lo > max_lo) {
                    max_lo = lo;
                    arg_lo = i;
                }
            }
            if (beta[i] > -c + bound_slack) { // can decrease
                const double hi = r - eps * (beta[i] > 0.0 ? 1.0 : -1.0);
                if (hi < min_hi) {
                    min_hi = hi;
                    arg_hi = i;
                }
            }
        }
        violation = max_lo - min_hi;
        b_lo = max_lo;
        b_hi = min_hi;
        if (violation <= options.tol) break;
        if (iter >= options.max_iter)
            throw ConvergenceFailure("svr_fit: no convergence after " +
                                         std::to_string(iter) + " iterations",
                                     violation);

        const std::size_t i = arg_lo, j = arg_hi;
        double eta = kmat[i * n + i] + kmat[j * n + j] - 2.0 * kmat[i * n + j];
        eta = std::max(eta, 1e-12);
        double delta = violation / eta;
        // Stay inside the box and stop at sign kinks, where the epsilon
        // term changes slope.
        delta = std::min(delta, c - beta[i]);
        delta = std::min(delta, beta[j] + c);
        if (beta[i] < 0.0) delta = std::min(delta, -beta[i]);
        if (beta[j] > 0.0) delta = std::min(delta, beta[j]);

        beta[i] += delta;
        beta[j] -= delta;
        const double* ki = &kmat[i * n];
        const double* kj = &kmat[j * n];
        for (std::size_t k = 0; k < n; ++k) u[k] += delta * (ki[k] - kj[k]);

        if (options.objective_log)
            options.objective_log->push_back(dual_objective(beta, u, y, eps));
    }

    SvrModel model;
    model.c = c;
    model.epsilon = eps;
    model.gamma = gamma;
    model.bias = 0.5 * (b_lo + b_hi);
    model.kkt_residual = std::max(violation, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(beta[i]) > 1e-12) {
            model.support_vectors.push_back(x[i]);
            model.dual_coefs.push_back(beta[i]);
        }
    }
    return model;
}

double svr_predict(const SvrModel& model, std::span<const double> x) {
    for (const auto& sv : model.support_vectors)
        if (sv.size() != x.size()) throw InvalidInput("svr_predict: width mismatch");
    double f = model.bias;
    for (std::size_t i = 0; i < model.support_vectors.size(); ++i)
        f += model.dual_coefs[i] * rbf_kernel(model.support_vectors[i], x, model.gamma);
    return f;
}

SvrFitOptions svr_grid_search(const std::vector<std::vector<double>>& x,
                              std::span<const double> y, const SvrFitOptions& base,
                              std::uint64_t seed) {
    const std::size_t n = x.size();
    if (n < 10) throw InvalidInput("svr_grid_search: need at least 10 samples");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(derive_seed(seed, 0x57f));
    for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    const std::size_t n_val = std::max<std::size_t>(1, n / 5);

    std::vector<std::vector<double>> xt, xv;
    std::vector<double> yt, yv;
    for (std::size_t i = 0; i < n; ++i) {
        if (i < n_val) {
            xv.push_back(x[idx[i]]);
            yv.push_back(y[idx[i]]);
        } else {
            xt.push_back(x[idx[i]]);
            yt.push_back(y[idx[i]]);
        }
    }

    const double g0 = base.gamma > 0.0 ? base.gamma : default_gamma(x);
    SvrFitOptions best = base;
    double best_rmse = std::numeric_limits<double>::infinity();
    for (double cc : {1.0, 10.0, 100.0}) {
        for (double gf : {0.1, 1.0, 10.0}) {
            SvrFitOptions opt = base;
            opt.c = cc;
            opt.gamma = g0 * gf;
            opt.objective_log = nullptr;
            double rmse_val;
            try {
                const SvrModel m = svr_fit(xt, yt, opt);
                double ss = 0.0;
                for (std::size_t i = 0; i < xv.size(); ++i) {
                    const double e = svr_predict(m, xv[i]) - yv[i];
                    ss += e * e;
                }
                rmse_val = std::sqrt(ss / double(xv.size()));
            } catch (const ConvergenceFailure&) {
                continue;
            }
            if (rmse_val < best_rmse) {
                best_rmse = rmse_val;
                best = opt;
            }
        }
    }
    return best;
}

void save_svr_json(const SvrModel& model, const std::string& path) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["support_vectors"] = model.support_vectors;
    j["dual_coefs"] = model.dual_coefs;
    j["bias"] = model.bias;
    j["gamma"] = model.gamma;
    j["c"] = model.c;
    j["epsilon"] = model.epsilon;
    j["kkt_residual"] = model.kkt_residual;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(1) << "\n";
}

SvrModel load_svr_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    nlohmann::json j;
    in >> j;
    SvrModel m;
    m.support_vectors = j.at("support_vectors").get<std::vector<std::vector<double>>>();
    m.dual_coefs = j.at("dual_coefs").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    m.gamma = j.at("gamma").get<double>();
    m.c = j.at("c").get<double>();
    m.epsilon = j.at("epsilon").get<double>();
    m.kkt_residual = j.at("kkt_residual").get<double>();
    return m;
}

} // namespace kinpred
