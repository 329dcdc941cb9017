#ifndef KINPRED_EVAL_HPP
#define KINPRED_EVAL_HPP

#include <map>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "kinpred/errors.hpp"
#include "kinpred/features.hpp"

namespace kinpred {

inline constexpr double kSnrCapDb = 60.0;

// Population (1/n) variance convention throughout this module.

double rmse(std::span<const double> pred, std::span<const double> ref);
double pearson_r(std::span<const double> pred, std::span<const double> ref);
/// 10*log10(var(ref)/MSE), capped at +60 dB; not symmetric in its arguments.
double snr_db(std::span<const double> pred, std::span<const double> ref);
/// Adjusted coefficient of determination with p predictors.
double adjusted_r2(std::span<const double> pred, std::span<const double> ref,
                   std::size_t predictor_count);

struct AnovaResult {
    double f = 0.0;
    double p = 1.0;
    std::size_t df_between = 0;
    std::size_t df_within = 0;
};

/// Classic one-way ANOVA; p from the F distribution via the regularized
/// incomplete beta function.
AnovaResult anova_oneway(const std::vector<std::vector<double>>& groups);

/// Regularized incomplete beta I_x(a, b) (exposed for tests).
double incomplete_beta(double a, double b, double x);

struct MetricSet {
    double rmse = 0.0;
    double r = 0.0;
    double snr_db = 0.0;
    double adj_r2 = 0.0;
};

MetricSet compute_metrics(std::span<const double> pred, std::span<const double> ref,
                          std::size_t predictor_count);

enum class Predictor { SVR, LSTM };

const char* predictor_name(Predictor p);
Predictor predictor_from_name(const std::string& name);

struct GridKey {
    Predictor predictor;
    FeatureMode feature;
    int t_ms;
    std::string subject;

    auto tie() const { return std::tie(predictor, feature, t_ms, subject); }
    bool operator<(const GridKey& o) const { return tie() < o.tie(); }
};

/// Metric values indexed by (predictor, feature set, prediction time,
/// subject); the unit a cross-validation run fills in.
class ResultsGrid {
public:
    void insert(const GridKey& key, const MetricSet& m);
    bool contains(const GridKey& key) const { return cells_.count(key) > 0; }
    const MetricSet& at(const GridKey& key) const;
    const std::map<GridKey, MetricSet>& cells() const { return cells_; }
    std::size_t size() const { return cells_.size(); }

    std::vector<Predictor> predictors() const;
    std::vector<FeatureMode> features() const;
    std::vector<int> times_ms() const;
    std::vector<std::string> subjects() const;

private:
    std::map<GridKey, MetricSet> cells_;
};

enum class Axis { Feature, Time };

struct AveragedCell {
    MetricSet per_subject_mean; // averaged over the collapsed axis, then subjects
    std::vector<MetricSet> per_subject;
    std::vector<std::string> subjects;
};

/// Collapse one axis by arithmetic mean (per subject, then across
/// subjects): fixing Feature averages over times, fixing Time over
/// features. Throws IncompleteGrid listing missing cells.
std::map<std::string, AveragedCell> average_axis(const ResultsGrid& grid,
                                                 Predictor predictor, Axis fixed);

} // namespace kinpred

#endif
