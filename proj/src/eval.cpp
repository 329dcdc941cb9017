#include "kinpred/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace kinpred {

namespace {

void check_lengths(std::span<const double> a, std::span<const double> b, const char* who) {
    if (a.size() != b.size() || a.empty())
        throw InvalidInput(std::string(who) + ": series must have equal non-zero length");
}

double mean_of(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / double(x.size());
}

double var_of(std::span<const double> x) {
    const double m = mean_of(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / double(x.size());
}

} // namespace

double rmse(std::span<const double> pred, std::span<const double> ref) {
    check_lengths(pred, ref, "rmse");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - ref[i];
        s += d * d;
    }
    return std::sqrt(s / double(pred.size()));
}

double pearson_r(std::span<const double> pred, std::span<const double> ref) {
    check_lengths(pred, ref, "pearson_r");
    const double mp = mean_of(pred), mr = mean_of(ref);
    double cov = 0.0, vp = 0.0, vr = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        cov += (pred[i] - mp) * (ref[i] - mr);
        vp += (pred[i] - mp) * (pred[i] - mp);
        vr += (ref[i] - mr) * (ref[i] - mr);
    }
    if (vp <= 0.0 || vr <= 0.0)
        throw Degenerate("pearson_r: undefined for constant series");
    return cov / std::sqrt(vp * vr);
}

double snr_db(std::span<const double> pred, std::span<const double> ref) {
    check_lengths(pred, ref, "snr_db");
    const double vr = var_of(ref);
    if (vr <= 0.0) throw Degenerate("snr_db: reference has zero variance");
    double mse = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - ref[i];
        mse += d * d;
    }
    mse /= double(pred.size());
    if (mse <= 0.0) return kSnrCapDb;
    return std::min(kSnrCapDb, 10.0 * std::log10(vr / mse));
}

double adjusted_r2(std::span<const double> pred, std::span<const double> ref,
                   std::size_t predictor_count) {
    check_lengths(pred, ref, "adjusted_r2");
    const std::size_t n = pred.size();
    if (n <= predictor_count + 1)
        throw Degenerate("adjusted_r2: need n > p + 1");
    const double mr = mean_of(ref);
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ss_res += (pred[i] - ref[i]) * (pred[i] - ref[i]);
        ss_tot += (ref[i] - mr) * (ref[i] - mr);
    }
    if (ss_tot <= 0.0) throw Degenerate("adjusted_r2: reference has zero variance");
    const double r2 = 1.0 - ss_res / ss_tot;
    return 1.0 - (1.0 - r2) * double(n - 1) / double(n - predictor_count - 1);
}

namespace {

// Continued fraction for the incomplete beta (Lentz's method).
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-16;
    constexpr double kFpMin = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
}

} // namespace

double incomplete_beta(double a, double b, double x) {
    if (x < 0.0 || x > 1.0) throw InvalidInput("incomplete_beta: x outside [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log(1.0 - x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

AnovaResult anova_oneway(const std::vector<std::vector<double>>& groups) {
    if (groups.size() < 2) throw InvalidInput("anova_oneway: need at least 2 groups");
    std::size_t n_total = 0;
    double grand_sum = 0.0;
    for (const auto& g : groups) {
        if (g.size() < 2) throw InvalidInput("anova_oneway: each group needs >= 2 values");
        n_total += g.size();
        for (double v : g) grand_sum += v;
    }
    const double grand_mean = grand_sum / double(n_total);

    double ss_between = 0.0, ss_within = 0.0;
    for (const auto& g : groups) {
        const double gm = mean_of(g);
        ss_between += double(g.size()) * (gm - grand_mean) * (gm - grand_mean);
        for (double v : g) ss_within += (v - gm) * (v - gm);
    }

    AnovaResult res;
    res.df_between = groups.size() - 1;
    res.df_within = n_total - groups.size();
    if (ss_within <= 0.0) {
        if (ss_between <= 0.0)
            throw Degenerate("anova_oneway: all observations identical");
        res.f = std::numeric_limits<double>::infinity();
        res.p = 0.0;
        return res;
    }
    const double msb = ss_between / double(res.df_between);
    const double msw = ss_within / double(res.df_within);
    res.f = msb / msw;
    const double d1 = double(res.df_between), d2 = double(res.df_within);
    res.p = incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * res.f));
    return res;
}

MetricSet compute_metrics(std::span<const double> pred, std::span<const double> ref,
                          std::size_t predictor_count) {
    MetricSet m;
    m.rmse = rmse(pred, ref);
    m.r = pearson_r(pred, ref);
    m.snr_db = snr_db(pred, ref);
    m.adj_r2 = adjusted_r2(pred, ref, predictor_count);
    return m;
}

const char* predictor_name(Predictor p) {
    return p == Predictor::SVR ? "svr" : "lstm";
}

Predictor predictor_from_name(const std::string& name) {
    if (name == "svr") return Predictor::SVR;
    if (name == "lstm") return Predictor::LSTM;
    throw InvalidInput("unknown predictor '" + name + "'");
}

void ResultsGrid::insert(const GridKey& key, const MetricSet& m) {
    if (!cells_.emplace(key, m).second)
        throw InvalidInput("ResultsGrid: duplicate cell for subject " + key.subject);
}

const MetricSet& ResultsGrid::at(const GridKey& key) const {
    auto it = cells_.find(key);
    if (it == cells_.end())
        throw IncompleteGrid("ResultsGrid: missing cell for subject " + key.subject);
    return it->second;
}

namespace {
template <class T, class F>
std::vector<T> distinct(const std::map<GridKey, MetricSet>& cells, F proj) {
    std::set<T> s;
    for (const auto& [k, v] : cells) s.insert(proj(k));
    return {s.begin(), s.end()};
}
} // namespace

std::vector<Predictor> ResultsGrid::predictors() const {
    return distinct<Predictor>(cells_, [](const GridKey& k) { return k.predictor; });
}
std::vector<FeatureMode> ResultsGrid::features() const {
    return distinct<FeatureMode>(cells_, [](const GridKey& k) { return k.feature; });
}
std::vector<int> ResultsGrid::times_ms() const {
    return distinct<int>(cells_, [](const GridKey& k) { return k.t_ms; });
}
std::vector<std::string> ResultsGrid::subjects() const {
    return distinct<std::string>(cells_, [](const GridKey& k) { return k.subject; });
}

namespace {

MetricSet metric_mean(const std::vector<MetricSet>& ms) {
    MetricSet out;
    for (const auto& m : ms) {
        out.rmse += m.rmse;
        out.r += m.r;
        out.snr_db += m.snr_db;
        out.adj_r2 += m.adj_r2;
    }
    const double n = double(ms.size());
    out.rmse /= n;
    out.r /= n;
    out.snr_db /= n;
    out.adj_r2 /= n;
    return out;
}

} // namespace

std::map<std::string, AveragedCell> average_axis(const ResultsGrid& grid,
                                                 Predictor predictor, Axis fixed) {
    const auto features = grid.features();
    const auto times = grid.times_ms();
    const auto subjects = grid.subjects();

    std::map<std::string, AveragedCell> out;
    const std::size_t n_fixed = fixed == Axis::Feature ? features.size() : times.size();
    for (std::size_t fi = 0; fi < n_fixed; ++fi) {
        AveragedCell cell;
        std::string label;
        std::vector<std::string> holes;
        for (const auto& subj : subjects) {
            std::vector<MetricSet> collapsed;
            if (fixed == Axis::Feature) {
                label = feature_mode_name(features[fi]);
                for (int t : times) {
                    GridKey k{predictor, features[fi], t, subj};
                    if (!grid.contains(k)) {
                        holes.push_back(subj + "/" + label + "/" + std::to_string(t) + "ms");
                        continue;
                    }
                    collapsed.push_back(grid.at(k));
                }
            } else {
                label = std::to_string(times[fi]) + "ms";
                for (auto f : features) {
                    GridKey k{predictor, f, times[fi], subj};
                    if (!grid.contains(k)) {
                        holes.push_back(subj + "/" + feature_mode_name(f) + "/" + label);
                        continue;
                    }
                    collapsed.push_back(grid.at(k));
                }
            }
            if (!holes.empty()) {
                std::string msg = "average_axis: incomplete grid, missing:";
                for (const auto& h : holes) msg += " " + h;
                throw IncompleteGrid(msg);
            }
            cell.per_subject.push_back(metric_mean(collapsed));
            cell.subjects.push_back(subj);
        }
        cell.per_subject_mean = metric_mean(cell.per_subject);
        out[label] = std::move(cell);
    }
    return out;
}

} // namespace kinpred
