#include "kinpred/mocap_ik.hpp"

#include <cmath>

namespace kinpred {

void SegmentModel::validate() const {
    if (local_markers.size() < 3)
        throw InvalidInput("SegmentModel: need at least 3 markers");
    if (weights.size() != local_markers.size())
        throw InvalidInput("SegmentModel: weight count mismatch");
    for (double w : weights)
        if (!(w > 0.0)) throw InvalidInput("SegmentModel: weights must be positive");
    if (std::abs(joint_axis.norm() - 1.0) > 1e-12)
        throw InvalidInput("SegmentModel: joint_axis must be unit length");

    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (const auto& p : local_markers) centroid += p;
    centroid /= double(local_markers.size());
    Eigen::MatrixXd centered(3, local_markers.size());
    for (std::size_t i = 0; i < local_markers.size(); ++i)
        centered.col(i) = local_markers[i] - centroid;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered);
    if (svd.singularValues()(1) <= 1e-9 * svd.singularValues()(0))
        throw RankDeficient("SegmentModel: markers are collinear");
}

RigidPose fit_segment_pose(const SegmentModel& model,
                           const std::vector<Eigen::Vector3d>& measured) {
    if (measured.size() != model.local_markers.size())
        throw InvalidInput("fit_segment_pose: marker count mismatch");
    const std::size_t n = measured.size();

    double wsum = 0.0;
    Eigen::Vector3d cl = Eigen::Vector3d::Zero(), cm = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        wsum += model.weights[i];
        cl += model.weights[i] * model.local_markers[i];
        cm += model.weights[i] * measured[i];
    }
    cl /= wsum;
    cm /= wsum;

    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (std::size_t i = 0; i < n; ++i)
        cov += model.weights[i] * (model.local_markers[i] - cl) * (measured[i] - cm).transpose();

    Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (sv(1) <= 1e-9 * sv(0))
        throw RankDeficient("fit_segment_pose: degenerate marker configuration");

    Eigen::Matrix3d u = svd.matrixU(), v = svd.matrixV();
    Eigen::Matrix3d r = v * u.transpose();
    if (r.determinant() < 0.0) {
        v.col(2) *= -1.0;
        r = v * u.transpose();
    }
    return {r, cm - r * cl};
}

double pose_residual(const SegmentModel& model,
                     const std::vector<Eigen::Vector3d>& measured,
                     const RigidPose& pose) {
    double res = 0.0;
    for (std::size_t i = 0; i < measured.size(); ++i)
        res += model.weights[i] * (measured[i] - pose.apply(model.local_markers[i])).squaredNorm();
    return res;
}

double knee_angle(const RigidPose& thigh, const RigidPose& shank,
                  const SegmentModel& thigh_model) {
    const Eigen::Matrix3d rel = thigh.rotation.transpose() * shank.rotation;
    Eigen::Quaterniond q(rel);
    // Twist component about the joint axis: project the vector part.
    const double proj = q.vec().dot(thigh_model.joint_axis);
    double angle = 2.0 * std::atan2(proj, q.w());
    if (angle > M_PI) angle -= 2.0 * M_PI;
    if (angle < -M_PI) angle += 2.0 * M_PI;
    return angle * 180.0 / M_PI;
}

TimeSeries measured_angle_series(const TimeSeries& markers,
                                 const SegmentModel& thigh_model,
                                 const SegmentModel& shank_model,
                                 int filter_order, double filter_cutoff_hz,
                                 FilterMode filter_mode,
                                 std::vector<std::size_t>* bad_frames) {
    thigh_model.validate();
    shank_model.validate();
    const std::size_t nt = thigh_model.marker_count();
    const std::size_t ns = shank_model.marker_count();
    if (markers.channels() != 3 * (nt + ns))
        throw InvalidInput("measured_angle_series: marker channel count does not match models");

    const TimeSeries smoothed =
        butterworth_lowpass(markers, filter_order, filter_cutoff_hz, filter_mode);

    std::vector<double> angles(smoothed.length());
    std::vector<Eigen::Vector3d> mt(nt), ms(ns);
    double last_good = 0.0;
    for (std::size_t i = 0; i < smoothed.length(); ++i) {
        auto f = smoothed.frame(i);
        for (std::size_t m = 0; m < nt; ++m)
            mt[m] = Eigen::Vector3d(f[3 * m], f[3 * m + 1], f[3 * m + 2]);
        for (std::size_t m = 0; m < ns; ++m)
            ms[m] = Eigen::Vector3d(f[3 * (nt + m)], f[3 * (nt + m) + 1], f[3 * (nt + m) + 2]);
        try {
            const RigidPose pt = fit_segment_pose(thigh_model, mt);
            const RigidPose ps = fit_segment_pose(shank_model, ms);
            angles[i] = knee_angle(pt, ps, thigh_model);
            last_good = angles[i];
        } catch (const RankDeficient&) {
            if (!bad_frames) throw;
            bad_frames->push_back(i);
            angles[i] = last_good;
        }
    }
    return TimeSeries(smoothed.start_time(), smoothed.rate(), 1, std::move(angles));
}

} // namespace kinpred
