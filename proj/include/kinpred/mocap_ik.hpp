#ifndef KINPRED_MOCAP_IK_HPP
#define KINPRED_MOCAP_IK_HPP

#include <Eigen/Dense>
#include <vector>

#include "kinpred/signals.hpp"

namespace kinpred {

/// Rigid segment: marker positions in the segment-fixed frame, per-marker
/// weights, and the hinge axis expressed in this frame.
struct SegmentModel {
    std::vector<Eigen::Vector3d> local_markers; // mm
    std::vector<double> weights;                // > 0
    Eigen::Vector3d joint_axis;                 // unit

    void validate() const;
    std::size_t marker_count() const { return local_markers.size(); }
};

struct RigidPose {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
        return rotation * p + translation;
    }
};

/// Weighted least-squares rigid fit: minimizes
/// sum_i w_i |measured_i - (R p_i + t)|^2 in closed form (weighted
/// centroid removal, SVD of the weighted covariance, determinant sign
/// fix on the smallest singular direction).
RigidPose fit_segment_pose(const SegmentModel& model,
                           const std::vector<Eigen::Vector3d>& measured);

/// Signed twist of the shank relative to the thigh about the thigh-frame
/// joint axis (twist-swing decomposition), degrees, flexion positive.
double knee_angle(const RigidPose& thigh, const RigidPose& shank,
                  const SegmentModel& thigh_model);

/// Weighted squared residual of a pose against measurements (exposed for
/// optimality checks).
double pose_residual(const SegmentModel& model,
                     const std::vector<Eigen::Vector3d>& measured,
                     const RigidPose& pose);

/// Full supervision path: low-pass the marker streams, fit both segment
/// poses per frame, emit the knee angle series. Marker channels are laid
/// out thigh markers first, then shank markers, xyz per marker.
/// When bad_frames is given, frames with degenerate marker configurations
/// are logged there and carry the previous good angle instead of
/// aborting; otherwise the fit error propagates.
TimeSeries measured_angle_series(const TimeSeries& markers,
                                 const SegmentModel& thigh_model,
                                 const SegmentModel& shank_model,
                                 int filter_order = 4, double filter_cutoff_hz = 6.0,
                                 FilterMode filter_mode = FilterMode::ZeroPhase,
                                 std::vector<std::size_t>* bad_frames = nullptr);

} // namespace kinpred

#endif
