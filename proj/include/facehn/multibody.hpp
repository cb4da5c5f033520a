#pragma once

#include "facehn/io.hpp"
#include "facehn/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace facehn::muscle {
struct Muscle;
}

namespace facehn::multibody {

/// One rigid bone. The link frame sits at the joint connecting it to its
/// parent; the base link (parent_index < 0) is immobile.
struct BoneLink {
  std::string name;
  double mass = 0.0;
  Matrix3 inertia = Matrix3::Zero();  // body frame, about the COM
  Vector3 com_offset = Vector3::Zero();
  int parent_index = -1;
  Vector3 joint_origin = Vector3::Zero();  // in the parent frame
};

/// Damped rotational spring on one 3-DOF joint (per-axis coefficients).
struct JointSpring {
  Vector3 stiffness = Vector3::Zero();  // N*m/rad
  Vector3 damping = Vector3::Zero();    // N*m*s/rad
  Vector3 rest_angle = Vector3::Zero();
};

struct GeneralizedState {
  VectorX q;
  VectorX qdot;

  explicit GeneralizedState(int dof = 0)
      : q(VectorX::Zero(dof)), qdot(VectorX::Zero(dof)) {}
};

/// Unbranched articulated chain: base, then movable links in chain order.
/// Each movable joint has 3 rotational DOF (intrinsic XYZ Euler angles).
struct SpineModel {
  std::vector<BoneLink> links;       // links[0] is the base
  std::vector<JointSpring> springs;  // one per movable link
  Vector3 gravity = Vector3(0.0, -9.81, 0.0);
  VectorX limit_lower;  // per DOF, rad
  VectorX limit_upper;

  int movable_count() const { return static_cast<int>(links.size()) - 1; }
  int dof() const { return 3 * movable_count(); }
};

SpineModel build_spine(const io::Json& doc);
SpineModel load_spine(const std::filesystem::path& path);

/// World-frame pose of every link: orientation, joint-origin position, COM,
/// and the three instantaneous joint axes of each movable link.
struct KinematicPose {
  std::vector<Matrix3> rotation;
  std::vector<Vector3> origin;
  std::vector<Vector3> com;
  std::vector<Matrix3> axes;  // per link; column k = world axis of DOF k (base entry unused)
};

/// World-frame twist of every link.
struct LinkMotion {
  Vector3 omega = Vector3::Zero();
  Vector3 v_origin = Vector3::Zero();  // velocity of the link-frame origin
};

void forward_kinematics(const SpineModel& model, const Eigen::Ref<const VectorX>& q,
                        KinematicPose& pose);
KinematicPose forward_kinematics(const SpineModel& model, const Eigen::Ref<const VectorX>& q);

std::vector<LinkMotion> link_motion(const SpineModel& model, const KinematicPose& pose,
                                    const Eigen::Ref<const VectorX>& qdot);

inline Vector3 point_position(const KinematicPose& pose, int link, const Vector3& local) {
  return pose.origin[static_cast<size_t>(link)] + pose.rotation[static_cast<size_t>(link)] * local;
}

inline Vector3 point_velocity(const KinematicPose& pose, const std::vector<LinkMotion>& motion,
                              int link, const Vector3& local) {
  const auto li = static_cast<size_t>(link);
  return motion[li].v_origin + motion[li].omega.cross(pose.rotation[li] * local);
}

/// Joint-space inertia via composite rigid bodies accumulated tip-to-base.
MatrixX mass_matrix(const SpineModel& model, const Eigen::Ref<const VectorX>& q);

/// Gravity + Coriolis/centrifugal generalized forces (inverse dynamics with
/// zero joint acceleration). Appears on the left-hand side of the equation
/// of motion: M qdd + bias = applied torques.
VectorX bias_forces(const SpineModel& model, const GeneralizedState& state);

/// Full inverse dynamics M(q) qdd + bias(q, qd); exposed for cross-checks.
VectorX inverse_dynamics(const SpineModel& model, const Eigen::Ref<const VectorX>& q,
                         const Eigen::Ref<const VectorX>& qdot,
                         const Eigen::Ref<const VectorX>& qddot);

/// Per-axis tau = -ks (q - q0) - kd qdot.
VectorX spring_torques(const SpineModel& model, const GeneralizedState& state);

/// Entry (k, j) = -d l_j / d q_k by central differences (step 1e-5 rad).
/// Joint torques from muscle tensions f are P * f.
MatrixX moment_arm_matrix(const SpineModel& model, const std::vector<muscle::Muscle>& muscles,
                          const Eigen::Ref<const VectorX>& q);

/// External load applied at a point fixed on a link.
struct Wrench {
  int link = 0;
  Vector3 point_local = Vector3::Zero();
  Vector3 force = Vector3::Zero();
  Vector3 torque = Vector3::Zero();
};

/// Generalized torques J^T w for a set of applied wrenches.
VectorX wrench_torques(const SpineModel& model, const KinematicPose& pose,
                       const std::vector<Wrench>& wrenches);

/// Scratch buffers reused across steps so the 4 kHz loop does not allocate.
struct StepWorkspace {
  KinematicPose pose;
  MatrixX mass;
  MatrixX moment_arms;
  VectorX tau;
  Eigen::LDLT<MatrixX> solver;
};

/// One semi-implicit Euler step of M qdd = P f_m + J^T f_ext - bias + tau_spring.
/// Joint limits are enforced by clamping with velocity zeroing on the
/// clamped axis. muscle_forces must be non-negative (tension only).
GeneralizedState step_dynamics(const SpineModel& model, const GeneralizedState& state,
                               const std::vector<muscle::Muscle>& muscles,
                               const Eigen::Ref<const VectorX>& muscle_forces,
                               const std::vector<Wrench>& external, double dt,
                               StepWorkspace& ws);

GeneralizedState step_dynamics(const SpineModel& model, const GeneralizedState& state,
                               const std::vector<muscle::Muscle>& muscles,
                               const Eigen::Ref<const VectorX>& muscle_forces,
                               const std::vector<Wrench>& external, double dt);

/// Kinetic plus gravitational plus joint-spring potential energy.
double mechanical_energy(const SpineModel& model, const GeneralizedState& state);
double kinetic_energy(const SpineModel& model, const GeneralizedState& state);

}  // namespace facehn::multibody
