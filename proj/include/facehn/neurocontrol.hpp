#pragma once

#include "facehn/multibody.hpp"
#include "facehn/muscle.hpp"
#include "facehn/types.hpp"

#include <filesystem>
#include <vector>

namespace facehn::control {

/// Desired skull orientation relative to the base, intrinsic XYZ order.
struct HeadPoseTarget {
  double pitch = 0.0;  // rad, about the lateral x axis
  double yaw = 0.0;    // rad, about the vertical y axis
  double roll = 0.0;   // rad, about the forward z axis
};

/// Desired strains and strain rates per cervical muscle, produced by the
/// voluntary layer and tracked by the reflex layer.
struct SetpointSignal {
  VectorX strain;
  VectorX strain_rate;
};

struct ReflexGains {
  double kp = 5.0;  // activation per unit strain error
  double kv = 0.5;  // activation per unit strain-rate error
};

struct ControlConfig {
  ReflexGains gains;
  VectorX distribution_weights;  // one per movable link, each axis sums to 1
  double max_target_angle = 60.0 * 3.14159265358979323846 / 180.0;
  double regularization = 1e-3;  // ridge term of the feedforward solve
  int steps_per_voluntary = 160;  // 4 kHz physics / 25 Hz voluntary
  double dt = 0.25e-3;
};

ControlConfig load_control(const std::filesystem::path& path, int movable_links);
ControlConfig parse_control(const io::Json& doc, int movable_links);

/// Splits the target orientation across the chain with the configured fixed
/// weights: desired joint angles per axis are weight_i * target_axis.
VectorX distribute_orientation(const ControlConfig& config, const multibody::SpineModel& model,
                               const HeadPoseTarget& target);

/// Intrinsic XYZ (pitch, yaw, roll) angles of the skull orientation.
Vector3 skull_euler(const Matrix3& rotation);

struct VoluntaryCommand {
  VectorX feedforward;  // per-muscle activation in [0,1]
  SetpointSignal setpoints;
  double residual = 0.0;  // max |torque imbalance| of the solve, N*m
  bool feasible = true;
};

/// 25 Hz layer: regularized nonnegative static torque balance against
/// gravity and joint springs at the desired posture, plus the muscle strain
/// setpoints evaluated there (zero desired strain rate).
VoluntaryCommand voluntary_update(const multibody::SpineModel& model,
                                  const std::vector<muscle::Muscle>& muscles,
                                  const ControlConfig& config, const HeadPoseTarget& target);

/// 4 kHz layer: a = clamp(a_ff + kp (e* - e) + kv (edot* - edot), 0, 1).
VectorX reflex_update(const SetpointSignal& setpoints,
                      const std::vector<muscle::MuscleState>& states,
                      const Eigen::Ref<const VectorX>& feedforward, const ReflexGains& gains);

/// Owns one head-neck simulation: steps the physics at 4 kHz, refreshes the
/// voluntary command every steps_per_voluntary steps, and applies the reflex
/// every step.
class NeckSimulator {
 public:
  NeckSimulator(const multibody::SpineModel& model, std::vector<muscle::Muscle> muscles,
                ControlConfig config);

  void set_target(const HeadPoseTarget& target);
  void step();
  void run(double seconds);

  const multibody::GeneralizedState& state() const { return state_; }
  Vector3 skull_orientation() const;
  const VectorX& activations() const { return activations_; }
  double time() const { return time_; }
  long voluntary_count() const { return voluntary_count_; }
  long reflex_count() const { return reflex_count_; }
  const multibody::SpineModel& model() const { return model_; }

 private:
  multibody::SpineModel model_;
  std::vector<muscle::Muscle> muscles_;
  ControlConfig config_;
  HeadPoseTarget target_;
  multibody::GeneralizedState state_;
  VoluntaryCommand command_;
  VectorX activations_;
  VectorX forces_;
  multibody::StepWorkspace ws_;
  multibody::KinematicPose pose_;
  double time_ = 0.0;
  long step_index_ = 0;
  long voluntary_count_ = 0;
  long reflex_count_ = 0;
};

}  // namespace facehn::control
