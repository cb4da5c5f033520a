#pragma once

#include "facehn/multibody.hpp"
#include "facehn/types.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace facehn::muscle {

/// Hill-type actuator parameters: exponential passive spring plus an
/// activation-scaled contractile element with force-length and
/// force-velocity relations.
struct HillParams {
  double passive_stiffness = 10.0;   // k_s, N
  double passive_shape = 5.0;        // k_c, dimensionless exponent scale
  double passive_damping = 2.0;      // k_d, N*s
  double max_stiffness = 3000.0;     // k_max, N/m
  double threshold_length = 0.08;    // l_m, m; f_C vanishes below this length
  double max_velocity = 0.5;         // v_m, m/s, > 0
  double rest_length = 0.1;          // l_0, m, > 0
};

/// One attachment of a muscle polyline: either a point fixed on a bone link
/// or a fascia node of the soft-tissue model.
struct Attachment {
  int link = -1;  // >= 0: bone-bound, with `point` in the link frame
  Vector3 point = Vector3::Zero();
  int fascia_node = -1;  // >= 0: bound to a soft-tissue node
};

struct MusclePath {
  std::vector<Attachment> via_points;  // >= 2, straight segments between them
};

struct MuscleState {
  double length = 0.0;
  double length_rate = 0.0;
  double strain = 0.0;       // e = (l - l0) / l0
  double strain_rate = 0.0;  // edot = ldot / l0
  double activation = 0.0;   // clamped to [0,1]
};

struct Muscle {
  std::string name;
  MusclePath path;
  HillParams params;
  double activation = 0.0;
};

/// Resolves attachments against a skeleton pose and, optionally, fascia
/// node state.
struct PoseContext {
  const multibody::KinematicPose* pose = nullptr;
  const std::vector<multibody::LinkMotion>* motion = nullptr;
  const std::vector<Vector3>* node_positions = nullptr;
  const std::vector<Vector3>* node_velocities = nullptr;
};

Vector3 attachment_position(const Attachment& a, const PoseContext& ctx);
Vector3 attachment_velocity(const Attachment& a, const PoseContext& ctx);

/// Total polyline length; bone attachments only (fast path used by the
/// moment-arm finite differences).
double path_length(const MusclePath& path, const multibody::KinematicPose& pose);

/// Length and analytic length rate of the muscle polyline in a pose.
std::pair<double, double> muscle_geometry(const MusclePath& path, const PoseContext& ctx);

MuscleState make_state(const HillParams& params, double length, double length_rate,
                       double activation);

/// f_P = max(0, k_s (exp(k_c e) - 1) + k_d edot). Never negative.
double passive_force(const HillParams& params, const MuscleState& state);

double force_length(const HillParams& params, double length);
double force_velocity(const HillParams& params, double length_rate);

/// f_C = a F_l(l) F_v(ldot).
double contractile_force(const HillParams& params, const MuscleState& state);

/// Per-muscle f_m = f_P + f_C, using each muscle's stored activation.
/// Ordering matches the input list.
VectorX total_forces(const std::vector<Muscle>& muscles, const PoseContext& ctx);

/// Parses the muscle definition document. Rest lengths (and the contractile
/// threshold when given as a ratio) may be declared relative to the length
/// in a reference pose, resolved against the supplied model at q = 0.
std::vector<Muscle> load_muscles(const std::filesystem::path& path,
                                 const multibody::SpineModel& model);
std::vector<Muscle> parse_muscles(const io::Json& doc, const multibody::SpineModel& model);

}  // namespace facehn::muscle
