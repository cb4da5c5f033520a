#include "facehn/multibody.hpp"

#include "facehn/muscle.hpp"

#include <cmath>
#include <numbers>

namespace facehn::multibody {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

Matrix3 rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Matrix3 r;
  r << 1, 0, 0, 0, c, -s, 0, s, c;
  return r;
}

Matrix3 rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Matrix3 r;
  r << c, 0, s, 0, 1, 0, -s, 0, c;
  return r;
}

Matrix3 rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Matrix3 r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

Vector3 parse_vec3(const io::Json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("expected 3-vector for " + what);
  return Vector3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

Matrix3 parse_inertia(const io::Json& link, const std::string& name) {
  Matrix3 inertia = Matrix3::Zero();
  if (link.contains("inertia_diag")) {
    inertia = parse_vec3(link.at("inertia_diag"), "inertia_diag of " + name).asDiagonal();
  } else if (link.contains("inertia")) {
    const auto& rows = link.at("inertia");
    if (!rows.is_array() || rows.size() != 3) throw ConfigError("inertia of " + name + " must be 3x3");
    for (int r = 0; r < 3; ++r) {
      const auto row = parse_vec3(rows[static_cast<size_t>(r)], "inertia row of " + name);
      inertia.row(r) = row.transpose();
    }
  } else {
    throw ConfigError("link " + name + " missing inertia");
  }
  if ((inertia - inertia.transpose()).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + inertia.cwiseAbs().maxCoeff()))
    throw ConfigError("non-symmetric inertia on link " + name);
  Eigen::SelfAdjointEigenSolver<Matrix3> eig(inertia);
  if (eig.eigenvalues().minCoeff() <= 0.0)
    throw ConfigError("non-SPD inertia on link " + name);
  return inertia;
}

}  // namespace

SpineModel build_spine(const io::Json& doc) {
  SpineModel model;
  if (!doc.contains("links") || !doc.at("links").is_array() || doc.at("links").empty())
    throw ConfigError("spine document has no links");

  const auto& jlinks = doc.at("links");
  model.links.reserve(jlinks.size());
  for (size_t i = 0; i < jlinks.size(); ++i) {
    const auto& jl = jlinks[i];
    BoneLink link;
    link.name = jl.value("name", "link" + std::to_string(i));
    link.mass = jl.value("mass", 0.0);
    if (link.mass <= 0.0) throw ConfigError("non-positive mass on link " + link.name);
    link.inertia = parse_inertia(jl, link.name);
    link.com_offset = parse_vec3(jl.at("com"), "com of " + link.name);
    link.parent_index = jl.value("parent", static_cast<int>(i) - 1);
    if (jl.contains("joint_origin"))
      link.joint_origin = parse_vec3(jl.at("joint_origin"), "joint_origin of " + link.name);
    model.links.push_back(std::move(link));
  }

  if (model.links[0].parent_index >= 0) throw ConfigError("first link must be the base (no parent)");
  for (size_t i = 1; i < model.links.size(); ++i) {
    const int p = model.links[i].parent_index;
    if (p < 0) throw ConfigError("multiple base links");
    if (p >= static_cast<int>(model.links.size()))
      throw ConfigError("parent index out of range on link " + model.links[i].name);
    // Walk to the root; a walk longer than the chain means a cycle.
    int cursor = static_cast<int>(i);
    size_t hops = 0;
    while (cursor > 0) {
      cursor = model.links[static_cast<size_t>(cursor)].parent_index;
      if (cursor < 0) break;
      if (++hops > model.links.size()) throw ConfigError("cyclic parent references");
    }
    if (p != static_cast<int>(i) - 1)
      throw ConfigError("links must form a single unbranched chain in order");
  }

  const int movable = model.movable_count();
  model.springs.assign(static_cast<size_t>(movable), JointSpring{});
  if (doc.contains("springs")) {
    const auto& js = doc.at("springs");
    if (static_cast<int>(js.size()) != movable)
      throw ConfigError("springs must list one entry per movable link");
    for (int i = 0; i < movable; ++i) {
      const auto& s = js[static_cast<size_t>(i)];
      JointSpring spring;
      spring.stiffness = parse_vec3(s.at("stiffness"), "spring stiffness");
      spring.damping = parse_vec3(s.at("damping"), "spring damping");
      if (s.contains("rest_angle_deg"))
        spring.rest_angle = parse_vec3(s.at("rest_angle_deg"), "rest angle") * kDegToRad;
      if (spring.stiffness.minCoeff() < 0.0 || spring.damping.minCoeff() < 0.0)
        throw ConfigError("negative spring coefficients");
      model.springs[static_cast<size_t>(i)] = spring;
    }
  }

  if (doc.contains("gravity")) model.gravity = parse_vec3(doc.at("gravity"), "gravity");

  const double limit = doc.value("joint_limit_deg", 60.0) * kDegToRad;
  model.limit_lower = VectorX::Constant(model.dof(), -limit);
  model.limit_upper = VectorX::Constant(model.dof(), limit);
  if (doc.contains("joint_limits")) {
    const auto& jl = doc.at("joint_limits");
    const auto lo = jl.at("lower_deg"), hi = jl.at("upper_deg");
    if (static_cast<int>(lo.size()) != model.dof() || static_cast<int>(hi.size()) != model.dof())
      throw ConfigError("joint_limits must list one entry per DOF");
    for (int k = 0; k < model.dof(); ++k) {
      model.limit_lower[k] = lo[static_cast<size_t>(k)].get<double>() * kDegToRad;
      model.limit_upper[k] = hi[static_cast<size_t>(k)].get<double>() * kDegToRad;
    }
  }
  return model;
}

SpineModel load_spine(const std::filesystem::path& path) {
  return build_spine(io::load_json(path));
}

void forward_kinematics(const SpineModel& model, const Eigen::Ref<const VectorX>& q,
                        KinematicPose& pose) {
  const size_t n = model.links.size();
  pose.rotation.resize(n);
  pose.origin.resize(n);
  pose.com.resize(n);
  pose.axes.resize(n);

  pose.rotation[0] = Matrix3::Identity();
  pose.origin[0] = Vector3::Zero();
  pose.com[0] = model.links[0].com_offset;
  pose.axes[0] = Matrix3::Identity();

  for (size_t i = 1; i < n; ++i) {
    const auto& link = model.links[i];
    const size_t p = static_cast<size_t>(link.parent_index);
    const int base_dof = 3 * (static_cast<int>(i) - 1);
    const Matrix3 rx = rot_x(q[base_dof]);
    const Matrix3 ry = rot_y(q[base_dof + 1]);
    const Matrix3 rz = rot_z(q[base_dof + 2]);

    const Matrix3& rp = pose.rotation[p];
    const Matrix3 rx_ry = rx * ry;
    pose.rotation[i] = rp * (rx_ry * rz);
    pose.origin[i] = pose.origin[p] + rp * link.joint_origin;
    pose.com[i] = pose.origin[i] + pose.rotation[i] * link.com_offset;

    // Instantaneous world axes of the intrinsic XYZ joint angles.
    pose.axes[i].col(0) = rp.col(0);
    pose.axes[i].col(1) = rp * rx.col(1);
    pose.axes[i].col(2) = rp * rx_ry.col(2);
  }
}

KinematicPose forward_kinematics(const SpineModel& model, const Eigen::Ref<const VectorX>& q) {
  KinematicPose pose;
  forward_kinematics(model, q, pose);
  return pose;
}

std::vector<LinkMotion> link_motion(const SpineModel& model, const KinematicPose& pose,
                                    const Eigen::Ref<const VectorX>& qdot) {
  const size_t n = model.links.size();
  std::vector<LinkMotion> motion(n);
  for (size_t i = 1; i < n; ++i) {
    const size_t p = static_cast<size_t>(model.links[i].parent_index);
    const int base_dof = 3 * (static_cast<int>(i) - 1);
    motion[i].omega = motion[p].omega + pose.axes[i] * qdot.segment<3>(base_dof);
    motion[i].v_origin = motion[p].v_origin + motion[p].omega.cross(pose.origin[i] - pose.origin[p]);
  }
  return motion;
}

VectorX inverse_dynamics(const SpineModel& model, const Eigen::Ref<const VectorX>& q,
                         const Eigen::Ref<const VectorX>& qdot,
                         const Eigen::Ref<const VectorX>& qddot) {
  const size_t n = model.links.size();
  const KinematicPose pose = forward_kinematics(model, q);

  std::vector<Vector3> omega(n, Vector3::Zero()), alpha(n, Vector3::Zero());
  std::vector<Vector3> acc_origin(n, Vector3::Zero());
  std::vector<Vector3> force(n, Vector3::Zero()), moment(n, Vector3::Zero());

  for (size_t i = 1; i < n; ++i) {
    const auto& link = model.links[i];
    const size_t p = static_cast<size_t>(link.parent_index);
    const int d = 3 * (static_cast<int>(i) - 1);
    const Vector3 a0 = pose.axes[i].col(0), a1 = pose.axes[i].col(1), a2 = pose.axes[i].col(2);
    const double qd0 = qdot[d], qd1 = qdot[d + 1], qd2 = qdot[d + 2];

    omega[i] = omega[p] + a0 * qd0 + a1 * qd1 + a2 * qd2;

    // Time derivatives of the joint axes: parent rotation plus the motion of
    // the preceding Euler axes within the joint.
    const Vector3 a0dot = omega[p].cross(a0);
    const Vector3 a1dot = omega[p].cross(a1) + qd0 * a0.cross(a1);
    const Vector3 a2dot = omega[p].cross(a2) + (qd0 * a0 + qd1 * a1).cross(a2);

    alpha[i] = alpha[p] + a0 * qddot[d] + a1 * qddot[d + 1] + a2 * qddot[d + 2] +
               a0dot * qd0 + a1dot * qd1 + a2dot * qd2;

    const Vector3 r = pose.origin[i] - pose.origin[p];
    acc_origin[i] = acc_origin[p] + alpha[p].cross(r) + omega[p].cross(omega[p].cross(r));

    const Vector3 rc = pose.rotation[i] * link.com_offset;
    const Vector3 acc_com = acc_origin[i] + alpha[i].cross(rc) + omega[i].cross(omega[i].cross(rc));

    const Matrix3 inertia_w = pose.rotation[i] * link.inertia * pose.rotation[i].transpose();
    force[i] = link.mass * (acc_com - model.gravity);
    moment[i] = inertia_w * alpha[i] + omega[i].cross(inertia_w * omega[i]);
  }

  VectorX tau = VectorX::Zero(model.dof());
  std::vector<Vector3> force_sum(n, Vector3::Zero()), moment_sum(n, Vector3::Zero());
  for (size_t i = n - 1; i >= 1; --i) {
    force_sum[i] += force[i];
    moment_sum[i] += moment[i] + (pose.com[i] - pose.origin[i]).cross(force[i]);
    const int d = 3 * (static_cast<int>(i) - 1);
    tau.segment<3>(d) = pose.axes[i].transpose() * moment_sum[i];

    const size_t p = static_cast<size_t>(model.links[i].parent_index);
    if (p >= 1) {
      force_sum[p] += force_sum[i];
      moment_sum[p] += moment_sum[i] + (pose.origin[i] - pose.origin[p]).cross(force_sum[i]);
    }
  }
  return tau;
}

VectorX bias_forces(const SpineModel& model, const GeneralizedState& state) {
  return inverse_dynamics(model, state.q, state.qdot, VectorX::Zero(model.dof()));
}

MatrixX mass_matrix(const SpineModel& model, const Eigen::Ref<const VectorX>& q) {
  const size_t n = model.links.size();
  const KinematicPose pose = forward_kinematics(model, q);

  // Composite rigid bodies accumulated tip to base (world frame).
  std::vector<double> cmass(n);
  std::vector<Vector3> ccom(n);
  std::vector<Matrix3> cinertia(n);  // about the composite COM
  for (size_t i = 1; i < n; ++i) {
    cmass[i] = model.links[i].mass;
    ccom[i] = pose.com[i];
    cinertia[i] = pose.rotation[i] * model.links[i].inertia * pose.rotation[i].transpose();
  }
  auto shift = [](double m, const Vector3& d) -> Matrix3 {
    return m * (d.squaredNorm() * Matrix3::Identity() - d * d.transpose());
  };
  for (size_t i = n - 1; i >= 2; --i) {
    const size_t p = static_cast<size_t>(model.links[i].parent_index);
    const double m = cmass[p] + cmass[i];
    const Vector3 com = (cmass[p] * ccom[p] + cmass[i] * ccom[i]) / m;
    cinertia[p] = cinertia[p] + shift(cmass[p], ccom[p] - com) + cinertia[i] + shift(cmass[i], ccom[i] - com);
    ccom[p] = com;
    cmass[p] = m;
  }

  MatrixX mass = MatrixX::Zero(model.dof(), model.dof());
  for (size_t j = 1; j < n; ++j) {
    const int col0 = 3 * (static_cast<int>(j) - 1);
    for (int l = 0; l < 3; ++l) {
      const Vector3 axis = pose.axes[j].col(l);
      const Vector3 f_lin = cmass[j] * axis.cross(ccom[j] - pose.origin[j]);
      const Vector3 n_com = cinertia[j] * axis;
      // Torque felt at every ancestor joint axis (fills the upper triangle).
      for (size_t i = j; i >= 1; i = static_cast<size_t>(model.links[i].parent_index)) {
        const int row0 = 3 * (static_cast<int>(i) - 1);
        const Vector3 total = n_com + (ccom[j] - pose.origin[i]).cross(f_lin);
        for (int k = 0; k < 3; ++k) {
          const int row = row0 + k, col = col0 + l;
          if (row <= col) mass(row, col) = pose.axes[i].col(k).dot(total);
        }
        if (i == 1) break;
      }
    }
  }
  mass = mass.selfadjointView<Eigen::Upper>();
  return mass;
}

VectorX spring_torques(const SpineModel& model, const GeneralizedState& state) {
  VectorX tau(model.dof());
  for (int i = 0; i < model.movable_count(); ++i) {
    const auto& s = model.springs[static_cast<size_t>(i)];
    const int d = 3 * i;
    for (int k = 0; k < 3; ++k)
      tau[d + k] = -s.stiffness[k] * (state.q[d + k] - s.rest_angle[k]) - s.damping[k] * state.qdot[d + k];
  }
  return tau;
}

namespace {

void muscle_link_span(const muscle::Muscle& m, int& lo, int& hi) {
  lo = std::numeric_limits<int>::max();
  hi = std::numeric_limits<int>::min();
  for (const auto& ap : m.path.via_points) {
    lo = std::min(lo, ap.link);
    hi = std::max(hi, ap.link);
  }
}

// Position-only kinematics with cached per-joint rotations, so perturbing
// one joint only recomposes the links at and below it.
struct PosePositions {
  std::vector<Matrix3> joint_rotation;
  std::vector<Matrix3> rotation;
  std::vector<Vector3> origin;

  void resize(size_t n) {
    joint_rotation.resize(n);
    rotation.resize(n);
    origin.resize(n);
  }
};

void refresh_joint_rotation(const Eigen::Ref<const VectorX>& q, int link, PosePositions& pp) {
  const int d = 3 * (link - 1);
  pp.joint_rotation[static_cast<size_t>(link)] = rot_x(q[d]) * rot_y(q[d + 1]) * rot_z(q[d + 2]);
}

void compose_from(const SpineModel& model, int start, PosePositions& pp) {
  for (size_t i = static_cast<size_t>(start); i < model.links.size(); ++i) {
    const size_t p = static_cast<size_t>(model.links[i].parent_index);
    pp.rotation[i] = pp.rotation[p] * pp.joint_rotation[i];
    pp.origin[i] = pp.origin[p] + pp.rotation[p] * model.links[i].joint_origin;
  }
}

void compute_positions(const SpineModel& model, const Eigen::Ref<const VectorX>& q,
                       PosePositions& pp) {
  pp.resize(model.links.size());
  pp.rotation[0] = Matrix3::Identity();
  pp.origin[0] = Vector3::Zero();
  for (int i = 1; i < static_cast<int>(model.links.size()); ++i) refresh_joint_rotation(q, i, pp);
  compose_from(model, 1, pp);
}

double path_length_positions(const muscle::MusclePath& path, const PosePositions& pp) {
  double length = 0.0;
  const auto& first = path.via_points[0];
  Vector3 prev = pp.origin[static_cast<size_t>(first.link)] +
                 pp.rotation[static_cast<size_t>(first.link)] * first.point;
  for (size_t i = 1; i < path.via_points.size(); ++i) {
    const auto& a = path.via_points[i];
    const Vector3 p =
        pp.origin[static_cast<size_t>(a.link)] + pp.rotation[static_cast<size_t>(a.link)] * a.point;
    length += (p - prev).norm();
    prev = p;
  }
  return length;
}

}  // namespace

MatrixX moment_arm_matrix(const SpineModel& model, const std::vector<muscle::Muscle>& muscles,
                          const Eigen::Ref<const VectorX>& q) {
  constexpr double h = 1e-5;
  const int dof = model.dof();
  const int nm = static_cast<int>(muscles.size());
  MatrixX arms = MatrixX::Zero(dof, nm);

  std::vector<std::pair<int, int>> span(muscles.size());
  for (size_t j = 0; j < muscles.size(); ++j) muscle_link_span(muscles[j], span[j].first, span[j].second);

  PosePositions pp;
  compute_positions(model, q, pp);

  VectorX qp = q;
  std::vector<double> len_plus(muscles.size());
  for (int k = 0; k < dof; ++k) {
    const int link = k / 3 + 1;
    bool any = false;
    for (size_t j = 0; j < muscles.size(); ++j)
      if (span[j].first < link && link <= span[j].second) { any = true; break; }
    if (!any) continue;

    qp[k] = q[k] + h;
    refresh_joint_rotation(qp, link, pp);
    compose_from(model, link, pp);
    for (int j = 0; j < nm; ++j) {
      const auto& sj = span[static_cast<size_t>(j)];
      if (sj.first < link && link <= sj.second)
        len_plus[static_cast<size_t>(j)] = path_length_positions(muscles[static_cast<size_t>(j)].path, pp);
    }

    qp[k] = q[k] - h;
    refresh_joint_rotation(qp, link, pp);
    compose_from(model, link, pp);
    for (int j = 0; j < nm; ++j) {
      const auto& sj = span[static_cast<size_t>(j)];
      if (!(sj.first < link && link <= sj.second)) continue;
      const double lm = path_length_positions(muscles[static_cast<size_t>(j)].path, pp);
      arms(k, j) = -(len_plus[static_cast<size_t>(j)] - lm) / (2.0 * h);
    }

    qp[k] = q[k];
    refresh_joint_rotation(qp, link, pp);
    compose_from(model, link, pp);
  }
  return arms;
}

VectorX wrench_torques(const SpineModel& model, const KinematicPose& pose,
                       const std::vector<Wrench>& wrenches) {
  VectorX tau = VectorX::Zero(model.dof());
  for (const auto& w : wrenches) {
    if (w.link <= 0 || w.link >= static_cast<int>(model.links.size()))
      throw DataError("wrench applied to invalid link");
    const Vector3 point = point_position(pose, w.link, w.point_local);
    // Propagate through every joint on the path from the link to the base.
    for (int i = w.link; i >= 1; i = model.links[static_cast<size_t>(i)].parent_index) {
      const size_t li = static_cast<size_t>(i);
      const int d = 3 * (i - 1);
      const Vector3 m_about_joint = w.torque + (point - pose.origin[li]).cross(w.force);
      tau.segment<3>(d) += pose.axes[li].transpose() * m_about_joint;
    }
  }
  return tau;
}

GeneralizedState step_dynamics(const SpineModel& model, const GeneralizedState& state,
                               const std::vector<muscle::Muscle>& muscles,
                               const Eigen::Ref<const VectorX>& muscle_forces,
                               const std::vector<Wrench>& external, double dt,
                               StepWorkspace& ws) {
  if (!(dt > 0.0) || dt > 1e-3) throw std::invalid_argument("dt must be in (0, 1 ms]");
  if (muscle_forces.size() != static_cast<Eigen::Index>(muscles.size()))
    throw std::invalid_argument("muscle force vector size mismatch");
  if (muscle_forces.size() > 0 && muscle_forces.minCoeff() < -1e-9)
    throw std::invalid_argument("muscle forces must be non-negative (tension only)");

  ws.tau = spring_torques(model, state) - bias_forces(model, state);
  if (!muscles.empty()) {
    ws.moment_arms = moment_arm_matrix(model, muscles, state.q);
    ws.tau += ws.moment_arms * muscle_forces;
  }
  if (!external.empty()) {
    forward_kinematics(model, state.q, ws.pose);
    ws.tau += wrench_torques(model, ws.pose, external);
  }

  ws.mass = mass_matrix(model, state.q);
  // Joint damping is handled implicitly: with qdot_new = qdot + dt qdd and
  // damping torque -D qdot_new, the solve becomes (M + dt D) qdd = tau(qdot).
  // This keeps stiff per-axis damping stable at the fixed 0.25 ms step.
  for (int i = 0; i < model.movable_count(); ++i)
    for (int k = 0; k < 3; ++k)
      ws.mass(3 * i + k, 3 * i + k) += dt * model.springs[static_cast<size_t>(i)].damping[k];
  ws.solver.compute(ws.mass);
  const VectorX& diag = ws.solver.vectorD();
  if (ws.solver.info() != Eigen::Success || !ws.solver.isPositive() ||
      diag.minCoeff() <= 1e-16 * std::max(1.0, diag.maxCoeff()))
    throw DataError("singular mass matrix");

  GeneralizedState next(model.dof());
  const VectorX qddot = ws.solver.solve(ws.tau);
  next.qdot = state.qdot + dt * qddot;
  next.q = state.q + dt * next.qdot;
  for (int k = 0; k < model.dof(); ++k) {
    if (next.q[k] < model.limit_lower[k]) {
      next.q[k] = model.limit_lower[k];
      next.qdot[k] = 0.0;
    } else if (next.q[k] > model.limit_upper[k]) {
      next.q[k] = model.limit_upper[k];
      next.qdot[k] = 0.0;
    }
  }
  return next;
}

GeneralizedState step_dynamics(const SpineModel& model, const GeneralizedState& state,
                               const std::vector<muscle::Muscle>& muscles,
                               const Eigen::Ref<const VectorX>& muscle_forces,
                               const std::vector<Wrench>& external, double dt) {
  StepWorkspace ws;
  return step_dynamics(model, state, muscles, muscle_forces, external, dt, ws);
}

double kinetic_energy(const SpineModel& model, const GeneralizedState& state) {
  const KinematicPose pose = forward_kinematics(model, state.q);
  const auto motion = link_motion(model, pose, state.qdot);
  double ke = 0.0;
  for (size_t i = 1; i < model.links.size(); ++i) {
    const auto& link = model.links[i];
    const Vector3 v_com = motion[i].v_origin + motion[i].omega.cross(pose.rotation[i] * link.com_offset);
    const Matrix3 inertia_w = pose.rotation[i] * link.inertia * pose.rotation[i].transpose();
    ke += 0.5 * link.mass * v_com.squaredNorm() + 0.5 * motion[i].omega.dot(inertia_w * motion[i].omega);
  }
  return ke;
}

double mechanical_energy(const SpineModel& model, const GeneralizedState& state) {
  const KinematicPose pose = forward_kinematics(model, state.q);
  double energy = kinetic_energy(model, state);
  for (size_t i = 1; i < model.links.size(); ++i)
    energy -= model.links[i].mass * model.gravity.dot(pose.com[i]);
  for (int i = 0; i < model.movable_count(); ++i) {
    const auto& s = model.springs[static_cast<size_t>(i)];
    const Vector3 dq = state.q.segment<3>(3 * i) - s.rest_angle;
    energy += 0.5 * s.stiffness.dot(dq.cwiseProduct(dq));
  }
  return energy;
}

}  // namespace facehn::multibody
