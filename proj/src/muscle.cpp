#include "facehn/muscle.hpp"

#include <algorithm>
#include <cmath>

namespace facehn::muscle {

Vector3 attachment_position(const Attachment& a, const PoseContext& ctx) {
  if (a.link >= 0) {
    if (!ctx.pose || a.link >= static_cast<int>(ctx.pose->origin.size()))
      throw DataError("unresolvable bone attachment");
    return multibody::point_position(*ctx.pose, a.link, a.point);
  }
  if (a.fascia_node >= 0) {
    if (!ctx.node_positions || a.fascia_node >= static_cast<int>(ctx.node_positions->size()))
      throw DataError("unresolvable fascia attachment");
    return (*ctx.node_positions)[static_cast<size_t>(a.fascia_node)];
  }
  throw DataError("attachment bound to neither link nor node");
}

Vector3 attachment_velocity(const Attachment& a, const PoseContext& ctx) {
  if (a.link >= 0) {
    if (!ctx.motion) return Vector3::Zero();
    return multibody::point_velocity(*ctx.pose, *ctx.motion, a.link, a.point);
  }
  if (a.fascia_node >= 0 && ctx.node_velocities)
    return (*ctx.node_velocities)[static_cast<size_t>(a.fascia_node)];
  return Vector3::Zero();
}

double path_length(const MusclePath& path, const multibody::KinematicPose& pose) {
  double length = 0.0;
  Vector3 prev = multibody::point_position(pose, path.via_points[0].link, path.via_points[0].point);
  for (size_t i = 1; i < path.via_points.size(); ++i) {
    const auto& a = path.via_points[i];
    const Vector3 p = multibody::point_position(pose, a.link, a.point);
    length += (p - prev).norm();
    prev = p;
  }
  return length;
}

std::pair<double, double> muscle_geometry(const MusclePath& path, const PoseContext& ctx) {
  if (path.via_points.size() < 2) throw DataError("muscle path needs at least 2 via points");
  double length = 0.0, rate = 0.0;
  Vector3 prev_p = attachment_position(path.via_points[0], ctx);
  Vector3 prev_v = attachment_velocity(path.via_points[0], ctx);
  for (size_t i = 1; i < path.via_points.size(); ++i) {
    const Vector3 p = attachment_position(path.via_points[i], ctx);
    const Vector3 v = attachment_velocity(path.via_points[i], ctx);
    const Vector3 d = p - prev_p;
    const double seg = d.norm();
    length += seg;
    if (seg > 1e-12) rate += d.dot(v - prev_v) / seg;
    prev_p = p;
    prev_v = v;
  }
  return {length, rate};
}

MuscleState make_state(const HillParams& params, double length, double length_rate,
                       double activation) {
  MuscleState s;
  s.length = length;
  s.length_rate = length_rate;
  s.strain = (length - params.rest_length) / params.rest_length;
  s.strain_rate = length_rate / params.rest_length;
  s.activation = std::clamp(activation, 0.0, 1.0);
  return s;
}

double passive_force(const HillParams& params, const MuscleState& state) {
  const double f = params.passive_stiffness * (std::exp(params.passive_shape * state.strain) - 1.0) +
                   params.passive_damping * state.strain_rate;
  return std::max(0.0, f);
}

double force_length(const HillParams& params, double length) {
  return std::max(0.0, params.max_stiffness * (length - params.threshold_length));
}

double force_velocity(const HillParams& params, double length_rate) {
  return std::max(0.0, 1.0 + std::min(length_rate, 0.0) / params.max_velocity);
}

double contractile_force(const HillParams& params, const MuscleState& state) {
  return state.activation * force_length(params, state.length) *
         force_velocity(params, state.length_rate);
}

VectorX total_forces(const std::vector<Muscle>& muscles, const PoseContext& ctx) {
  VectorX forces(static_cast<Eigen::Index>(muscles.size()));
  for (size_t i = 0; i < muscles.size(); ++i) {
    const auto& m = muscles[i];
    const auto [length, rate] = muscle_geometry(m.path, ctx);
    const MuscleState s = make_state(m.params, length, rate, m.activation);
    forces[static_cast<Eigen::Index>(i)] = passive_force(m.params, s) + contractile_force(m.params, s);
  }
  return forces;
}

namespace {

int link_index_by_name(const multibody::SpineModel& model, const std::string& name) {
  for (size_t i = 0; i < model.links.size(); ++i)
    if (model.links[i].name == name) return static_cast<int>(i);
  throw ConfigError("muscle attachment references unknown link '" + name + "'");
}

Vector3 json_vec3(const io::Json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("expected 3-vector in muscle document");
  return Vector3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

}  // namespace

std::vector<Muscle> parse_muscles(const io::Json& doc, const multibody::SpineModel& model) {
  if (!doc.contains("muscles") || !doc.at("muscles").is_array())
    throw ConfigError("muscle document has no muscles array");

  const multibody::KinematicPose rest_pose =
      multibody::forward_kinematics(model, VectorX::Zero(model.dof()));

  std::vector<Muscle> muscles;
  for (const auto& jm : doc.at("muscles")) {
    Muscle m;
    m.name = jm.at("name").get<std::string>();
    for (const auto& jp : jm.at("path")) {
      Attachment a;
      a.link = link_index_by_name(model, jp.at("link").get<std::string>());
      a.point = json_vec3(jp.at("point"));
      m.path.via_points.push_back(a);
    }
    if (m.path.via_points.size() < 2)
      throw ConfigError("muscle '" + m.name + "' needs at least 2 via points");

    const double rest = path_length(m.path, rest_pose);
    if (rest <= 0.0) throw ConfigError("muscle '" + m.name + "' has zero rest length");

    const auto& jp = jm.at("params");
    m.params.passive_stiffness = jp.at("passive_stiffness").get<double>();
    m.params.passive_shape = jp.at("passive_shape").get<double>();
    m.params.passive_damping = jp.at("passive_damping").get<double>();
    m.params.max_stiffness = jp.at("max_stiffness").get<double>();
    m.params.max_velocity = jp.at("max_velocity").get<double>();
    if (jp.contains("rest_length")) {
      const auto& rl = jp.at("rest_length");
      m.params.rest_length = rl.is_string() ? rest : rl.get<double>();
    } else {
      m.params.rest_length = rest;
    }
    if (jp.contains("threshold_length"))
      m.params.threshold_length = jp.at("threshold_length").get<double>();
    else
      m.params.threshold_length = jp.value("threshold_ratio", 0.85) * m.params.rest_length;

    if (m.params.passive_stiffness <= 0 || m.params.passive_shape <= 0 ||
        m.params.passive_damping <= 0 || m.params.max_stiffness <= 0 ||
        m.params.max_velocity <= 0 || m.params.rest_length <= 0)
      throw ConfigError("muscle '" + m.name + "' has non-positive Hill parameters");
    muscles.push_back(std::move(m));
  }
  return muscles;
}

std::vector<Muscle> load_muscles(const std::filesystem::path& path,
                                 const multibody::SpineModel& model) {
  return parse_muscles(io::load_json(path), model);
}

}  // namespace facehn::muscle
