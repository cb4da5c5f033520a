#pragma once

#include <Eigen/Dense>

#include <array>
#include <stdexcept>
#include <string>

namespace facehn {

using Scalar = double;
using Vector3 = Eigen::Vector3d;
using Matrix3 = Eigen::Matrix3d;
using VectorX = Eigen::VectorXd;
using MatrixX = Eigen::MatrixXd;

inline constexpr int kAuCount = 17;
inline constexpr int kFaceMuscleCount = 52;
inline constexpr int kActivationCount = 56;  // 52 muscles + rotation/slide/twist/auxiliary

using AuVector = Eigen::Matrix<double, kAuCount, 1>;

/// The fixed AU column order shared by the dataset format, the AU oracle
/// and the external CSV bridge. Index i of any 17-vector refers to this AU.
inline constexpr std::array<const char*, kAuCount> kAuNames = {
    "AU01_r", "AU02_r", "AU04_r", "AU05_r", "AU06_r", "AU07_r", "AU09_r",
    "AU10_r", "AU12_r", "AU14_r", "AU15_r", "AU17_r", "AU20_r", "AU23_r",
    "AU25_r", "AU26_r", "AU45_r"};

enum class AuScale { Raw, Normalized };

/// 17 AU intensities plus the scale they are expressed in (raw estimator
/// output, nominally 0-5, or min-max normalized to [0,1]).
struct ActionUnits {
  AuVector values = AuVector::Zero();
  AuScale scale = AuScale::Raw;
};

/// Normalized mandible controls. rotation opens the jaw, slide protrudes,
/// twist yaws; 0.5 is neutral for slide and twist.
struct JawState {
  double rotation = 0.0;
  double slide = 0.5;
  double twist = 0.5;
};

/// 52 facial muscle activations plus the four jaw/auxiliary outputs, all
/// constrained to [0,1]. Layout matches the network output layer.
struct Activations {
  VectorX muscles = VectorX::Zero(kFaceMuscleCount);
  double jaw_rotation = 0.0;
  double jaw_slide = 0.5;
  double jaw_twist = 0.5;
  double auxiliary = 0.5;

  JawState jaw() const { return JawState{jaw_rotation, jaw_slide, jaw_twist}; }

  Eigen::Matrix<double, kActivationCount, 1> to_vector() const {
    Eigen::Matrix<double, kActivationCount, 1> v;
    v.head(kFaceMuscleCount) = muscles;
    v[52] = jaw_rotation;
    v[53] = jaw_slide;
    v[54] = jaw_twist;
    v[55] = auxiliary;
    return v;
  }

  static Activations from_vector(const Eigen::Ref<const VectorX>& v) {
    if (v.size() != kActivationCount)
      throw std::invalid_argument("activation vector must have 56 entries");
    Activations a;
    a.muscles = v.head(kFaceMuscleCount);
    a.jaw_rotation = v[52];
    a.jaw_slide = v[53];
    a.jaw_twist = v[54];
    a.auxiliary = v[55];
    return a;
  }
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace facehn
