#pragma once

#include <Eigen/Dense>

#include <array>
#include <string>
#include <string_view>

namespace rtirl {

/// Learnable NMPC parameters. Costs are quadratic forms around the
/// reference point (x_s, u_s):
///   initial   p'B_lambda p + b_lambda'p + c_lambda,  p = x0 - x_s
///   terminal  p'B_vf p + b_vf'p,                      p = xN - x_s
///   stage     q'B_l q + b_l'q,                        q = (x - x_s, u - u_s)
/// The prediction model is the nominal model plus the offset c_f and the
/// state bounds are [x_l, x_u].
struct ThetaVector {
  Eigen::Matrix2d B_lambda = Eigen::Matrix2d::Zero();
  Eigen::Vector2d b_lambda = Eigen::Vector2d::Zero();
  double c_lambda = 0.0;
  Eigen::Matrix2d B_vf = Eigen::Matrix2d::Identity();
  Eigen::Vector2d b_vf = Eigen::Vector2d::Zero();
  Eigen::Matrix4d B_l = Eigen::Matrix4d::Identity();
  Eigen::Vector4d b_l = Eigen::Vector4d::Zero();
  Eigen::Vector2d c_f = Eigen::Vector2d::Zero();
  Eigen::Vector2d x_l{25.0, 40.0};
  Eigen::Vector2d x_u{100.0, 80.0};

  /// Number of packed coordinates (symmetric blocks store the upper triangle).
  static constexpr int kSize = 31;

  /// Offsets of each block inside the packed vector.
  struct Offsets {
    static constexpr int B_lambda = 0;
    static constexpr int b_lambda = 3;
    static constexpr int c_lambda = 5;
    static constexpr int B_vf = 6;
    static constexpr int b_vf = 9;
    static constexpr int B_l = 11;
    static constexpr int b_l = 21;
    static constexpr int c_f = 25;
    static constexpr int x_l = 27;
    static constexpr int x_u = 29;
  };

  using Packed = Eigen::Matrix<double, kSize, 1>;

  Packed pack() const;
  static ThetaVector unpack(const Packed& v);

  /// Coordinate names, e.g. "B_l_12" (1-based row/column), "c_lambda", "x_u_2".
  static const std::array<std::string, kSize>& names();

  /// Throws std::invalid_argument when the invariants do not hold:
  /// finite entries, symmetric blocks, B_vf and B_l >= eps I, x_l < x_u.
  void validate(double eps = 1e-6) const;

  /// The untrained controller: identity stage and terminal Hessians,
  /// c_lambda equal to the steady-state stage cost, nominal bounds.
  static ThetaVector naive(double steady_state_cost);

  bool operator==(const ThetaVector& other) const { return pack() == other.pack(); }
};

constexpr double kThetaEigenFloor = 1e-6;

/// Replaces B_l and B_vf by their Frobenius-nearest symmetric matrices with
/// eigenvalues >= eps. Everything else passes through.
ThetaVector project_theta(const ThetaVector& raw, double eps = kThetaEigenFloor);

/// Nearest symmetric matrix with spectrum clipped from below at eps.
Eigen::MatrixXd clip_spectrum(const Eigen::MatrixXd& m, double eps);

/// Writes "name value" lines with round-trip exact formatting.
void save_theta(const ThetaVector& theta, const std::string& path);
ThetaVector load_theta(const std::string& path);
std::string theta_to_text(const ThetaVector& theta);
ThetaVector theta_from_text(std::string_view text);

}  // namespace rtirl
