#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <vector>

namespace rcn {

// 2D point in normalized coordinates. The image frame is [-1,1]^2 with x
// rightward and y downward; values outside that square are legal (they mark
// fiducials that left the frame).
struct Point2 {
  double x = 0.0;
  double y = 0.0;

  Point2 operator+(Point2 o) const { return {x + o.x, y + o.y}; }
  Point2 operator-(Point2 o) const { return {x - o.x, y - o.y}; }
  Point2 operator*(double s) const { return {x * s, y * s}; }
  double norm() const { return std::hypot(x, y); }
};

inline double distance(Point2 a, Point2 b) { return (a - b).norm(); }

// Ordered fiducial points: indices 0..K/2-1 are the top row left-to-right,
// K/2..K-1 the bottom row left-to-right.
struct FiducialSet {
  std::vector<Point2> points;

  int K() const { return static_cast<int>(points.size()); }

  // Throws InvalidArgumentError / SingularSystemError on violated invariants
  // (K even, 4 <= K <= 64, finite, pairwise distance > 1e-9).
  void validate() const;
  bool is_valid() const;
};

// K/2 points evenly spaced along the top border and K/2 along the bottom,
// inset by `margin` (margin is a fraction of the half-frame, in [0, 0.5)).
FiducialSet base_fiducials(int K, double margin = 0.0);

// TPS radial kernel r^2 ln r, continuously extended with phi(0) = 0.
inline double phi(double r) { return r > 0.0 ? r * r * std::log(r) : 0.0; }

struct TpsSystem {
  Eigen::MatrixXd delta;      // (K+3) x (K+3)
  Eigen::MatrixXd delta_inv;  // cached inverse
};

// Builds the TPS system matrix for base points C. Row layout: [ones; C;
// kernel block | ones | C^T], so column j (j < K) is the lifted basis vector
// of c_j. Throws SingularSystemError when the estimated condition number
// exceeds 1e12.
TpsSystem build_system(const FiducialSet& C);

// Maximum condition number accepted by build_system.
inline constexpr double kMaxConditionNumber = 1e12;

struct TpsTransform {
  FiducialSet base;                               // the constant C
  Eigen::Matrix<double, 2, Eigen::Dynamic> params;  // 2 x (K+3), basis order [1, x, y, phi_1..phi_K]
  Eigen::MatrixXd delta_inv;                      // cached inverse of the system matrix
};

// Solves T = [C' 0] * Delta_C^{-1}; the resulting map interpolates
// c_j -> c'_j exactly.
TpsTransform estimate_tps(const FiducialSet& C, const FiducialSet& C_prime);

// Lifted basis vector [1, p.x, p.y, phi(|p-c_1|), ..., phi(|p-c_K|)].
Eigen::VectorXd lifted_basis(const FiducialSet& C, Point2 p);

// Evaluates the TPS map at p (defined everywhere, including outside the frame).
Point2 map_point(const TpsTransform& T, Point2 p);

// Analytic 2x2 Jacobian of map_point at p, with the one-sided limit
// d phi/dp -> 0 as p approaches a base point.
Eigen::Matrix2d map_jacobian(const TpsTransform& T, Point2 p);

struct InversionResult {
  Point2 point;
  int iterations = 0;
};

// Newton inversion of map_point: finds p with |map_point(T,p) - p_prime| <=
// 1e-9, seeded at `init` (default p_prime), at most 50 iterations. Throws
// NoConvergenceError on stagnation or a near-singular Jacobian.
InversionResult invert_map_detailed(const TpsTransform& T, Point2 p_prime,
                                    std::optional<Point2> init = std::nullopt);
Point2 invert_map(const TpsTransform& T, Point2 p_prime,
                  std::optional<Point2> init = std::nullopt);

inline constexpr int kNewtonMaxIterations = 50;
inline constexpr double kNewtonTolerance = 1e-9;

}  // namespace rcn
