#include "rcn/geometry.hpp"

#include <cmath>
#include <string>

#include "rcn/errors.hpp"

namespace rcn {

namespace {

void check_pairwise_distinct(const std::vector<Point2>& pts) {
  const int n = static_cast<int>(pts.size());
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      if (distance(pts[a], pts[b]) <= 1e-9) {
        throw SingularSystemError("fiducial points " + std::to_string(a) +
                                  " and " + std::to_string(b) + " coincide");
      }
    }
  }
}

}  // namespace

void FiducialSet::validate() const {
  const int k = K();
  if (k < 4 || k % 2 != 0) {
    throw InvalidArgumentError("fiducial count must be even and >= 4, got " +
                               std::to_string(k));
  }
  if (k > 64) {
    throw InvalidArgumentError("fiducial count capped at 64, got " +
                               std::to_string(k));
  }
  for (const Point2& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw InvalidArgumentError("non-finite fiducial coordinate");
    }
  }
  check_pairwise_distinct(points);
}

bool FiducialSet::is_valid() const {
  try {
    validate();
    return true;
  } catch (const Error&) {
    return false;
  }
}

FiducialSet base_fiducials(int K, double margin) {
  if (K < 4 || K % 2 != 0 || K > 64) {
    throw InvalidArgumentError("K must be even, >= 4 and <= 64, got " +
                               std::to_string(K));
  }
  if (!(margin >= 0.0 && margin < 0.5)) {
    throw InvalidArgumentError("margin must lie in [0, 0.5), got " +
                               std::to_string(margin));
  }
  const int half = K / 2;
  const double lo = -1.0 + 2.0 * margin;
  const double hi = 1.0 - 2.0 * margin;
  FiducialSet out;
  out.points.reserve(K);
  for (int row = 0; row < 2; ++row) {
    const double y = row == 0 ? lo : hi;
    for (int i = 0; i < half; ++i) {
      const double x = half == 1 ? lo : lo + (hi - lo) * i / (half - 1);
      out.points.push_back({x, y});
    }
  }
  return out;
}

TpsSystem build_system(const FiducialSet& C) {
  C.validate();
  const int k = C.K();
  const int n = k + 3;
  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < k; ++j) {
    delta(0, j) = 1.0;
    delta(1, j) = C.points[j].x;
    delta(2, j) = C.points[j].y;
  }
  for (int a = 0; a < k; ++a) {
    for (int b = 0; b < k; ++b) {
      delta(3 + a, b) = phi(distance(C.points[a], C.points[b]));
    }
    delta(3 + a, k) = 1.0;
    delta(3 + a, k + 1) = C.points[a].x;
    delta(3 + a, k + 2) = C.points[a].y;
  }

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(delta);
  const double rcond = lu.rcond();
  if (!(rcond > 1.0 / kMaxConditionNumber)) {
    throw SingularSystemError("TPS system is ill-conditioned (rcond=" +
                              std::to_string(rcond) + ")");
  }
  TpsSystem sys;
  sys.delta = std::move(delta);
  sys.delta_inv = lu.inverse();
  return sys;
}

TpsTransform estimate_tps(const FiducialSet& C, const FiducialSet& C_prime) {
  if (C.K() != C_prime.K()) {
    throw InvalidArgumentError("fiducial count mismatch: " +
                               std::to_string(C.K()) + " vs " +
                               std::to_string(C_prime.K()));
  }
  C_prime.validate();
  TpsSystem sys = build_system(C);
  const int k = C.K();
  Eigen::Matrix<double, 2, Eigen::Dynamic> rhs(2, k + 3);
  rhs.setZero();
  for (int j = 0; j < k; ++j) {
    rhs(0, j) = C_prime.points[j].x;
    rhs(1, j) = C_prime.points[j].y;
  }
  TpsTransform t;
  t.base = C;
  t.params = rhs * sys.delta_inv;
  t.delta_inv = std::move(sys.delta_inv);
  return t;
}

Eigen::VectorXd lifted_basis(const FiducialSet& C, Point2 p) {
  const int k = C.K();
  Eigen::VectorXd v(k + 3);
  v(0) = 1.0;
  v(1) = p.x;
  v(2) = p.y;
  for (int j = 0; j < k; ++j) {
    v(3 + j) = phi(distance(p, C.points[j]));
  }
  return v;
}

Point2 map_point(const TpsTransform& T, Point2 p) {
  const int k = T.base.K();
  double out_x = T.params(0, 0) + T.params(0, 1) * p.x + T.params(0, 2) * p.y;
  double out_y = T.params(1, 0) + T.params(1, 1) * p.x + T.params(1, 2) * p.y;
  for (int j = 0; j < k; ++j) {
    const double ph = phi(distance(p, T.base.points[j]));
    out_x += T.params(0, 3 + j) * ph;
    out_y += T.params(1, 3 + j) * ph;
  }
  return {out_x, out_y};
}

Eigen::Matrix2d map_jacobian(const TpsTransform& T, Point2 p) {
  Eigen::Matrix2d jac;
  jac(0, 0) = T.params(0, 1);
  jac(0, 1) = T.params(0, 2);
  jac(1, 0) = T.params(1, 1);
  jac(1, 1) = T.params(1, 2);
  const int k = T.base.K();
  for (int j = 0; j < k; ++j) {
    const Point2 d = p - T.base.points[j];
    const double r = d.norm();
    if (r < 1e-300) continue;  // phi'(0) = 0 one-sided limit
    // d/dp [r^2 ln r] = (2 ln r + 1) * (p - c_j)
    const double f = 2.0 * std::log(r) + 1.0;
    jac(0, 0) += T.params(0, 3 + j) * f * d.x;
    jac(0, 1) += T.params(0, 3 + j) * f * d.y;
    jac(1, 0) += T.params(1, 3 + j) * f * d.x;
    jac(1, 1) += T.params(1, 3 + j) * f * d.y;
  }
  return jac;
}

InversionResult invert_map_detailed(const TpsTransform& T, Point2 p_prime,
                                    std::optional<Point2> init) {
  Point2 p = init.value_or(p_prime);
  for (int it = 1; it <= kNewtonMaxIterations; ++it) {
    const Point2 residual = map_point(T, p) - p_prime;
    if (residual.norm() <= kNewtonTolerance) {
      return {p, it - 1};
    }
    const Eigen::Matrix2d jac = map_jacobian(T, p);
    const double det = jac.determinant();
    if (std::abs(det) < 1e-12) {
      throw NoConvergenceError("Jacobian nearly singular during inversion");
    }
    const double sx = (jac(1, 1) * residual.x - jac(0, 1) * residual.y) / det;
    const double sy = (jac(0, 0) * residual.y - jac(1, 0) * residual.x) / det;
    p = {p.x - sx, p.y - sy};
  }
  if ((map_point(T, p) - p_prime).norm() <= kNewtonTolerance) {
    return {p, kNewtonMaxIterations};
  }
  throw NoConvergenceError("TPS inversion did not converge in " +
                           std::to_string(kNewtonMaxIterations) +
                           " iterations");
}

Point2 invert_map(const TpsTransform& T, Point2 p_prime,
                  std::optional<Point2> init) {
  return invert_map_detailed(T, p_prime, init).point;
}

}  // namespace rcn
