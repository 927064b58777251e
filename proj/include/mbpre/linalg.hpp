#pragma once

#include <Eigen/Dense>

namespace mbpre {

// Number of particle types is bounded so that vectors and matrices live on
// the stack inside the Monte Carlo inner loops.
inline constexpr int kMaxTypes = 8;

using Vector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxTypes, 1>;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor,
                             kMaxTypes, kMaxTypes>;

// |x| = sum |x_i|
inline double l1(const Vector& v) { return v.cwiseAbs().sum(); }

// |A| = sum |A(i,j)|
inline double l1(const Matrix& m) { return m.cwiseAbs().sum(); }

// Row vector x times matrix A, returned as a column vector.
inline Vector row_times(const Vector& x, const Matrix& a) { return a.transpose() * x; }

inline Vector ones(int p) { return Vector::Ones(p); }

inline bool in_unit_cube(const Vector& s) {
  for (int i = 0; i < s.size(); ++i)
    if (!(s[i] >= 0.0 && s[i] <= 1.0)) return false;
  return true;
}

}  // namespace mbpre
