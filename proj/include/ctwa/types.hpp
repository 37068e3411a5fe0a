#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctwa {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

/// Malformed or inconsistent user input (bad config field, invalid parameters).
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A numerical procedure could not deliver a trustworthy result
/// (non-Hurwitz matrix, unrealizable kernel, weight overflow, HEOM non-convergence).
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// File could not be read or written.
class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kPi = 3.14159265358979323846;

/// Uniform time grid [0, t_max] with n_times points.
std::vector<double> uniform_grid(double t_max, int n_times);

/// Maps grid times to integer step counts; every time must be a multiple of dt.
std::vector<long> grid_steps(const std::vector<double>& t_grid, double dt);

}  // namespace ctwa
