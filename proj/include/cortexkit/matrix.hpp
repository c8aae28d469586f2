#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace cortexkit {

/// Dense row-major matrix of doubles. Rows are samples, columns are features.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic, Eigen::RowMajor>;

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

double distance(Point2 a, Point2 b);

/// All randomness in the library flows through this engine.
using Rng = std::mt19937_64;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

std::string shape_str(const Matrix& m);

/// Throws DimensionError with `what` prefixed when the condition fails.
void require_dims(bool ok, const std::string& what);

/// Row index of the largest element in each row; ties resolve to the lowest index.
std::vector<int> argmax_rows(const Matrix& m);

/// One-hot encoding of integer labels in [0, classes).
Matrix one_hot(const std::vector<int>& labels, int classes);

/// Rows `idx` of `src`, in order.
Matrix gather_rows(const Matrix& src, const std::vector<std::size_t>& idx);

/// Exact bitwise comparison of shape and contents.
bool bit_equal(const Matrix& a, const Matrix& b);

// Portable draws: the std distributions are implementation-defined, these are not.
double uniform01(Rng& rng);
double uniform(Rng& rng, double lo, double hi);
double standard_normal(Rng& rng);
std::size_t uniform_index(Rng& rng, std::size_t n);

}  // namespace cortexkit
