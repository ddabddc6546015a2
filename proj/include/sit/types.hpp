#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>

namespace sit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
/// One sample per row.
using Samples = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Class label; std::nullopt is the null (unconditional) token.
using ClassLabel = std::optional<int>;

enum class Prediction { Velocity, Score };

/// Serial reference path or the OpenMP kernel. Both must agree.
enum class Exec { Serial, Parallel };

} // namespace sit
