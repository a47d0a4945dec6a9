#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace voices
{

// Points are stored one per row, so row-major keeps each point contiguous.
template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Points = RowMatrix<double>;
using Index = Eigen::Index;

/// Cluster id reserved for rows a density-based clusterer leaves unassigned.
inline constexpr int kNoise = -1;

/// Malformed or inconsistent input data.
class DataError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// A result that exists but cannot be scored (fewer than two clusters, all noise).
class DegenerateError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration value; the message carries the offending path.
class ConfigError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

struct RowKey
{
  std::string annotator_id;
  std::string item_id;

  friend bool operator==(const RowKey&, const RowKey&) = default;
  friend auto operator<=>(const RowKey&, const RowKey&) = default;
};

}  // namespace voices
