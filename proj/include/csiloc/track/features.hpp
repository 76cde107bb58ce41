#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "csiloc/geometry.hpp"

namespace csiloc::track {

inline constexpr std::uint16_t kFeatureVersion = 1;
inline constexpr std::uint16_t kTrajectoryVersion = 1;

/// CNN feature vectors with the metadata of the image each came from.
struct FeatureMatrix {
  std::size_t dim = 0;
  std::vector<double> values;  // row-major, rows x dim
  std::vector<std::int32_t> rp_index;
  std::vector<Point2> location;
  std::vector<double> time;

  std::size_t rows() const { return rp_index.size(); }
  std::span<const double> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
  void append(std::span<const double> feature, std::int32_t rp, Point2 where, double when);
  /// Row indices per RP (dense 0..max RP), each in file order.
  std::vector<std::vector<std::uint64_t>> rows_by_rp() const;
};

// Layout (little-endian):
//   "FEAT" | u16 version | u32 dim | u64 rows
//   per row: i32 rp_index | f64 x | f64 y | f64 time | f64 feature[dim]
void write_features(std::ostream& out, const FeatureMatrix& m);
FeatureMatrix read_features(std::istream& in, const std::string& name);
void save_features(const std::filesystem::path& path, const FeatureMatrix& m);
FeatureMatrix load_features(const std::filesystem::path& path);

/// T steps, each naming an RP and the feature-matrix row used for it.
struct Trajectory {
  std::vector<std::uint32_t> rp;
  std::vector<std::uint64_t> row;
};

struct TrajectorySet {
  std::uint32_t steps = 0;
  std::vector<Trajectory> trajectories;

  /// Throws InputError if any trajectory has a length other than `steps`.
  void validate() const;
};

// Layout (little-endian):
//   "TRAJ" | u16 version | u32 T | u32 count
//   per trajectory, per step: u32 rp | u64 feature_row
void write_trajectories(std::ostream& out, const TrajectorySet& set);
TrajectorySet read_trajectories(std::istream& in, const std::string& name);
void save_trajectories(const std::filesystem::path& path, const TrajectorySet& set);
TrajectorySet load_trajectories(const std::filesystem::path& path);

}  // namespace csiloc::track
