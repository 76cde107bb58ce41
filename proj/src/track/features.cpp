#include "csiloc/track/features.hpp"

#include <algorithm>
#include <fstream>

#include "csiloc/binary_io.hpp"
#include "csiloc/error.hpp"

namespace csiloc::track {

void FeatureMatrix::append(std::span<const double> feature, std::int32_t rp, Point2 where, double when) {
  if (dim == 0 && rows() == 0) dim = feature.size();
  if (feature.size() != dim)
    throw InputError("feature length " + std::to_string(feature.size()) + " does not match matrix width " +
                     std::to_string(dim));
  values.insert(values.end(), feature.begin(), feature.end());
  rp_index.push_back(rp);
  location.push_back(where);
  time.push_back(when);
}

std::vector<std::vector<std::uint64_t>> FeatureMatrix::rows_by_rp() const {
  std::int32_t max_rp = -1;
  for (auto r : rp_index) max_rp = std::max(max_rp, r);
  std::vector<std::vector<std::uint64_t>> out(static_cast<std::size_t>(max_rp + 1));
  for (std::size_t i = 0; i < rows(); ++i)
    if (rp_index[i] >= 0) out[static_cast<std::size_t>(rp_index[i])].push_back(i);
  return out;
}

void write_features(std::ostream& out, const FeatureMatrix& m) {
  io::write_magic(out, "FEAT");
  io::write_pod<std::uint16_t>(out, kFeatureVersion);
  io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(m.dim));
  io::write_pod<std::uint64_t>(out, m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    io::write_pod<std::int32_t>(out, m.rp_index[i]);
    io::write_pod<double>(out, m.location[i].x);
    io::write_pod<double>(out, m.location[i].y);
    io::write_pod<double>(out, m.time[i]);
    io::write_array<double>(out, m.row(i));
  }
}

FeatureMatrix read_features(std::istream& in, const std::string& name) {
  io::expect_magic(in, "FEAT", name);
  const auto version = io::read_pod<std::uint16_t>(in, "feature version");
  if (version != kFeatureVersion) throw DataError(name + ": unsupported feature file version " + std::to_string(version));
  FeatureMatrix m;
  m.dim = io::read_pod<std::uint32_t>(in, "feature dim");
  const auto rows = io::read_pod<std::uint64_t>(in, "feature row count");
  if (m.dim == 0 && rows > 0) throw DataError(name + ": field 'dim' is zero");
  std::vector<double> buf(m.dim);
  for (std::uint64_t i = 0; i < rows; ++i) {
    const auto rp = io::read_pod<std::int32_t>(in, "feature rp_index");
    const double x = io::read_pod<double>(in, "feature x");
    const double y = io::read_pod<double>(in, "feature y");
    const double t = io::read_pod<double>(in, "feature time");
    io::read_array<double>(in, buf, "feature values");
    m.append(buf, rp, {x, y}, t);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw DataError(name + ": trailing bytes after last feature row");
  return m;
}

void save_features(const std::filesystem::path& path, const FeatureMatrix& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  write_features(out, m);
  if (!out) throw DataError(path.string() + ": write failed");
}

FeatureMatrix load_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open feature file");
  return read_features(in, path.string());
}

void TrajectorySet::validate() const {
  if (steps == 0) throw InputError("trajectory length T must be at least 1");
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const auto& t = trajectories[i];
    if (t.rp.size() != steps || t.row.size() != steps)
      throw InputError("trajectory " + std::to_string(i) + " has " + std::to_string(t.rp.size()) + " steps, expected " +
                       std::to_string(steps));
  }
}

void write_trajectories(std::ostream& out, const TrajectorySet& set) {
  set.validate();
  io::write_magic(out, "TRAJ");
  io::write_pod<std::uint16_t>(out, kTrajectoryVersion);
  io::write_pod<std::uint32_t>(out, set.steps);
  io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(set.trajectories.size()));
  for (const auto& t : set.trajectories)
    for (std::size_t s = 0; s < set.steps; ++s) {
      io::write_pod<std::uint32_t>(out, t.rp[s]);
      io::write_pod<std::uint64_t>(out, t.row[s]);
    }
}

TrajectorySet read_trajectories(std::istream& in, const std::string& name) {
  io::expect_magic(in, "TRAJ", name);
  const auto version = io::read_pod<std::uint16_t>(in, "trajectory version");
  if (version != kTrajectoryVersion)
    throw DataError(name + ": unsupported trajectory file version " + std::to_string(version));
  TrajectorySet set;
  set.steps = io::read_pod<std::uint32_t>(in, "trajectory length");
  if (set.steps == 0) throw DataError(name + ": field 'T' is zero");
  const auto count = io::read_pod<std::uint32_t>(in, "trajectory count");
  set.trajectories.resize(count);
  for (auto& t : set.trajectories) {
    t.rp.resize(set.steps);
    t.row.resize(set.steps);
    for (std::size_t s = 0; s < set.steps; ++s) {
      t.rp[s] = io::read_pod<std::uint32_t>(in, "trajectory rp");
      t.row[s] = io::read_pod<std::uint64_t>(in, "trajectory feature row");
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw DataError(name + ": trailing bytes after last trajectory");
  return set;
}

void save_trajectories(const std::filesystem::path& path, const TrajectorySet& set) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  write_trajectories(out, set);
  if (!out) throw DataError(path.string() + ": write failed");
}

TrajectorySet load_trajectories(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open trajectory file");
  return read_trajectories(in, path.string());
}

}  // namespace csiloc::track
