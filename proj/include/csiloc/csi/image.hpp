#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csiloc/geometry.hpp"

namespace csiloc::csi {

/// Image geometry of a capture device: scans (rows) x subcarriers x receive antennae.
struct DeviceProfile {
  std::uint16_t scans = 0;
  std::uint16_t subcarriers = 0;
  std::uint16_t antennae = 0;

  static DeviceProfile nic() { return {30, 30, 3}; }
  static DeviceProfile phone() { return {10, 47, 1}; }
  /// "nic" or "phone"; throws ConfigError otherwise.
  static DeviceProfile from_name(const std::string& name);
  std::string name() const;

  std::size_t element_count() const {
    return static_cast<std::size_t>(scans) * subcarriers * antennae;
  }
  friend bool operator==(const DeviceProfile&, const DeviceProfile&) = default;
};

std::string to_string(const DeviceProfile& p);

/// Amplitudes over scans x subcarriers x antennae for one measurement window,
/// stored row-major as (scan, subcarrier, antenna).
struct CsiImage {
  DeviceProfile profile;
  std::vector<double> amplitudes;

  CsiImage() = default;
  explicit CsiImage(DeviceProfile p, double fill = 0.0) : profile(p), amplitudes(p.element_count(), fill) {}
  CsiImage(DeviceProfile p, std::vector<double> values);

  std::size_t index(std::size_t scan, std::size_t subcarrier, std::size_t antenna) const {
    return (scan * profile.subcarriers + subcarrier) * profile.antennae + antenna;
  }
  double at(std::size_t scan, std::size_t subcarrier, std::size_t antenna) const {
    return amplitudes[index(scan, subcarrier, antenna)];
  }
  double& at(std::size_t scan, std::size_t subcarrier, std::size_t antenna) {
    return amplitudes[index(scan, subcarrier, antenna)];
  }

  /// Throws InputError unless amplitudes match the profile and are finite and >= 0.
  void validate() const;
};

/// One database entry. rp_index is -1 for test points.
struct FingerprintRecord {
  CsiImage image;
  Point2 location;
  double snapshot_time = 0.0;
  std::int32_t rp_index = -1;
  std::uint32_t snapshot_index = 0;

  bool is_reference_point() const { return rp_index >= 0; }
};

}  // namespace csiloc::csi
