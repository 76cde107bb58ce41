#include "csiloc/csi/image.hpp"

#include <cmath>

#include "csiloc/error.hpp"

namespace csiloc::csi {

DeviceProfile DeviceProfile::from_name(const std::string& name) {
  if (name == "nic") return nic();
  if (name == "phone") return phone();
  throw ConfigError("unknown device profile '" + name + "' (expected nic or phone)");
}

std::string DeviceProfile::name() const {
  if (*this == nic()) return "nic";
  if (*this == phone()) return "phone";
  return "custom";
}

std::string to_string(const DeviceProfile& p) {
  return std::to_string(p.scans) + "x" + std::to_string(p.subcarriers) + "x" + std::to_string(p.antennae);
}

CsiImage::CsiImage(DeviceProfile p, std::vector<double> values) : profile(p), amplitudes(std::move(values)) {
  if (amplitudes.size() != profile.element_count())
    throw InputError("image has " + std::to_string(amplitudes.size()) + " amplitudes, profile " + to_string(p) +
                     " needs " + std::to_string(profile.element_count()));
}

void CsiImage::validate() const {
  if (profile.element_count() == 0) throw InputError("image profile has a zero dimension");
  if (amplitudes.size() != profile.element_count()) throw InputError("image amplitude count does not match its profile");
  for (double a : amplitudes)
    if (!std::isfinite(a) || a < 0.0) throw InputError("image amplitudes must be finite and non-negative");
}

}  // namespace csiloc::csi
