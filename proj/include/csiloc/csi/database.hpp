#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "csiloc/csi/image.hpp"

namespace csiloc::csi {

inline constexpr std::uint16_t kDatabaseVersion = 1;

struct CsiDatabase {
  DeviceProfile profile;
  std::vector<FingerprintRecord> records;

  /// Number of distinct non-negative RP indices.
  std::size_t rp_count() const;
  /// Record indices grouped by RP, ordered by RP index then time.
  std::vector<std::vector<std::size_t>> records_by_rp() const;
  /// Renumbers snapshot_index as the time rank of each record within its RP.
  void assign_snapshot_indices();
};

// Layout (little-endian):
//   "CSID" | u16 version | u16 H | u16 W | u16 C | u32 count
//   per record: f64 x | f64 y | f64 snapshot_time | i32 rp_index | f32 amplitudes[H*W*C]
void write_database(std::ostream& out, const CsiDatabase& db);
CsiDatabase read_database(std::istream& in, const std::string& name);

void save_database(const std::filesystem::path& path, const CsiDatabase& db);
CsiDatabase load_database(const std::filesystem::path& path);

}  // namespace csiloc::csi
