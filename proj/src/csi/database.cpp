#include "csiloc/csi/database.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>

#include "csiloc/binary_io.hpp"
#include "csiloc/error.hpp"

namespace csiloc::csi {

std::size_t CsiDatabase::rp_count() const { return records_by_rp().size(); }

std::vector<std::vector<std::size_t>> CsiDatabase::records_by_rp() const {
  std::map<std::int32_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (records[i].rp_index >= 0) groups[records[i].rp_index].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  out.reserve(groups.size());
  for (auto& [rp, idx] : groups) {
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return records[a].snapshot_time < records[b].snapshot_time; });
    out.push_back(std::move(idx));
  }
  return out;
}

void CsiDatabase::assign_snapshot_indices() {
  for (const auto& group : records_by_rp())
    for (std::size_t k = 0; k < group.size(); ++k) records[group[k]].snapshot_index = static_cast<std::uint32_t>(k);
}

void write_database(std::ostream& out, const CsiDatabase& db) {
  io::write_magic(out, "CSID");
  io::write_pod<std::uint16_t>(out, kDatabaseVersion);
  io::write_pod<std::uint16_t>(out, db.profile.scans);
  io::write_pod<std::uint16_t>(out, db.profile.subcarriers);
  io::write_pod<std::uint16_t>(out, db.profile.antennae);
  io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(db.records.size()));
  std::vector<float> buf(db.profile.element_count());
  for (const auto& r : db.records) {
    if (r.image.profile != db.profile)
      throw InputError("record profile " + to_string(r.image.profile) + " differs from database profile " +
                       to_string(db.profile));
    io::write_pod<double>(out, r.location.x);
    io::write_pod<double>(out, r.location.y);
    io::write_pod<double>(out, r.snapshot_time);
    io::write_pod<std::int32_t>(out, r.rp_index);
    std::transform(r.image.amplitudes.begin(), r.image.amplitudes.end(), buf.begin(),
                   [](double v) { return static_cast<float>(v); });
    io::write_array<float>(out, buf);
  }
}

CsiDatabase read_database(std::istream& in, const std::string& name) {
  io::expect_magic(in, "CSID", name);
  const auto version = io::read_pod<std::uint16_t>(in, "database version");
  if (version != kDatabaseVersion) throw DataError(name + ": unsupported database version " + std::to_string(version));
  CsiDatabase db;
  db.profile.scans = io::read_pod<std::uint16_t>(in, "profile H");
  db.profile.subcarriers = io::read_pod<std::uint16_t>(in, "profile W");
  db.profile.antennae = io::read_pod<std::uint16_t>(in, "profile C");
  if (db.profile.element_count() == 0) throw DataError(name + ": profile has a zero dimension");
  const auto count = io::read_pod<std::uint32_t>(in, "record count");
  db.records.reserve(count);
  std::vector<float> buf(db.profile.element_count());
  for (std::uint32_t i = 0; i < count; ++i) {
    FingerprintRecord r;
    r.location.x = io::read_pod<double>(in, "record location");
    r.location.y = io::read_pod<double>(in, "record location");
    r.snapshot_time = io::read_pod<double>(in, "record snapshot_time");
    r.rp_index = io::read_pod<std::int32_t>(in, "record rp_index");
    io::read_array<float>(in, buf, "record amplitudes");
    r.image = CsiImage(db.profile, std::vector<double>(buf.begin(), buf.end()));
    db.records.push_back(std::move(r));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw DataError(name + ": trailing bytes after last record");
  db.assign_snapshot_indices();
  return db;
}

void save_database(const std::filesystem::path& path, const CsiDatabase& db) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  write_database(out, db);
  if (!out) throw DataError(path.string() + ": write failed");
}

CsiDatabase load_database(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open database");
  return read_database(in, path.string());
}

}  // namespace csiloc::csi
