#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "csiloc/csi/database.hpp"
#include "csiloc/csi/image.hpp"

namespace csiloc::csi {

inline constexpr std::size_t kDefaultMedianWindow = 3;

/// Per-RP power levels of the training database, frozen for inference.
struct NormalizationContext {
  std::map<std::int32_t, double> per_rp_average;
  double a_max = 0.0;
  std::string source;

  /// Throws DataError unless a_max > 0 and equals the largest per-RP value.
  void validate() const;
  std::optional<double> rp_average(std::int32_t rp) const;
};

/// Sliding median of odd length `window` down each (subcarrier, antenna) column,
/// replicating the first and last scans at the edges.
CsiImage median_filter_columns(const CsiImage& image, std::size_t window);

/// Mean amplitude over every element (all antennae folded in).
double average_amplitude(const CsiImage& image);

/// Min-max scales each (scan, antenna) row across its subcarriers into [0, 1].
/// A constant row maps to 0.5.
CsiImage minmax_normalize_rows(const CsiImage& image);

/// Multiplies a row-normalised image by rp_average / a_max. The ratio is capped at
/// 1 so unseen test images brighter than the strongest RP stay within [0, 1].
CsiImage power_rescale(const CsiImage& image, double rp_average, const NormalizationContext& context);

/// Median filter, row normalisation, power rescale. The power level is the RP's
/// stored average when `rp_index` is in the context, else the filtered image's own.
CsiImage preprocess(const CsiImage& image, const NormalizationContext& context,
                    std::size_t window = kDefaultMedianWindow, std::optional<std::int32_t> rp_index = {});

/// Averages the filtered-image power of each RP over its records.
NormalizationContext build_normalization_context(const CsiDatabase& training, std::size_t window,
                                                 std::string source);

/// Preprocesses every record, keeping metadata.
CsiDatabase preprocess_database(const CsiDatabase& db, const NormalizationContext& context,
                                std::size_t window = kDefaultMedianWindow);

/// key=value text; doubles written with round-trip precision.
void write_context(const std::filesystem::path& path, const NormalizationContext& context);
NormalizationContext read_context(const std::filesystem::path& path);

}  // namespace csiloc::csi
