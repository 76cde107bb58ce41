#include "csiloc/csi/preprocess.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "csiloc/error.hpp"

namespace csiloc::csi {

void NormalizationContext::validate() const {
  if (!(a_max > 0.0) || !std::isfinite(a_max)) throw DataError("normalization context: a_max must be positive");
  if (per_rp_average.empty()) throw DataError("normalization context: no per-RP averages");
  double largest = 0.0;
  for (const auto& [rp, a] : per_rp_average) {
    if (!std::isfinite(a) || a < 0.0) throw DataError("normalization context: invalid average for RP " + std::to_string(rp));
    largest = std::max(largest, a);
  }
  if (largest != a_max) throw DataError("normalization context: a_max does not equal the largest RP average");
}

std::optional<double> NormalizationContext::rp_average(std::int32_t rp) const {
  const auto it = per_rp_average.find(rp);
  if (it == per_rp_average.end()) return std::nullopt;
  return it->second;
}

CsiImage median_filter_columns(const CsiImage& image, std::size_t window) {
  const std::size_t H = image.profile.scans, W = image.profile.subcarriers, C = image.profile.antennae;
  if (window == 0 || window % 2 == 0) throw ConfigError("median window must be odd and >= 1");
  if (window > H) throw ConfigError("median window " + std::to_string(window) + " exceeds scan count " + std::to_string(H));
  if (image.amplitudes.size() != image.profile.element_count()) throw InputError("image amplitude count does not match its profile");
  if (window == 1) return image;

  CsiImage out = image;
  const long half = static_cast<long>(window / 2);
  std::vector<double> column(H), scratch(window);
  for (std::size_t w = 0; w < W; ++w) {
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t h = 0; h < H; ++h) column[h] = image.at(h, w, c);
      for (std::size_t h = 0; h < H; ++h) {
        for (long k = -half; k <= half; ++k) {
          const long src = std::clamp(static_cast<long>(h) + k, 0L, static_cast<long>(H) - 1);
          scratch[static_cast<std::size_t>(k + half)] = column[static_cast<std::size_t>(src)];
        }
        auto mid = scratch.begin() + half;
        std::nth_element(scratch.begin(), mid, scratch.end());
        out.at(h, w, c) = *mid;
      }
    }
  }
  return out;
}

double average_amplitude(const CsiImage& image) {
  if (image.amplitudes.empty()) return 0.0;
  double sum = 0.0;
  for (double a : image.amplitudes) sum += a;
  return sum / static_cast<double>(image.amplitudes.size());
}

CsiImage minmax_normalize_rows(const CsiImage& image) {
  const std::size_t H = image.profile.scans, W = image.profile.subcarriers, C = image.profile.antennae;
  if (image.amplitudes.size() != image.profile.element_count()) throw InputError("image amplitude count does not match its profile");
  CsiImage out = image;
  for (std::size_t h = 0; h < H; ++h) {
    for (std::size_t c = 0; c < C; ++c) {
      double lo = image.at(h, 0, c), hi = lo;
      for (std::size_t w = 1; w < W; ++w) {
        lo = std::min(lo, image.at(h, w, c));
        hi = std::max(hi, image.at(h, w, c));
      }
      const double range = hi - lo;
      for (std::size_t w = 0; w < W; ++w) out.at(h, w, c) = range > 0.0 ? (image.at(h, w, c) - lo) / range : 0.5;
    }
  }
  return out;
}

CsiImage power_rescale(const CsiImage& image, double rp_average, const NormalizationContext& context) {
  if (!(context.a_max > 0.0)) throw DataError("normalization context is corrupt: a_max must be positive");
  if (!std::isfinite(rp_average) || rp_average < 0.0) throw InputError("rp_average must be finite and non-negative");
  const double ratio = std::min(1.0, rp_average / context.a_max);
  CsiImage out = image;
  for (auto& a : out.amplitudes) a *= ratio;
  return out;
}

CsiImage preprocess(const CsiImage& image, const NormalizationContext& context, std::size_t window,
                    std::optional<std::int32_t> rp_index) {
  const CsiImage filtered = median_filter_columns(image, window);
  std::optional<double> level;
  if (rp_index) level = context.rp_average(*rp_index);
  const double power = level.value_or(average_amplitude(filtered));
  return power_rescale(minmax_normalize_rows(filtered), power, context);
}

NormalizationContext build_normalization_context(const CsiDatabase& training, std::size_t window, std::string source) {
  NormalizationContext ctx;
  ctx.source = std::move(source);
  for (const auto& group : training.records_by_rp()) {
    double sum = 0.0;
    for (auto idx : group) sum += average_amplitude(median_filter_columns(training.records[idx].image, window));
    const auto rp = training.records[group.front()].rp_index;
    ctx.per_rp_average[rp] = sum / static_cast<double>(group.size());
  }
  if (ctx.per_rp_average.empty()) throw InputError("cannot build a normalization context without RP records");
  for (const auto& [rp, a] : ctx.per_rp_average) ctx.a_max = std::max(ctx.a_max, a);
  if (!(ctx.a_max > 0.0)) throw InputError("training database has zero power at every RP");
  return ctx;
}

CsiDatabase preprocess_database(const CsiDatabase& db, const NormalizationContext& context, std::size_t window) {
  CsiDatabase out;
  out.profile = db.profile;
  out.records.reserve(db.records.size());
  for (const auto& r : db.records) {
    FingerprintRecord p = r;
    p.image = preprocess(r.image, context, window,
                         r.is_reference_point() ? std::optional<std::int32_t>(r.rp_index) : std::nullopt);
    out.records.push_back(std::move(p));
  }
  return out;
}

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text, const std::string& where) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw DataError(where + ": cannot parse number '" + text + "'");
  return v;
}

}  // namespace

void write_context(const std::filesystem::path& path, const NormalizationContext& context) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out << "format=csiloc-normalization-context\n";
  out << "version=1\n";
  out << "source=" << context.source << "\n";
  out << "a_max=" << format_double(context.a_max) << "\n";
  out << "rp_count=" << context.per_rp_average.size() << "\n";
  for (const auto& [rp, a] : context.per_rp_average) out << "rp." << rp << "=" << format_double(a) << "\n";
  if (!out) throw DataError(path.string() + ": write failed");
}

NormalizationContext read_context(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open normalization context");
  NormalizationContext ctx;
  std::string line;
  std::size_t declared = 0, lineno = 0;
  bool have_a_max = false, have_format = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw DataError(where + ": expected key=value");
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "format") {
      if (value != "csiloc-normalization-context") throw DataError(where + ": not a normalization context");
      have_format = true;
    } else if (key == "version") {
      if (value != "1") throw DataError(where + ": unsupported context version " + value);
    } else if (key == "source") {
      ctx.source = value;
    } else if (key == "a_max") {
      ctx.a_max = parse_double(value, where);
      have_a_max = true;
    } else if (key == "rp_count") {
      declared = static_cast<std::size_t>(parse_double(value, where));
    } else if (key.rfind("rp.", 0) == 0) {
      const auto rp = static_cast<std::int32_t>(parse_double(key.substr(3), where));
      ctx.per_rp_average[rp] = parse_double(value, where);
    } else {
      throw DataError(where + ": unknown key '" + key + "'");
    }
  }
  if (!have_format || !have_a_max) throw DataError(path.string() + ": missing format or a_max field");
  if (declared != ctx.per_rp_average.size()) throw DataError(path.string() + ": rp_count does not match entries");
  try {
    ctx.validate();
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return ctx;
}

}  // namespace csiloc::csi
