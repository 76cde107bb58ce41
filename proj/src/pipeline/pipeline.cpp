#include "csiloc/pipeline/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <chrono>
#include <map>
#include <numeric>
#include <sstream>

#include "csiloc/csi/preprocess.hpp"
#include "csiloc/error.hpp"
#include "csiloc/parallel.hpp"
#include "csiloc/rng.hpp"

namespace csiloc::pipeline {

namespace {

constexpr std::uint64_t kTagCnn = 0xc22;
constexpr std::uint64_t kTagTraj = 0x7a;
constexpr std::uint64_t kTagLstm = 0x157;
constexpr std::uint64_t kTagAmbiguity = 0xa3b;

const std::set<std::string> kCnnKeys{"conv_layers", "kernel", "filters", "fc1", "fc2", "epochs", "batch", "lr", "window"};
const std::set<std::string> kTrajKeys{"T", "sigma", "dt", "train_count", "val_count"};
const std::set<std::string> kLstmKeys{"hidden", "dropout", "lstm_lr", "lstm_epochs", "lstm_batch"};
const std::set<std::string> kOtherKeys{"amb_grid", "threshold", "amb_rps", "amb_day", "warmup"};

std::vector<double> as_vector(const csi::CsiImage& image) { return image.amplitudes; }

// Images of every RP record across the given databases, keyed by RP index.
std::map<std::int32_t, std::vector<const csi::FingerprintRecord*>> records_by_rp(
    const std::vector<const csi::CsiDatabase*>& sets) {
  std::map<std::int32_t, std::vector<const csi::FingerprintRecord*>> out;
  for (const auto* db : sets)
    for (const auto& r : db->records)
      if (r.is_reference_point()) out[r.rp_index].push_back(&r);
  return out;
}

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

}  // namespace

const char* warmup_name(track::Warmup w) { return w == track::Warmup::cnn_only ? "cnn" : "repeat"; }

track::Warmup warmup_from_name(const std::string& name) {
  if (name == "repeat") return track::Warmup::repeat_oldest;
  if (name == "cnn") return track::Warmup::cnn_only;
  throw ConfigError("unknown warm-up rule '" + name + "' (expected repeat or cnn)");
}

std::set<std::string> RunConfig::known_keys() {
  std::set<std::string> keys = sim::SynthConfig::known_keys();
  for (const auto* group : {&kCnnKeys, &kTrajKeys, &kLstmKeys, &kOtherKeys}) keys.insert(group->begin(), group->end());
  return keys;
}

RunConfig RunConfig::from_config(const KeyValueConfig& kv) {
  kv.require_known(known_keys());
  RunConfig c;
  for (const auto& [k, v] : kv.values())
    if (sim::SynthConfig::known_keys().count(k)) c.synth_overrides.set(k, v);
  if (!c.synth_overrides.has("seed")) c.synth_overrides.set("seed", std::to_string(c.seed));
  c.synth = sim::SynthConfig::from_config(c.synth_overrides);
  c.seed = c.synth.seed;

  c.cnn = quant::CnnConfig::defaults(c.synth.profile);
  c.cnn.apply(kv);
  c.cnn.validate();
  c.trajectories.apply(kv);
  c.trajectories.validate();
  c.lstm.apply(kv);
  c.lstm.validate();
  c.ambiguity.grid_size = kv.get_double("amb_grid", c.ambiguity.grid_size);
  c.ambiguity.correlation_threshold = kv.get_double("threshold", c.ambiguity.correlation_threshold);
  c.ambiguity.validate();
  c.ambiguity_rps = kv.get_uint("amb_rps", c.ambiguity_rps);
  const std::int64_t day = kv.get_int("amb_day", c.ambiguity_day);
  if (day < -1 || day >= static_cast<std::int64_t>(c.synth.plan.schedule.size()))
    throw ConfigError("amb_day must be -1 (all days) or a survey day index below " +
                      std::to_string(c.synth.plan.schedule.size()));
  c.ambiguity_day = static_cast<int>(day);
  c.warmup = warmup_from_name(kv.get_string("warmup", warmup_name(c.warmup)));
  return c;
}

std::string RunConfig::canonical() const {
  KeyValueConfig all = synth_overrides;
  all.set("conv_layers", std::to_string(cnn.conv_layers));
  all.set("kernel", std::to_string(cnn.kernel));
  all.set("filters", std::to_string(cnn.filters));
  all.set("fc1", std::to_string(cnn.fc1_size()));
  all.set("fc2", std::to_string(cnn.fc2_size()));
  all.set("epochs", std::to_string(cnn.epochs));
  all.set("batch", std::to_string(cnn.batch_size));
  all.set("lr", format_double(cnn.learning_rate));
  all.set("window", std::to_string(cnn.median_window));
  all.set("T", std::to_string(trajectories.memory_length));
  all.set("sigma", format_double(trajectories.step_bound));
  all.set("dt", format_double(trajectories.sample_interval));
  all.set("train_count", std::to_string(trajectories.train_count));
  all.set("val_count", std::to_string(trajectories.validation_count));
  all.set("hidden", std::to_string(lstm.hidden_for(cnn.fc2_size())));
  all.set("dropout", format_double(lstm.dropout));
  all.set("lstm_lr", format_double(lstm.learning_rate));
  all.set("lstm_epochs", std::to_string(lstm.epochs));
  all.set("lstm_batch", std::to_string(lstm.batch_size));
  all.set("amb_grid", format_double(ambiguity.grid_size));
  all.set("threshold", format_double(ambiguity.correlation_threshold));
  all.set("amb_rps", std::to_string(ambiguity_rps));
  all.set("amb_day", std::to_string(ambiguity_day));
  all.set("warmup", warmup_name(warmup));
  all.set("seed", std::to_string(seed));
  return all.canonical();
}

std::uint64_t RunConfig::hash() const { return fnv1a64(canonical()); }
std::uint64_t RunConfig::cnn_seed() const { return derive_seed(seed, {kTagCnn}); }
std::uint64_t RunConfig::trajectory_seed(bool validation) const {
  return derive_seed(seed, {kTagTraj, validation ? 1u : 0u});
}
std::uint64_t RunConfig::lstm_seed() const { return derive_seed(seed, {kTagLstm}); }
std::uint64_t RunConfig::ambiguity_seed() const { return derive_seed(seed, {kTagAmbiguity}); }

track::FeatureMatrix feature_matrix(const quant::TrainedQuantifier& q, const csi::CsiDatabase& preprocessed) {
  std::vector<const csi::CsiImage*> images;
  images.reserve(preprocessed.records.size());
  for (const auto& r : preprocessed.records) images.push_back(&r.image);
  const auto rows = quant::extract_features(q, images);
  track::FeatureMatrix m;
  m.dim = q.feature_dim();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = preprocessed.records[i];
    m.append(rows[i], r.rp_index, r.location, r.snapshot_time);
  }
  return m;
}

DayEvaluation evaluate_walk(const std::string& label, const csi::CsiDatabase& raw_test,
                            const quant::TrainedQuantifier& q, const track::TrainedTracker& tracker,
                            track::Warmup warmup) {
  if (raw_test.records.empty()) throw InputError("test walk '" + label + "' has no records");
  DayEvaluation day;
  day.label = label;
  track::OnlineTracker online(q, tracker, warmup);
  for (const auto& r : raw_test.records) {
    const csi::CsiImage image = quant::prepare_test_image(q, r.image);
    const Point2 cnn = quant::predict_cnn_only(q, image);
    day.truth.push_back(r.location);
    day.cnn_only.push_back(cnn);
    day.cnn_lstm.push_back(online.update_feature(quant::extract_features(q, image), cnn));
  }
  day.cnn_only_report = eval::error_report(day.cnn_only, day.truth, label);
  day.cnn_lstm_report = eval::error_report(day.cnn_lstm, day.truth, label);
  return day;
}

CorrelationGain feature_correlation_gain(const quant::TrainedQuantifier& q,
                                         const std::vector<const csi::CsiDatabase*>& raw_sets) {
  const auto by_rp = records_by_rp(raw_sets);
  if (by_rp.empty()) throw InputError("no RP records to correlate");
  std::vector<std::vector<const csi::FingerprintRecord*>> groups;
  for (const auto& [rp, recs] : by_rp) groups.push_back(recs);

  std::vector<double> raw(groups.size()), feat(groups.size());
  CorrelationGain gain;
  gain.rps = groups.size();
  gain.min_snapshots = groups.front().size();
  for (const auto& g : groups) gain.min_snapshots = std::min(gain.min_snapshots, g.size());
  parallel_for(groups.size(), [&](std::size_t i) {
    std::vector<std::vector<double>> raw_rows;
    std::vector<csi::CsiImage> prepared;
    for (const auto* r : groups[i]) {
      raw_rows.push_back(as_vector(r->image));
      prepared.push_back(csi::preprocess(r->image, q.context, q.config.median_window, r->rp_index));
    }
    std::vector<const csi::CsiImage*> ptrs;
    for (const auto& p : prepared) ptrs.push_back(&p);
    raw[i] = eval::average_self_correlation(raw_rows);
    feat[i] = eval::average_self_correlation(quant::extract_features(q, ptrs));
  });
  gain.raw = std::accumulate(raw.begin(), raw.end(), 0.0) / static_cast<double>(groups.size());
  gain.feature = std::accumulate(feat.begin(), feat.end(), 0.0) / static_cast<double>(groups.size());
  return gain;
}

std::vector<std::int32_t> sample_rps(const std::vector<const csi::CsiDatabase*>& sets, std::size_t count,
                                     std::uint64_t seed) {
  std::vector<std::int32_t> rps;
  for (const auto& [rp, recs] : records_by_rp(sets)) rps.push_back(rp);
  if (count == 0 || count >= rps.size()) return rps;
  Rng rng = make_rng(seed, {kTagAmbiguity});
  std::shuffle(rps.begin(), rps.end(), rng);
  rps.resize(count);
  std::sort(rps.begin(), rps.end());
  return rps;
}

bool on_survey_day(double snapshot_time, int day) {
  return day < 0 || static_cast<int>(std::floor(snapshot_time / 86400.0)) == day;
}

eval::AmbiguityResult raw_ambiguity(const std::vector<const csi::CsiDatabase*>& raw_sets,
                                    const std::vector<std::int32_t>& rps, const eval::AmbiguityConfig& config,
                                    int day) {
  const auto by_rp = records_by_rp(raw_sets);
  std::vector<std::vector<std::vector<double>>> fingerprints;
  std::vector<Point2> locations;
  for (auto rp : rps) {
    const auto it = by_rp.find(rp);
    if (it == by_rp.end()) throw InputError("RP " + std::to_string(rp) + " has no raw images");
    std::vector<std::vector<double>> set;
    for (const auto* r : it->second)
      if (on_survey_day(r->snapshot_time, day)) set.push_back(as_vector(r->image));
    if (set.empty()) throw InputError("RP " + std::to_string(rp) + " has no raw images on the chosen survey day");
    fingerprints.push_back(std::move(set));
    locations.push_back(it->second.front()->location);
  }
  return eval::count_ambiguous(fingerprints, locations, config);
}

eval::AmbiguityResult feature_ambiguity(const track::FeatureMatrix& features, const std::vector<std::int32_t>& rps,
                                        std::size_t steps, const eval::AmbiguityConfig& config, std::uint64_t seed,
                                        int day) {
  if (steps == 0) throw ConfigError("memory length T must be positive");
  const auto by_rp = features.rows_by_rp();
  std::vector<std::vector<std::vector<double>>> fingerprints;
  std::vector<Point2> locations;
  for (auto rp : rps) {
    std::vector<std::uint64_t> rows;
    if (rp >= 0 && static_cast<std::size_t>(rp) < by_rp.size())
      for (auto row : by_rp[rp])
        if (on_survey_day(features.time[row], day)) rows.push_back(row);
    if (rows.size() < steps)
      throw InputError("RP " + std::to_string(rp) + " has fewer than T feature rows on the chosen survey day");
    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(rp)});
    std::shuffle(rows.begin(), rows.end(), rng);
    std::vector<std::vector<double>> set;
    for (std::size_t start = 0; start + steps <= rows.size(); start += steps) {
      std::vector<double> concat;
      concat.reserve(steps * features.dim);
      for (std::size_t s = 0; s < steps; ++s) {
        const auto row = features.row(rows[start + s]);
        concat.insert(concat.end(), row.begin(), row.end());
      }
      set.push_back(std::move(concat));
    }
    fingerprints.push_back(std::move(set));
    locations.push_back(features.location[by_rp[rp].front()]);
  }
  return eval::count_ambiguous(fingerprints, locations, config);
}

double Experiment::total_seconds() const {
  double s = 0.0;
  for (const auto& t : timings) s += t.seconds;
  return s;
}

Experiment run_experiment(const RunConfig& config, const Progress& progress) {
  auto say = [&](const std::string& msg) {
    if (progress) progress(msg);
  };
  Experiment ex;
  Stopwatch watch;
  const Box bounds = config.bounds();

  const sim::SiteModel site = sim::make_site(config.synth.site, config.synth.seed);
  ex.data = sim::build_database(site, config.synth.plan, config.synth.profile, config.synth.seed);
  ex.timings.push_back({"synth", watch.lap()});
  say("synth: " + std::to_string(ex.data.rps.size()) + " RPs, " + std::to_string(ex.data.train.records.size()) +
      " training images");

  const csi::NormalizationContext context =
      csi::build_normalization_context(ex.data.train, config.cnn.median_window, "train");
  const csi::CsiDatabase train = csi::preprocess_database(ex.data.train, context, config.cnn.median_window);
  const csi::CsiDatabase val = csi::preprocess_database(ex.data.validation, context, config.cnn.median_window);
  ex.timings.push_back({"preprocess", watch.lap()});

  ex.cnn = quant::train_cnn(train, val, config.cnn, context, bounds, config.cnn_seed(), [&](const quant::EpochStats& e) {
    std::ostringstream line;
    line << "train-cnn: epoch " << e.epoch << " loss " << e.train_loss << " val " << e.val_error;
    say(line.str());
  });
  ex.timings.push_back({"train-cnn", watch.lap()});
  const quant::TrainedQuantifier& q = ex.cnn.quantifier;

  const track::FeatureMatrix train_features = feature_matrix(q, train);
  const track::FeatureMatrix val_features = feature_matrix(q, val);
  ex.timings.push_back({"extract-features", watch.lap()});

  const auto& tc = config.trajectories;
  const track::TrajectorySet train_traj =
      track::generate_trajectories(train_features, tc, tc.train_count, config.trajectory_seed(false));
  const track::TrajectorySet val_traj =
      track::generate_trajectories(val_features, tc, tc.validation_count, config.trajectory_seed(true));
  ex.timings.push_back({"gen-traj", watch.lap()});

  ex.lstm = track::train_lstm(train_features, train_traj, val_features, val_traj, config.lstm, bounds,
                              config.lstm_seed(), [&](const track::LstmEpochStats& e) {
                                std::ostringstream line;
                                line << "train-lstm: epoch " << e.epoch << " loss " << e.train_loss << " val "
                                     << e.val_error;
                                say(line.str());
                              });
  ex.timings.push_back({"train-lstm", watch.lap()});

  std::vector<double> cnn_errors, lstm_errors;
  for (const auto& day : ex.data.tests) {
    ex.days.push_back(evaluate_walk(day.label, day.database, q, ex.lstm.tracker, config.warmup));
    const auto& d = ex.days.back();
    cnn_errors.insert(cnn_errors.end(), d.cnn_only_report.errors.begin(), d.cnn_only_report.errors.end());
    lstm_errors.insert(lstm_errors.end(), d.cnn_lstm_report.errors.begin(), d.cnn_lstm_report.errors.end());
    std::ostringstream line;
    line << "evaluate: " << d.label << " cnn-only " << d.cnn_only_report.mean << " cnn-lstm "
         << d.cnn_lstm_report.mean;
    say(line.str());
  }
  ex.cnn_only_overall = eval::report_from_errors(cnn_errors, "Average");
  ex.cnn_lstm_overall = eval::report_from_errors(lstm_errors, "Average");
  ex.timings.push_back({"evaluate", watch.lap()});

  const std::vector<const csi::CsiDatabase*> all_raw{&ex.data.train, &ex.data.validation, &ex.data.holdout};
  ex.correlation = feature_correlation_gain(q, all_raw);

  const std::vector<std::int32_t> rps = sample_rps(all_raw, config.ambiguity_rps, config.ambiguity_seed());
  ex.raw_ambiguity = raw_ambiguity(all_raw, rps, config.ambiguity, config.ambiguity_day);
  const csi::CsiDatabase holdout = csi::preprocess_database(ex.data.holdout, context, config.cnn.median_window);
  track::FeatureMatrix all_features = train_features;
  const track::FeatureMatrix holdout_features = feature_matrix(q, holdout);
  for (const auto* part : {&val_features, &holdout_features})
    for (std::size_t i = 0; i < part->rows(); ++i)
      all_features.append(part->row(i), part->rp_index[i], part->location[i], part->time[i]);
  ex.feature_ambiguity =
      feature_ambiguity(all_features, rps, tc.memory_length, config.ambiguity, config.ambiguity_seed(),
                        config.ambiguity_day);
  ex.timings.push_back({"ambiguity", watch.lap()});
  std::ostringstream line;
  line << "ambiguity: zero-fraction raw " << ex.raw_ambiguity.fraction_zero() << " features "
       << ex.feature_ambiguity.fraction_zero() << "; correlation raw " << ex.correlation.raw << " features "
       << ex.correlation.feature;
  say(line.str());
  return ex;
}

}  // namespace csiloc::pipeline
