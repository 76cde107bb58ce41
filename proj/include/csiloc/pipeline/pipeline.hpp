#pragma once

#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "csiloc/config.hpp"
#include "csiloc/eval/metrics.hpp"
#include "csiloc/quant/quantifier.hpp"
#include "csiloc/sim/sampling.hpp"
#include "csiloc/track/tracker.hpp"

namespace csiloc::pipeline {

/// Every tunable of a run. Defaults follow the architecture tables for the chosen
/// device profile; any of them can be overridden by name from key=value text.
struct RunConfig {
  sim::SynthConfig synth;
  quant::CnnConfig cnn;
  track::TrajectoryConfig trajectories;
  track::LstmConfig lstm;
  eval::AmbiguityConfig ambiguity;
  std::size_t ambiguity_rps = 200;  // random RPs sampled for ambiguity counting; 0 keeps all
  // Survey day whose snapshots make up each RP's fingerprint set; -1 pools every day.
  // One session is the default because snapshots from a busy day correlate at about
  // 0.4 even at the same spot, which caps any pooled set far below the 0.8 threshold.
  int ambiguity_day = 0;
  track::Warmup warmup = track::Warmup::repeat_oldest;
  std::uint64_t seed = 7;
  KeyValueConfig synth_overrides;  // simulator keys as given, kept for the canonical listing

  /// Throws ConfigError on unknown keys or bad values.
  static RunConfig from_config(const KeyValueConfig& kv);
  static std::set<std::string> known_keys();

  Box bounds() const { return {0.0, 0.0, synth.site.width, synth.site.depth}; }
  /// Canonical key=value listing of every effective setting.
  std::string canonical() const;
  std::uint64_t hash() const;

  std::uint64_t cnn_seed() const;
  std::uint64_t trajectory_seed(bool validation) const;
  std::uint64_t lstm_seed() const;
  std::uint64_t ambiguity_seed() const;
};

const char* warmup_name(track::Warmup w);
track::Warmup warmup_from_name(const std::string& name);

/// CNN features of a preprocessed database, keeping each record's metadata.
track::FeatureMatrix feature_matrix(const quant::TrainedQuantifier& q, const csi::CsiDatabase& preprocessed);

struct DayEvaluation {
  std::string label;
  std::vector<Point2> truth;
  std::vector<Point2> cnn_only;
  std::vector<Point2> cnn_lstm;
  eval::ErrorReport cnn_only_report;
  eval::ErrorReport cnn_lstm_report;
};

/// Streams a raw test walk through both estimators in record order.
DayEvaluation evaluate_walk(const std::string& label, const csi::CsiDatabase& raw_test,
                            const quant::TrainedQuantifier& q, const track::TrainedTracker& tracker,
                            track::Warmup warmup);

struct CorrelationGain {
  double raw = 0.0;      // mean over RPs of the raw-image self-correlation
  double feature = 0.0;  // same for CNN features of the preprocessed images
  std::size_t rps = 0;
  std::size_t min_snapshots = 0;
};

/// Same-location correlation of raw images against CNN features, over every RP
/// that appears in `raw_sets` (records of one RP may be spread across databases).
CorrelationGain feature_correlation_gain(const quant::TrainedQuantifier& q,
                                         const std::vector<const csi::CsiDatabase*>& raw_sets);

/// Whether a snapshot time falls on survey day `day` (always true for day < 0).
bool on_survey_day(double snapshot_time, int day);

/// Ambiguity counts with raw images as fingerprints: one set per RP, made of its
/// snapshots from survey day `day` (every day when negative).
eval::AmbiguityResult raw_ambiguity(const std::vector<const csi::CsiDatabase*>& raw_sets,
                                    const std::vector<std::int32_t>& rps, const eval::AmbiguityConfig& config,
                                    int day = -1);

/// Ambiguity counts with T-step feature concatenations as fingerprints: each RP's
/// rows from survey day `day` are shuffled and cut into consecutive groups of T.
eval::AmbiguityResult feature_ambiguity(const track::FeatureMatrix& features, const std::vector<std::int32_t>& rps,
                                        std::size_t steps, const eval::AmbiguityConfig& config, std::uint64_t seed,
                                        int day = -1);

/// RPs used for ambiguity counting: a seeded sample of `count` (all when 0 or larger).
std::vector<std::int32_t> sample_rps(const std::vector<const csi::CsiDatabase*>& sets, std::size_t count,
                                     std::uint64_t seed);

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

/// Everything a full in-memory run produces.
struct Experiment {
  sim::SynthOutput data;
  quant::CnnTrainResult cnn;
  track::LstmTrainResult lstm;
  std::vector<DayEvaluation> days;
  eval::ErrorReport cnn_only_overall;
  eval::ErrorReport cnn_lstm_overall;
  CorrelationGain correlation;
  eval::AmbiguityResult raw_ambiguity;
  eval::AmbiguityResult feature_ambiguity;
  std::vector<StageTiming> timings;

  double total_seconds() const;
};

using Progress = std::function<void(const std::string&)>;

/// synth -> preprocess -> train-cnn -> extract-features -> gen-traj -> train-lstm
/// -> evaluate and ambiguity, all in memory.
Experiment run_experiment(const RunConfig& config, const Progress& progress = {});

}  // namespace csiloc::pipeline
