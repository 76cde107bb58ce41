// Command-line front end: one subcommand per pipeline stage, with file handoffs.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "csiloc/csi/database.hpp"
#include "csiloc/csi/preprocess.hpp"
#include "csiloc/error.hpp"
#include "csiloc/pipeline/pipeline.hpp"

namespace fs = std::filesystem;
using namespace csiloc;

namespace {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kConfig = 3,
  kInput = 4,
  kData = 5,
  kNumeric = 6,
};

struct Common {
  std::string config_file;
  std::vector<std::string> overrides;
  std::string profile;
  std::string seed;
  std::string grid;
  std::string manifest;
  bool force = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config_file, "key=value config file")->check(CLI::ExistingFile);
  app->add_option("-s,--set", c.overrides, "override, key=value (repeatable)");
  app->add_option("--profile", c.profile, "device profile: nic or phone");
  app->add_option("--seed", c.seed, "master seed");
  app->add_option("--grid", c.grid, "RP grid spacing in meters");
  app->add_option("--manifest", c.manifest, "run manifest to append to (default: manifest.txt beside the output)");
  app->add_flag("-f,--force", c.force, "overwrite existing non-empty outputs");
}

KeyValueConfig gather(const Common& c) {
  KeyValueConfig kv = c.config_file.empty() ? KeyValueConfig{} : KeyValueConfig::load(c.config_file);
  for (const auto& o : c.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + o + "' is not key=value");
    kv.set(o.substr(0, eq), o.substr(eq + 1));
  }
  if (!c.profile.empty()) kv.set("profile", c.profile);
  if (!c.seed.empty()) kv.set("seed", c.seed);
  if (!c.grid.empty()) kv.set("grid", c.grid);
  return kv;
}

bool non_empty(const fs::path& p) {
  if (!fs::exists(p)) return false;
  if (fs::is_directory(p)) return !fs::is_empty(p);
  return fs::file_size(p) > 0;
}

void guard_output(const fs::path& p, bool force) {
  if (non_empty(p) && !force)
    throw UsageError(p.string() + ": output exists and is not empty (pass --force to overwrite)");
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

void require_file(const fs::path& p, const char* role) {
  if (!fs::is_regular_file(p)) throw InputError(p.string() + ": " + role + " file does not exist");
}

Box load_site(const fs::path& path) {
  require_file(path, "site");
  const KeyValueConfig kv = KeyValueConfig::load(path);
  const Box b{0.0, 0.0, kv.get_double("area_w", 0.0), kv.get_double("area_h", 0.0)};
  if (!b.valid()) throw DataError(path.string() + ": fields 'area_w' and 'area_h' must be positive");
  return b;
}

void check_profile(const csi::CsiDatabase& db, const csi::DeviceProfile& expected, const fs::path& path) {
  if (!(db.profile == expected))
    throw InputError(path.string() + ": field 'profile' is " + csi::to_string(db.profile) + ", expected " +
                     csi::to_string(expected));
}

// Reads the error_m column (and a label from the file stem) of an errors CSV.
eval::ErrorReport read_errors_csv(const fs::path& path) {
  require_file(path, "errors");
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  std::vector<std::string> cols;
  {
    std::stringstream hs(header);
    std::string col;
    while (std::getline(hs, col, ',')) cols.push_back(col);
  }
  const auto it = std::find(cols.begin(), cols.end(), "error_m");
  if (it == cols.end()) throw DataError(path.string() + ": field 'error_m' is missing from the header");
  const auto idx = static_cast<std::size_t>(it - cols.begin());
  std::vector<double> errors;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string cell;
    for (std::size_t i = 0; i <= idx; ++i)
      if (!std::getline(ls, cell, ',')) throw DataError(path.string() + ": short row '" + line + "'");
    try {
      errors.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw DataError(path.string() + ": field 'error_m' has non-numeric value '" + cell + "'");
    }
  }
  if (errors.empty()) throw DataError(path.string() + ": no error rows");
  return eval::report_from_errors(std::move(errors), path.stem().string());
}

class Manifest {
 public:
  Manifest(std::string command, const pipeline::RunConfig& cfg) : command_(std::move(command)), config_(cfg) {}

  void write(const fs::path& output, const std::string& manifest_override) const {
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    fs::path path = manifest_override;
    if (path.empty()) path = (fs::is_directory(output) ? output : output.parent_path()) / "manifest.txt";
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::app);
    if (!out) throw DataError(path.string() + ": cannot open manifest for appending");
    out << "command=" << command_ << " config_hash=" << std::hex << std::setw(16) << std::setfill('0')
        << config_.hash() << std::dec << " seed=" << config_.seed << " wall_s=" << std::fixed << std::setprecision(3)
        << wall << " output=" << output.string() << "\n";
  }

 private:
  std::string command_;
  pipeline::RunConfig config_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out << text;
}

void write_points(const fs::path& path, const std::vector<Point2>& points) {
  std::ofstream out(path);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out << std::setprecision(17) << "index,x,y\n";
  for (std::size_t i = 0; i < points.size(); ++i) out << i << ',' << points[i].x << ',' << points[i].y << '\n';
}

void log_line(const std::string& s) { std::cerr << s << std::endl; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"WiFi CSI fingerprint localization with a CNN-LSTM model"};
  app.require_subcommand(1);
  Common common;

  // synth
  auto* synth = app.add_subcommand("synth", "simulate a survey: fingerprint databases and test walks");
  std::string synth_out;
  synth->add_option("-o,--out", synth_out, "output directory")->required();
  add_common(synth, common);

  // preprocess
  auto* prep = app.add_subcommand("preprocess", "median filter, row normalisation and power rescale");
  std::string prep_in, prep_out, prep_context;
  bool prep_build = false;
  prep->add_option("-i,--in", prep_in, "raw CSI database")->required();
  prep->add_option("-o,--out", prep_out, "preprocessed database")->required();
  prep->add_option("--context", prep_context, "normalisation context file")->required();
  prep->add_flag("--build-context", prep_build, "derive the context from this (training) database and write it");
  add_common(prep, common);

  // train-cnn
  auto* tcnn = app.add_subcommand("train-cnn", "train the CNN quantifier");
  std::string tcnn_train, tcnn_val, tcnn_context, tcnn_site, tcnn_out, tcnn_curve;
  tcnn->add_option("--train", tcnn_train, "preprocessed training database")->required();
  tcnn->add_option("--val", tcnn_val, "preprocessed validation database")->required();
  tcnn->add_option("--context", tcnn_context, "normalisation context")->required();
  tcnn->add_option("--site", tcnn_site, "site.txt written by synth")->required();
  tcnn->add_option("-o,--out", tcnn_out, "model checkpoint")->required();
  tcnn->add_option("--curve", tcnn_curve, "learning-curve CSV");
  add_common(tcnn, common);

  // extract-features
  auto* feat = app.add_subcommand("extract-features", "CNN features for a preprocessed database");
  std::string feat_model, feat_in, feat_out;
  feat->add_option("--model", feat_model, "CNN checkpoint")->required();
  feat->add_option("-i,--in", feat_in, "preprocessed database")->required();
  feat->add_option("-o,--out", feat_out, "feature matrix")->required();
  add_common(feat, common);

  // gen-traj
  auto* gen = app.add_subcommand("gen-traj", "random-walk training trajectories over RP features");
  std::string gen_features, gen_out, gen_split = "train";
  std::size_t gen_count = 0;
  gen->add_option("--features", gen_features, "feature matrix")->required();
  gen->add_option("-o,--out", gen_out, "trajectory file")->required();
  gen->add_option("--split", gen_split, "train or val (selects default count and seed stream)")
      ->check(CLI::IsMember({"train", "val"}));
  gen->add_option("-n,--count", gen_count, "number of trajectories (default from config)");
  add_common(gen, common);

  // train-lstm
  auto* tl = app.add_subcommand("train-lstm", "train the LSTM tracker on feature trajectories");
  std::string tl_tf, tl_tt, tl_vf, tl_vt, tl_site, tl_out, tl_curve;
  tl->add_option("--train-features", tl_tf, "training feature matrix")->required();
  tl->add_option("--train-traj", tl_tt, "training trajectories")->required();
  tl->add_option("--val-features", tl_vf, "validation feature matrix")->required();
  tl->add_option("--val-traj", tl_vt, "validation trajectories")->required();
  tl->add_option("--site", tl_site, "site.txt written by synth")->required();
  tl->add_option("-o,--out", tl_out, "model checkpoint")->required();
  tl->add_option("--curve", tl_curve, "learning-curve CSV");
  add_common(tl, common);

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "stream test walks through CNN-only and CNN-LSTM estimators");
  std::string ev_cnn, ev_lstm, ev_out;
  std::vector<std::string> ev_tests;
  ev->add_option("--cnn", ev_cnn, "CNN checkpoint")->required();
  ev->add_option("--lstm", ev_lstm, "LSTM checkpoint")->required();
  ev->add_option("--test", ev_tests, "raw test database (repeatable, one per walk)")->required();
  ev->add_option("-o,--out", ev_out, "output directory")->required();
  add_common(ev, common);

  // ambiguity
  auto* amb = app.add_subcommand("ambiguity", "count ambiguous RPs for raw images and T-step features");
  std::vector<std::string> amb_raw, amb_features;
  std::string amb_out;
  amb->add_option("--raw", amb_raw, "raw RP database (repeatable)")->required();
  amb->add_option("--features", amb_features, "feature matrix of the same RPs (repeatable)")->required();
  amb->add_option("-o,--out", amb_out, "histogram CSV")->required();
  add_common(amb, common);

  // report
  auto* rep = app.add_subcommand("report", "mean/std/P80 table over per-run error files");
  std::vector<std::string> rep_in;
  std::string rep_out;
  rep->add_option("-i,--in", rep_in, "errors CSV (repeatable; label is the file stem)")->required();
  rep->add_option("-o,--out", rep_out, "summary CSV")->required();
  add_common(rep, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    const pipeline::RunConfig cfg = pipeline::RunConfig::from_config(gather(common));

    if (*synth) {
      const fs::path dir = synth_out;
      guard_output(dir, common.force);
      fs::create_directories(dir);
      Manifest manifest("synth", cfg);
      const sim::SiteModel site = sim::make_site(cfg.synth.site, cfg.synth.seed);
      const sim::SynthOutput data = sim::build_database(site, cfg.synth.plan, cfg.synth.profile, cfg.synth.seed);
      csi::save_database(dir / "train.csid", data.train);
      csi::save_database(dir / "val.csid", data.validation);
      csi::save_database(dir / "holdout.csid", data.holdout);
      for (const auto& t : data.tests) csi::save_database(dir / ("test-" + t.label + ".csid"), t.database);
      write_points(dir / "rps.csv", data.rps);
      write_points(dir / "route.csv", data.route);
      std::ostringstream site_txt;
      site_txt << "area_w=" << format_double(cfg.synth.site.width) << "\narea_h=" << format_double(cfg.synth.site.depth)
               << "\nprofile=" << cfg.synth.profile.name() << "\ngrid=" << format_double(cfg.synth.plan.grid_spacing)
               << "\nrp_count=" << data.rps.size() << "\n";
      write_text(dir / "site.txt", site_txt.str());
      write_text(dir / "config.txt", cfg.canonical());
      log_line("synth: " + std::to_string(data.rps.size()) + " RPs, " + std::to_string(data.train.records.size()) +
               " training, " + std::to_string(data.validation.records.size()) + " validation, " +
               std::to_string(data.tests.size()) + " test walks");
      manifest.write(dir, common.manifest);

    } else if (*prep) {
      require_file(prep_in, "input database");
      guard_output(prep_out, common.force);
      Manifest manifest("preprocess", cfg);
      const csi::CsiDatabase raw = csi::load_database(prep_in);
      csi::NormalizationContext ctx;
      if (prep_build) {
        guard_output(prep_context, common.force);
        ctx = csi::build_normalization_context(raw, cfg.cnn.median_window, fs::path(prep_in).filename().string());
        csi::write_context(prep_context, ctx);
      } else {
        require_file(prep_context, "context");
        ctx = csi::read_context(prep_context);
      }
      csi::save_database(prep_out, csi::preprocess_database(raw, ctx, cfg.cnn.median_window));
      manifest.write(prep_out, common.manifest);

    } else if (*tcnn) {
      for (const auto& p : {tcnn_train, tcnn_val}) require_file(p, "database");
      require_file(tcnn_context, "context");
      guard_output(tcnn_out, common.force);
      Manifest manifest("train-cnn", cfg);
      const csi::CsiDatabase train = csi::load_database(tcnn_train), val = csi::load_database(tcnn_val);
      check_profile(train, cfg.cnn.profile, tcnn_train);
      check_profile(val, cfg.cnn.profile, tcnn_val);
      const Box bounds = load_site(tcnn_site);
      std::ofstream curve;
      if (!tcnn_curve.empty()) {
        curve.open(tcnn_curve);
        if (!curve) throw DataError(tcnn_curve + ": cannot open for writing");
        curve << std::setprecision(10) << "epoch,train_loss_m,val_error_m\n";
      }
      const auto result = quant::train_cnn(train, val, cfg.cnn, csi::read_context(tcnn_context), bounds,
                                           cfg.cnn_seed(), [&](const quant::EpochStats& e) {
                                             if (curve.is_open())
                                               curve << e.epoch << ',' << e.train_loss << ',' << e.val_error << '\n';
                                             std::ostringstream s;
                                             s << "train-cnn: epoch " << e.epoch << " loss " << e.train_loss
                                               << " val " << e.val_error;
                                             log_line(s.str());
                                           });
      quant::save_quantifier(tcnn_out, result.quantifier);
      log_line("train-cnn: best epoch " + std::to_string(result.best_epoch));
      manifest.write(tcnn_out, common.manifest);

    } else if (*feat) {
      require_file(feat_model, "model");
      require_file(feat_in, "database");
      guard_output(feat_out, common.force);
      Manifest manifest("extract-features", cfg);
      const quant::TrainedQuantifier q = quant::load_quantifier(feat_model);
      const csi::CsiDatabase db = csi::load_database(feat_in);
      check_profile(db, q.config.profile, feat_in);
      track::save_features(feat_out, pipeline::feature_matrix(q, db));
      manifest.write(feat_out, common.manifest);

    } else if (*gen) {
      require_file(gen_features, "feature");
      guard_output(gen_out, common.force);
      Manifest manifest("gen-traj", cfg);
      const bool val = gen_split == "val";
      const std::size_t count =
          gen_count != 0 ? gen_count : (val ? cfg.trajectories.validation_count : cfg.trajectories.train_count);
      track::save_trajectories(gen_out, track::generate_trajectories(track::load_features(gen_features),
                                                                     cfg.trajectories, count,
                                                                     cfg.trajectory_seed(val)));
      manifest.write(gen_out, common.manifest);

    } else if (*tl) {
      for (const auto& p : {tl_tf, tl_vf}) require_file(p, "feature");
      for (const auto& p : {tl_tt, tl_vt}) require_file(p, "trajectory");
      guard_output(tl_out, common.force);
      Manifest manifest("train-lstm", cfg);
      const Box bounds = load_site(tl_site);
      std::ofstream curve;
      if (!tl_curve.empty()) {
        curve.open(tl_curve);
        if (!curve) throw DataError(tl_curve + ": cannot open for writing");
        curve << std::setprecision(10) << "epoch,train_loss_m,val_error_m\n";
      }
      const auto result = track::train_lstm(
          track::load_features(tl_tf), track::load_trajectories(tl_tt), track::load_features(tl_vf),
          track::load_trajectories(tl_vt), cfg.lstm, bounds, cfg.lstm_seed(), [&](const track::LstmEpochStats& e) {
            if (curve.is_open()) curve << e.epoch << ',' << e.train_loss << ',' << e.val_error << '\n';
            std::ostringstream s;
            s << "train-lstm: epoch " << e.epoch << " loss " << e.train_loss << " val " << e.val_error;
            log_line(s.str());
          });
      track::save_tracker(tl_out, result.tracker);
      log_line("train-lstm: best epoch " + std::to_string(result.best_epoch));
      manifest.write(tl_out, common.manifest);

    } else if (*ev) {
      require_file(ev_cnn, "model");
      require_file(ev_lstm, "model");
      for (const auto& t : ev_tests) require_file(t, "test database");
      const fs::path dir = ev_out;
      guard_output(dir, common.force);
      fs::create_directories(dir);
      Manifest manifest("evaluate", cfg);
      const quant::TrainedQuantifier q = quant::load_quantifier(ev_cnn);
      const track::TrainedTracker tracker = track::load_tracker(ev_lstm);
      std::vector<eval::ErrorReport> cnn_reports, lstm_reports;
      for (const auto& t : ev_tests) {
        const csi::CsiDatabase db = csi::load_database(t);
        check_profile(db, q.config.profile, t);
        std::string label = fs::path(t).stem().string();
        if (label.rfind("test-", 0) == 0) label = label.substr(5);
        const auto day = pipeline::evaluate_walk(label, db, q, tracker, cfg.warmup);
        eval::write_errors_csv(dir / ("errors-" + label + "-cnn.csv"), day.cnn_only_report, day.cnn_only, day.truth);
        eval::write_errors_csv(dir / ("errors-" + label + "-cnn-lstm.csv"), day.cnn_lstm_report, day.cnn_lstm,
                               day.truth);
        cnn_reports.push_back(day.cnn_only_report);
        lstm_reports.push_back(day.cnn_lstm_report);
        std::ostringstream s;
        s << "evaluate: " << label << " cnn-only " << day.cnn_only_report.mean << " m, cnn-lstm "
          << day.cnn_lstm_report.mean << " m";
        log_line(s.str());
      }
      write_text(dir / "summary-cnn.csv", eval::compare_reports(cnn_reports));
      write_text(dir / "summary-cnn-lstm.csv", eval::compare_reports(lstm_reports));
      eval::write_cdf_csv(dir / "cdf-cnn-lstm.csv", lstm_reports);
      eval::write_cdf_csv(dir / "cdf-cnn.csv", cnn_reports);
      manifest.write(dir, common.manifest);

    } else if (*amb) {
      guard_output(amb_out, common.force);
      Manifest manifest("ambiguity", cfg);
      std::vector<csi::CsiDatabase> raw;
      for (const auto& p : amb_raw) {
        require_file(p, "database");
        raw.push_back(csi::load_database(p));
      }
      std::vector<const csi::CsiDatabase*> raw_ptrs;
      for (const auto& d : raw) raw_ptrs.push_back(&d);
      track::FeatureMatrix features;
      for (const auto& p : amb_features) {
        require_file(p, "feature");
        const track::FeatureMatrix part = track::load_features(p);
        if (features.dim == 0) features.dim = part.dim;
        if (part.dim != features.dim) throw InputError(p + ": field 'dim' differs from the other feature files");
        for (std::size_t i = 0; i < part.rows(); ++i)
          features.append(part.row(i), part.rp_index[i], part.location[i], part.time[i]);
      }
      const auto rps = pipeline::sample_rps(raw_ptrs, cfg.ambiguity_rps, cfg.ambiguity_seed());
      const auto before = pipeline::raw_ambiguity(raw_ptrs, rps, cfg.ambiguity, cfg.ambiguity_day);
      const auto after = pipeline::feature_ambiguity(features, rps, cfg.trajectories.memory_length, cfg.ambiguity,
                                                     cfg.ambiguity_seed(), cfg.ambiguity_day);
      eval::write_ambiguity_csv(amb_out, {"raw", "cnn-lstm"}, {before, after});
      std::ostringstream s;
      s << "ambiguity: " << rps.size() << " RPs; zero-ambiguity fraction raw " << before.fraction_zero()
        << " -> features " << after.fraction_zero() << "; max count " << before.max_count() << " -> "
        << after.max_count();
      log_line(s.str());
      manifest.write(amb_out, common.manifest);

    } else if (*rep) {
      guard_output(rep_out, common.force);
      Manifest manifest("report", cfg);
      std::vector<eval::ErrorReport> reports;
      for (const auto& p : rep_in) reports.push_back(read_errors_csv(p));
      const std::string table = eval::compare_reports(reports);
      write_text(rep_out, table);
      std::cout << table;
      manifest.write(rep_out, common.manifest);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInput;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kOk;
}
