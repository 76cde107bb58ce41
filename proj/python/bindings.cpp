#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "csiloc/csi/database.hpp"
#include "csiloc/csi/preprocess.hpp"
#include "csiloc/error.hpp"
#include "csiloc/eval/metrics.hpp"
#include "csiloc/pipeline/pipeline.hpp"

namespace py = pybind11;
using namespace csiloc;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

csi::CsiImage image_from_array(const Array& a) {
  if (a.ndim() != 3) throw InputError("CSI image must be a 3-D array (scans, subcarriers, antennae)");
  const csi::DeviceProfile p{static_cast<std::uint16_t>(a.shape(0)), static_cast<std::uint16_t>(a.shape(1)),
                             static_cast<std::uint16_t>(a.shape(2))};
  return csi::CsiImage(p, std::vector<double>(a.data(), a.data() + a.size()));
}

Array image_to_array(const csi::CsiImage& img) {
  Array out({static_cast<py::ssize_t>(img.profile.scans), static_cast<py::ssize_t>(img.profile.subcarriers),
             static_cast<py::ssize_t>(img.profile.antennae)});
  std::copy(img.amplitudes.begin(), img.amplitudes.end(), out.mutable_data());
  return out;
}

Array points_to_array(const std::vector<Point2>& pts) {
  Array out({static_cast<py::ssize_t>(pts.size()), py::ssize_t{2}});
  auto m = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    m(i, 0) = pts[i].x;
    m(i, 1) = pts[i].y;
  }
  return out;
}

std::vector<Point2> points_from_array(const Array& a) {
  if (a.ndim() != 2 || a.shape(1) != 2) throw InputError("locations must be an (N, 2) array");
  std::vector<Point2> pts;
  auto m = a.unchecked<2>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i) pts.push_back({m(i, 0), m(i, 1)});
  return pts;
}

std::vector<double> vector_from(const Array& a) { return {a.data(), a.data() + a.size()}; }

// Images stacked as (N, scans, subcarriers, antennae) plus per-record metadata.
py::dict database_to_dict(const csi::CsiDatabase& db) {
  const auto& p = db.profile;
  const auto n = static_cast<py::ssize_t>(db.records.size());
  Array images({n, static_cast<py::ssize_t>(p.scans), static_cast<py::ssize_t>(p.subcarriers),
                static_cast<py::ssize_t>(p.antennae)});
  py::array_t<std::int32_t> rp(n);
  Array time(n);
  std::vector<Point2> loc;
  for (py::ssize_t i = 0; i < n; ++i) {
    const auto& r = db.records[static_cast<std::size_t>(i)];
    std::copy(r.image.amplitudes.begin(), r.image.amplitudes.end(),
              images.mutable_data() + i * static_cast<py::ssize_t>(p.element_count()));
    rp.mutable_at(i) = r.rp_index;
    time.mutable_at(i) = r.snapshot_time;
    loc.push_back(r.location);
  }
  py::dict d;
  d["images"] = images;
  d["locations"] = points_to_array(loc);
  d["rp_index"] = rp;
  d["time"] = time;
  return d;
}

py::dict report_to_dict(const eval::ErrorReport& r) {
  py::dict d;
  d["label"] = r.label;
  d["errors"] = r.errors;
  d["mean"] = r.mean;
  d["std"] = r.std;
  d["p80"] = r.errors.empty() ? 0.0 : r.percentile(0.8);
  return d;
}

py::dict ambiguity_to_dict(const eval::AmbiguityResult& r) {
  py::dict d;
  d["counts"] = r.counts;
  d["fraction_zero"] = r.fraction_zero();
  d["max_count"] = r.max_count();
  return d;
}

KeyValueConfig config_from_dict(const py::dict& values) {
  KeyValueConfig kv;
  for (const auto& [k, v] : values) kv.set(py::str(k), py::str(v));
  return kv;
}

std::vector<const csi::CsiImage*> pointers(const std::vector<csi::CsiImage>& images) {
  std::vector<const csi::CsiImage*> out;
  for (const auto& i : images) out.push_back(&i);
  return out;
}

std::vector<csi::CsiImage> images_from_stack(const Array& stack) {
  if (stack.ndim() == 3) return {image_from_array(stack)};
  if (stack.ndim() != 4) throw InputError("expected an image or a stack of images");
  std::vector<csi::CsiImage> out;
  const csi::DeviceProfile p{static_cast<std::uint16_t>(stack.shape(1)), static_cast<std::uint16_t>(stack.shape(2)),
                             static_cast<std::uint16_t>(stack.shape(3))};
  const std::size_t n = p.element_count();
  for (py::ssize_t i = 0; i < stack.shape(0); ++i)
    out.emplace_back(p, std::vector<double>(stack.data() + i * n, stack.data() + (i + 1) * n));
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the csiloc CSI localization pipeline";

  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_IOError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<UsageError>(m, "UsageError", PyExc_RuntimeError);

  // metrics
  m.def("pearson", [](const Array& u, const Array& v) { return eval::pearson(vector_from(u), vector_from(v)); },
        py::arg("u"), py::arg("v"));
  m.def(
      "average_self_correlation",
      [](const std::vector<Array>& samples) {
        std::vector<std::vector<double>> rows;
        for (const auto& s : samples) rows.push_back(vector_from(s));
        return eval::average_self_correlation(rows);
      },
      py::arg("samples"));
  m.def(
      "count_ambiguous",
      [](const std::vector<std::vector<Array>>& fingerprints, const Array& locations, double grid_size,
         double threshold) {
        std::vector<std::vector<std::vector<double>>> fp;
        for (const auto& set : fingerprints) {
          fp.emplace_back();
          for (const auto& f : set) fp.back().push_back(vector_from(f));
        }
        return ambiguity_to_dict(eval::count_ambiguous(fp, points_from_array(locations), {grid_size, threshold}));
      },
      py::arg("fingerprints"), py::arg("locations"), py::arg("grid_size") = 0.5, py::arg("threshold") = 0.8);
  m.def(
      "error_report",
      [](const Array& pred, const Array& truth) {
        return report_to_dict(eval::error_report(points_from_array(pred), points_from_array(truth)));
      },
      py::arg("predictions"), py::arg("truth"));

  // preprocessing
  m.def(
      "median_filter", [](const Array& img, std::size_t window) {
        return image_to_array(csi::median_filter_columns(image_from_array(img), window));
      },
      py::arg("image"), py::arg("window") = csi::kDefaultMedianWindow);
  m.def(
      "minmax_normalize_rows",
      [](const Array& img) { return image_to_array(csi::minmax_normalize_rows(image_from_array(img))); },
      py::arg("image"));
  m.def(
      "average_amplitude", [](const Array& img) { return csi::average_amplitude(image_from_array(img)); },
      py::arg("image"));
  m.def(
      "preprocess",
      [](const Array& img, double a_max, std::optional<double> rp_average, std::size_t window) {
        csi::NormalizationContext ctx;
        ctx.a_max = a_max;
        std::optional<std::int32_t> rp;
        if (rp_average) {
          ctx.per_rp_average[0] = *rp_average;
          rp = 0;
        }
        return image_to_array(csi::preprocess(image_from_array(img), ctx, window, rp));
      },
      py::arg("image"), py::arg("a_max"), py::arg("rp_average") = py::none(),
      py::arg("window") = csi::kDefaultMedianWindow);

  // simulator and files
  m.def(
      "synthesize",
      [](const py::dict& config) {
        const auto cfg = sim::SynthConfig::from_config(config_from_dict(config));
        sim::SynthOutput out;
        {
          py::gil_scoped_release release;
          out = sim::build_database(sim::make_site(cfg.site, cfg.seed), cfg.plan, cfg.profile, cfg.seed);
        }
        py::dict d;
        d["rps"] = points_to_array(out.rps);
        d["route"] = points_to_array(out.route);
        d["train"] = database_to_dict(out.train);
        d["validation"] = database_to_dict(out.validation);
        d["holdout"] = database_to_dict(out.holdout);
        py::dict tests;
        for (const auto& t : out.tests) tests[py::str(t.label)] = database_to_dict(t.database);
        d["tests"] = tests;
        return d;
      },
      py::arg("config") = py::dict(), "Simulated survey: RP grid, test route and CSI databases.");
  m.def(
      "load_database", [](const std::filesystem::path& p) { return database_to_dict(csi::load_database(p)); },
      py::arg("path"));

  // trained models
  py::class_<quant::TrainedQuantifier>(m, "Quantifier")
      .def_static("load", &quant::load_quantifier, py::arg("path"))
      .def_property_readonly("feature_dim", &quant::TrainedQuantifier::feature_dim)
      .def(
          "prepare",
          [](const quant::TrainedQuantifier& q, const Array& raw) {
            return image_to_array(quant::prepare_test_image(q, image_from_array(raw)));
          },
          py::arg("raw_image"))
      .def(
          "predict",
          [](const quant::TrainedQuantifier& q, const Array& images) {
            const auto imgs = images_from_stack(images);
            return points_to_array(quant::predict_cnn_only(q, pointers(imgs)));
          },
          py::arg("images"), "CNN-only locations for preprocessed images.")
      .def(
          "features",
          [](const quant::TrainedQuantifier& q, const Array& images) {
            const auto imgs = images_from_stack(images);
            const auto rows = quant::extract_features(q, pointers(imgs));
            Array out({static_cast<py::ssize_t>(rows.size()), static_cast<py::ssize_t>(q.feature_dim())});
            for (std::size_t i = 0; i < rows.size(); ++i)
              std::copy(rows[i].begin(), rows[i].end(), out.mutable_data() + i * q.feature_dim());
            return out;
          },
          py::arg("images"));

  py::class_<track::TrainedTracker>(m, "Tracker")
      .def_static("load", &track::load_tracker, py::arg("path"))
      .def_readonly("steps", &track::TrainedTracker::steps)
      .def(
          "track",
          [](const track::TrainedTracker& t, const quant::TrainedQuantifier& q, const Array& raw_images,
             const std::string& warmup) {
            const auto imgs = images_from_stack(raw_images);
            return points_to_array(track::track(imgs, q, t, pipeline::warmup_from_name(warmup)));
          },
          py::arg("quantifier"), py::arg("raw_images"), py::arg("warmup") = "repeat",
          "Online CNN-LSTM estimates for raw images in time order.");

  // whole pipeline
  m.def(
      "run_experiment",
      [](const py::dict& config, const std::function<void(const std::string&)>& progress) {
        const auto cfg = pipeline::RunConfig::from_config(config_from_dict(config));
        pipeline::Experiment ex;
        {
          py::gil_scoped_release release;
          ex = pipeline::run_experiment(cfg, [&](const std::string& line) {
            if (!progress) return;
            py::gil_scoped_acquire acquire;
            progress(line);
          });
        }
        py::dict d;
        py::list days;
        for (const auto& day : ex.days) {
          py::dict e;
          e["label"] = day.label;
          e["truth"] = points_to_array(day.truth);
          e["cnn_only"] = report_to_dict(day.cnn_only_report);
          e["cnn_lstm"] = report_to_dict(day.cnn_lstm_report);
          e["cnn_lstm_path"] = points_to_array(day.cnn_lstm);
          days.append(e);
        }
        d["days"] = days;
        d["cnn_only"] = report_to_dict(ex.cnn_only_overall);
        d["cnn_lstm"] = report_to_dict(ex.cnn_lstm_overall);
        d["raw_correlation"] = ex.correlation.raw;
        d["feature_correlation"] = ex.correlation.feature;
        d["raw_ambiguity"] = ambiguity_to_dict(ex.raw_ambiguity);
        d["feature_ambiguity"] = ambiguity_to_dict(ex.feature_ambiguity);
        py::list cnn_curve, lstm_curve;
        for (const auto& e : ex.cnn.curve) cnn_curve.append(py::make_tuple(e.epoch, e.train_loss, e.val_error));
        for (const auto& e : ex.lstm.curve) lstm_curve.append(py::make_tuple(e.epoch, e.train_loss, e.val_error));
        d["cnn_curve"] = cnn_curve;
        d["lstm_curve"] = lstm_curve;
        d["seconds"] = ex.total_seconds();
        return d;
      },
      py::arg("config") = py::dict(), py::arg("progress") = nullptr,
      "Runs synth, training and evaluation in memory and returns the headline numbers.");
}
