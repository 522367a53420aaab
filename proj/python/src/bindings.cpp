#include "dpcc/bitstream.hpp"
#include "dpcc/codec_model.hpp"
#include "dpcc/error.hpp"
#include "dpcc/io.hpp"
#include "dpcc/metrics.hpp"
#include "dpcc/rate_control.hpp"
#include "dpcc/sequence.hpp"
#include "dpcc/training.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace dpcc;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<Point3> to_points(const Array& a) {
  if (a.ndim() != 2 || a.shape(1) != 3) throw Error(Errc::ShapeMismatch, "expected an (N, 3) array");
  std::vector<Point3> out(static_cast<size_t>(a.shape(0)));
  auto r = a.unchecked<2>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i) out[static_cast<size_t>(i)] = {r(i, 0), r(i, 1), r(i, 2)};
  return out;
}

Array to_array(const std::vector<Point3>& pts) {
  Array a({static_cast<py::ssize_t>(pts.size()), py::ssize_t{3}});
  auto w = a.mutable_unchecked<2>();
  for (size_t i = 0; i < pts.size(); ++i)
    for (int j = 0; j < 3; ++j) w(static_cast<py::ssize_t>(i), j) = pts[i][j];
  return a;
}

CoordSet to_coordset(const Array& a, int depth) {
  Frame f;
  f.points = to_points(a);
  f.bit_depth = depth;
  return to_coords(voxelize(f, depth));
}

RDCurve to_curve(const std::vector<std::pair<double, double>>& v) {
  RDCurve c;
  for (const auto& [r, p] : v) c.push_back({r, p});
  return c;
}

}  // namespace

PYBIND11_MODULE(_dpcc, m) {
  m.doc() = "Dynamic point cloud geometry codec";
  py::register_exception<Error>(m, "Error");

  py::class_<CodecModel>(m, "Model")
      .def(py::init([](std::vector<int> widths, std::vector<double> lambdas, int hyper_width, uint64_t seed) {
             ModelConfig c;
             c.widths = std::move(widths);
             c.lambdas = std::move(lambdas);
             c.hyper_width = hyper_width;
             c.seed = seed;
             return std::make_unique<CodecModel>(c);
           }),
           py::arg("widths") = std::vector<int>{8, 16, 24, 32}, py::arg("lambdas") = std::vector<double>{3, 7, 10, 20},
           py::arg("hyper_width") = 8, py::arg("seed") = 0)
      .def_static("load", [](const std::string& path) { return std::make_unique<CodecModel>(CodecModel::load(path)); })
      .def("save", &CodecModel::save)
      .def_property_readonly("routes", &CodecModel::routes)
      .def_property_readonly("widths", [](const CodecModel& mdl) { return mdl.config().widths; })
      .def_property_readonly("lambdas", [](const CodecModel& mdl) { return mdl.config().lambdas; });

  m.def(
      "train",
      [](const std::string& config_text, std::optional<uint64_t> seed, int gof_size) {
        TrainConfig cfg = parse_train_config(config_text);
        if (seed) cfg.seed = *seed;
        auto model = std::make_unique<CodecModel>(cfg.model_config());
        {
          py::gil_scoped_release release;
          joint_train(*model, cfg, make_training_pairs(cfg));
          std::vector<std::vector<CoordSet>> calib;
          for (const auto& s : make_sequences(cfg, 1)) {
            calib.emplace_back();
            for (const auto& f : s.frames) calib.back().push_back(to_coords(f));
          }
          calibrate_rate_model(*model, calib, cfg.depth, gof_size);
        }
        return model;
      },
      py::arg("config") = "", py::arg("seed") = py::none(), py::arg("gof_size") = 32,
      "Train a model from config text (key = value lines) and calibrate its rate model.");

  m.def(
      "synth_sequence",
      [](const std::string& shape, int points, int frames, std::array<double, 3> translation, double rotation_deg,
         int depth, uint64_t seed) {
        SynthSpec s;
        s.shape = parse_shape(shape);
        s.points = points;
        s.frames = frames;
        s.translation = translation;
        s.rotation_deg = rotation_deg;
        s.depth = depth;
        s.seed = seed;
        std::vector<Array> out;
        for (const auto& f : synth_sequence(s).frames) out.push_back(to_array(f.points));
        return out;
      },
      py::arg("shape") = "two-blob", py::arg("points") = 4000, py::arg("frames") = 8,
      py::arg("translation") = std::array<double, 3>{0, 0, 0}, py::arg("rotation_deg") = 0.0, py::arg("depth") = 6,
      py::arg("seed") = 0);

  m.def(
      "read_ply", [](const std::string& path) { return to_array(read_ply(path).points); }, py::arg("path"));
  m.def(
      "write_ply",
      [](const std::string& path, const Array& pts, int bit_depth, bool ascii) {
        Frame f;
        f.points = to_points(pts);
        f.bit_depth = bit_depth;
        write_ply(f, path, ascii ? PlyFormat::Ascii : PlyFormat::BinaryLittleEndian);
      },
      py::arg("path"), py::arg("points"), py::arg("bit_depth") = 0, py::arg("ascii") = false);
  m.def(
      "voxelize",
      [](const Array& pts, int depth, int source_depth) {
        Frame f;
        f.points = to_points(pts);
        f.bit_depth = source_depth;
        return to_array(voxelize(f, depth).points);
      },
      py::arg("points"), py::arg("depth"), py::arg("source_depth") = 0);

  m.def(
      "encode",
      [](CodecModel& model, const std::vector<Array>& frames, std::optional<int> route, std::optional<double> target_bpp,
         int depth, int gof_size, int sliding_window, double iframe_boost) {
        if (route.has_value() == target_bpp.has_value())
          throw Error(Errc::BadSpec, "give exactly one of route and target_bpp");
        std::vector<CoordSet> sets;
        for (const auto& f : frames) sets.push_back(to_coordset(f, depth));
        SequenceOptions o;
        o.bit_depth = depth;
        o.gof_size = gof_size;
        o.route = route;
        o.target_bpp = target_bpp.value_or(0.0);
        o.sliding_window = sliding_window;
        o.i_boost = iframe_boost;
        SequenceResult res;
        {
          py::gil_scoped_release release;
          res = encode_sequence(model, sets, o);
        }
        const auto bytes = serialize_bitstream(res.stream);
        py::list trace;
        for (const auto& r : res.trace) {
          py::dict d;
          d["frame"] = r.frame;
          d["type"] = r.type == FrameType::I ? "I" : "P";
          d["T_tar"] = r.t_tar;
          d["estimates"] = r.estimates;
          d["route"] = r.route;
          d["realized_bpp"] = r.realized_bpp;
          d["cumulative_error"] = r.cumulative_error;
          trace.append(d);
        }
        py::dict out;
        out["bitstream"] = py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
        std::vector<Array> recon;
        for (const auto& c : res.reconstructions) recon.push_back(to_array(points_of(c)));
        out["reconstructions"] = recon;
        out["frame_bpp"] = res.frame_bpp;
        out["routes"] = res.routes;
        out["trace"] = trace;
        return out;
      },
      py::arg("model"), py::arg("frames"), py::arg("route") = py::none(), py::arg("target_bpp") = py::none(),
      py::arg("depth") = 6, py::arg("gof_size") = 32, py::arg("sliding_window") = 4, py::arg("iframe_boost") = 2.0);

  m.def(
      "decode",
      [](CodecModel& model, const py::bytes& data) {
        const std::string s = data;
        const std::vector<uint8_t> bytes(s.begin(), s.end());
        std::vector<CoordSet> frames;
        {
          py::gil_scoped_release release;
          frames = decode_sequence(model, parse_bitstream(bytes));
        }
        std::vector<Array> out;
        for (const auto& c : frames) out.push_back(to_array(points_of(c)));
        return out;
      },
      py::arg("model"), py::arg("bitstream"));

  m.def(
      "d1_psnr", [](const Array& a, const Array& b, int depth) { return d1_psnr(to_points(a), to_points(b), depth); },
      py::arg("a"), py::arg("b"), py::arg("depth"));
  m.def(
      "d2_psnr", [](const Array& a, const Array& b, int depth) { return d2_psnr(to_points(a), to_points(b), depth); },
      py::arg("a"), py::arg("b"), py::arg("depth"));
  m.def(
      "bd_rate", [](const std::vector<std::pair<double, double>>& ref, const std::vector<std::pair<double, double>>& test) {
        return bd_rate(to_curve(ref), to_curve(test));
      },
      py::arg("reference"), py::arg("test"), "Curves are lists of (rate_bpp, psnr_db).");
  m.def(
      "bd_psnr", [](const std::vector<std::pair<double, double>>& ref, const std::vector<std::pair<double, double>>& test) {
        return bd_psnr(to_curve(ref), to_curve(test));
      },
      py::arg("reference"), py::arg("test"));
  m.def("bitrate_error", &bitrate_error, py::arg("realized"), py::arg("target"));

  m.def(
      "allocate_target",
      [](double r_tar, int n_c, double r_c, int sw) {
        RateControlState s;
        s.r_tar = r_tar;
        s.n_c = n_c;
        s.r_c = r_c;
        s.sw = sw;
        return allocate_target(s);
      },
      py::arg("target"), py::arg("frames_coded"), py::arg("bits_coded"), py::arg("sliding_window") = 4);
  m.def(
      "select_route",
      [](const std::vector<double>& est, double t_tar, double r_tar, int n_c, double r_c) {
        RateControlState s;
        s.r_tar = r_tar;
        s.n_c = n_c;
        s.r_c = r_c;
        return select_route(est, t_tar, s);
      },
      py::arg("estimates"), py::arg("frame_target"), py::arg("target"), py::arg("frames_coded"),
      py::arg("bits_coded"));
}
