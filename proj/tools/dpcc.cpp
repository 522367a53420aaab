// dpcc: command-line front end for the dynamic point cloud codec.

#include "dpcc/bitstream.hpp"
#include "dpcc/bytes.hpp"
#include "dpcc/codec_model.hpp"
#include "dpcc/error.hpp"
#include "dpcc/io.hpp"
#include "dpcc/metrics.hpp"
#include "dpcc/rate_control.hpp"
#include "dpcc/sequence.hpp"
#include "dpcc/training.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace dpcc;

namespace {

std::vector<std::string> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<std::string> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<std::string> found;
      for (const auto& e : fs::directory_iterator(in))
        if (e.is_regular_file() && e.path().extension() == ".ply") found.push_back(e.path().string());
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(in);
    }
  }
  if (files.empty()) throw Error(Errc::EmptyInput, "no PLY frames found");
  return files;
}

std::vector<CoordSet> load_frames(const std::vector<std::string>& inputs, int depth) {
  std::vector<Frame> raw;
  for (const auto& f : expand_inputs(inputs)) raw.push_back(read_ply(f));
  std::vector<CoordSet> out;
  for (const auto& f : voxelize_sequence(raw, depth)) out.push_back(to_coords(f));
  return out;
}

std::string frame_name(size_t i) {
  std::ostringstream s;
  s << "frame_" << std::setw(4) << std::setfill('0') << i << ".ply";
  return s.str();
}

SequenceOptions sequence_options(int depth, int gof, std::optional<int> route, double target, int sw, double boost) {
  SequenceOptions o;
  o.bit_depth = depth;
  o.gof_size = gof;
  o.route = route;
  o.target_bpp = target;
  o.sliding_window = sw;
  o.i_boost = boost;
  return o;
}

struct Common {
  uint64_t seed = 0;
  int depth = 6;
  int gof = 32;
  int sw = 4;
  double boost = 2.0;
};

void add_coding_flags(CLI::App* c, Common& o) {
  c->add_option("--depth", o.depth, "Voxel grid depth (bits per axis)")->check(CLI::Range(1, 16));
  c->add_option("--gof-size", o.gof, "Frames per group of frames")->check(CLI::PositiveNumber);
  c->add_option("--sliding-window", o.sw, "Rate-control sliding window (frames)")->check(CLI::PositiveNumber);
  c->add_option("--iframe-boost", o.boost, "I-frame target multiplier")->check(CLI::PositiveNumber);
}

struct RouteStats {
  double bpp = 0.0, d1 = 0.0, d2 = 0.0;
};

RouteStats measure(const std::vector<CoordSet>& frames, const std::vector<CoordSet>& recon, double mean_bpp,
                   int depth) {
  RouteStats s;
  s.bpp = mean_bpp;
  for (size_t t = 0; t < frames.size(); ++t) {
    const auto a = points_of(frames[t]), b = points_of(recon[t]);
    s.d1 += d1_psnr(a, b, depth);
    s.d2 += d2_psnr(a, b, depth);
  }
  s.d1 /= static_cast<double>(frames.size());
  s.d2 /= static_cast<double>(frames.size());
  return s;
}

int run(int argc, char** argv) {
  CLI::App app{"Dynamic point cloud geometry codec"};
  app.require_subcommand(1);
  Common o;

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic dynamic sequence as PLY frames");
  std::string synth_out, shape = "two-blob";
  SynthSpec spec;
  std::vector<double> translation{0, 0, 0};
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--shape", shape, "sphere | cube | two-blob");
  synth->add_option("--points", spec.points, "Surface samples per frame")->check(CLI::PositiveNumber);
  synth->add_option("--frames", spec.frames, "Frame count")->check(CLI::PositiveNumber);
  synth->add_option("--translation", translation, "Per-frame translation in voxels")->expected(3)->delimiter(',');
  synth->add_option("--rotation", spec.rotation_deg, "Per-frame rotation about z in degrees");
  synth->add_option("--depth", spec.depth, "Voxel grid depth")->check(CLI::Range(1, 16));
  synth->add_option("--seed", o.seed, "Random seed");

  // train
  auto* train = app.add_subcommand("train", "Train a model and calibrate its rate model");
  std::string cfg_path, model_out, log_path;
  train->add_option("--config", cfg_path, "Training config (key = value)");
  train->add_option("--out", model_out, "Checkpoint path")->required();
  train->add_option("--log", log_path, "Per-iteration JSON lines");
  auto* train_seed = train->add_option("--seed", o.seed, "Random seed (overrides the config)");
  train->add_option("--gof-size", o.gof, "GoF size used for rate calibration")->check(CLI::PositiveNumber);

  // encode
  auto* encode = app.add_subcommand("encode", "Encode PLY frames into a bitstream");
  std::string model_path, out_path, trace_path;
  std::vector<std::string> inputs;
  std::optional<int> route;
  double target = 0.0;
  encode->add_option("--model", model_path, "Checkpoint")->required()->check(CLI::ExistingFile);
  encode->add_option("--input", inputs, "PLY files or directories")->required();
  encode->add_option("--out", out_path, "Bitstream path")->required();
  auto* enc_route = encode->add_option("--route", route, "Fixed route index");
  auto* enc_target = encode->add_option("--target-bpp", target, "Rate-control target (bits per point)")
                         ->check(CLI::PositiveNumber);
  enc_route->excludes(enc_target);
  encode->add_option("--trace", trace_path, "Rate-control trace (JSON lines)");
  encode->add_option("--seed", o.seed, "Random seed");
  add_coding_flags(encode, o);

  // decode
  auto* decode = app.add_subcommand("decode", "Decode a bitstream into PLY frames");
  std::string bits_path, dec_out;
  bool ascii = false;
  decode->add_option("--model", model_path, "Checkpoint")->required()->check(CLI::ExistingFile);
  decode->add_option("--input", bits_path, "Bitstream")->required()->check(CLI::ExistingFile);
  decode->add_option("--out", dec_out, "Output directory")->required();
  decode->add_flag("--ascii", ascii, "Write ASCII PLY");
  decode->add_option("--seed", o.seed, "Random seed");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "RD curves, BD metrics and bitrate error");
  std::string csv_out, ref_csv, test_csv;
  evaluate->add_option("--model", model_path, "Checkpoint")->check(CLI::ExistingFile);
  evaluate->add_option("--input", inputs, "PLY files or directories");
  evaluate->add_option("--csv", csv_out, "Write the model's RD curve (rate_bpp,psnr_db)");
  evaluate->add_option("--reference", ref_csv, "Reference RD curve CSV")->check(CLI::ExistingFile);
  evaluate->add_option("--test", test_csv, "Test RD curve CSV")->check(CLI::ExistingFile);
  evaluate->add_option("--target-bpp", target, "Also run rate control and report the bitrate error")
      ->check(CLI::PositiveNumber);
  evaluate->add_option("--seed", o.seed, "Random seed");
  add_coding_flags(evaluate, o);

  // rc-trace
  auto* rctrace = app.add_subcommand("rc-trace", "Emit the rate-control ledger for a sequence");
  rctrace->add_option("--model", model_path, "Checkpoint")->required()->check(CLI::ExistingFile);
  rctrace->add_option("--input", inputs, "PLY files or directories")->required();
  rctrace->add_option("--target-bpp", target, "Target bits per point")->required()->check(CLI::PositiveNumber);
  rctrace->add_option("--out", trace_path, "Trace path (default: stdout)");
  rctrace->add_option("--seed", o.seed, "Random seed");
  add_coding_flags(rctrace, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    for (auto* sub : app.get_subcommands()) std::cerr << sub->help();
    return 1;
  }

  if (synth->parsed()) {
    spec.shape = parse_shape(shape);
    spec.translation = {translation[0], translation[1], translation[2]};
    spec.seed = o.seed;
    const auto seq = synth_sequence(spec);
    fs::create_directories(synth_out);
    for (size_t t = 0; t < seq.frames.size(); ++t)
      write_ply(seq.frames[t], (fs::path(synth_out) / frame_name(t)).string());
    std::ofstream m(fs::path(synth_out) / "motion.csv");
    m << "frame,tx,ty,tz,rotation_deg\n" << std::setprecision(17);
    for (size_t t = 0; t < seq.frames.size(); ++t)
      m << t << "," << seq.translations[t][0] << "," << seq.translations[t][1] << "," << seq.translations[t][2] << ","
        << seq.rotations_deg[t] << "\n";
    if (!m) throw Error(Errc::Io, "cannot write motion.csv");
    std::cerr << "wrote " << seq.frames.size() << " frames to " << synth_out << "\n";
    return 0;
  }

  if (train->parsed()) {
    TrainConfig cfg = cfg_path.empty() ? TrainConfig{} : load_train_config(cfg_path);
    if (train_seed->count() > 0) cfg.seed = o.seed;
    if (!log_path.empty()) cfg.log_path = log_path;
    const auto data = make_training_pairs(cfg);
    CodecModel model(cfg.model_config());
    joint_train(model, cfg, data, [](const TrainRecord& r) {
      if (r.iter % 50 == 0) std::cerr << format_record(r) << "\n";
    });
    std::vector<std::vector<CoordSet>> calib;
    for (const auto& s : make_sequences(cfg, 1)) {
      calib.emplace_back();
      for (const auto& f : s.frames) calib.back().push_back(to_coords(f));
    }
    calibrate_rate_model(model, calib, cfg.depth, o.gof);
    model.save(model_out);
    std::cerr << "saved " << model_out << "\n";
    return 0;
  }

  if (encode->parsed()) {
    CodecModel model = CodecModel::load(model_path);
    if (!route && enc_target->count() == 0) throw CLI::RequiredError("--route or --target-bpp");
    const auto frames = load_frames(inputs, o.depth);
    std::ofstream trace;
    if (!trace_path.empty()) trace.open(trace_path);
    const auto res = encode_sequence(model, frames, sequence_options(o.depth, o.gof, route, target, o.sw, o.boost),
                                     [&](const TraceRecord& r) {
                                       if (trace) trace << format_trace(r) << "\n";
                                     });
    const auto bytes = serialize_bitstream(res.stream);
    write_file(out_path, bytes);
    size_t points = 0;
    for (const auto& f : frames) points += f.size();
    std::cout << "frames " << frames.size() << " bytes " << bytes.size() << " bpp "
              << bpp(static_cast<double>(bytes.size() * 8), points) << " mean_frame_bpp " << res.mean_bpp() << "\n";
    return 0;
  }

  if (decode->parsed()) {
    CodecModel model = CodecModel::load(model_path);
    const auto stream = parse_bitstream(read_file(bits_path));
    const auto frames = decode_sequence(model, stream);
    fs::create_directories(dec_out);
    for (size_t t = 0; t < frames.size(); ++t) {
      Frame f = from_coords(frames[t], stream.header.bit_depth);
      f.index = static_cast<int>(t);
      write_ply(f, (fs::path(dec_out) / frame_name(t)).string(),
                ascii ? PlyFormat::Ascii : PlyFormat::BinaryLittleEndian);
    }
    std::cerr << "decoded " << frames.size() << " frames to " << dec_out << "\n";
    return 0;
  }

  if (evaluate->parsed()) {
    std::cout << std::fixed << std::setprecision(4);
    if (!ref_csv.empty() || !test_csv.empty()) {
      if (ref_csv.empty() || test_csv.empty()) throw CLI::RequiredError("--reference and --test");
      const auto a = read_rd_csv(ref_csv), b = read_rd_csv(test_csv);
      std::cout << "bd_rate_percent " << bd_rate(a, b) << "\nbd_psnr_db " << bd_psnr(a, b) << "\n";
      return 0;
    }
    if (model_path.empty() || inputs.empty()) throw CLI::RequiredError("--model and --input (or --reference/--test)");
    CodecModel model = CodecModel::load(model_path);
    const auto frames = load_frames(inputs, o.depth);
    RDCurve curve;
    std::cout << "route,rate_bpp,d1_psnr_db,d2_psnr_db\n";
    for (int k = 0; k < model.routes(); ++k) {
      const auto res = encode_sequence(model, frames, sequence_options(o.depth, o.gof, k, 0.0, o.sw, o.boost));
      const auto dec = decode_sequence(model, parse_bitstream(serialize_bitstream(res.stream)));
      const auto s = measure(frames, dec, res.mean_bpp(), o.depth);
      curve.push_back({s.bpp, s.d1});
      std::cout << k << "," << s.bpp << "," << s.d1 << "," << s.d2 << "\n";
    }
    if (!csv_out.empty()) write_rd_csv(curve, csv_out);
    if (target > 0.0) {
      const auto res =
          encode_sequence(model, frames, sequence_options(o.depth, o.gof, std::nullopt, target, o.sw, o.boost));
      std::cout << "target_bpp " << target << "\nrealized_bpp " << res.mean_bpp() << "\nbitrate_error_percent "
                << bitrate_error(res.mean_bpp(), target) << "\n";
    }
    return 0;
  }

  if (rctrace->parsed()) {
    CodecModel model = CodecModel::load(model_path);
    const auto frames = load_frames(inputs, o.depth);
    std::ofstream file;
    if (!trace_path.empty()) {
      file.open(trace_path);
      if (!file) throw Error(Errc::Io, "cannot open " + trace_path);
    }
    std::ostream& out = trace_path.empty() ? std::cout : file;
    const auto res = encode_sequence(model, frames, sequence_options(o.depth, o.gof, std::nullopt, target, o.sw, o.boost),
                                     [&](const TraceRecord& r) { out << format_trace(r) << "\n"; });
    std::cerr << "realized_bpp " << res.mean_bpp() << " bitrate_error_percent " << bitrate_error(res.mean_bpp(), target)
              << "\n";
    return 0;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const CLI::Error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
