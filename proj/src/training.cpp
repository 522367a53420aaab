#include "dpcc/training.hpp"

#include "dpcc/bytes.hpp"
#include "dpcc/error.hpp"
#include "dpcc/optim.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace dpcc {

namespace {

constexpr double kLn2 = 0.69314718055994530942;

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

std::vector<int> iota_channels(int n) {
  std::vector<int> c(static_cast<size_t>(n));
  std::iota(c.begin(), c.end(), 0);
  return c;
}

}  // namespace

nn::Var balanced_bce(const nn::Var& logits, const std::vector<uint8_t>& labels) {
  if (logits.rows() == 0) throw Error(Errc::NoCandidates, "no candidate voxels to score");
  if (logits.cols() != 1 || static_cast<size_t>(logits.rows()) != labels.size())
    throw Error(Errc::ShapeMismatch, "one logit per label is required");
  const nn::Mat& l = logits.value();
  double pos = 0.0, neg = 0.0;
  size_t npos = 0, nneg = 0;
  for (size_t i = 0; i < labels.size(); ++i) {
    const double v = l(static_cast<Eigen::Index>(i), 0);
    if (labels[i]) {
      pos += softplus(-v);
      ++npos;
    } else {
      neg += softplus(v);
      ++nneg;
    }
  }
  const int classes = (npos > 0) + (nneg > 0);
  const double wpos = npos ? 1.0 / (classes * npos * kLn2) : 0.0;
  const double wneg = nneg ? 1.0 / (classes * nneg * kLn2) : 0.0;
  nn::Mat out(1, 1);
  out(0, 0) = pos * wpos + neg * wneg;
  const int il = logits.id();
  return logits.tape()->record(std::move(out), logits.requires_grad(),
                               [il, labels, wpos, wneg](nn::Tape& t, const nn::Mat& g) {
                                 const nn::Mat& l = t.value(il);
                                 nn::Mat gl(l.rows(), 1);
                                 for (Eigen::Index i = 0; i < l.rows(); ++i) {
                                   const double v = l(i, 0);
                                   gl(i, 0) = labels[static_cast<size_t>(i)] ? -sigmoid(-v) * wpos : sigmoid(v) * wneg;
                                 }
                                 t.accumulate(il, g(0, 0) * gl);
                               });
}

nn::Var distortion(const std::vector<OccupancyLogits>& scales) {
  if (scales.empty()) throw Error(Errc::NoCandidates, "no decoder scales");
  std::vector<nn::Var> terms;
  for (const auto& s : scales) terms.push_back(balanced_bce(s.logits, s.labels));
  return nn::scale(nn::add_scalars(terms), 1.0 / static_cast<double>(terms.size()));
}

LossBreakdown rd_loss(CodecModel& model, nn::Tape& t, const FramePair& pair, int route, double lambda, bool intra,
                      nn::SplitMix& rng) {
  model.check_route(route);
  if (pair.current.empty()) throw Error(Errc::EmptyInput, "training frame is empty");
  intra = intra || pair.reference.empty();
  const double n = static_cast<double>(pair.current.size());
  auto xs = std::make_shared<const CoordSet>(pair.current);
  nn::SparseVar y = model.analysis(nn::constant(t, SparseTensor::ones(xs)), route);
  const CoordSetPtr ct = y.coords;

  LossBreakdown lb;
  lb.lambda = lambda;
  nn::SparseVar theta;
  if (intra) {
    lb.R_m = t.constant(nn::Mat::Zero(1, 1));
    theta = {ct, t.constant(nn::Mat::Zero(static_cast<Eigen::Index>(ct->size()), model.latent_width(route)))};
  } else {
    auto xr = std::make_shared<const CoordSet>(pair.reference);
    nn::SparseVar yref = model.analysis(nn::constant(t, SparseTensor::ones(xr)), route);
    nn::SparseVar m = model.inter.estimate_motion(fuse_frames(y, yref), ct, route);
    nn::Var noisy_m = quantize_train(m.feat, rng);
    const std::vector<int> shared{0, 0, 0};
    lb.R_m = nn::scale(model.m_models[static_cast<size_t>(route)].bits(noisy_m, shared), 1.0 / n);
    const auto motion = round_motion(m.feat.value());
    theta = model.inter.temporal_context(ct, motion, yref, route);
  }

  nn::SparseVar z = model.hyper_analysis(y, route);
  nn::Var noisy_z = quantize_train(z.feat, rng);
  lb.R_z = nn::scale(model.z_models[static_cast<size_t>(route)].bits(noisy_z, iota_channels(z.width())), 1.0 / n);
  nn::SparseVar phi = model.hyper_synthesis({z.coords, noisy_z}, ct, route);
  auto [mu, sigma] = model.entropy_parameters(theta, phi, route);
  nn::Var noisy_y = quantize_train(y.feat, rng);
  lb.R_y = nn::scale(gaussian_bits(noisy_y, mu, sigma), 1.0 / n);

  const auto gt_s2 = downsample_coords(pair.current, 2);
  lb.D = distortion(model.synthesis_train({ct, noisy_y}, route, gt_s2, pair.current));
  lb.L = nn::add_scalars({lb.R_m, lb.R_z, lb.R_y, nn::scale(lb.D, lambda)});
  return lb;
}

ModelConfig TrainConfig::model_config() const {
  ModelConfig m;
  m.widths = widths;
  m.lambdas = lambdas;
  m.hyper_width = hyper_width;
  m.seed = seed;
  m.validate();
  return m;
}

namespace {

template <typename T>
std::string join(const std::vector<T>& v) {
  std::ostringstream s;
  s.precision(17);
  for (size_t i = 0; i < v.size(); ++i) s << (i ? "," : "") << v[i];
  return s.str();
}

template <typename T>
std::vector<T> split_list(const std::string& s) {
  std::vector<T> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::istringstream is(item);
    T v{};
    if (!(is >> v)) throw Error(Errc::BadSpec, "bad list item '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

TrainConfig parse_train_config(const std::string& text) {
  TrainConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(Errc::BadSpec, "line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    auto num = [&](auto& dst) {
      std::istringstream is(val);
      if (!(is >> dst)) throw Error(Errc::BadSpec, "line " + std::to_string(lineno) + ": bad value for " + key);
    };
    if (key == "version") {
      int v = 0;
      num(v);
      if (v != TrainConfig::kVersion) throw Error(Errc::BadSpec, "unsupported config version " + val);
    } else if (key == "pretrain_iters") num(c.pretrain_iters);
    else if (key == "joint_iters") num(c.joint_iters);
    else if (key == "posttrain_iters") num(c.posttrain_iters);
    else if (key == "lr") num(c.lr);
    else if (key == "posttrain_lr") num(c.posttrain_lr);
    else if (key == "seed") num(c.seed);
    else if (key == "batch") num(c.batch);
    else if (key == "intra_fraction") num(c.intra_fraction);
    else if (key == "lambda0_decay") num(c.lambda0_decay);
    else if (key == "lambda0_every") num(c.lambda0_every);
    else if (key == "lambda0_floor") num(c.lambda0_floor);
    else if (key == "joint_includes_top") {
      int v = 0;
      num(v);
      c.joint_includes_top = v != 0;
    } else if (key == "sequences") num(c.sequences);
    else if (key == "frames") num(c.frames);
    else if (key == "points") num(c.points);
    else if (key == "depth") num(c.depth);
    else if (key == "max_translation") num(c.max_translation);
    else if (key == "max_rotation_deg") num(c.max_rotation_deg);
    else if (key == "widths") c.widths = split_list<int>(val);
    else if (key == "lambdas") c.lambdas = split_list<double>(val);
    else if (key == "hyper_width") num(c.hyper_width);
    else if (key == "log_path") c.log_path = val;
    else throw Error(Errc::BadSpec, "unknown config key " + key);
  }
  if (c.batch < 1 || c.pretrain_iters < 0 || c.joint_iters < 0 || c.posttrain_iters < 0 || c.lambda0_every < 1 ||
      c.posttrain_lr < 0)
    throw Error(Errc::BadSpec, "iteration counts must be non-negative and batch positive");
  c.model_config();
  return c;
}

TrainConfig load_train_config(const std::string& path) {
  const auto bytes = read_file(path);
  return parse_train_config(std::string(bytes.begin(), bytes.end()));
}

std::string format_train_config(const TrainConfig& c) {
  std::ostringstream s;
  s.precision(17);
  s << "version = " << TrainConfig::kVersion << "\n"
    << "pretrain_iters = " << c.pretrain_iters << "\n"
    << "joint_iters = " << c.joint_iters << "\n"
    << "posttrain_iters = " << c.posttrain_iters << "\n"
    << "lr = " << c.lr << "\n"
    << "posttrain_lr = " << c.posttrain_lr << "\n"
    << "seed = " << c.seed << "\n"
    << "batch = " << c.batch << "\n"
    << "intra_fraction = " << c.intra_fraction << "\n"
    << "lambda0_decay = " << c.lambda0_decay << "\n"
    << "lambda0_every = " << c.lambda0_every << "\n"
    << "lambda0_floor = " << c.lambda0_floor << "\n"
    << "joint_includes_top = " << (c.joint_includes_top ? 1 : 0) << "\n"
    << "sequences = " << c.sequences << "\n"
    << "frames = " << c.frames << "\n"
    << "points = " << c.points << "\n"
    << "depth = " << c.depth << "\n"
    << "max_translation = " << c.max_translation << "\n"
    << "max_rotation_deg = " << c.max_rotation_deg << "\n"
    << "widths = " << join(c.widths) << "\n"
    << "lambdas = " << join(c.lambdas) << "\n"
    << "hyper_width = " << c.hyper_width << "\n";
  if (!c.log_path.empty()) s << "log_path = " << c.log_path << "\n";
  return s.str();
}

std::vector<SynthSequence> make_sequences(const TrainConfig& cfg, uint64_t seed_offset) {
  nn::SplitMix rng(cfg.seed * 7777 + seed_offset);
  std::vector<SynthSequence> out;
  for (int s = 0; s < cfg.sequences; ++s) {
    SynthSpec spec;
    spec.shape = SynthShape::TwoBlob;
    spec.points = cfg.points;
    spec.frames = cfg.frames;
    spec.depth = cfg.depth;
    spec.seed = rng.next();
    spec.translation = {rng.uniform(-cfg.max_translation, cfg.max_translation),
                        rng.uniform(-cfg.max_translation, cfg.max_translation),
                        rng.uniform(-0.5 * cfg.max_translation, 0.5 * cfg.max_translation)};
    spec.rotation_deg = rng.uniform(-cfg.max_rotation_deg, cfg.max_rotation_deg);
    out.push_back(synth_sequence(spec));
  }
  return out;
}

std::vector<FramePair> make_training_pairs(const TrainConfig& cfg, uint64_t seed_offset) {
  std::vector<FramePair> pairs;
  for (const auto& seq : make_sequences(cfg, seed_offset)) {
    for (size_t t = 0; t < seq.frames.size(); ++t) {
      FramePair p;
      p.current = to_coords(seq.frames[t]);
      p.reference = t == 0 ? CoordSet::from_coords({}, 1) : to_coords(seq.frames[t - 1]);
      if (!p.current.empty()) pairs.push_back(std::move(p));
    }
  }
  return pairs;
}

std::string format_record(const TrainRecord& r) {
  nlohmann::json j{{"iter", r.iter}, {"phase", r.phase}, {"k", r.route}, {"lambda", r.lambda}, {"R_m", r.R_m},
                   {"R_z", r.R_z},   {"R_y", r.R_y},     {"D", r.D},      {"L_k", r.L}};
  return j.dump();
}

void joint_train(CodecModel& model, const TrainConfig& cfg, const std::vector<FramePair>& data,
                 const TrainObserver& observer) {
  if (data.empty()) throw Error(Errc::EmptyInput, "no training pairs");
  const int K = model.routes();
  nn::Adam opt(model.parameters(), {.lr = cfg.lr});
  nn::SplitMix rng(cfg.seed * 31 + 7);
  std::ofstream log;
  if (!cfg.log_path.empty()) {
    log.open(cfg.log_path);
    if (!log) throw Error(Errc::Io, "cannot open " + cfg.log_path);
  }
  std::vector<double> lambdas = model.config().lambdas;
  int iter = 0;

  auto step = [&](int phase, const std::vector<int>& routes) {
    model.zero_grad();
    nn::Tape tape;
    std::vector<nn::Var> terms;
    std::vector<TrainRecord> records;
    for (int b = 0; b < cfg.batch; ++b) {
      const FramePair& pair = data[rng.next() % data.size()];
      const bool intra = pair.reference.empty() || rng.uniform() < cfg.intra_fraction;
      // Every route of one batch item sees the same pair and the same noise
      // stream position.
      for (int k : routes) {
        auto lb = rd_loss(model, tape, pair, k, lambdas[static_cast<size_t>(k)], intra, rng);
        if (!std::isfinite(lb.l()))
          throw Error(Errc::NonFiniteLoss, "iteration " + std::to_string(iter) + " route " + std::to_string(k) +
                                               ": R_m=" + std::to_string(lb.rm()) + " R_z=" + std::to_string(lb.rz()) +
                                               " R_y=" + std::to_string(lb.ry()) + " D=" + std::to_string(lb.d()));
        terms.push_back(lb.L);
        records.push_back({iter, phase, k, lb.lambda, lb.rm(), lb.rz(), lb.ry(), lb.d(), lb.l()});
      }
    }
    nn::Var loss = nn::scale(nn::add_scalars(terms), 1.0 / cfg.batch);
    tape.backward(loss);
    opt.step();
    for (const auto& r : records) {
      if (log) log << format_record(r) << "\n";
      if (observer) observer(r);
    }
    ++iter;
  };

  for (int i = 0; i < cfg.pretrain_iters; ++i) step(1, {K - 1});

  std::vector<int> joint;
  if (cfg.joint_includes_top) joint.push_back(K - 1);
  for (int k = K - 2; k >= 0; --k) joint.push_back(k);
  for (int i = 0; i < cfg.joint_iters; ++i) step(2, joint);

  if (cfg.posttrain_lr > 0) opt.set_lr(cfg.posttrain_lr);
  for (int i = 0; i < cfg.posttrain_iters; ++i) {
    if (i > 0 && i % cfg.lambda0_every == 0) lambdas[0] = std::max(lambdas[0] * cfg.lambda0_decay, cfg.lambda0_floor);
    step(3, {0});
  }
  model.refresh_tables();
}

}  // namespace dpcc
