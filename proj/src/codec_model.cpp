#include "dpcc/codec_model.hpp"

#include "dpcc/error.hpp"

#include <algorithm>
#include <numeric>

namespace dpcc {

using nn::ConvMode;
using nn::Mat;
using nn::SlimConv;
using nn::SparseVar;
using nn::Var;

namespace {

std::vector<int> repeat(int routes, int w) { return nn::constant_widths(routes, w); }

SparseVar relu(SparseVar v) {
  v.feat = nn::relu(v.feat);
  return v;
}

CoordSetPtr subset(const CoordSet& cand, const std::vector<int>& rows) {
  std::vector<Coord> kept;
  kept.reserve(rows.size());
  for (int r : rows) kept.push_back(cand[static_cast<size_t>(r)]);
  return std::make_shared<const CoordSet>(CoordSet::from_coords(std::move(kept), cand.stride()));
}

}  // namespace

void ModelConfig::validate() const {
  if (widths.size() < 2) throw Error(Errc::BadSpec, "at least two routes are required");
  if (lambdas.size() != widths.size()) throw Error(Errc::BadSpec, "one lambda per route is required");
  for (size_t i = 0; i < widths.size(); ++i) {
    if (widths[i] < 1 || (i > 0 && widths[i] < widths[i - 1])) throw Error(Errc::BadSpec, "route widths must nest");
    if (!(lambdas[i] >= 0.0) || (i > 0 && lambdas[i] <= lambdas[i - 1]))
      throw Error(Errc::BadSpec, "lambdas must be strictly increasing");
  }
  if (hyper_width < 1) throw Error(Errc::BadSpec, "hyper width must be positive");
}

ScaleCounts scale_counts(const CoordSet& x) {
  return {static_cast<uint32_t>(downsample_coords(x, 2).size()), static_cast<uint32_t>(x.size())};
}

std::vector<int> top_k_rows(const Mat& logits, size_t count) {
  const auto n = static_cast<size_t>(logits.rows());
  if (count > n)
    throw Error(Errc::CountExceedsCandidates,
                std::to_string(count) + " voxels requested from " + std::to_string(n) + " candidates");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return logits(a, 0) > logits(b, 0); });
  order.resize(count);
  std::sort(order.begin(), order.end());
  return order;
}

CodecModel::CodecModel(ModelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const auto& w = cfg_.widths;
  const int K = routes();
  const auto one = repeat(K, 1);
  const auto hyper = repeat(K, cfg_.hyper_width);
  enc1 = SlimConv("enc1", {one}, w, 2);
  enc2 = SlimConv("enc2", {w}, w);
  enc3 = SlimConv("enc3", {w}, w, 2);
  enc4 = SlimConv("enc4", {w}, w);
  dec1 = SlimConv("dec1", {w}, w, 2, ConvMode::Transposed);
  dec2 = SlimConv("dec2", {w}, w);
  head1 = SlimConv("head1", {w}, one);
  dec3 = SlimConv("dec3", {w}, w, 2, ConvMode::Transposed);
  dec4 = SlimConv("dec4", {w}, w);
  head2 = SlimConv("head2", {w}, one);
  ha1 = SlimConv("ha1", {w}, hyper, 2);
  ha2 = SlimConv("ha2", {hyper}, hyper);
  hs1 = SlimConv("hs1", {hyper}, w, 2, ConvMode::Transposed);
  hs2 = SlimConv("hs2", {w}, w);
  ep1 = SlimConv("ep1", {w, w}, w);
  ep2 = SlimConv("ep2", {w}, w);
  ep_mu = SlimConv("ep.mu", {w}, w);
  ep_sigma = SlimConv("ep.sigma", {w}, w);
  ep_theta = SlimConv("ep.theta", {w}, w, 1, ConvMode::Normal, 1);

  uint64_t s = cfg_.seed * 1000003ull;
  for (auto* l : layers()) l->init_uniform(++s);
  for (auto* l : {&enc4, &ha2, &ep_mu, &ep_sigma, &head1, &head2}) l->init_uniform(++s, 0.5);
  ep_theta.init_identity();
  inter = InterPredictor(w, cfg_.seed * 7919ull + 17);
  for (int k = 0; k < K; ++k) {
    z_models.emplace_back("z" + std::to_string(k), cfg_.hyper_width, cfg_.seed + 101 + k);
    // Motion is mostly zero; the prior starts peaked there.
    m_models.emplace_back("m" + std::to_string(k), 1, cfg_.seed + 211 + k, 0.5, 0.15);
  }
}

int CodecModel::latent_width(int route) const {
  check_route(route);
  return cfg_.widths[static_cast<size_t>(route)];
}

void CodecModel::check_route(int route) const {
  if (route < 0 || route >= routes())
    throw Error(Errc::UnknownRoute, "route " + std::to_string(route) + " of " + std::to_string(routes()));
}

SparseVar CodecModel::analysis(const SparseVar& x, int route) {
  check_route(route);
  SparseVar h = relu(enc1.forward(x, route));
  h = relu(enc2.forward(h, route));
  h = relu(enc3.forward(h, route));
  return enc4.forward(h, route);
}

std::vector<OccupancyLogits> CodecModel::synthesis_train(const SparseVar& y, int route, const CoordSet& gt_s2,
                                                         const CoordSet& gt_s1) {
  check_route(route);
  std::vector<OccupancyLogits> out;
  SparseVar h = y;
  const CoordSet* targets[2] = {&gt_s2, &gt_s1};
  SlimConv* up[2] = {&dec1, &dec3};
  SlimConv* refine[2] = {&dec2, &dec4};
  SlimConv* head[2] = {&head1, &head2};
  for (int s = 0; s < 2; ++s) {
    h = relu(up[s]->forward(h, route));
    h = relu(refine[s]->forward(h, route));
    SparseVar logit = head[s]->forward(h, route);
    OccupancyLogits o{h.coords, logit.feat, std::vector<uint8_t>(h.size(), 0)};
    for (size_t i = 0; i < h.size(); ++i) o.labels[i] = targets[s]->contains((*h.coords)[i]) ? 1 : 0;
    out.push_back(std::move(o));
    if (s == 0) h = nn::prune(h, gt_s2);
  }
  return out;
}

CoordSetPtr CodecModel::synthesis_infer(const SparseVar& y, int route, ScaleCounts counts) {
  check_route(route);
  SparseVar h = y;
  const uint32_t count[2] = {counts.s2, counts.s1};
  SlimConv* up[2] = {&dec1, &dec3};
  SlimConv* refine[2] = {&dec2, &dec4};
  SlimConv* head[2] = {&head1, &head2};
  for (int s = 0; s < 2; ++s) {
    if (h.size() == 0) {
      if (count[s] != 0) throw Error(Errc::CountExceedsCandidates, "voxels requested from an empty candidate set");
      return std::make_shared<const CoordSet>(CoordSet::from_coords({}, std::max(1, y.stride() >> 2)));
    }
    h = relu(up[s]->forward(h, route));
    h = relu(refine[s]->forward(h, route));
    SparseVar logit = head[s]->forward(h, route);
    const auto rows = top_k_rows(logit.feat.value(), count[s]);
    auto kept = subset(*h.coords, rows);
    if (s == 1) return kept;
    h = {kept, nn::gather_rows(h.feat, rows)};
  }
  return h.coords;
}

SparseVar CodecModel::hyper_analysis(const SparseVar& y, int route) {
  check_route(route);
  if (y.size() == 0) throw Error(Errc::EmptyInput, "hyper analysis of an empty latent");
  SparseVar h = relu(ha1.forward(y, route));
  return ha2.forward(h, route);
}

SparseVar CodecModel::hyper_synthesis(const SparseVar& z, const CoordSetPtr& latent_coords, int route) {
  check_route(route);
  if (z.size() == 0) throw Error(Errc::EmptyInput, "hyper synthesis of an empty hyper latent");
  SparseVar h = relu(hs1.forward(z, latent_coords, route));
  return hs2.forward(h, route);
}

std::pair<Var, Var> CodecModel::entropy_parameters(const SparseVar& theta, const SparseVar& phi, int route) {
  check_route(route);
  if (!(*theta.coords == *phi.coords)) throw Error(Errc::CoordMisalignment, "Θ and Φ are not on the same coordinates");
  SparseVar in{phi.coords, nn::concat_cols(theta.feat, phi.feat)};
  SparseVar h = relu(ep1.forward(in, route));
  h = relu(ep2.forward(h, route));
  Var mu = nn::add(ep_mu.forward(h, route).feat, ep_theta.forward(theta, route).feat);
  Var sigma = nn::clamp_min(nn::softplus(ep_sigma.forward(h, route).feat), kSigmaMin);
  return {mu, sigma};
}

SparseTensor CodecModel::encode_route(const SparseTensor& x, int route) {
  nn::Tape t;
  return analysis(nn::constant(t, x), route).detach();
}

SparseTensor CodecModel::decode_route(const SparseTensor& y, int route, ScaleCounts counts) {
  nn::Tape t;
  return SparseTensor::ones(synthesis_infer(nn::constant(t, y), route, counts));
}

SparseTensor CodecModel::hyper_encode(const SparseTensor& y, int route) {
  nn::Tape t;
  return hyper_analysis(nn::constant(t, y), route).detach();
}

SparseTensor CodecModel::hyper_decode(const SparseTensor& z, const CoordSetPtr& latent_coords, int route) {
  nn::Tape t;
  return hyper_synthesis(nn::constant(t, z), latent_coords, route).detach();
}

GaussianParams CodecModel::entropy_params(const SparseTensor& theta, const SparseTensor& phi, int route) {
  nn::Tape t;
  auto [mu, sigma] = entropy_parameters(nn::constant(t, theta), nn::constant(t, phi), route);
  return {mu.value(), sigma.value()};
}

std::vector<SlimConv*> CodecModel::layers() {
  return {&enc1, &enc2, &enc3, &enc4, &dec1, &dec2, &head1, &dec3, &dec4,  &head2,
          &ha1,  &ha2,  &hs1,  &hs2,  &ep1,  &ep2,  &ep_mu, &ep_sigma, &ep_theta};
}

std::vector<nn::Parameter*> CodecModel::parameters() {
  std::vector<nn::Parameter*> ps;
  for (auto* l : layers())
    for (auto* p : l->parameters()) ps.push_back(p);
  for (auto* p : inter.parameters()) ps.push_back(p);
  for (auto& m : z_models)
    for (auto* p : m.parameters()) ps.push_back(p);
  for (auto& m : m_models)
    for (auto* p : m.parameters()) ps.push_back(p);
  return ps;
}

void CodecModel::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

void CodecModel::refresh_tables() {
  for (auto& m : z_models) m.refresh_tables();
  for (auto& m : m_models) m.refresh_tables();
}

nn::Checkpoint CodecModel::to_checkpoint() {
  nn::Checkpoint ck;
  ck.route_widths = cfg_.widths;
  ck.lambdas = cfg_.lambdas;
  for (auto* p : parameters()) ck.tensors[p->name] = p->value;
  ck.tensors["meta.hyper_width"] = Mat::Constant(1, 1, cfg_.hyper_width);
  if (rate_coeffs.size() > 0) ck.tensors["rate.coeffs"] = rate_coeffs;
  return ck;
}

CodecModel CodecModel::from_checkpoint(const nn::Checkpoint& ck) {
  ModelConfig cfg;
  cfg.widths = ck.route_widths;
  cfg.lambdas = ck.lambdas;
  auto hw = ck.tensors.find("meta.hyper_width");
  if (hw == ck.tensors.end() || hw->second.size() != 1) throw Error(Errc::BadCheckpoint, "missing meta.hyper_width");
  cfg.hyper_width = static_cast<int>(hw->second(0, 0));
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw Error(Errc::BadCheckpoint, e.what());
  }
  CodecModel m(cfg);
  for (auto* p : m.parameters()) {
    auto it = ck.tensors.find(p->name);
    if (it == ck.tensors.end()) throw Error(Errc::BadCheckpoint, "missing tensor " + p->name);
    if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols())
      throw Error(Errc::BadCheckpoint, "shape mismatch for " + p->name);
    p->value = it->second;
    p->zero_grad();
  }
  auto rc = ck.tensors.find("rate.coeffs");
  if (rc != ck.tensors.end()) m.rate_coeffs = rc->second;
  m.refresh_tables();
  return m;
}

void CodecModel::save(const std::string& path) { nn::save_checkpoint(path, to_checkpoint()); }

CodecModel CodecModel::load(const std::string& path) { return from_checkpoint(nn::load_checkpoint(path)); }

}  // namespace dpcc
