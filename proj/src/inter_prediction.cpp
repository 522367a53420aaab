#include "dpcc/inter_prediction.hpp"

#include "dpcc/error.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace dpcc {

using nn::ConvMode;
using nn::SlimConv;
using nn::SparseVar;

int32_t quantize_motion(int32_t v, int g) {
  if (g != 1 && g != 2) throw Error(Errc::BadFactor, "motion granularity must be 1 or 2");
  return floor_div(v, g) * g;
}

Coord quantize_motion(const Coord& v, int g) {
  return {quantize_motion(v.x, g), quantize_motion(v.y, g), quantize_motion(v.z, g)};
}

std::vector<Coord> quantize_motion(std::span<const Coord> v, int g) {
  std::vector<Coord> out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = quantize_motion(v[i], g);
  return out;
}

std::vector<Coord> round_motion(const nn::Mat& m) {
  if (m.cols() != 3) throw Error(Errc::ShapeMismatch, "motion must have 3 columns");
  std::vector<Coord> out(static_cast<size_t>(m.rows()));
  auto r = [](double v) { return static_cast<int32_t>(std::clamp(std::round(v), -1024.0, 1024.0)); };
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[static_cast<size_t>(i)] = {r(m(i, 0)), r(m(i, 1)), r(m(i, 2))};
  return out;
}

SparseVar fuse_frames(const SparseVar& y, const SparseVar& ref) {
  if (y.stride() != ref.stride()) throw Error(Errc::StrideMismatch, "fused frames differ in stride");
  if (y.width() != ref.width()) throw Error(Errc::WidthMismatch, "fused frames differ in width");
  return nn::concat_features(y, ref);
}

SparseTensor fuse_frames(const SparseTensor& y, const SparseTensor& ref) {
  if (y.stride() != ref.stride()) throw Error(Errc::StrideMismatch, "fused frames differ in stride");
  if (y.width() != ref.width()) throw Error(Errc::WidthMismatch, "fused frames differ in width");
  return concat_features(y, ref);
}

InterPredictor::InterPredictor(const std::vector<int>& widths, uint64_t seed)
    : me_down("me.down", {widths, widths}, widths, 2),
      me_mid("me.mid", {widths}, widths),
      me_up("me.up", {widths}, widths, 2, ConvMode::Transposed),
      me_fine1("me.fine1", {widths}, widths),
      me_fine2("me.fine2", {widths}, widths),
      me_res("me.res", {widths, widths}, widths),
      me_head("me.head", {widths}, nn::constant_widths(static_cast<int>(widths.size()), 3)),
      gd1("gd.1", {widths}, widths),
      gd2("gd.2", {widths}, widths),
      gd3("gd.3", {widths}, widths),
      fa1("fa.1", {widths}, widths),
      fa2("fa.2", {widths}, widths),
      fa3("fa.3", {widths}, widths) {
  uint64_t s = seed;
  for (auto* l : layers()) l->init_uniform(++s);
  me_head.init_zero();
  // Compensation blocks are residual; a zero last layer starts them as
  // feature pass-through.
  gd3.init_zero();
  fa3.init_zero();
}

std::vector<SlimConv*> InterPredictor::layers() {
  return {&me_down, &me_mid, &me_up, &me_fine1, &me_fine2, &me_res, &me_head,
          &gd1,     &gd2,    &gd3,   &fa1,      &fa2,      &fa3};
}

std::vector<nn::Parameter*> InterPredictor::parameters() {
  std::vector<nn::Parameter*> ps;
  for (auto* l : layers())
    for (auto* p : l->parameters()) ps.push_back(p);
  return ps;
}

SparseVar InterPredictor::estimate_motion(const SparseVar& ycat, const CoordSetPtr& target, int route) {
  if (ycat.size() == 0) throw Error(Errc::EmptyInput, "motion estimation on an empty latent");
  // Path A: coarse stride-2 block, back up to the fused coordinates, fine convs.
  SparseVar a{ycat.coords, ycat.feat};
  SparseVar down = me_down.forward(a, route);
  down.feat = nn::relu(down.feat);
  SparseVar mid = me_mid.forward(down, route);
  mid.feat = nn::relu(mid.feat);
  SparseVar up = me_up.forward(mid, ycat.coords, route);
  up.feat = nn::relu(up.feat);
  SparseVar f1 = me_fine1.forward(up, route);
  f1.feat = nn::relu(f1.feat);
  SparseVar ef = me_fine2.forward(f1, route);
  // Path B: residual details.
  SparseVar res = me_res.forward(a, route);
  SparseVar sum{ycat.coords, nn::relu(nn::add(ef.feat, res.feat))};
  return me_head.forward(sum, target, route);
}

SparseVar InterPredictor::build_anchor(const CoordSetPtr& ct, std::span<const Coord> coarse_motion,
                                       const SparseVar& ref, int route) {
  if (ct->stride() != ref.stride()) throw Error(Errc::StrideMismatch, "anchor inputs differ in stride");
  std::vector<Coord> offsets(coarse_motion.size());
  for (size_t i = 0; i < offsets.size(); ++i) offsets[i] = coarse_motion[i] * ct->stride();
  const auto w = warp(*ct, offsets);
  auto anchor_coords = std::make_shared<const CoordSet>(union_coords(*w.coords, *ref.coords));
  SparseVar in = nn::gather_to(ref, anchor_coords);
  SparseVar h = gd1.forward(in, route);
  h.feat = nn::relu(h.feat);
  h = gd2.forward(h, route);
  h.feat = nn::relu(h.feat);
  h = gd3.forward(h, route);
  return {anchor_coords, nn::add(in.feat, h.feat)};
}

SparseVar InterPredictor::compensate(const CoordSetPtr& ct, std::span<const Coord> fine_motion,
                                     const SparseVar& anchor, int route) {
  if (ct->stride() != anchor.stride()) throw Error(Errc::StrideMismatch, "compensation inputs differ in stride");
  std::vector<Coord> offsets(fine_motion.size());
  for (size_t i = 0; i < offsets.size(); ++i) offsets[i] = fine_motion[i] * ct->stride();
  const auto w = warp(*ct, offsets);
  auto merged = std::make_shared<const CoordSet>(union_coords(*w.coords, *anchor.coords));
  SparseVar in = nn::gather_to(anchor, merged);
  SparseVar h = fa1.forward(in, route);
  h.feat = nn::relu(h.feat);
  h = fa2.forward(h, route);
  h.feat = nn::relu(h.feat);
  h = fa3.forward(h, route);
  h.feat = nn::add(in.feat, h.feat);
  // Every row of C_t' reads the feature at its warped position; rows that
  // collide share (and so average to) the same feature.
  std::vector<int> idx(ct->size());
  for (size_t i = 0; i < ct->size(); ++i) {
    idx[i] = merged->find((*w.coords)[static_cast<size_t>(w.row_to_warped[i])]);
    if (idx[i] < 0) throw Error(Errc::MissingCorrespondence, "warped position missing from the aggregated tensor");
  }
  return {ct, nn::gather_rows(h.feat, std::move(idx))};
}

SparseVar InterPredictor::temporal_context(const CoordSetPtr& ct, std::span<const Coord> motion, const SparseVar& ref,
                                           int route) {
  const auto coarse = quantize_motion(motion, 2);
  const auto fine = quantize_motion(motion, 1);
  SparseVar anchor = build_anchor(ct, coarse, ref, route);
  return compensate(ct, fine, anchor, route);
}

}  // namespace dpcc
