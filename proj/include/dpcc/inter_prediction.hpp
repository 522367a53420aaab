#pragma once

// Coarse-to-fine motion estimation and two-shot compensation on stride-4
// latents. Motion vectors are in lattice units of the latent stride.

#include "dpcc/slim_conv.hpp"

#include <span>
#include <vector>

namespace dpcc {

// ⌊v/g⌋·g per component, g ∈ {1, 2}.
int32_t quantize_motion(int32_t v, int g);
Coord quantize_motion(const Coord& v, int g);
std::vector<Coord> quantize_motion(std::span<const Coord> v, int g);

// Rounds real motion (N×3) to integer lattice steps.
std::vector<Coord> round_motion(const nn::Mat& m);

// y^cat: concatenation of current and reference latents on the coordinate
// union, zero-filled where a frame is absent.
nn::SparseVar fuse_frames(const nn::SparseVar& y, const nn::SparseVar& ref);
SparseTensor fuse_frames(const SparseTensor& y, const SparseTensor& ref);

class InterPredictor {
 public:
  InterPredictor() = default;
  // widths[k] is the latent width D_k of route k.
  InterPredictor(const std::vector<int>& widths, uint64_t seed);

  // Motion e_t on `target` (C_t'), width 3.
  nn::SparseVar estimate_motion(const nn::SparseVar& ycat, const CoordSetPtr& target, int route);

  // Reference features deconstructed onto coarse-warped geometry. The output
  // lives on warped(C_t') ∪ C_{t-1}'.
  nn::SparseVar build_anchor(const CoordSetPtr& ct, std::span<const Coord> coarse_motion, const nn::SparseVar& ref,
                             int route);

  // Temporal context on C_t': g_fa over fine-warped ∪ anchor, gathered back
  // through the warp correspondence.
  nn::SparseVar compensate(const CoordSetPtr& ct, std::span<const Coord> fine_motion, const nn::SparseVar& anchor,
                           int route);

  // Both compensation steps from decoded integer motion.
  nn::SparseVar temporal_context(const CoordSetPtr& ct, std::span<const Coord> motion, const nn::SparseVar& ref,
                                 int route);

  std::vector<nn::SlimConv*> layers();
  std::vector<nn::Parameter*> parameters();

  nn::SlimConv me_down, me_mid, me_up, me_fine1, me_fine2, me_res, me_head;
  nn::SlimConv gd1, gd2, gd3;
  nn::SlimConv fa1, fa2, fa3;
};

}  // namespace dpcc
