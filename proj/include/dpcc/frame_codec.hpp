#pragma once

// Closed-loop coding of one frame into a FramePayload. Every context the
// decoder needs (motion, hyper latent, reference latent) is formed from
// decoded quantities on both sides.

#include "dpcc/bitstream.hpp"
#include "dpcc/codec_model.hpp"

#include <vector>

namespace dpcc {

struct EncodedFrame {
  FramePayload payload;
  CoordSet reconstruction;
  CoordSetPtr latent_coords;
  std::vector<Coord> motion;
  nn::Mat latent;  // ŷ
  double latent_ideal_bits = 0.0;

  size_t bits() const { return payload.byte_size() * 8; }
};

// `reference` is the decoded previous frame; required for P frames.
EncodedFrame encode_frame(CodecModel& model, const CoordSet& x, int route, FrameType type, const CoordSet* reference,
                          int bit_depth);

struct DecodedFrame {
  CoordSet reconstruction;
  CoordSetPtr latent_coords;
  std::vector<Coord> motion;
  nn::Mat latent;
};

DecodedFrame decode_frame(CodecModel& model, const FramePayload& payload, const CoordSet* reference, int bit_depth);

}  // namespace dpcc
