#pragma once

// Sequence-level encoding: GoF structure, fixed-route or rate-controlled
// route choice, and the matching decoder.

#include "dpcc/bitstream.hpp"
#include "dpcc/codec_model.hpp"
#include "dpcc/rate_control.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace dpcc {

struct SequenceOptions {
  int bit_depth = 6;
  int gof_size = 32;
  // Fixed route when set; otherwise rate control toward target_bpp.
  std::optional<int> route;
  double target_bpp = 0.0;
  int sliding_window = 4;
  double i_boost = 2.0;
};

struct SequenceResult {
  Bitstream stream;
  std::vector<CoordSet> reconstructions;
  std::vector<double> frame_bpp;
  std::vector<int> routes;
  std::vector<TraceRecord> trace;  // rate-controlled runs only

  double mean_bpp() const;
};

inline FrameType frame_type_at(int index, int gof_size) {
  return index % gof_size == 0 ? FrameType::I : FrameType::P;
}

using TraceSink = std::function<void(const TraceRecord&)>;

SequenceResult encode_sequence(CodecModel& model, const std::vector<CoordSet>& frames, const SequenceOptions& opt,
                               const TraceSink& sink = {});

std::vector<CoordSet> decode_sequence(CodecModel& model, const Bitstream& stream);

// Codes every frame on every route (each P frame referencing the same
// route's previous reconstruction) and returns the realized samples used to
// fit the rate model.
std::vector<RateSample> collect_rate_samples(CodecModel& model, const std::vector<std::vector<CoordSet>>& sequences,
                                             int bit_depth, int gof_size);

void calibrate_rate_model(CodecModel& model, const std::vector<std::vector<CoordSet>>& sequences, int bit_depth,
                          int gof_size);

}  // namespace dpcc
