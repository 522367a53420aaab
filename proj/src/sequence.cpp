#include "dpcc/sequence.hpp"

#include "dpcc/error.hpp"
#include "dpcc/frame_codec.hpp"

namespace dpcc {

double SequenceResult::mean_bpp() const {
  if (frame_bpp.empty()) return 0.0;
  double s = 0.0;
  for (double b : frame_bpp) s += b;
  return s / static_cast<double>(frame_bpp.size());
}

namespace {

double payload_bpp(const FramePayload& p, size_t points) {
  if (points == 0) return 0.0;
  return static_cast<double>(p.byte_size() * 8) / static_cast<double>(points);
}

}  // namespace

SequenceResult encode_sequence(CodecModel& model, const std::vector<CoordSet>& frames, const SequenceOptions& opt,
                               const TraceSink& sink) {
  if (opt.gof_size < 1) throw Error(Errc::BadSpec, "GoF size must be at least 1");
  if (opt.route && (*opt.route < 0 || *opt.route >= model.routes()))
    throw Error(Errc::UnknownRoute, "route " + std::to_string(*opt.route));

  std::optional<RateController> rc;
  if (!opt.route) {
    if (model.rate_coeffs.rows() != 2 * model.routes())
      throw Error(Errc::BadCheckpoint, "model carries no rate calibration");
    RateControlState st;
    st.r_tar = opt.target_bpp;
    st.sw = opt.sliding_window;
    st.i_boost = opt.i_boost;
    st.gof = opt.gof_size;
    rc.emplace(st, RateEstimator(model.rate_coeffs));
  }

  SequenceResult res;
  res.stream.header.bit_depth = static_cast<uint8_t>(opt.bit_depth);
  res.stream.header.gof_size = static_cast<uint16_t>(opt.gof_size);
  res.stream.header.frame_count = static_cast<uint32_t>(frames.size());

  const CoordSet* prev = nullptr;
  for (size_t t = 0; t < frames.size(); ++t) {
    const FrameType type = frame_type_at(static_cast<int>(t), opt.gof_size);
    const CoordSet* ref = type == FrameType::P ? prev : nullptr;
    int route = opt.route.value_or(0);
    if (rc) route = rc->choose(static_cast<int>(t), frame_stats(frames[t], ref), type);

    auto enc = encode_frame(model, frames[t], route, type, ref, opt.bit_depth);
    const double bpp = payload_bpp(enc.payload, frames[t].size());
    res.stream.frames.push_back(std::move(enc.payload));
    res.reconstructions.push_back(std::move(enc.reconstruction));
    res.frame_bpp.push_back(bpp);
    res.routes.push_back(route);
    if (rc) {
      res.trace.push_back(rc->commit(bpp));
      if (sink) sink(res.trace.back());
    }
    prev = &res.reconstructions.back();
  }
  return res;
}

std::vector<CoordSet> decode_sequence(CodecModel& model, const Bitstream& stream) {
  if (stream.frames.size() != stream.header.frame_count) throw Error(Errc::CorruptStream, "frame count mismatch");
  std::vector<CoordSet> out;
  out.reserve(stream.frames.size());
  for (size_t t = 0; t < stream.frames.size(); ++t) {
    const auto& p = stream.frames[t];
    if (p.route >= model.routes()) throw Error(Errc::UnknownRoute, "frame uses route " + std::to_string(p.route));
    const CoordSet* ref = nullptr;
    if (p.type == FrameType::P) {
      if (out.empty()) throw Error(Errc::ReferenceMissing, "P frame without a decoded predecessor");
      ref = &out.back();
    }
    out.push_back(decode_frame(model, p, ref, stream.header.bit_depth).reconstruction);
  }
  return out;
}

std::vector<RateSample> collect_rate_samples(CodecModel& model, const std::vector<std::vector<CoordSet>>& sequences,
                                             int bit_depth, int gof_size) {
  std::vector<RateSample> samples;
  for (int k = 0; k < model.routes(); ++k) {
    for (const auto& seq : sequences) {
      const CoordSet* prev = nullptr;
      CoordSet prev_store;
      for (size_t t = 0; t < seq.size(); ++t) {
        const FrameType type = frame_type_at(static_cast<int>(t), gof_size);
        const CoordSet* ref = type == FrameType::P ? prev : nullptr;
        if (seq[t].empty()) continue;
        auto enc = encode_frame(model, seq[t], k, type, ref, bit_depth);
        samples.push_back({k, type, frame_stats(seq[t], ref), payload_bpp(enc.payload, seq[t].size())});
        prev_store = std::move(enc.reconstruction);
        prev = &prev_store;
      }
    }
  }
  return samples;
}

void calibrate_rate_model(CodecModel& model, const std::vector<std::vector<CoordSet>>& sequences, int bit_depth,
                          int gof_size) {
  const auto samples = collect_rate_samples(model, sequences, bit_depth, gof_size);
  const auto c = fit_rate_model(samples, model.routes());
  model.rate_coeffs = c;
}

}  // namespace dpcc
