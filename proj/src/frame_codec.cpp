#include "dpcc/frame_codec.hpp"

#include "dpcc/coord_coding.hpp"
#include "dpcc/error.hpp"

#include <memory>

namespace dpcc {

namespace {

constexpr int kLatentStride = 4;

nn::SparseVar zeros_on(nn::Tape& t, const CoordSetPtr& c, int width) {
  return {c, t.constant(nn::Mat::Zero(static_cast<Eigen::Index>(c->size()), width))};
}

int32_t symbol(double v) { return static_cast<int32_t>(v); }

// Temporal context Θ for the latent on `ct`.
nn::SparseVar context(CodecModel& model, nn::Tape& t, const CoordSetPtr& ct, FrameType type, const CoordSet* reference,
                      std::span<const Coord> motion, int route) {
  if (type == FrameType::I) return zeros_on(t, ct, model.latent_width(route));
  auto xref = std::make_shared<const CoordSet>(*reference);
  nn::SparseVar yref = model.analysis(nn::constant(t, SparseTensor::ones(xref)), route);
  return model.inter.temporal_context(ct, motion, yref, route);
}

}  // namespace

EncodedFrame encode_frame(CodecModel& model, const CoordSet& x, int route, FrameType type, const CoordSet* reference,
                          int bit_depth) {
  model.check_route(route);
  if (type == FrameType::P && reference == nullptr) throw Error(Errc::ReferenceMissing, "P frame without a reference");
  if (x.stride() != 1) throw Error(Errc::StrideViolation, "frames are coded at stride 1");
  EncodedFrame out;
  FramePayload& pl = out.payload;
  pl.type = type;
  pl.route = route;
  const auto counts = scale_counts(x);
  pl.count_s2 = counts.s2;
  pl.count_s1 = counts.s1;
  const int latent_depth = bit_depth - 2;

  nn::Tape t;
  auto xs = std::make_shared<const CoordSet>(x);
  if (x.empty()) {
    out.latent_coords = std::make_shared<const CoordSet>(CoordSet::from_coords({}, kLatentStride));
    pl.coords = code_coords(*out.latent_coords, latent_depth);
    out.reconstruction = CoordSet::from_coords({}, 1);
    return out;
  }
  nn::SparseVar y = model.analysis(nn::constant(t, SparseTensor::ones(xs)), route);
  const CoordSetPtr ct = y.coords;
  out.latent_coords = ct;
  pl.coords = code_coords(*ct, latent_depth);

  if (type == FrameType::P) {
    auto xref = std::make_shared<const CoordSet>(*reference);
    nn::SparseVar yref = model.analysis(nn::constant(t, SparseTensor::ones(xref)), route);
    nn::SparseVar m = model.inter.estimate_motion(fuse_frames(y, yref), ct, route);
    out.motion = round_motion(m.feat.value());
    RangeEncoder enc;
    const auto& fm = model.m_models[static_cast<size_t>(route)];
    for (const Coord& v : out.motion) {
      fm.encode(enc, 0, v.x);
      fm.encode(enc, 0, v.y);
      fm.encode(enc, 0, v.z);
    }
    pl.motion = enc.finish();
  }
  nn::SparseVar theta = context(model, t, ct, type, reference, out.motion, route);

  nn::SparseVar z = model.hyper_analysis(y, route);
  const nn::Mat zhat = quantize_infer(z.feat.value());
  {
    RangeEncoder enc;
    const auto& fz = model.z_models[static_cast<size_t>(route)];
    for (Eigen::Index r = 0; r < zhat.rows(); ++r)
      for (Eigen::Index c = 0; c < zhat.cols(); ++c) fz.encode(enc, static_cast<int>(c), symbol(zhat(r, c)));
    pl.hyper = enc.finish();
  }
  nn::SparseVar phi = model.hyper_synthesis({z.coords, t.constant(zhat)}, ct, route);
  auto [mu, sigma] = model.entropy_parameters(theta, phi, route);

  out.latent = quantize_infer(y.feat.value());
  {
    RangeEncoder enc;
    const nn::Mat& m = mu.value();
    const nn::Mat& s = sigma.value();
    for (Eigen::Index i = 0; i < out.latent.size(); ++i)
      encode_gaussian(enc, symbol(out.latent.data()[i]), m.data()[i], s.data()[i]);
    pl.latent = enc.finish();
    out.latent_ideal_bits = gaussian_bits(out.latent, m, s);
  }
  out.reconstruction = *model.synthesis_infer({ct, t.constant(out.latent)}, route, counts);
  return out;
}

DecodedFrame decode_frame(CodecModel& model, const FramePayload& pl, const CoordSet* reference, int bit_depth) {
  (void)bit_depth;
  const int route = pl.route;
  model.check_route(route);
  if (pl.type == FrameType::P && reference == nullptr) throw Error(Errc::ReferenceMissing, "P frame without a reference");
  DecodedFrame out;
  auto ct = std::make_shared<const CoordSet>(decode_coords(pl.coords));
  if (ct->stride() != kLatentStride) throw Error(Errc::CorruptStream, "latent coordinates not at stride 4");
  out.latent_coords = ct;
  if (ct->empty()) {
    if (pl.count_s1 != 0 || pl.count_s2 != 0) throw Error(Errc::CorruptStream, "counts for an empty frame");
    out.reconstruction = CoordSet::from_coords({}, 1);
    return out;
  }
  nn::Tape t;
  if (pl.type == FrameType::P) {
    RangeDecoder dec(pl.motion);
    const auto& fm = model.m_models[static_cast<size_t>(route)];
    out.motion.resize(ct->size());
    for (auto& v : out.motion) {
      v.x = fm.decode(dec, 0);
      v.y = fm.decode(dec, 0);
      v.z = fm.decode(dec, 0);
    }
  }
  nn::SparseVar theta = context(model, t, ct, pl.type, reference, out.motion, route);

  auto zc = std::make_shared<const CoordSet>(downsample_coords(*ct, 2));
  const int hw = model.config().hyper_width;
  nn::Mat zhat(static_cast<Eigen::Index>(zc->size()), hw);
  {
    RangeDecoder dec(pl.hyper);
    const auto& fz = model.z_models[static_cast<size_t>(route)];
    for (Eigen::Index r = 0; r < zhat.rows(); ++r)
      for (Eigen::Index c = 0; c < hw; ++c) zhat(r, c) = fz.decode(dec, static_cast<int>(c));
  }
  nn::SparseVar phi = model.hyper_synthesis({zc, t.constant(zhat)}, ct, route);
  auto [mu, sigma] = model.entropy_parameters(theta, phi, route);

  out.latent.resize(static_cast<Eigen::Index>(ct->size()), model.latent_width(route));
  {
    RangeDecoder dec(pl.latent);
    const nn::Mat& m = mu.value();
    const nn::Mat& s = sigma.value();
    for (Eigen::Index i = 0; i < out.latent.size(); ++i) out.latent.data()[i] = decode_gaussian(dec, m.data()[i], s.data()[i]);
  }
  out.reconstruction = *model.synthesis_infer({ct, t.constant(out.latent)}, route, {pl.count_s2, pl.count_s1});
  return out;
}

}  // namespace dpcc
