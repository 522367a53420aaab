#include "dpcc/slim_conv.hpp"

#include "dpcc/error.hpp"

#include <cmath>
#include <memory>
#include <numeric>

namespace dpcc::nn {

double SplitMix::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

std::vector<Coord> kernel_offsets(int kernel_size) {
  if (kernel_size == 1) return {Coord{0, 0, 0}};
  if (kernel_size != 3) throw Error(Errc::ShapeMismatch, "kernel size must be 1 or 3");
  std::vector<Coord> offs;
  for (int x = -1; x <= 1; ++x)
    for (int y = -1; y <= 1; ++y)
      for (int z = -1; z <= 1; ++z) offs.push_back({x, y, z});
  return offs;
}

size_t KernelMap::pairs() const {
  size_t n = 0;
  for (const auto& r : in_rows) n += r.size();
  return n;
}

KernelMap build_kernel_map(const CoordSet& in, const CoordSet& out, int kernel_size, ConvMode mode, int step) {
  const auto offs = kernel_offsets(kernel_size);
  KernelMap map;
  map.in_rows.resize(offs.size());
  map.out_rows.resize(offs.size());
  const int sign = mode == ConvMode::Normal ? 1 : -1;
  for (size_t o = 0; o < out.size(); ++o) {
    for (size_t d = 0; d < offs.size(); ++d) {
      const int r = in.find(out[o] + offs[d] * (sign * step));
      if (r < 0) continue;
      map.in_rows[d].push_back(r);
      map.out_rows[d].push_back(static_cast<int>(o));
    }
  }
  return map;
}

CoordSet transposed_candidates(const CoordSet& in, int kernel_size) {
  if (in.stride() < 2) throw Error(Errc::StrideViolation, "cannot upsample below stride 1");
  const int step = in.stride() / 2;
  const auto offs = kernel_offsets(kernel_size);
  std::vector<Coord> cand;
  cand.reserve(in.size() * offs.size());
  for (const auto& c : in.coords())
    for (const auto& d : offs) cand.push_back(c + d * step);
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  return CoordSet::from_coords(std::move(cand), step);
}

CoordSetPtr conv_output_coords(const CoordSetPtr& in, int stride, ConvMode mode, int kernel_size) {
  if (stride == 1) return in;
  if (stride != 2) throw Error(Errc::BadFactor, "conv stride must be 1 or 2");
  if (mode == ConvMode::Normal) return std::make_shared<const CoordSet>(downsample_coords(*in, 2));
  return std::make_shared<const CoordSet>(transposed_candidates(*in, kernel_size));
}

std::vector<int> constant_widths(int routes, int width) { return std::vector<int>(static_cast<size_t>(routes), width); }

SlimConv::SlimConv(std::string name, std::vector<std::vector<int>> in_widths, std::vector<int> out_widths, int stride,
                   ConvMode mode, int kernel_size)
    : name_(std::move(name)),
      in_widths_(std::move(in_widths)),
      out_widths_(std::move(out_widths)),
      stride_(stride),
      mode_(mode),
      kernel_size_(kernel_size) {
  if (out_widths_.empty() || in_widths_.empty()) throw Error(Errc::ShapeMismatch, name_ + ": empty width table");
  auto nested = [](const std::vector<int>& w) {
    for (size_t i = 0; i < w.size(); ++i) {
      if (w[i] < 1) return false;
      if (i > 0 && w[i] < w[i - 1]) return false;
    }
    return true;
  };
  if (!nested(out_widths_)) throw Error(Errc::WidthMismatch, name_ + ": output widths must be positive and nested");
  for (const auto& g : in_widths_) {
    if (g.size() != out_widths_.size()) throw Error(Errc::WidthMismatch, name_ + ": route count differs per group");
    if (!nested(g)) throw Error(Errc::WidthMismatch, name_ + ": input widths must be positive and nested");
  }
  if (stride_ != 1 && stride_ != 2) throw Error(Errc::BadFactor, name_ + ": stride must be 1 or 2");
  kernel_offsets(kernel_size_);
  for (size_t g = 0; g < in_widths_.size(); ++g)
    weights_.emplace_back(name_ + ".w" + std::to_string(g),
                          Mat::Zero(kernel_volume() * in_widths_[g].back(), out_widths_.back()));
  bias_ = Parameter(name_ + ".b", Mat::Zero(1, out_widths_.back()));
}

void SlimConv::check_route(int route) const {
  if (route < 0 || route >= routes())
    throw Error(Errc::UnknownRoute, name_ + ": route " + std::to_string(route) + " of " + std::to_string(routes()));
}

int SlimConv::in_width(int route) const {
  check_route(route);
  int w = 0;
  for (const auto& g : in_widths_) w += g[route];
  return w;
}

int SlimConv::group_width(int group, int route) const {
  check_route(route);
  return in_widths_[group][route];
}

int SlimConv::out_width(int route) const {
  check_route(route);
  return out_widths_[route];
}

std::vector<Parameter*> SlimConv::parameters() {
  std::vector<Parameter*> ps;
  for (auto& w : weights_) ps.push_back(&w);
  ps.push_back(&bias_);
  return ps;
}

Eigen::Block<const Mat> SlimConv::weight_block(int group, int offset, int route) const {
  check_route(route);
  const Mat& w = weights_[group].value;
  return Eigen::Block<const Mat>(w, offset * in_max(group), 0, in_widths_[group][route], out_widths_[route]);
}

Eigen::Block<const Mat> SlimConv::bias_block(int route) const {
  check_route(route);
  return Eigen::Block<const Mat>(bias_.value, 0, 0, 1, out_widths_[route]);
}

void SlimConv::init_uniform(uint64_t seed, double gain) {
  SplitMix rng(seed);
  int fan_in = 0;
  for (const auto& g : in_widths_) fan_in += g.back();
  const double a = gain * std::sqrt(6.0 / static_cast<double>(kernel_volume() * fan_in));
  for (auto& w : weights_)
    for (Eigen::Index i = 0; i < w.value.size(); ++i) w.value.data()[i] = rng.uniform(-a, a);
  bias_.value.setZero();
}

void SlimConv::init_identity() {
  const int centre = kernel_volume() / 2;
  int col = 0;
  for (size_t g = 0; g < weights_.size(); ++g) {
    auto& w = weights_[g].value;
    w.setZero();
    for (int c = 0; c < in_max(static_cast<int>(g)) && col + c < out_max(); ++c)
      w(centre * in_max(static_cast<int>(g)) + c, col + c) = 1.0;
    col += in_max(static_cast<int>(g));
  }
  bias_.value.setZero();
}

void SlimConv::init_zero() {
  for (auto& w : weights_) w.value.setZero();
  bias_.value.setZero();
}

Var SlimConv::forward(Var input, const KernelMap& map, size_t out_rows, int route) {
  check_route(route);
  if (input.cols() != in_width(route))
    throw Error(Errc::WidthMismatch, name_ + ": input width " + std::to_string(input.cols()) + ", route " +
                                         std::to_string(route) + " expects " + std::to_string(in_width(route)));
  if (map.in_rows.size() != static_cast<size_t>(kernel_volume()))
    throw Error(Errc::ShapeMismatch, name_ + ": kernel map does not match kernel size");

  const int cout = out_widths_[route];
  const Mat& x = input.value();
  Mat out = Mat::Zero(static_cast<Eigen::Index>(out_rows), cout);
  Mat a, b;
  int col = 0;
  for (int g = 0; g < groups(); ++g) {
    const int cin = in_widths_[g][route];
    for (int o = 0; o < kernel_volume(); ++o) {
      const auto& ir = map.in_rows[o];
      if (ir.empty()) continue;
      const auto& orow = map.out_rows[o];
      a.resize(static_cast<Eigen::Index>(ir.size()), cin);
      for (size_t p = 0; p < ir.size(); ++p) a.row(static_cast<Eigen::Index>(p)) = x.row(ir[p]).segment(col, cin);
      b.noalias() = a * weight_block(g, o, route);
      for (size_t p = 0; p < orow.size(); ++p) out.row(orow[p]) += b.row(static_cast<Eigen::Index>(p));
    }
    col += cin;
  }
  out.rowwise() += bias_block(route).row(0);

  auto shared_map = std::make_shared<const KernelMap>(map);
  const int in_id = input.id();
  return input.tape()->record(std::move(out), true, [this, shared_map, in_id, route](Tape& t, const Mat& gout) {
    const int cout = out_widths_[route];
    const Mat& x = t.value(in_id);
    const bool need_in = t.requires_grad(in_id);
    Mat* gin = need_in ? &t.grad_buffer(in_id) : nullptr;
    Mat a, gsel, ga;
    int col = 0;
    for (int g = 0; g < groups(); ++g) {
      const int cin = in_widths_[g][route];
      for (int o = 0; o < kernel_volume(); ++o) {
        const auto& ir = shared_map->in_rows[o];
        if (ir.empty()) continue;
        const auto& orow = shared_map->out_rows[o];
        const auto n = static_cast<Eigen::Index>(ir.size());
        a.resize(n, cin);
        gsel.resize(n, cout);
        for (Eigen::Index p = 0; p < n; ++p) {
          a.row(p) = x.row(ir[p]).segment(col, cin);
          gsel.row(p) = gout.row(orow[p]);
        }
        weights_[g].grad.block(o * in_max(g), 0, cin, cout).noalias() += a.transpose() * gsel;
        if (gin) {
          ga.noalias() = gsel * weight_block(g, o, route).transpose();
          for (Eigen::Index p = 0; p < n; ++p) gin->row(ir[p]).segment(col, cin) += ga.row(p);
        }
      }
      col += cin;
    }
    bias_.grad.block(0, 0, 1, cout) += gout.colwise().sum();
  });
}

SparseVar SlimConv::forward(const SparseVar& in, int route) {
  return forward(in, conv_output_coords(in.coords, stride_, mode_, kernel_size_), route);
}

SparseVar SlimConv::forward(const SparseVar& in, CoordSetPtr out, int route) {
  int step = in.stride();
  if (stride_ == 2 && mode_ == ConvMode::Transposed) step = in.stride() / 2;
  const int expected = stride_ == 1 ? in.stride() : (mode_ == ConvMode::Normal ? in.stride() * 2 : in.stride() / 2);
  if (out->stride() != expected)
    throw Error(Errc::StrideMismatch, name_ + ": output stride " + std::to_string(out->stride()) + ", expected " +
                                          std::to_string(expected));
  auto map = build_kernel_map(*in.coords, *out, kernel_size_, mode_, step);
  Var f = forward(in.feat, map, out->size(), route);
  return {std::move(out), f};
}

SlimSlice slim_slice(const SlimConv& conv, int route) {
  SlimSlice s;
  s.route = route;
  s.in_width = conv.in_width(route);
  s.out_width = conv.out_width(route);
  for (int g = 0; g < conv.groups(); ++g) {
    const int cin = conv.group_width(g, route);
    Mat w(conv.kernel_volume() * cin, s.out_width);
    for (int o = 0; o < conv.kernel_volume(); ++o) w.block(o * cin, 0, cin, s.out_width) = conv.weight_block(g, o, route);
    s.weights.push_back(std::move(w));
  }
  s.bias = conv.bias_block(route);
  return s;
}

}  // namespace dpcc::nn
