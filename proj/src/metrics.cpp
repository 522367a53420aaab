#include "dpcc/metrics.hpp"

#include "dpcc/bytes.hpp"
#include "dpcc/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <sstream>

namespace dpcc {

namespace {

double sq_dist(const Point3& a, const Point3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

double psnr_from_mse(double mse, int bit_depth) {
  if (mse <= 0.0) return kPsnrCap;
  const double r = std::ldexp(1.0, bit_depth) - 1.0;
  return std::min(kPsnrCap, 10.0 * std::log10(3.0 * r * r / mse));
}

}  // namespace

double bpp(double total_bits, size_t points) {
  if (points == 0) throw Error(Errc::EmptyCloud, "bpp of an empty cloud");
  return total_bits / static_cast<double>(points);
}

KdTree::KdTree(std::vector<Point3> points) : pts_(std::move(points)) {
  std::vector<size_t> idx(pts_.size());
  std::iota(idx.begin(), idx.end(), 0);
  nodes_.reserve(pts_.size());
  root_ = build(idx, 0, idx.size(), 0);
}

int KdTree::build(std::vector<size_t>& idx, size_t lo, size_t hi, int depth) {
  if (lo >= hi) return -1;
  const int axis = depth % 3;
  const size_t mid = (lo + hi) / 2;
  std::nth_element(idx.begin() + static_cast<long>(lo), idx.begin() + static_cast<long>(mid),
                   idx.begin() + static_cast<long>(hi), [&](size_t a, size_t b) {
                     if (pts_[a][axis] != pts_[b][axis]) return pts_[a][axis] < pts_[b][axis];
                     return a < b;
                   });
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({axis, idx[mid], -1, -1});
  const int l = build(idx, lo, mid, depth + 1);
  const int r = build(idx, mid + 1, hi, depth + 1);
  nodes_[static_cast<size_t>(id)].left = l;
  nodes_[static_cast<size_t>(id)].right = r;
  return id;
}

std::vector<size_t> KdTree::knn(const Point3& q, size_t k) const {
  k = std::min(k, pts_.size());
  // Max-heap of (distance, index); ordering by index breaks distance ties.
  using Item = std::pair<double, size_t>;
  std::priority_queue<Item> heap;
  std::vector<int> stack;
  auto visit = [&](auto&& self, int n) -> void {
    if (n < 0 || k == 0) return;
    const Node& node = nodes_[static_cast<size_t>(n)];
    const Point3& p = pts_[node.index];
    const Item it{sq_dist(p, q), node.index};
    if (heap.size() < k)
      heap.push(it);
    else if (it < heap.top()) {
      heap.pop();
      heap.push(it);
    }
    const double diff = q[node.axis] - p[node.axis];
    const int near = diff < 0 ? node.left : node.right;
    const int far = diff < 0 ? node.right : node.left;
    self(self, near);
    if (heap.size() < k || diff * diff <= heap.top().first) self(self, far);
  };
  visit(visit, root_);
  std::vector<size_t> out(heap.size());
  for (size_t i = out.size(); i-- > 0;) {
    out[i] = heap.top().second;
    heap.pop();
  }
  return out;
}

size_t KdTree::nearest(const Point3& q) const {
  if (pts_.empty()) throw Error(Errc::EmptyCloud, "nearest neighbour in an empty cloud");
  return knn(q, 1).front();
}

std::vector<Point3> points_of(const CoordSet& c) {
  std::vector<Point3> p;
  p.reserve(c.size());
  for (const auto& v : c.coords()) p.push_back({double(v.x), double(v.y), double(v.z)});
  return p;
}

namespace {
double one_way_mse(const std::vector<Point3>& from, const KdTree& to) {
  double s = 0.0;
  for (const auto& p : from) s += sq_dist(p, to.point(to.nearest(p)));
  return s / static_cast<double>(from.size());
}
}  // namespace

double d1_psnr(const std::vector<Point3>& a, const std::vector<Point3>& b, int bit_depth) {
  if (a.empty() || b.empty()) throw Error(Errc::EmptyCloud, "D1 of an empty cloud");
  const KdTree ta(a), tb(b);
  const double mse = std::max(one_way_mse(a, tb), one_way_mse(b, ta));
  return psnr_from_mse(mse, bit_depth);
}

double d1_psnr(const CoordSet& a, const CoordSet& b, int bit_depth) {
  return d1_psnr(points_of(a), points_of(b), bit_depth);
}

std::vector<Point3> estimate_normals(const std::vector<Point3>& pts, size_t k) {
  if (pts.size() < 3) throw Error(Errc::DegenerateNeighborhood, "normals need at least 3 points");
  const KdTree tree(pts);
  std::vector<Point3> normals(pts.size());
  for (size_t i = 0; i < pts.size(); ++i) {
    const auto nb = tree.knn(pts[i], k);
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (size_t j : nb) mean += Eigen::Vector3d(pts[j][0], pts[j][1], pts[j][2]);
    mean /= static_cast<double>(nb.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (size_t j : nb) {
      const Eigen::Vector3d d = Eigen::Vector3d(pts[j][0], pts[j][1], pts[j][2]) - mean;
      cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
    if (es.info() != Eigen::Success || cov.norm() == 0.0)
      throw Error(Errc::DegenerateNeighborhood, "plane fit failed at point " + std::to_string(i));
    const Eigen::Vector3d n = es.eigenvectors().col(0).normalized();
    normals[i] = {n.x(), n.y(), n.z()};
  }
  return normals;
}

namespace {
double one_way_plane_mse(const std::vector<Point3>& from, const std::vector<Point3>& to, const KdTree& tree,
                         const std::vector<Point3>& normals) {
  double s = 0.0;
  for (const auto& p : from) {
    const size_t j = tree.nearest(p);
    const Point3& q = to[j];
    const Point3& n = normals[j];
    const double e = (p[0] - q[0]) * n[0] + (p[1] - q[1]) * n[1] + (p[2] - q[2]) * n[2];
    s += e * e;
  }
  return s / static_cast<double>(from.size());
}
}  // namespace

double d2_psnr(const std::vector<Point3>& a, const std::vector<Point3>& b, int bit_depth, std::vector<Point3> normals_a,
               std::vector<Point3> normals_b) {
  if (a.empty() || b.empty()) throw Error(Errc::EmptyCloud, "D2 of an empty cloud");
  if (normals_a.empty()) normals_a = estimate_normals(a);
  if (normals_b.empty()) normals_b = estimate_normals(b);
  if (normals_a.size() != a.size() || normals_b.size() != b.size())
    throw Error(Errc::ShapeMismatch, "one normal per point is required");
  const KdTree ta(a), tb(b);
  // a→b errors project onto b's normals and vice versa.
  const double mse = std::max(one_way_plane_mse(a, b, tb, normals_b), one_way_plane_mse(b, a, ta, normals_a));
  return psnr_from_mse(mse, bit_depth);
}

namespace {

using Cubic = Eigen::Vector4d;  // c0 + c1 x + c2 x² + c3 x³

Cubic fit_cubic(const std::vector<double>& x, const std::vector<double>& y) {
  Eigen::MatrixXd A(static_cast<Eigen::Index>(x.size()), 4);
  Eigen::VectorXd b(static_cast<Eigen::Index>(x.size()));
  for (size_t i = 0; i < x.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    A(r, 0) = 1.0;
    A(r, 1) = x[i];
    A(r, 2) = x[i] * x[i];
    A(r, 3) = x[i] * x[i] * x[i];
    b(r) = y[i];
  }
  return A.colPivHouseholderQr().solve(b);
}

double eval_cubic(const Cubic& c, double x) { return c(0) + x * (c(1) + x * (c(2) + x * c(3))); }

double integral_cubic(const Cubic& c, double lo, double hi) {
  auto F = [&](double x) { return x * (c(0) + x * (c(1) / 2 + x * (c(2) / 3 + x * c(3) / 4))); };
  return F(hi) - F(lo);
}

double trapezoid(const Cubic& c, double lo, double hi) {
  const int n = 1000;
  const double h = (hi - lo) / n;
  double s = 0.5 * (eval_cubic(c, lo) + eval_cubic(c, hi));
  for (int i = 1; i < n; ++i) s += eval_cubic(c, lo + i * h);
  return s * h;
}

void check_curve(const RDCurve& c) {
  if (c.size() < 4) throw Error(Errc::InsufficientPoints, "Bjøntegaard needs at least 4 points per curve");
  for (const auto& p : c)
    if (!(p.rate > 0.0) || !std::isfinite(p.psnr)) throw Error(Errc::InsufficientPoints, "invalid RD point");
}

struct Axes {
  std::vector<double> log_rate, psnr;
};

Axes axes(const RDCurve& c) {
  Axes a;
  for (const auto& p : c) {
    a.log_rate.push_back(std::log10(p.rate));
    a.psnr.push_back(p.psnr);
  }
  return a;
}

template <typename Integrate>
double bd_rate_impl(const RDCurve& ref, const RDCurve& test, Integrate integrate) {
  check_curve(ref);
  check_curve(test);
  const Axes r = axes(ref), t = axes(test);
  // log-rate as a function of PSNR.
  const Cubic pr = fit_cubic(r.psnr, r.log_rate), pt = fit_cubic(t.psnr, t.log_rate);
  const double lo = std::max(*std::min_element(r.psnr.begin(), r.psnr.end()), *std::min_element(t.psnr.begin(), t.psnr.end()));
  const double hi = std::min(*std::max_element(r.psnr.begin(), r.psnr.end()), *std::max_element(t.psnr.begin(), t.psnr.end()));
  if (!(hi > lo)) throw Error(Errc::NoOverlap, "quality ranges do not overlap");
  const double avg = (integrate(pt, lo, hi) - integrate(pr, lo, hi)) / (hi - lo);
  return (std::pow(10.0, avg) - 1.0) * 100.0;
}

template <typename Integrate>
double bd_psnr_impl(const RDCurve& ref, const RDCurve& test, Integrate integrate) {
  check_curve(ref);
  check_curve(test);
  const Axes r = axes(ref), t = axes(test);
  const Cubic pr = fit_cubic(r.log_rate, r.psnr), pt = fit_cubic(t.log_rate, t.psnr);
  const double lo = std::max(*std::min_element(r.log_rate.begin(), r.log_rate.end()),
                             *std::min_element(t.log_rate.begin(), t.log_rate.end()));
  const double hi = std::min(*std::max_element(r.log_rate.begin(), r.log_rate.end()),
                             *std::max_element(t.log_rate.begin(), t.log_rate.end()));
  if (!(hi > lo)) throw Error(Errc::NoOverlap, "rate ranges do not overlap");
  return (integrate(pt, lo, hi) - integrate(pr, lo, hi)) / (hi - lo);
}

}  // namespace

double bd_rate(const RDCurve& reference, const RDCurve& test) { return bd_rate_impl(reference, test, trapezoid); }
double bd_psnr(const RDCurve& reference, const RDCurve& test) { return bd_psnr_impl(reference, test, trapezoid); }
double bd_rate_closed_form(const RDCurve& reference, const RDCurve& test) {
  return bd_rate_impl(reference, test, integral_cubic);
}
double bd_psnr_closed_form(const RDCurve& reference, const RDCurve& test) {
  return bd_psnr_impl(reference, test, integral_cubic);
}

double bitrate_error(double r_out, double r_tar) {
  if (r_tar == 0.0) throw Error(Errc::ZeroTarget, "bitrate error needs a non-zero target");
  return std::abs(r_out - r_tar) / r_tar * 100.0;
}

std::string format_rd_csv(const RDCurve& curve) {
  std::ostringstream s;
  s.precision(17);
  s << "rate_bpp,psnr_db\n";
  for (const auto& p : curve) s << p.rate << "," << p.psnr << "\n";
  return s.str();
}

RDCurve parse_rd_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::MalformedHeader, "empty RD csv");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "rate_bpp,psnr_db") throw Error(Errc::MalformedHeader, "RD csv header must be rate_bpp,psnr_db");
  RDCurve c;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::istringstream ls(line);
    RDPoint p;
    char comma = 0;
    if (!(ls >> p.rate >> comma >> p.psnr) || comma != ',') throw Error(Errc::MalformedHeader, "bad RD row: " + line);
    c.push_back(p);
  }
  return c;
}

RDCurve read_rd_csv(const std::string& path) {
  const auto b = read_file(path);
  return parse_rd_csv(std::string(b.begin(), b.end()));
}

void write_rd_csv(const RDCurve& curve, const std::string& path) {
  const auto s = format_rd_csv(curve);
  write_file(path, {reinterpret_cast<const uint8_t*>(s.data()), s.size()});
}

}  // namespace dpcc
