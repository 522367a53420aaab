#pragma once

#include "dpcc/io.hpp"

#include <string>
#include <vector>

namespace dpcc {

constexpr double kPsnrCap = 100.0;

double bpp(double total_bits, size_t points);

// Exact k-nearest-neighbour search over a fixed point set.
class KdTree {
 public:
  explicit KdTree(std::vector<Point3> points);

  size_t size() const { return pts_.size(); }
  const Point3& point(size_t i) const { return pts_[i]; }
  // Index of the nearest point (ties to the lowest index).
  size_t nearest(const Point3& q) const;
  // Indices of the k nearest points, closest first.
  std::vector<size_t> knn(const Point3& q, size_t k) const;

 private:
  struct Node {
    int axis = -1;
    size_t index = 0;
    int left = -1, right = -1;
  };
  int build(std::vector<size_t>& idx, size_t lo, size_t hi, int depth);

  std::vector<Point3> pts_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

std::vector<Point3> points_of(const CoordSet& c);

// Symmetric point-to-point PSNR with peak 3·(2^depth − 1)²; 100 dB when the
// error is zero.
double d1_psnr(const std::vector<Point3>& a, const std::vector<Point3>& b, int bit_depth);
double d1_psnr(const CoordSet& a, const CoordSet& b, int bit_depth);

// Unit normals from a plane fit over the k nearest neighbours.
std::vector<Point3> estimate_normals(const std::vector<Point3>& pts, size_t k = 9);

// Point-to-plane PSNR. `normals_a` / `normals_b` belong to the reference side
// of each direction; pass empty vectors to estimate them.
double d2_psnr(const std::vector<Point3>& a, const std::vector<Point3>& b, int bit_depth,
               std::vector<Point3> normals_a = {}, std::vector<Point3> normals_b = {});

struct RDPoint {
  double rate = 0.0;  // bpp
  double psnr = 0.0;  // dB
};
using RDCurve = std::vector<RDPoint>;

// Bjøntegaard deltas via cubic fits, integrated by a 1000-interval trapezoid
// rule over the overlap.
double bd_rate(const RDCurve& reference, const RDCurve& test);
double bd_psnr(const RDCurve& reference, const RDCurve& test);
// Same quantities via the closed-form antiderivative of the fitted cubic.
double bd_rate_closed_form(const RDCurve& reference, const RDCurve& test);
double bd_psnr_closed_form(const RDCurve& reference, const RDCurve& test);

// |R_out − R_tar| / R_tar × 100.
double bitrate_error(double r_out, double r_tar);

RDCurve read_rd_csv(const std::string& path);
void write_rd_csv(const RDCurve& curve, const std::string& path);
std::string format_rd_csv(const RDCurve& curve);
RDCurve parse_rd_csv(const std::string& text);

}  // namespace dpcc
