#include <cmath>
#include <string>

#include "fbmp/errors.hpp"
#include "fbmp/primitives.hpp"

namespace fbmp {

namespace {

double sign(double x) { return (x > 0.0) - (x < 0.0); }

Eigen::Index peak_index(const Eigen::VectorXd& v) {
  Eigen::Index idx = 0;
  v.cwiseAbs().maxCoeff(&idx);
  return idx;
}

// Walks from the velocity peak in direction `step` (+1/-1) to the first zero-velocity
// crossing, then keeps going while |v| still decreases (local-minimum refinement).
Eigen::Index find_crossing(const Eigen::VectorXd& v, int step, double threshold, const char* what) {
  const Eigen::Index n = v.size();
  const Eigen::Index peak = peak_index(v);
  const double peak_abs = std::abs(v[peak]);
  if (!(peak_abs > 0.0)) throw SegmentationError(std::string("segment_zvc: no motion on the ") + what + " axis");
  const double s0 = sign(v[peak]);
  Eigen::Index i = peak;
  bool found = false;
  while (i + step >= 0 && i + step < n) {
    i += step;
    if (std::abs(v[i]) <= threshold * peak_abs || sign(v[i]) != s0) {
      found = true;
      break;
    }
  }
  if (!found) throw SegmentationError(std::string("segment_zvc: no zero-velocity crossing on the ") + what + " axis");
  while (i + step >= 0 && i + step < n && std::abs(v[i + step]) < std::abs(v[i])) i += step;
  return i;
}

}  // namespace

std::pair<std::size_t, std::size_t> Segmentation::range(int k) const {
  switch (k) {
    case 1: return {0, prim1_end};
    case 2: return {prim1_end, prim3_start};
    case 3: return {prim3_start, samples - 1};
    default: throw ValidationError("segmentation: primitive index must be 1, 2 or 3");
  }
}

Segmentation segment_zvc(const PositionTrajectory& traj, const ZvcOptions& options) {
  if (traj.size() < 3) throw SegmentationError("segment_zvc: trajectory too short");
  if (options.descend_axis >= traj.dims() || options.slide_axis >= traj.dims()) {
    throw ValidationError("segment_zvc: axis out of range");
  }
  const Eigen::VectorXd vz = traj.yd.col(options.descend_axis);
  const Eigen::VectorXd vy = traj.yd.col(options.slide_axis);
  Segmentation seg;
  seg.samples = traj.size();
  seg.prim1_end = static_cast<std::size_t>(find_crossing(vz, +1, options.threshold, "descend"));
  seg.prim3_start = static_cast<std::size_t>(find_crossing(vy, -1, options.threshold, "slide"));
  if (seg.prim1_end >= seg.prim3_start || seg.prim3_start + 2 >= seg.samples || seg.prim1_end < 2) {
    throw SegmentationError("segment_zvc: boundaries out of order or leave an empty primitive");
  }
  return seg;
}

}  // namespace fbmp
