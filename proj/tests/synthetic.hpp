#pragma once

// Random smooth loss-stack instances shared by the unit and acceptance tests.

#include <Eigen/Geometry>
#include <array>
#include <cmath>
#include <random>

#include "geometry.hpp"
#include "losses.hpp"

namespace synth {

using namespace deux;

inline Image smooth_texture(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> f(0.05, 0.6), ph(0.0, 6.28), amp(0.1, 0.3);
  Image img(n, n);
  for (int c = 0; c < 3; ++c) {
    const double a = f(rng), b = f(rng), p = ph(rng), s = amp(rng);
    const double a2 = f(rng), b2 = f(rng), p2 = ph(rng);
    for (int r = 0; r < n; ++r)
      for (int col = 0; col < n; ++col)
        img.at(r, col, c) = 0.5 + s * std::sin(a * col + b * r + p) + 0.1 * std::cos(a2 * col - b2 * r + p2);
  }
  return img;
}

struct Instance {
  Intrinsics k;
  Image target, src1, src2;
  Pose pose_t, pose_1, pose_2;
  DepthMap pred;
  SparseDepth z;

  std::array<ViewRef, 2> earlier() const { return {ViewRef{src1, pose_1}, ViewRef{src2, pose_2}}; }
  ViewRef current() const { return {target, pose_t}; }
};

inline Pose small_motion(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector3d axis(n(rng), n(rng), n(rng));
  axis.normalize();
  return Pose::from(Eigen::AngleAxisd(0.03 * n(rng), axis).toRotationMatrix(),
                    Eigen::Vector3d(0.08 * n(rng), 0.08 * n(rng), 0.05 * n(rng)));
}

inline Instance make_instance(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Instance in;
  in.k = Intrinsics::square(n);
  in.target = smooth_texture(n, rng);
  in.src1 = smooth_texture(n, rng);
  in.src2 = smooth_texture(n, rng);
  in.pose_t = Pose::identity();
  in.pose_1 = small_motion(rng);
  in.pose_2 = small_motion(rng);
  in.pred = DepthMap(n, n);
  std::uniform_real_distribution<double> f(0.05, 0.4), ph(0.0, 6.28);
  const double a = f(rng), b = f(rng), p = ph(rng);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) in.pred.at(r, c) = 3.0 + 0.8 * std::sin(a * c + b * r + p) + 0.02 * r;
  in.z = SparseDepth{n, n, {}};
  std::uniform_int_distribution<int> px(0, n - 1);
  std::uniform_real_distribution<double> dd(1.0, 5.0);
  while (in.z.points.size() < 12) {
    const int r = px(rng), c = px(rng);
    bool dup = false;
    for (const auto& q : in.z.points) dup = dup || (q.row == r && q.col == c);
    if (!dup) in.z.points.push_back({r, c, dd(rng)});
  }
  return in;
}

inline double loss_at(const Instance& in, const DepthMap& pred, const LossWeights& w) {
  const auto e = in.earlier();
  return total_loss(in.current(), e, pred, in.z, w, in.k).l_d;
}

// Central difference at pixel i.
inline double finite_difference(const Instance& in, std::size_t i, double h, const LossWeights& w) {
  DepthMap p = in.pred, m = in.pred;
  p.values[i] += h;
  m.values[i] -= h;
  return (loss_at(in, p, w) - loss_at(in, m, w)) / (2.0 * h);
}

inline bool gradient_matches(double analytic, double numeric, double rel_tol) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  return std::abs(analytic - numeric) <= rel_tol * scale + 1e-12;
}

}  // namespace synth
