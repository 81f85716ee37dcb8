#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "error.hpp"
#include "losses.hpp"
#include "synthetic.hpp"

using namespace deux;

namespace {

Image constant_image(int n, double v) { return Image(n, n, v); }

Image random_image(int n, std::mt19937_64& rng) {
  Image img(n, n);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& v : img.values) v = u(rng);
  return img;
}

Mask full_mask(int n) { return Mask(std::size_t(n) * n, 1); }

// Direct windowed SSIM, population statistics, window clipped at the border.
double ssim_oracle(const Image& a, const Image& b, int row, int col) {
  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    int n = 0;
    for (int r = row - 3; r <= row + 3; ++r) {
      for (int q = col - 3; q <= col + 3; ++q) {
        if (r < 0 || q < 0 || r >= a.height || q >= a.width) continue;
        const double x = a.at(r, q, c), y = b.at(r, q, c);
        sa += x;
        sb += y;
        saa += x * x;
        sbb += y * y;
        sab += x * y;
        ++n;
      }
    }
    const double ma = sa / n, mb = sb / n;
    const double va = saa / n - ma * ma, vb = sbb / n - mb * mb, cab = sab / n - ma * mb;
    total += ((2 * ma * mb + kSsimC1) * (2 * cab + kSsimC2)) / ((ma * ma + mb * mb + kSsimC1) * (va + vb + kSsimC2));
  }
  return total / 3.0;
}

}  // namespace

TEST_CASE("color consistency") {
  const int n = 8;
  CHECK(color_consistency(constant_image(n, 0.3), constant_image(n, 0.3), full_mask(n)) == 0.0);
  CHECK(std::abs(color_consistency(constant_image(n, 0.3), constant_image(n, 0.4), full_mask(n)) - 0.1) <= 1e-15);

  std::mt19937_64 rng(1);
  const Image a = random_image(n, rng), b = random_image(n, rng);
  Mask m(std::size_t(n) * n);
  for (auto& v : m) v = std::bernoulli_distribution(0.6)(rng);
  m[0] = 1;
  double sum = 0.0;
  int count = 0;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      if (!m[std::size_t(r) * n + c]) continue;
      ++count;
      for (int ch = 0; ch < 3; ++ch) sum += std::abs(a.at(r, c, ch) - b.at(r, c, ch)) / 3.0;
    }
  CHECK(std::abs(color_consistency(a, b, m) - sum / count) <= 1e-12);
  CHECK_THROWS_AS(color_consistency(a, b, Mask(std::size_t(n) * n, 0)), Error);
}

TEST_CASE("structural consistency") {
  const int n = 12;
  std::mt19937_64 rng(2);
  const Image a = random_image(n, rng), b = random_image(n, rng);
  CHECK(std::abs(structural_consistency(a, a, full_mask(n))) <= 1e-12);
  CHECK(std::abs(structural_consistency(a, b, full_mask(n)) - structural_consistency(b, a, full_mask(n))) <= 1e-12);

  const double m1 = 0.2, m2 = 0.7;
  const double closed = (2 * m1 * m2 + kSsimC1) / (m1 * m1 + m2 * m2 + kSsimC1);
  CHECK(std::abs(structural_consistency(constant_image(n, m1), constant_image(n, m2), full_mask(n)) - (1.0 - closed)) <= 1e-12);

  const auto map = ssim_map(a, b);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) CHECK(std::abs(map[std::size_t(r) * n + c] - ssim_oracle(a, b, r, c)) <= 1e-10);

  CHECK_THROWS_AS(structural_consistency(random_image(5, rng), random_image(5, rng), full_mask(5)), Error);
}

TEST_CASE("photometric loss sums weighted terms over reconstructions") {
  const int n = 10;
  std::mt19937_64 rng(3);
  const Image t = random_image(n, rng), r1 = random_image(n, rng), r2 = random_image(n, rng);
  const Mask m = full_mask(n);
  const LossWeights w;
  const Reconstruction same[] = {{t, m}, {t, m}};
  CHECK(std::abs(photometric_loss(t, same, w)) <= 1e-12);
  const Reconstruction one[] = {{r1, m}};
  const double single = w.lambda_co * color_consistency(t, r1, m) + w.lambda_st * structural_consistency(t, r1, m);
  CHECK(photometric_loss(t, one, w) == doctest::Approx(single).epsilon(1e-14));
  const Reconstruction two[] = {{r1, m}, {r2, m}};
  const Reconstruction only2[] = {{r2, m}};
  CHECK(std::abs(photometric_loss(t, two, w) - (photometric_loss(t, one, w) + photometric_loss(t, only2, w))) <= 1e-12);
  CHECK_THROWS_AS(photometric_loss(t, std::span<const Reconstruction>{}, w), Error);
}

TEST_CASE("smoothness loss") {
  const int n = 9;
  const Image flat = constant_image(n, 0.5);
  CHECK(smoothness_loss(flat, DepthMap(n, n, 2.0)) == 0.0);
  DepthMap ramp(n, n);
  const double s = 0.25;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) ramp.at(r, c) = 1.0 + s * c;
  // Forward differences: n-1 steps of size s per row, averaged over all n*n pixels.
  CHECK(std::abs(smoothness_loss(flat, ramp) - s * (n - 1) / n) <= 1e-12);

  DepthMap step(n, n, 1.0);
  Image edge(n, n, 0.1);
  for (int r = 0; r < n; ++r)
    for (int c = n / 2; c < n; ++c) {
      step.at(r, c) = 4.0;
      for (int ch = 0; ch < 3; ++ch) edge.at(r, c, ch) = 0.9;
    }
  CHECK(smoothness_loss(edge, step) < smoothness_loss(flat, step));
}

TEST_CASE("sparse depth loss") {
  const int n = 6;
  DepthMap pred(n, n, 2.0);
  SparseDepth z{n, n, {{0, 0, 2.0}, {3, 4, 2.0}, {5, 5, 2.0}}};
  CHECK(sparse_depth_loss(pred, z) == 0.0);
  for (double& v : pred.values) v += 0.3;
  CHECK(std::abs(sparse_depth_loss(pred, z) - 0.3) <= 1e-12);

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> d(0.5, 8.0);
  for (double& v : pred.values) v = d(rng);
  for (auto& p : z.points) p.depth_m = d(rng);
  double oracle = 0.0;
  for (const auto& p : z.points) oracle += std::abs(pred.at(p.row, p.col) - p.depth_m);
  CHECK(std::abs(sparse_depth_loss(pred, z) - oracle / 3.0) <= 1e-12);
  CHECK_THROWS_AS(sparse_depth_loss(pred, SparseDepth{n, n, {}}), Error);
}

TEST_CASE("total loss") {
  const auto in = synth::make_instance(24, 5);
  const LossWeights w;
  const auto e = in.earlier();
  const auto b = total_loss(in.current(), e, in.pred, in.z, w, in.k);
  CHECK(std::abs(b.l_d - (b.l_ph + w.lambda_sz * b.l_sz + w.lambda_sm * b.l_sm)) <= 1e-12);
  CHECK(std::abs(b.l_ph - (w.lambda_co * b.l_co + w.lambda_st * b.l_st)) <= 1e-12);

  // Independent recomputation from the component operations.
  double ph = 0.0;
  for (const auto& src : e) {
    const auto wr = warp_reconstruct(src.rgb, in.pred, relative_pose(src.pose, in.pose_t), in.k, &in.target);
    ph += w.lambda_co * color_consistency(in.target, wr.image, wr.mask) +
          w.lambda_st * structural_consistency(in.target, wr.image, wr.mask);
  }
  const double oracle = ph + w.lambda_sz * sparse_depth_loss(in.pred, in.z) + w.lambda_sm * smoothness_loss(in.target, in.pred);
  CHECK(std::abs(b.l_d - oracle) <= 1e-12);

  LossWeights only_sz{0.0, 0.0, 1.0, 0.0};
  const auto s = total_loss(in.current(), e, in.pred, in.z, only_sz, in.k);
  CHECK(s.l_d == s.l_sz);

  // Static camera with depth exact at the sparse points.
  const std::array<ViewRef, 2> still{ViewRef{in.target, in.pose_t}, ViewRef{in.target, in.pose_t}};
  SparseDepth exact = in.z;
  for (auto& p : exact.points) p.depth_m = in.pred.at(p.row, p.col);
  const auto st = total_loss(in.current(), still, in.pred, exact, w, in.k);
  CHECK(std::abs(st.l_ph) <= 1e-12);
  CHECK(st.l_sz == 0.0);
  CHECK(std::abs(st.l_d - w.lambda_sm * st.l_sm) <= 1e-12);
}

TEST_CASE("scale probe") {
  const auto in = synth::make_instance(24, 8);
  auto scaled = in;
  const double s = 1.5;
  for (double& v : scaled.pred.values) v *= s;
  scaled.pose_1.translation *= s;
  scaled.pose_2.translation *= s;
  LossWeights no_sz;
  no_sz.lambda_sz = 0.0;
  const auto e = in.earlier();
  const auto es = scaled.earlier();
  const double a = total_loss(in.current(), e, in.pred, in.z, no_sz, in.k).l_ph;
  const double b = total_loss(scaled.current(), es, scaled.pred, scaled.z, no_sz, scaled.k).l_ph;
  CHECK(std::abs(a - b) <= 1e-9);

  // With the sparse term, the metric scale is pinned: exact sparse depths favour s = 1.
  auto pinned = in;
  for (auto& p : pinned.z.points) p.depth_m = in.pred.at(p.row, p.col);
  auto pinned_scaled = scaled;
  pinned_scaled.z = pinned.z;
  const LossWeights w;
  CHECK(total_loss(pinned_scaled.current(), es, pinned_scaled.pred, pinned_scaled.z, w, in.k).l_d >
        total_loss(pinned.current(), e, pinned.pred, pinned.z, w, in.k).l_d);
}

TEST_CASE("loss gradient") {
  const auto in = synth::make_instance(32, 11);
  const auto e = in.earlier();

  LossWeights only_sz{0.0, 0.0, 1.0, 0.0};
  auto off = in;
  for (auto& p : off.z.points) p.depth_m = off.pred.at(p.row, p.col);
  const auto& p0 = off.z.points[0];
  off.pred.at(p0.row, p0.col) += 0.25;
  const auto g = loss_gradient(off.current(), e, off.pred, off.z, only_sz, off.k);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const bool at = i == std::size_t(p0.row) * 32 + p0.col;
    CHECK(g[i] == doctest::Approx(at ? 1.0 / off.z.points.size() : 0.0));
  }

  LossWeights only_sm{0.0, 0.0, 0.0, 1.0};
  auto flat = in;
  flat.target = Image(32, 32, 0.4);
  flat.pred = DepthMap(32, 32, 2.5);
  for (double v : loss_gradient(flat.current(), e, flat.pred, flat.z, only_sm, flat.k)) CHECK(v == 0.0);

  const LossWeights w;
  const auto ga = loss_gradient(in.current(), e, in.pred, in.z, w, in.k);
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<std::size_t> px(0, ga.size() - 1);
  int ok = 0;
  const int samples = 50;
  for (int i = 0; i < samples; ++i) {
    const std::size_t p = px(rng);
    ok += synth::gradient_matches(ga[p], synth::finite_difference(in, p, 1e-4, w), 1e-3);
  }
  CHECK(ok >= 48);
}

TEST_CASE("uncertainty residual") {
  const int n = 16;
  const Intrinsics k = Intrinsics::square(n);
  const Pose id = Pose::identity();
  const DepthMap d(n, n, 2.0);
  const Image t(n, n, 0.1);
  const std::array<ViewRef, 2> same{ViewRef{t, id}, ViewRef{t, id}};
  CHECK(uncertainty_residual({t, id}, same, d, k) == 0.0);

  const Image off(n, n, 0.1 + std::numbers::ln2);
  const std::array<ViewRef, 2> shifted{ViewRef{off, id}, ViewRef{off, id}};
  CHECK(std::abs(uncertainty_residual({t, id}, shifted, d, k) - 0.5) <= 1e-12);

  const auto in = synth::make_instance(24, 13);
  const auto e = in.earlier();
  double oracle = 0.0;
  for (const auto& src : e) {
    const auto wr = warp_reconstruct(src.rgb, in.pred, relative_pose(src.pose, in.pose_t), in.k, &in.target);
    double sum = 0.0;
    int cnt = 0;
    for (std::size_t i = 0; i < wr.mask.size(); ++i) {
      if (!wr.mask[i]) continue;
      ++cnt;
      for (int c = 0; c < 3; ++c) sum += std::abs(wr.image.values[i * 3 + c] - in.target.values[i * 3 + c]) / 3.0;
    }
    oracle += (1.0 - std::exp(-sum / cnt)) / 2.0;
  }
  const double delta = uncertainty_residual(in.current(), e, in.pred, in.k);
  CHECK(std::abs(delta - oracle) <= 1e-12);
  CHECK(delta >= 0.0);
  CHECK(delta < 1.0);

  const Pose behind = Pose::from(Eigen::Matrix3d::Identity(), Eigen::Vector3d(0, 0, 100));
  const std::array<ViewRef, 1> lost{ViewRef{t, behind}};
  CHECK_THROWS_AS(uncertainty_residual({t, id}, lost, d, k), Error);
}
