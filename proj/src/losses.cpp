#include "losses.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "error.hpp"

namespace deux {

void LossWeights::validate() const {
  if (!(lambda_co >= 0.0) || !(lambda_st >= 0.0) || !(lambda_sz >= 0.0) || !(lambda_sm >= 0.0))
    fail(ErrorKind::Domain, "loss weights must be non-negative");
}

void SparseDepth::validate() const {
  std::set<std::pair<int, int>> seen;
  for (const auto& p : points) {
    if (p.row < 0 || p.row >= height || p.col < 0 || p.col >= width)
      fail(ErrorKind::Domain, "sparse depth: point outside the image");
    if (!(p.depth_m >= kMinDepth && p.depth_m <= kMaxDepth))
      fail(ErrorKind::Domain, "sparse depth: value outside [0.1, 10.0] m");
    if (!seen.emplace(p.row, p.col).second) fail(ErrorKind::Domain, "sparse depth: duplicate coordinate");
  }
}

namespace {

void require_same(const Image& a, const Image& b, const char* who) {
  if (a.width != b.width || a.height != b.height) fail(ErrorKind::Shape, std::string(who) + ": image sizes differ");
}

std::size_t mask_count(const Mask& mask) {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

// Clamped-window box sum of a single-channel map (window half-size r).
std::vector<double> box_sum(const std::vector<double>& src, int w, int h, int r) {
  std::vector<double> tmp(src.size()), out(src.size());
  for (int y = 0; y < h; ++y) {
    const double* s = &src[std::size_t(y) * w];
    double* d = &tmp[std::size_t(y) * w];
    double acc = 0.0;
    for (int x = 0; x <= std::min(r, w - 1); ++x) acc += s[x];
    for (int x = 0; x < w; ++x) {
      d[x] = acc;
      if (x + r + 1 < w) acc += s[x + r + 1];
      if (x - r >= 0) acc -= s[x - r];
    }
  }
  for (int x = 0; x < w; ++x) {
    double acc = 0.0;
    for (int y = 0; y <= std::min(r, h - 1); ++y) acc += tmp[std::size_t(y) * w + x];
    for (int y = 0; y < h; ++y) {
      out[std::size_t(y) * w + x] = acc;
      if (y + r + 1 < h) acc += tmp[std::size_t(y + r + 1) * w + x];
      if (y - r >= 0) acc -= tmp[std::size_t(y - r) * w + x];
    }
  }
  return out;
}

std::vector<double> window_counts(int w, int h, int r) {
  std::vector<double> out(std::size_t(w) * h);
  for (int y = 0; y < h; ++y) {
    const int ny = std::min(y + r, h - 1) - std::max(y - r, 0) + 1;
    for (int x = 0; x < w; ++x) {
      const int nx = std::min(x + r, w - 1) - std::max(x - r, 0) + 1;
      out[std::size_t(y) * w + x] = double(nx * ny);
    }
  }
  return out;
}

struct SsimChannel {
  std::vector<double> s;                   // SSIM per pixel
  std::vector<double> alpha, beta, gamma;  // adjoint coefficients w.r.t. the first image
};

// SSIM of channel c between x and y; when `adjoint` is set, also the per-window
// coefficients such that dS(p)/dx(q) = alpha(p) + beta(p) x(q) + gamma(p) y(q) for q in W(p).
SsimChannel ssim_channel(const Image& x, const Image& y, int c, bool adjoint) {
  const int w = x.width, h = x.height, r = kSsimWindow / 2;
  const std::size_t n = x.pixels();
  std::vector<double> xs(n), ys(n), xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = x.values[i * 3 + c], b = y.values[i * 3 + c];
    xs[i] = a;
    ys[i] = b;
    xx[i] = a * a;
    yy[i] = b * b;
    xy[i] = a * b;
  }
  const auto cnt = window_counts(w, h, r);
  const auto sx = box_sum(xs, w, h, r), sy = box_sum(ys, w, h, r);
  const auto sxx = box_sum(xx, w, h, r), syy = box_sum(yy, w, h, r), sxy = box_sum(xy, w, h, r);
  SsimChannel out;
  out.s.resize(n);
  if (adjoint) {
    out.alpha.resize(n);
    out.beta.resize(n);
    out.gamma.resize(n);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double N = cnt[i];
    const double mx = sx[i] / N, my = sy[i] / N;
    const double vx = sxx[i] / N - mx * mx, vy = syy[i] / N - my * my, cxy = sxy[i] / N - mx * my;
    const double A1 = 2.0 * mx * my + kSsimC1, A2 = 2.0 * cxy + kSsimC2;
    const double B1 = mx * mx + my * my + kSsimC1, B2 = vx + vy + kSsimC2;
    const double S = (A1 * A2) / (B1 * B2);
    out.s[i] = S;
    if (!adjoint) continue;
    const double dS_dmx = 2.0 * my * A2 / (B1 * B2) - S * 2.0 * mx / B1;
    const double dS_dvx = -S / B2;
    const double dS_dcxy = 2.0 * A1 / (B1 * B2);
    out.alpha[i] = (dS_dmx - 2.0 * mx * dS_dvx - my * dS_dcxy) / N;
    out.beta[i] = 2.0 * dS_dvx / N;
    out.gamma[i] = dS_dcxy / N;
  }
  return out;
}

void require_ssim_size(const Image& a) {
  if (a.width < kSsimWindow || a.height < kSsimWindow)
    fail(ErrorKind::Shape, "structural_consistency: image smaller than the SSIM window");
}

// Adds d(scale * sum_{p in mask} mean_c (1 - S_c(p)))/d(recon) into grad (per pixel, per channel).
void structural_adjoint(const Image& target, const Image& recon, const Mask& mask, double scale,
                        std::vector<double>& grad) {
  const int w = recon.width, h = recon.height, r = kSsimWindow / 2;
  const std::size_t n = recon.pixels();
  for (int c = 0; c < 3; ++c) {
    auto ch = ssim_channel(recon, target, c, true);
    for (std::size_t i = 0; i < n; ++i) {
      if (!mask[i]) ch.alpha[i] = ch.beta[i] = ch.gamma[i] = 0.0;
    }
    const auto A = box_sum(ch.alpha, w, h, r), B = box_sum(ch.beta, w, h, r), G = box_sum(ch.gamma, w, h, r);
    for (std::size_t i = 0; i < n; ++i) {
      const double dS = A[i] + B[i] * recon.values[i * 3 + c] + G[i] * target.values[i * 3 + c];
      grad[i * 3 + c] += -scale / 3.0 * dS;
    }
  }
}

double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

void require_depth_matches(const Image& image, const DepthMap& depth, const char* who) {
  if (image.width != depth.width || image.height != depth.height)
    fail(ErrorKind::Shape, std::string(who) + ": image and depth sizes differ");
}

}  // namespace

double color_consistency(const Image& target, const Image& recon, const Mask& mask) {
  require_same(target, recon, "color_consistency");
  if (mask.size() != target.pixels()) fail(ErrorKind::Shape, "color_consistency: mask size mismatch");
  const std::size_t m = mask_count(mask);
  if (m == 0) fail(ErrorKind::UndefinedLoss, "color_consistency: empty mask");
  double sum = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    double px = 0.0;
    for (int c = 0; c < 3; ++c) px += std::abs(recon.values[i * 3 + c] - target.values[i * 3 + c]);
    sum += px / 3.0;
  }
  return sum / double(m);
}

std::vector<double> ssim_map(const Image& a, const Image& b) {
  require_same(a, b, "ssim_map");
  require_ssim_size(a);
  std::vector<double> out(a.pixels(), 0.0);
  for (int c = 0; c < 3; ++c) {
    const auto ch = ssim_channel(a, b, c, false);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += ch.s[i] / 3.0;
  }
  return out;
}

double structural_consistency(const Image& target, const Image& recon, const Mask& mask) {
  require_same(target, recon, "structural_consistency");
  if (mask.size() != target.pixels()) fail(ErrorKind::Shape, "structural_consistency: mask size mismatch");
  const auto s = ssim_map(recon, target);
  const std::size_t m = mask_count(mask);
  if (m == 0) fail(ErrorKind::UndefinedLoss, "structural_consistency: empty mask");
  double sum = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (mask[i]) sum += 1.0 - s[i];
  }
  return sum / double(m);
}

double photometric_loss(const Image& target, std::span<const Reconstruction> recons, const LossWeights& w) {
  if (recons.empty()) fail(ErrorKind::Usage, "photometric_loss: no reconstructions");
  double total = 0.0;
  for (const auto& r : recons) {
    total += w.lambda_co * color_consistency(target, r.image, r.mask) +
             w.lambda_st * structural_consistency(target, r.image, r.mask);
  }
  return total;
}

double smoothness_loss(const Image& image, const DepthMap& depth) {
  require_depth_matches(image, depth, "smoothness_loss");
  const int w = depth.width, h = depth.height;
  double sum = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double d = depth.at(y, x);
      if (x + 1 < w) {
        double gi = 0.0;
        for (int c = 0; c < 3; ++c) gi += std::abs(image.at(y, x + 1, c) - image.at(y, x, c));
        sum += std::exp(-gi / 3.0) * std::abs(depth.at(y, x + 1) - d);
      }
      if (y + 1 < h) {
        double gi = 0.0;
        for (int c = 0; c < 3; ++c) gi += std::abs(image.at(y + 1, x, c) - image.at(y, x, c));
        sum += std::exp(-gi / 3.0) * std::abs(depth.at(y + 1, x) - d);
      }
    }
  }
  return sum / double(depth.pixels());
}

double sparse_depth_loss(const DepthMap& pred, const SparseDepth& z) {
  if (z.points.empty()) fail(ErrorKind::UndefinedLoss, "sparse_depth_loss: empty sparse set");
  if (z.width != pred.width || z.height != pred.height) fail(ErrorKind::Shape, "sparse_depth_loss: size mismatch");
  double sum = 0.0;
  for (const auto& p : z.points) sum += std::abs(pred.at(p.row, p.col) - p.depth_m);
  return sum / double(z.points.size());
}

LossBreakdown total_loss(const ViewRef& frame_t, std::span<const ViewRef> earlier, const DepthMap& pred,
                         const SparseDepth& z, const LossWeights& w, const Intrinsics& k) {
  if (earlier.empty()) fail(ErrorKind::Usage, "total_loss: need at least one earlier frame");
  const Image& target = frame_t.rgb;
  LossBreakdown out;
  out.residual.assign(target.pixels(), 0.0);
  for (const auto& src : earlier) {
    const auto warp = warp_reconstruct(src.rgb, pred, relative_pose(src.pose, frame_t.pose), k, &target);
    const double co = color_consistency(target, warp.image, warp.mask);
    const double st = structural_consistency(target, warp.image, warp.mask);
    out.l_co += co;
    out.l_st += st;
    out.l_ph += w.lambda_co * co + w.lambda_st * st;
    for (std::size_t i = 0; i < out.residual.size(); ++i) {
      double px = 0.0;
      for (int c = 0; c < 3; ++c) px += std::abs(warp.image.values[i * 3 + c] - target.values[i * 3 + c]);
      out.residual[i] += px / 3.0 / double(earlier.size());
    }
  }
  out.l_sz = sparse_depth_loss(pred, z);
  out.l_sm = smoothness_loss(target, pred);
  out.l_d = out.l_ph + w.lambda_sz * out.l_sz + w.lambda_sm * out.l_sm;
  return out;
}

std::vector<double> loss_gradient(const ViewRef& frame_t, std::span<const ViewRef> earlier, const DepthMap& pred,
                                  const SparseDepth& z, const LossWeights& w, const Intrinsics& k) {
  if (earlier.empty()) fail(ErrorKind::Usage, "loss_gradient: need at least one earlier frame");
  const Image& target = frame_t.rgb;
  require_depth_matches(target, pred, "loss_gradient");
  require_ssim_size(target);
  const std::size_t n = pred.pixels();
  std::vector<double> grad(n, 0.0);

  // Photometric terms: chain through the per-pixel warp Jacobian.
  std::vector<double> dimg(n * 3);
  for (const auto& src : earlier) {
    const auto warp = warp_reconstruct(src.rgb, pred, relative_pose(src.pose, frame_t.pose), k, &target, true);
    const std::size_t m = mask_count(warp.mask);
    if (m == 0) fail(ErrorKind::UndefinedLoss, "loss_gradient: empty reprojection mask");
    std::fill(dimg.begin(), dimg.end(), 0.0);
    const double co_scale = w.lambda_co / (3.0 * double(m));
    for (std::size_t i = 0; i < n; ++i) {
      if (!warp.mask[i]) continue;
      for (int c = 0; c < 3; ++c) dimg[i * 3 + c] += co_scale * sgn(warp.image.values[i * 3 + c] - target.values[i * 3 + c]);
    }
    if (w.lambda_st != 0.0) structural_adjoint(target, warp.image, warp.mask, w.lambda_st / double(m), dimg);
    for (std::size_t i = 0; i < n; ++i) {
      if (!warp.mask[i]) continue;
      for (int c = 0; c < 3; ++c) grad[i] += dimg[i * 3 + c] * warp.jacobian[i * 3 + c];
    }
  }

  // Sparse term.
  if (z.points.empty()) fail(ErrorKind::UndefinedLoss, "loss_gradient: empty sparse set");
  const double sz_scale = w.lambda_sz / double(z.points.size());
  for (const auto& p : z.points) {
    const std::size_t i = std::size_t(p.row) * pred.width + p.col;
    grad[i] += sz_scale * sgn(pred.values[i] - p.depth_m);
  }

  // Smoothness term.
  const int W = pred.width, H = pred.height;
  const double sm_scale = w.lambda_sm / double(n);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const std::size_t i = std::size_t(y) * W + x;
      if (x + 1 < W) {
        double gi = 0.0;
        for (int c = 0; c < 3; ++c) gi += std::abs(target.at(y, x + 1, c) - target.at(y, x, c));
        const double g = sm_scale * std::exp(-gi / 3.0) * sgn(pred.values[i + 1] - pred.values[i]);
        grad[i + 1] += g;
        grad[i] -= g;
      }
      if (y + 1 < H) {
        double gi = 0.0;
        for (int c = 0; c < 3; ++c) gi += std::abs(target.at(y + 1, x, c) - target.at(y, x, c));
        const double g = sm_scale * std::exp(-gi / 3.0) * sgn(pred.values[i + W] - pred.values[i]);
        grad[i + W] += g;
        grad[i] -= g;
      }
    }
  }
  return grad;
}

double uncertainty_residual(const ViewRef& frame_t, std::span<const ViewRef> earlier, const DepthMap& pred,
                            const Intrinsics& k) {
  double sum = 0.0;
  int valid = 0;
  for (const auto& src : earlier) {
    const auto warp = warp_reconstruct(src.rgb, pred, relative_pose(src.pose, frame_t.pose), k, &frame_t.rgb);
    if (mask_count(warp.mask) == 0) continue;
    sum += 1.0 - std::exp(-color_consistency(frame_t.rgb, warp.image, warp.mask));
    ++valid;
  }
  if (valid == 0) fail(ErrorKind::UndefinedLoss, "uncertainty_residual: no valid reprojected pixels");
  return sum / valid;
}

}  // namespace deux
