#pragma once

#include <span>
#include <vector>

#include "geometry.hpp"

namespace deux {

struct LossWeights {
  double lambda_co = 0.15;
  double lambda_st = 0.85;
  double lambda_sz = 1.0;
  double lambda_sm = 0.1;

  void validate() const;
};

struct SparsePoint {
  int row = 0;
  int col = 0;
  double depth_m = 0.0;
};

// Sparse metric depth z over the pixel subset it covers.
struct SparseDepth {
  int width = 0;
  int height = 0;
  std::vector<SparsePoint> points;

  // Checks range, bounds and uniqueness; throws Domain.
  void validate() const;
};

struct LossBreakdown {
  double l_co = 0.0;  // summed over reconstructions
  double l_st = 0.0;  // summed over reconstructions
  double l_ph = 0.0;
  double l_sz = 0.0;
  double l_sm = 0.0;
  double l_d = 0.0;
  // Per-pixel photometric residual averaged over reconstructions (diagnostic only).
  std::vector<double> residual;
};

// Frame view consumed by the loss stack.
struct ViewRef {
  const Image& rgb;
  const Pose& pose;  // world-from-camera
};

inline constexpr int kSsimWindow = 7;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

double color_consistency(const Image& target, const Image& recon, const Mask& mask);

// Per-pixel SSIM averaged over channels, 7x7 uniform window shrunk at the border.
std::vector<double> ssim_map(const Image& a, const Image& b);
double structural_consistency(const Image& target, const Image& recon, const Mask& mask);

struct Reconstruction {
  const Image& image;
  const Mask& mask;
};
double photometric_loss(const Image& target, std::span<const Reconstruction> recons, const LossWeights& w);

double smoothness_loss(const Image& image, const DepthMap& depth);
double sparse_depth_loss(const DepthMap& pred, const SparseDepth& z);

// frame_t first, then the earlier frames (t-1, t-2).
LossBreakdown total_loss(const ViewRef& frame_t, std::span<const ViewRef> earlier, const DepthMap& pred,
                         const SparseDepth& z, const LossWeights& w, const Intrinsics& k);

// d(l_d)/d(pred), row-major.
std::vector<double> loss_gradient(const ViewRef& frame_t, std::span<const ViewRef> earlier, const DepthMap& pred,
                                  const SparseDepth& z, const LossWeights& w, const Intrinsics& k);

// 1 - exp(-mean |I_tau - I_t|) averaged over the earlier frames with a valid reprojection.
// Throws UndefinedLoss when no earlier frame reprojects anywhere.
double uncertainty_residual(const ViewRef& frame_t, std::span<const ViewRef> earlier, const DepthMap& pred,
                            const Intrinsics& k);

}  // namespace deux
