#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace deux {

inline constexpr double kMinDepth = 0.1;
inline constexpr double kMaxDepth = 10.0;

// Pinhole intrinsics. Pixel (col, row) has its center at (u, v) = (col, row).
struct Intrinsics {
  double fx = 200.0;
  double fy = 200.0;
  double cx = 200.0;
  double cy = 200.0;
  int width = 400;
  int height = 400;

  void validate() const;
  // Same field of view at a different square resolution.
  static Intrinsics square(int size);
};

// Rigid transform, stored world-from-camera for absolute poses.
// Camera frame: +z forward, +x right, +y down.
struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static Pose identity() { return {}; }
  // Throws Domain if rotation is not orthonormal with det 1 (tolerance 1e-9).
  static Pose from(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }
  Eigen::Matrix4d matrix() const;
};

Pose compose(const Pose& a, const Pose& b);
Pose invert(const Pose& a);
// Transform taking points in the camera at time t into the camera at time tau.
Pose relative_pose(const Pose& world_from_tau, const Pose& world_from_t);

struct PixelCoord {
  double u = 0.0;
  double v = 0.0;
};

// Row-major, 3 interleaved channels, intensities in [0,1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  Image() = default;
  Image(int w, int h, double fill = 0.0) : width(w), height(h), values(std::size_t(w) * h * 3, fill) {}

  double& at(int row, int col, int ch) { return values[(std::size_t(row) * width + col) * 3 + ch]; }
  double at(int row, int col, int ch) const { return values[(std::size_t(row) * width + col) * 3 + ch]; }
  std::size_t pixels() const { return std::size_t(width) * height; }
};

struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;
  double min_m = kMinDepth;
  double max_m = kMaxDepth;

  DepthMap() = default;
  DepthMap(int w, int h, double fill = 0.0) : width(w), height(h), values(std::size_t(w) * h, fill) {}

  double& at(int row, int col) { return values[std::size_t(row) * width + col]; }
  double at(int row, int col) const { return values[std::size_t(row) * width + col]; }
  std::size_t pixels() const { return std::size_t(width) * height; }
};

using Mask = std::vector<std::uint8_t>;

Eigen::Vector3d backproject(PixelCoord q, double depth, const Intrinsics& k);
PixelCoord project(const Eigen::Vector3d& p, const Intrinsics& k);

// Bilinear sample; caller guarantees 0 <= u <= w-1, 0 <= v <= h-1 (small overshoot is clamped).
void sample_bilinear(const Image& img, double u, double v, double out[3], double du[3] = nullptr,
                     double dv[3] = nullptr);

struct WarpResult {
  Image image;
  Mask mask;
  // d(image)/d(depth) per pixel and channel; filled only when requested.
  std::vector<double> jacobian;
};

// Reconstructs the target view from `source` using the target's depth and the
// target-to-source transform. Invalid pixels are filled from `fill` when given, else 0.
WarpResult warp_reconstruct(const Image& source, const DepthMap& depth, const Pose& relative_pose,
                            const Intrinsics& k, const Image* fill = nullptr, bool with_jacobian = false);

// Serialization helpers.
std::string intrinsics_to_json(const Intrinsics& k);
Intrinsics intrinsics_from_json(const std::string& text);
std::string pose_to_csv_row(int timestep, const Pose& p);
// Rows are "timestep" followed by the 3x4 matrix [R|t] in row-major order.
std::pair<int, Pose> pose_from_csv_row(const std::string& row);

}  // namespace deux
