#include "geometry.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <sstream>

#include "error.hpp"

namespace deux {

void Intrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) fail(ErrorKind::Domain, "intrinsics: focal lengths must be positive");
  if (width <= 0 || height <= 0) fail(ErrorKind::Domain, "intrinsics: image size must be positive");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
    fail(ErrorKind::Domain, "intrinsics: principal point outside image");
}

Intrinsics Intrinsics::square(int size) {
  const double half = size / 2.0;
  return Intrinsics{half, half, half, half, size, size};
}

Pose Pose::from(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation) {
  const double ortho = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho > 1e-9 || std::abs(rotation.determinant() - 1.0) > 1e-9)
    fail(ErrorKind::Domain, "pose: rotation is not a proper orthonormal matrix");
  Pose p;
  p.rotation = rotation;
  p.translation = translation;
  return p;
}

Eigen::Matrix4d Pose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

Pose compose(const Pose& a, const Pose& b) {
  Pose out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

Pose invert(const Pose& a) {
  Pose out;
  out.rotation = a.rotation.transpose();
  out.translation = -(out.rotation * a.translation);
  return out;
}

Pose relative_pose(const Pose& world_from_tau, const Pose& world_from_t) {
  return compose(invert(world_from_tau), world_from_t);
}

Eigen::Vector3d backproject(PixelCoord q, double depth, const Intrinsics& k) {
  if (!(depth > 0.0)) fail(ErrorKind::Domain, "backproject: depth must be positive");
  return {(q.u - k.cx) / k.fx * depth, (q.v - k.cy) / k.fy * depth, depth};
}

PixelCoord project(const Eigen::Vector3d& p, const Intrinsics& k) {
  if (!(p.z() > 0.0)) fail(ErrorKind::Domain, "project: point is behind the camera");
  return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
}

void sample_bilinear(const Image& img, double u, double v, double out[3], double du[3], double dv[3]) {
  const int x0 = std::clamp(static_cast<int>(std::floor(u)), 0, img.width - 2);
  const int y0 = std::clamp(static_cast<int>(std::floor(v)), 0, img.height - 2);
  const double a = u - x0;
  const double b = v - y0;
  const double* p00 = &img.values[(std::size_t(y0) * img.width + x0) * 3];
  const double* p01 = p00 + 3;
  const double* p10 = p00 + std::size_t(img.width) * 3;
  const double* p11 = p10 + 3;
  for (int c = 0; c < 3; ++c) {
    const double top = (1.0 - a) * p00[c] + a * p01[c];
    const double bot = (1.0 - a) * p10[c] + a * p11[c];
    out[c] = (1.0 - b) * top + b * bot;
    if (du) du[c] = (1.0 - b) * (p01[c] - p00[c]) + b * (p11[c] - p10[c]);
    if (dv) dv[c] = bot - top;
  }
}

WarpResult warp_reconstruct(const Image& source, const DepthMap& depth, const Pose& rel, const Intrinsics& k,
                            const Image* fill, bool with_jacobian) {
  if (source.width != k.width || source.height != k.height || depth.width != k.width || depth.height != k.height)
    fail(ErrorKind::Shape, "warp_reconstruct: source, depth and intrinsics disagree on image size");
  if (fill && (fill->width != k.width || fill->height != k.height))
    fail(ErrorKind::Shape, "warp_reconstruct: fill image has the wrong size");
  if (k.width < 2 || k.height < 2) fail(ErrorKind::Shape, "warp_reconstruct: image must be at least 2x2");

  // Reprojections this close to the border still count as inside.
  constexpr double kEdge = 1e-6;
  const int w = k.width;
  const int h = k.height;
  WarpResult out;
  out.image = Image(w, h);
  out.mask.assign(std::size_t(w) * h, 0);
  if (with_jacobian) out.jacobian.assign(std::size_t(w) * h * 3, 0.0);

  const Eigen::Matrix3d& R = rel.rotation;
  const Eigen::Vector3d& t = rel.translation;
  for (int row = 0; row < h; ++row) {
    for (int col = 0; col < w; ++col) {
      const std::size_t idx = std::size_t(row) * w + col;
      double* dst = &out.image.values[idx * 3];
      const double d = depth.values[idx];
      const Eigen::Vector3d ray((col - k.cx) / k.fx, (row - k.cy) / k.fy, 1.0);
      const Eigen::Vector3d a = R * ray;
      const Eigen::Vector3d P = d * a + t;
      bool ok = d > 0.0 && P.z() > 0.0;
      double u = 0.0, v = 0.0;
      if (ok) {
        u = k.fx * P.x() / P.z() + k.cx;
        v = k.fy * P.y() / P.z() + k.cy;
        ok = u >= -kEdge && u <= (w - 1) + kEdge && v >= -kEdge && v <= (h - 1) + kEdge;
      }
      if (!ok) {
        for (int c = 0; c < 3; ++c) dst[c] = fill ? fill->values[idx * 3 + c] : 0.0;
        continue;
      }
      out.mask[idx] = 1;
      u = std::clamp(u, 0.0, double(w - 1));
      v = std::clamp(v, 0.0, double(h - 1));
      if (!with_jacobian) {
        sample_bilinear(source, u, v, dst);
        continue;
      }
      double gu[3], gv[3];
      sample_bilinear(source, u, v, dst, gu, gv);
      const double z2 = P.z() * P.z();
      const double du_dd = k.fx * (a.x() * P.z() - P.x() * a.z()) / z2;
      const double dv_dd = k.fy * (a.y() * P.z() - P.y() * a.z()) / z2;
      for (int c = 0; c < 3; ++c) out.jacobian[idx * 3 + c] = gu[c] * du_dd + gv[c] * dv_dd;
    }
  }
  return out;
}

std::string intrinsics_to_json(const Intrinsics& k) {
  nlohmann::json j{{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
  return j.dump();
}

Intrinsics intrinsics_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    Intrinsics k{j.at("fx").get<double>(), j.at("fy").get<double>(), j.at("cx").get<double>(),
                 j.at("cy").get<double>(), j.at("width").get<int>(), j.at("height").get<int>()};
    k.validate();
    return k;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, std::string("intrinsics json: ") + e.what());
  }
}

std::string pose_to_csv_row(int timestep, const Pose& p) {
  std::ostringstream os;
  os.precision(17);
  os << timestep;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) os << ',' << p.rotation(r, c);
    os << ',' << p.translation(r);
  }
  return os.str();
}

std::pair<int, Pose> pose_from_csv_row(const std::string& row) {
  std::vector<double> vals;
  std::istringstream is(row);
  std::string cell;
  while (std::getline(is, cell, ',')) {
    try {
      vals.push_back(std::stod(cell));
    } catch (const std::exception&) {
      fail(ErrorKind::Format, "pose row: non-numeric field '" + cell + "'");
    }
  }
  if (vals.size() != 13) fail(ErrorKind::Format, "pose row: expected 13 fields, got " + std::to_string(vals.size()));
  Eigen::Matrix3d R;
  Eigen::Vector3d t;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) R(r, c) = vals[1 + r * 4 + c];
    t(r) = vals[1 + r * 4 + 3];
  }
  return {static_cast<int>(vals[0]), Pose::from(R, t)};
}

}  // namespace deux
