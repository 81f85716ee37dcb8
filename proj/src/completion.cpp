#include "completion.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <tuple>
#include <json.hpp>

#include "error.hpp"
#include "parallel.hpp"

namespace deux {

void CompletorParams::validate() const {
  if (idw_neighbors < 1) fail(ErrorKind::Domain, "completor: idw_neighbors must be >= 1");
  if (!(idw_power > 0.0)) fail(ErrorKind::Domain, "completor: idw_power must be positive");
  if (refine_iters < 0) fail(ErrorKind::Domain, "completor: refine_iters must be >= 0");
  if (!(edge_weight >= 0.0)) fail(ErrorKind::Domain, "completor: edge_weight must be >= 0");
  weights.validate();
}

void CompletorGrid::validate() const {
  if (idw_power.empty() || refine_iters.empty() || edge_weight.empty() || idw_neighbors.empty())
    fail(ErrorKind::Domain, "completor grid: every axis needs at least one value");
  for (const auto& p : candidates({})) p.validate();
}

std::vector<CompletorParams> CompletorGrid::candidates(const LossWeights& w) const {
  std::vector<CompletorParams> out;
  for (double p : idw_power)
    for (int it : refine_iters)
      for (double ew : edge_weight)
        for (int k : idw_neighbors) out.push_back({k, p, it, ew, w});
  return out;
}

namespace {

std::vector<double> grayscale(const Image& image) {
  std::vector<double> g(image.pixels());
  for (std::size_t i = 0; i < g.size(); ++i)
    g[i] = (image.values[i * 3] + image.values[i * 3 + 1] + image.values[i * 3 + 2]) / 3.0;
  return g;
}

}  // namespace

std::vector<double> harris_response(const Image& image) {
  if (image.width < 7 || image.height < 7) fail(ErrorKind::Shape, "harris: image must be at least 7x7");
  const int w = image.width, h = image.height;
  const auto g = grayscale(image);
  auto px = [&](const std::vector<double>& m, int r, int c) {
    return m[std::size_t(std::clamp(r, 0, h - 1)) * w + std::clamp(c, 0, w - 1)];
  };
  std::vector<double> ixx(g.size()), iyy(g.size()), ixy(g.size());
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double gx = (px(g, r - 1, c + 1) + 2 * px(g, r, c + 1) + px(g, r + 1, c + 1)) -
                        (px(g, r - 1, c - 1) + 2 * px(g, r, c - 1) + px(g, r + 1, c - 1));
      const double gy = (px(g, r + 1, c - 1) + 2 * px(g, r + 1, c) + px(g, r + 1, c + 1)) -
                        (px(g, r - 1, c - 1) + 2 * px(g, r - 1, c) + px(g, r - 1, c + 1));
      const std::size_t i = std::size_t(r) * w + c;
      ixx[i] = gx * gx;
      iyy[i] = gy * gy;
      ixy[i] = gx * gy;
    }
  }
  static constexpr double kGauss[3] = {0.25, 0.5, 0.25};
  std::vector<double> resp(g.size());
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double a = 0, b = 0, d = 0;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const double k = kGauss[dr + 1] * kGauss[dc + 1];
          a += k * px(ixx, r + dr, c + dc);
          b += k * px(iyy, r + dr, c + dc);
          d += k * px(ixy, r + dr, c + dc);
        }
      }
      resp[std::size_t(r) * w + c] = (a * b - d * d) - kHarrisK * (a + b) * (a + b);
    }
  }
  return resp;
}

std::vector<PixelCoord> harris_corners(const Image& image, int target_count) {
  constexpr double kThreshold = 1e-6;
  const int w = image.width, h = image.height;
  const auto R = harris_response(image);
  struct Cand {
    double r;
    int row, col;
  };
  std::vector<Cand> cands;
  for (int r = 1; r < h - 1; ++r) {
    for (int c = 1; c < w - 1; ++c) {
      const double v = R[std::size_t(r) * w + c];
      if (!(v > kThreshold)) continue;
      bool peak = true;
      for (int dr = -1; dr <= 1 && peak; ++dr) {
        for (int dc = -1; dc <= 1 && peak; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const double n = R[std::size_t(r + dr) * w + c + dc];
          const bool earlier = dr < 0 || (dr == 0 && dc < 0);
          peak = earlier ? v > n : v >= n;
        }
      }
      if (peak) cands.push_back({v, r, c});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.r != b.r) return a.r > b.r;
    if (a.row != b.row) return a.row < b.row;
    return a.col < b.col;
  });
  if (static_cast<int>(cands.size()) > target_count) cands.resize(std::max(target_count, 0));
  std::vector<PixelCoord> out;
  out.reserve(cands.size());
  for (const auto& c : cands) out.push_back({double(c.col), double(c.row)});
  return out;
}

SparseSample sample_sparse_depth(const Frame& frame, int target_count, std::mt19937_64& rng) {
  const auto& d = frame.depth_gt;
  const int w = d.width, h = d.height;
  std::vector<std::uint8_t> used(d.pixels(), 0);
  SparseSample out;
  out.z.width = w;
  out.z.height = h;
  for (const auto& q : harris_corners(frame.rgb, target_count)) {
    const int r = static_cast<int>(q.v), c = static_cast<int>(q.u);
    used[std::size_t(r) * w + c] = 1;
    out.z.points.push_back({r, c, std::clamp(d.at(r, c), kMinDepth, kMaxDepth)});
  }
  out.corner_count = static_cast<int>(out.z.points.size());
  std::uniform_int_distribution<std::size_t> pick(0, d.pixels() - 1);
  const std::size_t max_draws = 20 * d.pixels();
  for (std::size_t draw = 0; static_cast<int>(out.z.points.size()) < target_count && draw < max_draws; ++draw) {
    const std::size_t i = pick(rng);
    if (used[i]) continue;
    const double v = d.values[i];
    if (!(v > kMinDepth && v < kMaxDepth)) continue;
    used[i] = 1;
    out.z.points.push_back({static_cast<int>(i / w), static_cast<int>(i % w), v});
  }
  std::sort(out.z.points.begin(), out.z.points.end(),
            [](const SparsePoint& a, const SparsePoint& b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });
  return out;
}

namespace {

double inverse_distance_weight(double d2, double power) {
  if (power == 1.0) return 1.0 / std::sqrt(d2);
  if (power == 2.0) return 1.0 / d2;
  if (power == 3.0) return 1.0 / (d2 * std::sqrt(d2));
  return std::pow(d2, -0.5 * power);
}

}  // namespace

DepthMap idw_interpolate(const SparseDepth& z, int neighbors, double power) {
  if (z.points.empty()) fail(ErrorKind::Usage, "complete_depth: empty sparse depth");
  const int w = z.width, h = z.height;
  constexpr int B = 16;
  const int bw = (w + B - 1) / B, bh = (h + B - 1) / B;
  std::vector<std::vector<int>> buckets(std::size_t(bw) * bh);
  for (int i = 0; i < static_cast<int>(z.points.size()); ++i) {
    const auto& p = z.points[i];
    buckets[std::size_t(p.row / B) * bw + p.col / B].push_back(i);
  }
  const int k = std::min<int>(neighbors, static_cast<int>(z.points.size()));
  DepthMap out(w, h);
  std::vector<std::pair<long, int>> best;  // (squared distance, point index), sorted
  best.reserve(k + 1);
  for (int r = 0; r < h; ++r) {
    const int br = r / B;
    for (int c = 0; c < w; ++c) {
      const int bc = c / B;
      best.clear();
      for (int ring = 0;; ++ring) {
        for (int y = br - ring; y <= br + ring; ++y) {
          if (y < 0 || y >= bh) continue;
          for (int x = bc - ring; x <= bc + ring; ++x) {
            if (x < 0 || x >= bw) continue;
            if (std::max(std::abs(y - br), std::abs(x - bc)) != ring) continue;
            for (int idx : buckets[std::size_t(y) * bw + x]) {
              const auto& p = z.points[idx];
              const long d2 = long(p.row - r) * (p.row - r) + long(p.col - c) * (p.col - c);
              const std::pair<long, int> cand{d2, idx};
              if (static_cast<int>(best.size()) == k && !(cand < best.back())) continue;
              best.insert(std::upper_bound(best.begin(), best.end(), cand), cand);
              if (static_cast<int>(best.size()) > k) best.pop_back();
            }
          }
        }
        const bool covers_all = br - ring <= 0 && bc - ring <= 0 && br + ring >= bh - 1 && bc + ring >= bw - 1;
        if (covers_all) break;
        if (static_cast<int>(best.size()) == k) {
          // Any point outside the searched rings is at least `gap` pixels away along one axis.
          constexpr long kOpen = std::numeric_limits<int>::max();
          const long gap = std::min({bc - ring > 0 ? long(c - ((bc - ring) * B - 1)) : kOpen,
                                     bc + ring < bw - 1 ? long((bc + ring + 1) * B - c) : kOpen,
                                     br - ring > 0 ? long(r - ((br - ring) * B - 1)) : kOpen,
                                     br + ring < bh - 1 ? long((br + ring + 1) * B - r) : kOpen});
          if (gap * gap > best.back().first) break;
        }
      }
      double value;
      if (best.front().first == 0) {
        value = z.points[best.front().second].depth_m;
      } else {
        double num = 0.0, den = 0.0;
        for (const auto& [d2, idx] : best) {
          const double wgt = inverse_distance_weight(double(d2), power);
          num += wgt * z.points[idx].depth_m;
          den += wgt;
        }
        value = num / den;
      }
      out.at(r, c) = value;
    }
  }
  return out;
}

EdgeAwareSmoother::EdgeAwareSmoother(const Image& image, const SparseDepth& z)
    : width_(image.width), height_(image.height) {
  if (z.width != image.width || z.height != image.height) fail(ErrorKind::Shape, "refine: image/sparse size mismatch");
  const std::size_t n = image.pixels();
  w_right_.assign(n, 0.0);
  w_down_.assign(n, 0.0);
  clamped_.assign(n, 0);
  auto diff = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (int c = 0; c < 3; ++c) s += std::abs(image.values[a * 3 + c] - image.values[b * 3 + c]);
    return std::exp(-s / 3.0);
  };
  for (int r = 0; r < height_; ++r) {
    for (int c = 0; c < width_; ++c) {
      const std::size_t i = std::size_t(r) * width_ + c;
      if (c + 1 < width_) w_right_[i] = diff(i, i + 1);
      if (r + 1 < height_) w_down_[i] = diff(i, i + width_);
    }
  }
  for (const auto& p : z.points) clamped_[std::size_t(p.row) * width_ + p.col] = 1;
}

void EdgeAwareSmoother::run(DepthMap& depth, double edge_weight, int iters) const {
  if (iters <= 0 || edge_weight == 0.0) return;
  const int w = width_, h = height_;
  std::vector<double> next(depth.values.size());
  for (int it = 0; it < iters; ++it) {
    const double* d = depth.values.data();
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const std::size_t i = std::size_t(r) * w + c;
        if (clamped_[i]) {
          next[i] = d[i];
          continue;
        }
        double num = 0.0, den = 0.0;
        if (c + 1 < w) num += w_right_[i] * d[i + 1], den += w_right_[i];
        if (c > 0) num += w_right_[i - 1] * d[i - 1], den += w_right_[i - 1];
        if (r + 1 < h) num += w_down_[i] * d[i + w], den += w_down_[i];
        if (r > 0) num += w_down_[i - w] * d[i - w], den += w_down_[i - w];
        next[i] = den > 0.0 ? (1.0 - edge_weight) * d[i] + edge_weight * (num / den) : d[i];
      }
    }
    depth.values.swap(next);
  }
}

void clip_depth(DepthMap& depth) {
  for (double& v : depth.values) v = std::clamp(v, depth.min_m, depth.max_m);
}

DepthMap complete_depth(const Image& image, const SparseDepth& z, const CompletorParams& params) {
  params.validate();
  if (z.points.empty()) fail(ErrorKind::Usage, "complete_depth: empty sparse depth");
  if (z.width != image.width || z.height != image.height) fail(ErrorKind::Shape, "complete_depth: size mismatch");
  DepthMap d = idw_interpolate(z, params.idw_neighbors, params.idw_power);
  if (params.refine_iters > 0) EdgeAwareSmoother(image, z).run(d, params.edge_weight, params.refine_iters);
  clip_depth(d);
  return d;
}

double triplet_loss(const TrainingTriplet& tr, const DepthMap& pred, const LossWeights& w) {
  const ViewRef t{tr.t.rgb, tr.t.pose};
  const std::array<ViewRef, 2> earlier{ViewRef{tr.t1.rgb, tr.t1.pose}, ViewRef{tr.t2.rgb, tr.t2.pose}};
  return total_loss(t, earlier, pred, tr.z, w, tr.t.intrinsics).l_d;
}

namespace {

// Key identifying the depth map a candidate produces; edge weight is irrelevant without refinement.
std::tuple<double, int, double, int> model_key(const CompletorParams& c) {
  return {c.idw_power, c.idw_neighbors, c.refine_iters == 0 ? 0.0 : c.edge_weight, c.refine_iters};
}

struct TripletCache {
  std::optional<EdgeAwareSmoother> smoother;
  std::map<std::pair<double, int>, DepthMap> idw;
  bool defined = true;
};

// Mean loss per candidate; triplets with an undefined loss are dropped once and for all.
std::vector<double> batch_loss(std::span<const TrainingTriplet> triplets, std::vector<TripletCache>& caches,
                               const std::vector<CompletorParams>& batch, const LossWeights& w, int jobs) {
  // Candidates sharing (power, neighbors, edge weight) are checkpoints of one refinement run.
  struct Chain {
    double power;
    int neighbors;
    double edge_weight;
    std::vector<std::pair<int, std::size_t>> stops;  // (iterations, batch index)
  };
  std::vector<Chain> chains;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& c = batch[i];
    const double ew = c.refine_iters == 0 ? 0.0 : c.edge_weight;
    auto it = std::find_if(chains.begin(), chains.end(), [&](const Chain& ch) {
      return ch.power == c.idw_power && ch.neighbors == c.idw_neighbors && ch.edge_weight == ew;
    });
    if (it == chains.end()) {
      chains.push_back({c.idw_power, c.idw_neighbors, ew, {}});
      it = chains.end() - 1;
    }
    it->stops.emplace_back(c.refine_iters, i);
  }
  for (auto& ch : chains) std::sort(ch.stops.begin(), ch.stops.end());

  std::vector<std::vector<double>> loss(triplets.size(), std::vector<double>(batch.size(), 0.0));
  parallel_for(triplets.size(), jobs, [&](std::size_t ti) {
    auto& cache = caches[ti];
    if (!cache.defined) return;
    const auto& tr = triplets[ti];
    try {
      if (!cache.smoother) cache.smoother.emplace(tr.t.rgb, tr.z);
      for (const auto& ch : chains) {
        auto found = cache.idw.find({ch.power, ch.neighbors});
        if (found == cache.idw.end())
          found = cache.idw.emplace(std::pair{ch.power, ch.neighbors}, idw_interpolate(tr.z, ch.neighbors, ch.power)).first;
        DepthMap d = found->second;
        int done = 0;
        std::size_t prev = batch.size();
        for (const auto& [iters, bi] : ch.stops) {
          if (prev < batch.size() && iters == done) {
            loss[ti][bi] = loss[ti][prev];
            continue;
          }
          prev = bi;
          cache.smoother->run(d, ch.edge_weight, iters - done);
          done = iters;
          DepthMap pred = d;
          clip_depth(pred);
          loss[ti][bi] = triplet_loss(tr, pred, w);
        }
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::UndefinedLoss) throw;
      cache.defined = false;
    }
  });

  std::vector<double> mean(batch.size(), 0.0);
  int used = 0;
  for (std::size_t ti = 0; ti < triplets.size(); ++ti) {
    if (!caches[ti].defined) continue;
    ++used;
    for (std::size_t bi = 0; bi < batch.size(); ++bi) mean[bi] += loss[ti][bi];
  }
  if (used == 0) fail(ErrorKind::Usage, "fit_completor: no triplet yields a defined loss");
  for (double& m : mean) m /= used;
  return mean;
}

}  // namespace

FitResult fit_completor(std::span<const TrainingTriplet> triplets, const CompletorParams& init,
                        const CompletorGrid& grid, int jobs) {
  init.validate();
  grid.validate();
  if (triplets.empty()) fail(ErrorKind::Usage, "fit_completor: dataset has no frame triplets");
  const std::vector<CompletorParams> full = grid.candidates(init.weights);
  auto grid_rank = [&](const CompletorParams& c) {
    for (std::size_t i = 0; i < full.size(); ++i)
      if (full[i].same_model(c)) return i;
    return full.size();  // off-grid init ranks last
  };

  std::vector<TripletCache> caches(triplets.size());
  std::map<std::tuple<double, int, double, int>, double> known;
  FitResult res;
  // Evaluates a batch, reusing losses of candidates that produce an already scored depth map.
  auto score = [&](const std::vector<CompletorParams>& batch) {
    std::vector<CompletorParams> fresh;
    for (const auto& c : batch)
      if (!known.contains(model_key(c)) &&
          std::none_of(fresh.begin(), fresh.end(), [&](const auto& f) { return model_key(f) == model_key(c); }))
        fresh.push_back(c);
    if (!fresh.empty()) {
      const auto l = batch_loss(triplets, caches, fresh, init.weights, jobs);
      for (std::size_t i = 0; i < fresh.size(); ++i) known[model_key(fresh[i])] = l[i];
    }
    std::vector<double> out;
    for (const auto& c : batch) {
      out.push_back(known.at(model_key(c)));
      if (std::none_of(res.candidates.begin(), res.candidates.end(), [&](const auto& e) { return e.same_model(c); })) {
        res.candidates.push_back(c);
        res.candidate_loss.push_back(out.back());
      }
    }
    return out;
  };

  // Coordinate descent: each axis in turn moves to its argmin (earliest value on ties) until a
  // full sweep changes nothing.
  CompletorParams cur = init;
  score({cur});
  constexpr int kMaxSweeps = 8;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool moved = false;
    auto axis = [&](auto values, auto field) {
      std::vector<CompletorParams> batch;
      for (const auto& v : values) {
        CompletorParams c = cur;
        c.*field = v;
        batch.push_back(c);
      }
      const auto l = score(batch);
      const std::size_t best = std::min_element(l.begin(), l.end()) - l.begin();
      if (!(batch[best].*field == cur.*field)) {
        cur = batch[best];
        moved = true;
      }
    };
    axis(grid.idw_power, &CompletorParams::idw_power);
    axis(grid.refine_iters, &CompletorParams::refine_iters);
    axis(grid.edge_weight, &CompletorParams::edge_weight);
    axis(grid.idw_neighbors, &CompletorParams::idw_neighbors);
    if (!moved) break;
  }

  // Best evaluated candidate; ties go to the earliest grid position.
  std::size_t best = 0;
  for (std::size_t i = 1; i < res.candidates.size(); ++i) {
    const double a = res.candidate_loss[i], b = res.candidate_loss[best];
    if (a < b || (a == b && grid_rank(res.candidates[i]) < grid_rank(res.candidates[best]))) best = i;
  }
  res.params = res.candidates[best];
  res.loss = res.candidate_loss[best];
  res.triplets_used = static_cast<int>(std::count_if(caches.begin(), caches.end(), [](const auto& c) { return c.defined; }));
  return res;
}

EvalMetrics evaluate(const DepthMap& pred, const DepthMap& gt) {
  if (pred.width != gt.width || pred.height != gt.height) fail(ErrorKind::Shape, "evaluate: size mismatch");
  if (pred.values.empty()) fail(ErrorKind::Shape, "evaluate: empty depth maps");
  double ae = 0.0, se = 0.0, iae = 0.0, ise = 0.0;
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    const double p = pred.values[i], g = gt.values[i];
    if (!(p > 0.0) || !(g > 0.0)) fail(ErrorKind::Domain, "evaluate: non-positive depth");
    const double e = p - g, ie = 1.0 / p - 1.0 / g;
    ae += std::abs(e);
    se += e * e;
    iae += std::abs(ie);
    ise += ie * ie;
  }
  const double n = double(pred.values.size());
  return {1000.0 * ae / n, 1000.0 * std::sqrt(se / n), 1000.0 * iae / n, 1000.0 * std::sqrt(ise / n)};
}

std::string completor_to_json(const CompletorParams& p) {
  nlohmann::json j{{"idw_neighbors", p.idw_neighbors},
                   {"idw_power", p.idw_power},
                   {"refine_iters", p.refine_iters},
                   {"edge_weight", p.edge_weight},
                   {"weights",
                    {{"lambda_co", p.weights.lambda_co},
                     {"lambda_st", p.weights.lambda_st},
                     {"lambda_sz", p.weights.lambda_sz},
                     {"lambda_sm", p.weights.lambda_sm}}}};
  return j.dump(2);
}

CompletorParams completor_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    CompletorParams p;
    p.idw_neighbors = j.at("idw_neighbors").get<int>();
    p.idw_power = j.at("idw_power").get<double>();
    p.refine_iters = j.at("refine_iters").get<int>();
    p.edge_weight = j.at("edge_weight").get<double>();
    if (j.contains("weights")) {
      const auto& w = j.at("weights");
      p.weights.lambda_co = w.at("lambda_co").get<double>();
      p.weights.lambda_st = w.at("lambda_st").get<double>();
      p.weights.lambda_sz = w.at("lambda_sz").get<double>();
      p.weights.lambda_sm = w.at("lambda_sm").get<double>();
    }
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, std::string("completor json: ") + e.what());
  }
}

}  // namespace deux
