#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "geometry.hpp"
#include "losses.hpp"
#include "world.hpp"

namespace deux {

inline constexpr double kHarrisK = 0.04;
inline constexpr int kSparseTarget = 1500;

struct CompletorParams {
  int idw_neighbors = 4;
  double idw_power = 2.0;
  int refine_iters = 25;
  double edge_weight = 0.5;
  LossWeights weights;

  void validate() const;
  bool same_model(const CompletorParams& o) const {
    return idw_neighbors == o.idw_neighbors && idw_power == o.idw_power && refine_iters == o.refine_iters &&
           edge_weight == o.edge_weight;
  }
};

struct CompletorGrid {
  std::vector<double> idw_power{1.0, 2.0, 3.0};
  std::vector<int> refine_iters{0, 25, 50, 100};
  std::vector<double> edge_weight{0.25, 0.5, 0.75, 1.0};
  std::vector<int> idw_neighbors{1, 4, 8};

  void validate() const;
  // Candidates in fixed order: idw_power, refine_iters, edge_weight, idw_neighbors (innermost).
  std::vector<CompletorParams> candidates(const LossWeights& w) const;
};

struct EvalMetrics {
  double mae_mm = 0.0;
  double rmse_mm = 0.0;
  double imae_per_km = 0.0;
  double irmse_per_km = 0.0;
};

// Harris corners on the channel-mean image: Sobel gradients, 3x3 Gaussian structure tensor,
// 3x3 non-max suppression. Strongest first, ties by (row, col). Coordinates are integral.
std::vector<PixelCoord> harris_corners(const Image& image, int target_count);
std::vector<double> harris_response(const Image& image);

struct SparseSample {
  SparseDepth z;         // sorted by (row, col)
  int corner_count = 0;  // points that came from corners, before padding
};

// Reads ground-truth depth at Harris corners, padded with random valid pixels up to target_count.
SparseSample sample_sparse_depth(const Frame& frame, int target_count, std::mt19937_64& rng);

// Stage 1: inverse-distance weighting from the nearest sparse points.
DepthMap idw_interpolate(const SparseDepth& z, int neighbors, double power);

// Stage 2 state: neighbor weights from the image, reusable across iterations.
class EdgeAwareSmoother {
 public:
  EdgeAwareSmoother(const Image& image, const SparseDepth& z);
  // Runs Jacobi iterations in place; sparse pixels stay clamped to z.
  void run(DepthMap& depth, double edge_weight, int iters) const;

 private:
  int width_, height_;
  std::vector<double> w_right_, w_down_;
  std::vector<std::uint8_t> clamped_;
};

void clip_depth(DepthMap& depth);

DepthMap complete_depth(const Image& image, const SparseDepth& z, const CompletorParams& params);

// Three consecutive frames and the sparse depth of the newest.
struct TrainingTriplet {
  Frame t;
  Frame t1;  // t-1
  Frame t2;  // t-2
  SparseDepth z;
};

double triplet_loss(const TrainingTriplet& tr, const DepthMap& pred, const LossWeights& w);

struct FitResult {
  CompletorParams params;
  double loss = 0.0;                 // mean l_d of the chosen params
  std::vector<CompletorParams> candidates;
  std::vector<double> candidate_loss;
  int triplets_used = 0;
};

// Coordinate search over the grid axes minimizing the mean unsupervised loss over the triplets,
// starting from init. Returns the best evaluated candidate (init included); ties resolve to the
// earliest grid position. `candidates` lists every evaluated point in evaluation order.
FitResult fit_completor(std::span<const TrainingTriplet> triplets, const CompletorParams& init,
                        const CompletorGrid& grid, int jobs = 1);

EvalMetrics evaluate(const DepthMap& pred, const DepthMap& gt);

std::string completor_to_json(const CompletorParams& p);
CompletorParams completor_from_json(const std::string& text);

}  // namespace deux
