#pragma once

#include <cstdint>
#include <vector>

#include "edgecache/cost.hpp"
#include "edgecache/netmodel.hpp"

namespace edgecache {

// Grayscale feature matrix of an instance: one row per flow, columns laid
// out as [attach probabilities | EC storage pressure | link pressure].
// Excluded resources carry the max-congestion sentinel value 1.0 in their
// whole column.
struct FeatureImage {
  int height = 0;
  int width = 0;
  int num_ars = 0;
  int num_ecs = 0;
  int num_links = 0;
  std::vector<double> pixels;           // height x width, row-major, in [0,1]
  std::vector<int> excluded_ecs;        // sorted EC indices
  std::vector<int> excluded_links;      // sorted link indices
  std::vector<std::uint8_t> padded_rows;  // per-row flag, 1 = zero padding

  double at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * width + col]; }
  int q_column(int e) const { return num_ars + e; }
  int r_column(int l) const { return num_ars + num_ecs + l; }
};

FeatureImage encode(const Instance& instance);

// Splits into ceil(height / sub_height) sub-images; the last one is padded
// with zero rows (flagged) up to sub_height.
std::vector<FeatureImage> partition(const FeatureImage& image, int sub_height = 5);

// Residual-capacity view after a partial placement: q and r recomputed
// against the capacity left over by the already-assigned flows; resources
// with nonpositive residual become excluded.
struct ResidualUpdate {
  int num_flows = 0;
  int num_ecs = 0;
  int num_links = 0;
  std::vector<double> q;  // |K| x |E|, clamped to [0,1]
  std::vector<double> r;  // |K| x |L|, clamped to [0,1]
  std::vector<int> excluded_ecs;
  std::vector<int> excluded_links;

  double q_at(int k, int e) const { return q[static_cast<std::size_t>(k) * num_ecs + e]; }
  double r_at(int k, int l) const { return r[static_cast<std::size_t>(k) * num_links + l]; }
};

ResidualUpdate apply_assignment_update(const Instance& instance, const Assignment& prior,
                                       const Routing& prior_routing);

// encode() with the q/r blocks replaced by residual values and excluded
// columns forced to 1.0.
FeatureImage encode_with_residuals(const Instance& instance, const ResidualUpdate& update);

// Binary PGM (P5, 8-bit, pixel byte = round(value * 255)).
std::vector<std::uint8_t> to_pgm(const FeatureImage& image);

}  // namespace edgecache
