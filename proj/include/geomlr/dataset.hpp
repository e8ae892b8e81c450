#pragma once

#include <string>
#include <vector>

#include "geomlr/mlr.hpp"

namespace geomlr {

enum class DataKind { Spd, So3Product };

std::string data_kind_name(DataKind k);
DataKind parse_data_kind(const std::string& name);

// Synthetic classification dataset. For Spd, n is the matrix dimension and
// each sample is one SPD matrix; for So3Product, n is the block count and
// each sample is a list of n rotation blocks (3x3 each).
struct Dataset {
  DataKind kind = DataKind::Spd;
  Index n = 0;
  Index classes = 0;
  std::uint64_t seed = 0;
  std::vector<int> labels;
  std::vector<SpdMatrix> spd;                       // Spd kind
  std::vector<std::vector<RotationMatrix>> so3;     // So3Product kind
  std::vector<std::size_t> train_idx, test_idx;

  std::size_t count() const { return labels.size(); }
  void validate() const;
};

// Class means exp(Z_c), Z_c symmetric normal scale 1; samples
// M_c^{1/2} exp(sigma W) M_c^{1/2}. Deterministic given seed.
Dataset gen_spd_data(Index n, Index C, Index per_class, double sigma, std::uint64_t seed);

// Per-block class means exp(K_c) with angle clipped to <= 2; samples
// R_c exp(sigma W) with the perturbation angle clipped so the total stays
// <= pi - 0.1. Deterministic given seed.
Dataset gen_so3_data(Index m, Index C, Index per_class, double sigma, std::uint64_t seed);

void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

// Test accuracy of a nearest-class-mean oracle fit on the train split
// (log-Euclidean means + affine-invariant distance for SPD; projected
// arithmetic means + relative log distance for rotations).
double nearest_mean_accuracy(const Dataset& ds);

}  // namespace geomlr
