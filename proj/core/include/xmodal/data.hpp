// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "xmodal/feature_set.hpp"
#include "xmodal/random.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace xmodal {

/// Synthetic two-modality identity data.
///
/// Every identity owns a Gaussian center (descriptor_count x descriptor_dim).
/// Visible samples are center + noise. Thermal samples add a modality shift
/// of norm `modality_shift` per descriptor that lives in a fixed random
/// subspace of rank `shift_rank`; with `per_identity_rotation` every identity
/// gets its own direction inside that subspace, otherwise one direction is
/// shared by all identities.
struct SyntheticSpec {
  int num_identities = 50;
  int samples_per_identity = 20;  // per modality
  int descriptor_count = 4;
  int descriptor_dim = 16;
  double identity_spread = 0.1;
  double within_noise = 0.01;
  double modality_shift = 0.5;
  int shift_rank = 4;
  bool per_identity_rotation = true;
  std::uint64_t seed = 0;

  void validate() const;
  int test_identities() const;
};

struct SyntheticDataset {
  FeatureSet train;
  FeatureSet test;
};

/// Splits identities 80/20 (at least one test identity) into disjoint train
/// and test sets. Rows are grouped by identity, visible before thermal.
SyntheticDataset generate(const SyntheticSpec& spec);

struct BatchSpec {
  int P = 4;  // identities per batch
  int K = 4;  // samples per identity per modality

  void validate() const;
  int batch_size() const { return 2 * P * K; }
};

/// Identity-balanced cross-modal sampler: P distinct identities, then K
/// visible and K thermal samples of each (with replacement only when a cell
/// holds fewer than K samples). Output rows are grouped per identity,
/// visible block first.
class BatchSampler {
 public:
  BatchSampler(const FeatureSet& set, BatchSpec spec, std::uint64_t seed);

  std::vector<std::size_t> next_indices();
  FeatureSet next();

  /// ceil(set size / batch size).
  int batches_per_epoch() const;

  /// Independent stream over the same data.
  BatchSampler fork(std::uint64_t seed) const;

 private:
  struct Cell {
    std::vector<std::size_t> visible;
    std::vector<std::size_t> thermal;
  };

  const FeatureSet* set_;
  BatchSpec spec_;
  Rng rng_;
  std::vector<int> identities_;
  std::vector<Cell> cells_;
};

/// One batch drawn with an external generator.
FeatureSet sample_batch(const FeatureSet& set, const BatchSpec& spec, Rng& rng);

/// Text dump: header `xmodal-dataset,version=1,H=<H>,D_in=<D>,identities=<n>`
/// then one `identity,modality,d_0,...` row per sample, shortest round-trip
/// decimal representation.
void write_dataset(std::ostream& os, const FeatureSet& set);
FeatureSet read_dataset(std::istream& is);

/// Embedding dump: `identity,modality,e_0,...` rows with
/// six-decimal precision, preceded by a column header.
void write_embeddings(std::ostream& os, const FeatureSet& embeddings);

}  // namespace xmodal
