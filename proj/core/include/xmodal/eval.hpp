// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "xmodal/feature_set.hpp"
#include "xmodal/random.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace xmodal {

enum class Similarity { Cosine, Euclidean };

/// CMC and mAP of one query set against one gallery.
struct RankingResult {
  std::vector<double> cmc;  // cmc[k-1] = fraction of queries with a hit in the top k
  double map = 0.0;
};

struct EvalReport {
  std::vector<double> cmc;
  double map = 0.0;
  int trials = 0;
  std::vector<std::vector<double>> per_trial_cmc;
  std::vector<double> per_trial_map;

  /// Rank-k accuracy, saturating at the last CMC entry for k past the
  /// gallery size.
  double rank(int k) const;
};

struct SimilarityStats {
  double intra_mean = 0.0;
  double intra_std = 0.0;
  double inter_mean = 0.0;
  double inter_std = 0.0;
};

/// Ranks the whole gallery for every query (descending similarity, ties by
/// gallery index). AP is the mean precision at each relevant hit, so
/// galleries with several matches per identity are handled too.
RankingResult rank_queries(const FeatureSet& query, const FeatureSet& gallery,
                           Similarity similarity = Similarity::Cosine);

/// One uniformly drawn gallery row per identity, identities ascending.
std::vector<std::size_t> draw_single_shot(const FeatureSet& gallery, Rng& rng);

/// Single-shot protocol: each trial draws one gallery sample per identity,
/// ranks all queries against it and the report averages over trials.
EvalReport evaluate(const FeatureSet& query, const FeatureSet& gallery, int trials,
                    std::uint64_t seed, Similarity similarity = Similarity::Cosine);

/// Cosine similarity between per-identity visible and thermal centroids:
/// same identity (intra) versus different identities (inter). Standard
/// deviations are sample (n - 1) estimates, 0 for a single value.
SimilarityStats similarity_stats(const FeatureSet& test);

double cosine_similarity(ConstRowRef a, ConstRowRef b);

/// CSV report: `trial,rank1,rank5,rank10,rank20,mAP` per trial, a `mean` row,
/// then `intra_mean,intra_std,inter_mean,inter_std` when stats are given.
void write_report(std::ostream& os, const EvalReport& report, const SimilarityStats* stats);

}  // namespace xmodal
