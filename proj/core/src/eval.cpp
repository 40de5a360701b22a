// SPDX-License-Identifier: Apache-2.0
#include "xmodal/eval.hpp"

#include "xmodal/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <string>

namespace xmodal {

namespace {

Modality common_modality(const FeatureSet& set, const char* role) {
  if (set.size() == 0) throw Error(Errc::invalid_argument, std::string(role) + " set is empty");
  const Modality m = set.modalities.front();
  for (auto x : set.modalities) {
    if (x != m) throw Error(Errc::invalid_argument, std::string(role) + " set mixes modalities");
  }
  return m;
}

Matrix normalized_rows(const Matrix& m) {
  Matrix out = m;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double n = out.row(i).norm();
    if (n > 0.0) out.row(i) /= n;
  }
  return out;
}

double sample_std(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

double cosine_similarity(ConstRowRef a, ConstRowRef b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

double EvalReport::rank(int k) const {
  if (cmc.empty() || k < 1) throw Error(Errc::invalid_argument, "rank-k needs k >= 1 and a nonempty CMC");
  return cmc[static_cast<std::size_t>(std::min<int>(k, static_cast<int>(cmc.size())) - 1)];
}

RankingResult rank_queries(const FeatureSet& query, const FeatureSet& gallery, Similarity similarity) {
  const Modality qm = common_modality(query, "query");
  const Modality gm = common_modality(gallery, "gallery");
  if (qm == gm) {
    throw Error(Errc::invalid_argument, "query and gallery are both " + std::string(to_string(qm)));
  }
  if (query.dim() != gallery.dim()) {
    throw Error(Errc::dimension_mismatch, "query dimension " + std::to_string(query.dim()) +
                                              " differs from gallery dimension " + std::to_string(gallery.dim()));
  }
  const auto gallery_ids = gallery.present_identities();
  for (int id : query.identities) {
    if (!std::binary_search(gallery_ids.begin(), gallery_ids.end(), id)) {
      throw Error(Errc::invalid_argument, "query identity " + std::to_string(id) + " is absent from the gallery");
    }
  }

  const auto g = static_cast<Eigen::Index>(gallery.size());
  Matrix scores;
  if (similarity == Similarity::Cosine) {
    scores = normalized_rows(query.features) * normalized_rows(gallery.features).transpose();
  } else {
    scores.resize(static_cast<Eigen::Index>(query.size()), g);
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
      for (Eigen::Index j = 0; j < g; ++j) scores(i, j) = -(query.features.row(i) - gallery.features.row(j)).norm();
    }
  }

  RankingResult out;
  std::vector<double> first_hit(static_cast<std::size_t>(g), 0.0);
  double ap_sum = 0.0;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(g));
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return scores(i, a) > scores(i, b); });
    const int target = query.identities[static_cast<std::size_t>(i)];
    int hits = 0;
    double precision_sum = 0.0;
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      if (gallery.identities[static_cast<std::size_t>(order[pos])] != target) continue;
      if (hits == 0) first_hit[pos] += 1.0;
      ++hits;
      precision_sum += static_cast<double>(hits) / static_cast<double>(pos + 1);
    }
    ap_sum += precision_sum / hits;
  }
  const double nq = static_cast<double>(query.size());
  out.cmc.resize(first_hit.size());
  double running = 0.0;
  for (std::size_t k = 0; k < first_hit.size(); ++k) {
    running += first_hit[k];
    out.cmc[k] = running / nq;
  }
  out.map = ap_sum / nq;
  return out;
}

std::vector<std::size_t> draw_single_shot(const FeatureSet& gallery, Rng& rng) {
  std::vector<std::size_t> picks;
  for (int id : gallery.present_identities()) {
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < gallery.size(); ++r) {
      if (gallery.identities[r] == id) rows.push_back(r);
    }
    std::uniform_int_distribution<std::size_t> pick(0, rows.size() - 1);
    picks.push_back(rows[pick(rng)]);
  }
  return picks;
}

EvalReport evaluate(const FeatureSet& query, const FeatureSet& gallery, int trials, std::uint64_t seed,
                    Similarity similarity) {
  if (trials < 1) throw Error(Errc::invalid_argument, "evaluation needs at least one trial");
  Rng rng(seed);
  EvalReport report;
  report.trials = trials;
  for (int t = 0; t < trials; ++t) {
    const auto picks = draw_single_shot(gallery, rng);
    RankingResult r = rank_queries(query, gallery.subset(picks), similarity);
    report.per_trial_cmc.push_back(std::move(r.cmc));
    report.per_trial_map.push_back(r.map);
  }
  const std::size_t len = report.per_trial_cmc.front().size();
  report.cmc.assign(len, 0.0);
  for (const auto& c : report.per_trial_cmc) {
    for (std::size_t k = 0; k < len; ++k) report.cmc[k] += c[k];
  }
  for (double& c : report.cmc) c /= trials;
  report.map = mean_of(report.per_trial_map);
  return report;
}

SimilarityStats similarity_stats(const FeatureSet& test) {
  test.validate();
  const auto ids = test.present_identities();
  if (ids.size() < 2) throw Error(Errc::invalid_argument, "similarity statistics need at least 2 identities");
  const auto n = static_cast<Eigen::Index>(ids.size());
  Matrix vis = Matrix::Zero(n, test.dim());
  Matrix th = Matrix::Zero(n, test.dim());
  for (Eigen::Index i = 0; i < n; ++i) {
    const int id = ids[static_cast<std::size_t>(i)];
    const auto v_rows = test.rows_where(id, Modality::Visible);
    const auto t_rows = test.rows_where(id, Modality::Thermal);
    if (v_rows.empty() || t_rows.empty()) {
      throw Error(Errc::missing_modality, "identity " + std::to_string(id) + " has no " +
                                              (v_rows.empty() ? "visible" : "thermal") + " samples");
    }
    vis.row(i) = gather_rows(test.features, v_rows).colwise().mean();
    th.row(i) = gather_rows(test.features, t_rows).colwise().mean();
  }
  std::vector<double> intra, inter;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double c = cosine_similarity(vis.row(i), th.row(j));
      (i == j ? intra : inter).push_back(c);
    }
  }
  SimilarityStats s;
  s.intra_mean = mean_of(intra);
  s.inter_mean = mean_of(inter);
  s.intra_std = sample_std(intra, s.intra_mean);
  s.inter_std = sample_std(inter, s.inter_mean);
  return s;
}

void write_report(std::ostream& os, const EvalReport& report, const SimilarityStats* stats) {
  char buf[160];
  os << "trial,rank1,rank5,rank10,rank20,mAP\n";
  auto at = [](const std::vector<double>& cmc, int k) {
    return cmc[static_cast<std::size_t>(std::min<int>(k, static_cast<int>(cmc.size())) - 1)];
  };
  for (std::size_t t = 0; t < report.per_trial_cmc.size(); ++t) {
    const auto& c = report.per_trial_cmc[t];
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f,%.6f,%.6f\n", t, at(c, 1), at(c, 5), at(c, 10), at(c, 20),
                  report.per_trial_map[t]);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "mean,%.6f,%.6f,%.6f,%.6f,%.6f\n", report.rank(1), report.rank(5),
                report.rank(10), report.rank(20), report.map);
  os << buf;
  if (stats) {
    os << "intra_mean,intra_std,inter_mean,inter_std\n";
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%.6f\n", stats->intra_mean, stats->intra_std, stats->inter_mean,
                  stats->inter_std);
    os << buf;
  }
}

}  // namespace xmodal
