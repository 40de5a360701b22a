// SPDX-License-Identifier: Apache-2.0
#include "xmodal/feature_set.hpp"

#include "xmodal/error.hpp"

#include <algorithm>
#include <string>

namespace xmodal {

void FeatureSet::validate() const {
  const auto n = size();
  if (static_cast<std::size_t>(features.rows()) != n || modalities.size() != n) {
    throw Error(Errc::shape_mismatch, "feature set arrays have unequal lengths: " +
                                          std::to_string(features.rows()) + " rows, " +
                                          std::to_string(n) + " identities, " +
                                          std::to_string(modalities.size()) + " modalities");
  }
  if (descriptor_count < 1 || features.cols() % descriptor_count != 0) {
    throw Error(Errc::shape_mismatch, "feature width " + std::to_string(features.cols()) +
                                          " is not divisible by descriptor count " +
                                          std::to_string(descriptor_count));
  }
  for (int id : identities) {
    if (id < 0 || id >= identity_count) {
      throw Error(Errc::invalid_argument, "identity " + std::to_string(id) +
                                              " outside declared count " +
                                              std::to_string(identity_count));
    }
  }
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

FeatureSet FeatureSet::subset(std::span<const std::size_t> rows) const {
  FeatureSet out;
  out.features = gather_rows(features, rows);
  out.identity_count = identity_count;
  out.descriptor_count = descriptor_count;
  out.identities.reserve(rows.size());
  out.modalities.reserve(rows.size());
  for (auto r : rows) {
    out.identities.push_back(identities[r]);
    out.modalities.push_back(modalities[r]);
  }
  return out;
}

FeatureSet FeatureSet::with_features(Matrix replacement) const {
  if (static_cast<std::size_t>(replacement.rows()) != size()) {
    throw Error(Errc::shape_mismatch, "replacement features have " +
                                          std::to_string(replacement.rows()) +
                                          " rows, expected " + std::to_string(size()));
  }
  FeatureSet out;
  out.features = std::move(replacement);
  out.identities = identities;
  out.modalities = modalities;
  out.identity_count = identity_count;
  out.descriptor_count = 1;
  return out;
}

std::vector<std::size_t> FeatureSet::rows_where(Modality m) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < size(); ++i) {
    if (modalities[i] == m) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FeatureSet::rows_where(int identity, Modality m) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < size(); ++i) {
    if (identities[i] == identity && modalities[i] == m) out.push_back(i);
  }
  return out;
}

std::vector<int> FeatureSet::present_identities() const {
  std::vector<int> ids = identities;
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

}  // namespace xmodal
