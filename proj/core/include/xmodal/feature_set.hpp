// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace xmodal {

/// Row-major so that `row(i)` of a feature matrix is a contiguous vector.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::RowVectorXd;
using ConstRowRef = Eigen::Ref<const RowVector>;

enum class Modality : std::uint8_t { Visible = 0, Thermal = 1 };

constexpr std::string_view to_string(Modality m) {
  return m == Modality::Visible ? "visible" : "thermal";
}

/// A batch of samples with identity and modality labels.
///
/// Rows of `features` are either embedding vectors (descriptor_count == 1) or
/// raw samples made of `descriptor_count` equally sized local descriptors laid
/// out back to back.
struct FeatureSet {
  Matrix features;
  std::vector<int> identities;
  std::vector<Modality> modalities;
  int identity_count = 0;
  int descriptor_count = 1;

  std::size_t size() const { return identities.size(); }
  int dim() const { return static_cast<int>(features.cols()); }
  int descriptor_dim() const { return dim() / descriptor_count; }

  /// Throws on ragged arrays, labels outside [0, identity_count) or a width
  /// not divisible by descriptor_count.
  void validate() const;

  FeatureSet subset(std::span<const std::size_t> rows) const;
  FeatureSet with_features(Matrix replacement) const;

  std::vector<std::size_t> rows_where(Modality m) const;
  std::vector<std::size_t> rows_where(int identity, Modality m) const;

  /// Identities present in the set, ascending.
  std::vector<int> present_identities() const;
};

/// Gathers the given rows of `m` into a new matrix.
Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows);

}  // namespace xmodal
