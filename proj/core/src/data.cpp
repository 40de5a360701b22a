// SPDX-License-Identifier: Apache-2.0
#include "xmodal/data.hpp"

#include "xmodal/error.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

namespace xmodal {

namespace {

constexpr int kDatasetVersion = 1;

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, double scale, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * dist(rng);
  return m;
}

RowVector unit_direction(const Eigen::MatrixXd& basis, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::VectorXd g(basis.cols());
  for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = dist(rng);
  const Eigen::VectorXd v = basis * g;
  return (v / v.norm()).transpose();
}

void append_double(std::string& out, double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, r.ptr);
}

double parse_double(std::string_view s, std::size_t line) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) {
    throw Error(Errc::io, "line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

int parse_int(std::string_view s, std::size_t line) {
  int v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) {
    throw Error(Errc::io, "line " + std::to_string(line) + ": bad integer '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// Picks k of the cell's rows: without replacement when possible.
void draw_cell(const std::vector<std::size_t>& cell, int k, Rng& rng, std::vector<std::size_t>& out) {
  if (static_cast<int>(cell.size()) >= k) {
    std::vector<std::size_t> pool = cell;
    for (int i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), pool.size() - 1);
      std::swap(pool[static_cast<std::size_t>(i)], pool[pick(rng)]);
      out.push_back(pool[static_cast<std::size_t>(i)]);
    }
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, cell.size() - 1);
    for (int i = 0; i < k; ++i) out.push_back(cell[pick(rng)]);
  }
}

}  // namespace

void SyntheticSpec::validate() const {
  if (num_identities < 4) {
    throw Error(Errc::invalid_argument,
                "synthetic data needs at least 4 identities for the train/test split, got " +
                    std::to_string(num_identities));
  }
  if (samples_per_identity < 1 || descriptor_count < 1 || descriptor_dim < 1) {
    throw Error(Errc::invalid_argument, "synthetic sample, descriptor and dimension counts must be >= 1");
  }
  if (shift_rank < 1 || shift_rank > descriptor_dim) {
    throw Error(Errc::invalid_argument, "shift_rank must lie in [1, descriptor_dim]");
  }
  if (!(identity_spread > 0.0) || !(within_noise >= 0.0) || !(modality_shift >= 0.0)) {
    throw Error(Errc::invalid_argument, "identity_spread must be positive; noise and shift nonnegative");
  }
}

int SyntheticSpec::test_identities() const {
  return std::max(1, static_cast<int>(std::lround(0.2 * num_identities)));
}

SyntheticDataset generate(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng = make_stream(spec.seed, "data");
  const int h = spec.descriptor_count;
  const int d = spec.descriptor_dim;
  const int n_per = spec.samples_per_identity;

  const Eigen::MatrixXd raw = gaussian(d, spec.shift_rank, 1.0, rng);
  const Eigen::MatrixXd basis =
      Eigen::HouseholderQR<Eigen::MatrixXd>(raw).householderQ() * Eigen::MatrixXd::Identity(d, spec.shift_rank);
  Matrix shared_shift(h, d);
  for (int k = 0; k < h; ++k) shared_shift.row(k) = spec.modality_shift * unit_direction(basis, rng);

  std::vector<Matrix> visible(static_cast<std::size_t>(spec.num_identities));
  std::vector<Matrix> thermal(static_cast<std::size_t>(spec.num_identities));
  for (int id = 0; id < spec.num_identities; ++id) {
    const Matrix center = gaussian(h, d, spec.identity_spread, rng);
    Matrix shift = shared_shift;
    if (spec.per_identity_rotation) {
      for (int k = 0; k < h; ++k) shift.row(k) = spec.modality_shift * unit_direction(basis, rng);
    }
    const Eigen::Map<const RowVector> c_flat(center.data(), h * d);
    const Eigen::Map<const RowVector> s_flat(shift.data(), h * d);
    auto& v = visible[static_cast<std::size_t>(id)];
    auto& t = thermal[static_cast<std::size_t>(id)];
    v = gaussian(n_per, h * d, spec.within_noise, rng);
    v.rowwise() += c_flat;
    t = gaussian(n_per, h * d, spec.within_noise, rng);
    t.rowwise() += c_flat + s_flat;
  }

  std::vector<int> order(static_cast<std::size_t>(spec.num_identities));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_test = static_cast<std::size_t>(spec.test_identities());
  std::vector<int> test_ids(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<int> train_ids(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(test_ids.begin(), test_ids.end());
  std::sort(train_ids.begin(), train_ids.end());

  auto assemble = [&](const std::vector<int>& ids) {
    FeatureSet fs;
    fs.identity_count = spec.num_identities;
    fs.descriptor_count = h;
    fs.features.resize(static_cast<Eigen::Index>(ids.size()) * 2 * n_per, h * d);
    Eigen::Index row = 0;
    for (int id : ids) {
      for (auto m : {Modality::Visible, Modality::Thermal}) {
        const Matrix& src = m == Modality::Visible ? visible[static_cast<std::size_t>(id)]
                                                   : thermal[static_cast<std::size_t>(id)];
        fs.features.middleRows(row, n_per) = src;
        row += n_per;
        fs.identities.insert(fs.identities.end(), static_cast<std::size_t>(n_per), id);
        fs.modalities.insert(fs.modalities.end(), static_cast<std::size_t>(n_per), m);
      }
    }
    return fs;
  };
  return {assemble(train_ids), assemble(test_ids)};
}

void BatchSpec::validate() const {
  if (P < 2 || K < 1) {
    throw Error(Errc::invalid_argument, "batch spec needs P >= 2 and K >= 1, got P=" + std::to_string(P) +
                                            " K=" + std::to_string(K));
  }
}

BatchSampler::BatchSampler(const FeatureSet& set, BatchSpec spec, std::uint64_t seed)
    : set_(&set), spec_(spec), rng_(seed) {
  spec_.validate();
  set.validate();
  identities_ = set.present_identities();
  if (static_cast<int>(identities_.size()) < spec_.P) {
    throw Error(Errc::invalid_argument, "set holds " + std::to_string(identities_.size()) +
                                            " identities, batch needs P=" + std::to_string(spec_.P));
  }
  cells_.resize(identities_.size());
  for (std::size_t r = 0; r < set.size(); ++r) {
    const auto slot = static_cast<std::size_t>(
        std::lower_bound(identities_.begin(), identities_.end(), set.identities[r]) - identities_.begin());
    (set.modalities[r] == Modality::Visible ? cells_[slot].visible : cells_[slot].thermal).push_back(r);
  }
  for (std::size_t s = 0; s < cells_.size(); ++s) {
    if (cells_[s].visible.empty() || cells_[s].thermal.empty()) {
      throw Error(Errc::missing_modality,
                  "identity " + std::to_string(identities_[s]) + " lacks one modality; cannot sample");
    }
  }
}

std::vector<std::size_t> BatchSampler::next_indices() {
  std::vector<std::size_t> slots(identities_.size());
  std::iota(slots.begin(), slots.end(), std::size_t{0});
  std::vector<std::size_t> out;
  out.reserve(static_cast<std::size_t>(spec_.batch_size()));
  for (int i = 0; i < spec_.P; ++i) {
    std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), slots.size() - 1);
    std::swap(slots[static_cast<std::size_t>(i)], slots[pick(rng_)]);
    const Cell& cell = cells_[slots[static_cast<std::size_t>(i)]];
    draw_cell(cell.visible, spec_.K, rng_, out);
    draw_cell(cell.thermal, spec_.K, rng_, out);
  }
  return out;
}

FeatureSet BatchSampler::next() {
  const auto rows = next_indices();
  return set_->subset(rows);
}

int BatchSampler::batches_per_epoch() const {
  const auto b = static_cast<std::size_t>(spec_.batch_size());
  return static_cast<int>((set_->size() + b - 1) / b);
}

BatchSampler BatchSampler::fork(std::uint64_t seed) const {
  BatchSampler copy = *this;
  copy.rng_.seed(seed);
  return copy;
}

FeatureSet sample_batch(const FeatureSet& set, const BatchSpec& spec, Rng& rng) {
  std::uniform_int_distribution<std::uint64_t> seeds;
  BatchSampler sampler(set, spec, seeds(rng));
  return sampler.next();
}

void write_dataset(std::ostream& os, const FeatureSet& set) {
  set.validate();
  os << "xmodal-dataset,version=" << kDatasetVersion << ",H=" << set.descriptor_count
     << ",D_in=" << set.descriptor_dim() << ",identities=" << set.identity_count << '\n';
  std::string line;
  for (std::size_t i = 0; i < set.size(); ++i) {
    line.clear();
    line += std::to_string(set.identities[i]);
    line += ',';
    line += to_string(set.modalities[i]);
    for (Eigen::Index c = 0; c < set.features.cols(); ++c) {
      line += ',';
      append_double(line, set.features(static_cast<Eigen::Index>(i), c));
    }
    line += '\n';
    os << line;
  }
  if (!os) throw Error(Errc::io, "failed writing dataset");
}

FeatureSet read_dataset(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw Error(Errc::io, "dataset is empty");
  FeatureSet fs;
  int version = -1, h = -1, d_in = -1, ids = -1;
  const auto fields = split(header, ',');
  if (fields.empty() || fields[0] != "xmodal-dataset") throw Error(Errc::io, "missing dataset header");
  for (std::size_t i = 1; i < fields.size(); ++i) {
    const auto eq = fields[i].find('=');
    if (eq == std::string_view::npos) throw Error(Errc::io, "malformed header field " + std::string(fields[i]));
    const auto key = fields[i].substr(0, eq);
    const int value = parse_int(fields[i].substr(eq + 1), 1);
    if (key == "version") version = value;
    else if (key == "H") h = value;
    else if (key == "D_in") d_in = value;
    else if (key == "identities") ids = value;
    else throw Error(Errc::io, "unknown header field " + std::string(key));
  }
  if (version != kDatasetVersion) throw Error(Errc::io, "unsupported dataset version " + std::to_string(version));
  if (h < 1 || d_in < 1 || ids < 1) throw Error(Errc::io, "dataset header lacks H, D_in or identities");
  fs.descriptor_count = h;
  fs.identity_count = ids;
  const auto width = static_cast<std::size_t>(h * d_in);

  std::vector<double> values;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cols = split(line, ',');
    if (cols.size() != width + 2) {
      throw Error(Errc::io, "line " + std::to_string(lineno) + ": expected " + std::to_string(width + 2) +
                                " columns, got " + std::to_string(cols.size()));
    }
    fs.identities.push_back(parse_int(cols[0], lineno));
    if (cols[1] == "visible") fs.modalities.push_back(Modality::Visible);
    else if (cols[1] == "thermal") fs.modalities.push_back(Modality::Thermal);
    else throw Error(Errc::io, "line " + std::to_string(lineno) + ": unknown modality " + std::string(cols[1]));
    for (std::size_t c = 2; c < cols.size(); ++c) values.push_back(parse_double(cols[c], lineno));
  }
  fs.features = Eigen::Map<Matrix>(values.data(), static_cast<Eigen::Index>(fs.identities.size()),
                                   static_cast<Eigen::Index>(width));
  fs.validate();
  return fs;
}

void write_embeddings(std::ostream& os, const FeatureSet& embeddings) {
  os << "identity,modality";
  for (Eigen::Index c = 0; c < embeddings.features.cols(); ++c) os << ",e_" << c;
  os << '\n';
  char buf[64];
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    os << embeddings.identities[i] << ',' << to_string(embeddings.modalities[i]);
    for (Eigen::Index c = 0; c < embeddings.features.cols(); ++c) {
      std::snprintf(buf, sizeof buf, ",%.6f", embeddings.features(static_cast<Eigen::Index>(i), c));
      os << buf;
    }
    os << '\n';
  }
}

}  // namespace xmodal
