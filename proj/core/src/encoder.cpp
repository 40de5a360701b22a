// SPDX-License-Identifier: Apache-2.0
#include "xmodal/encoder.hpp"

#include "xmodal/error.hpp"

#include <cmath>
#include <string>

namespace xmodal {

namespace {

using ConstMap = Eigen::Map<const Matrix>;

void check_stack(const std::vector<DenseLayer>& stack, int in, const char* name) {
  for (std::size_t i = 0; i < stack.size(); ++i) {
    const auto& l = stack[i];
    if (l.weight.cols() != in || l.bias.size() != l.weight.rows()) {
      throw Error(Errc::shape_mismatch, std::string(name) + " layer " + std::to_string(i) +
                                            " expects input " + std::to_string(l.weight.cols()) +
                                            ", got " + std::to_string(in));
    }
    in = static_cast<int>(l.weight.rows());
  }
}

int stack_output(const std::vector<DenseLayer>& stack, int in) {
  return stack.empty() ? in : static_cast<int>(stack.back().weight.rows());
}

DenseLayer make_layer(int in, int out, Rng& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / in));
  DenseLayer l;
  l.weight.resize(out, in);
  for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = dist(rng);
  l.bias = RowVector::Zero(out);
  return l;
}

Matrix run_stack(const std::vector<DenseLayer>& stack, Matrix x, std::vector<Matrix>& inputs,
                 std::vector<Matrix>& pre) {
  inputs.clear();
  pre.clear();
  for (const auto& l : stack) {
    Matrix z = x * l.weight.transpose();
    z.rowwise() += l.bias;
    inputs.push_back(std::move(x));
    x = z.cwiseMax(0.0);
    pre.push_back(std::move(z));
  }
  return x;
}

// Returns d loss / d stack input.
Matrix backprop_stack(const std::vector<DenseLayer>& stack, const std::vector<Matrix>& inputs,
                      const std::vector<Matrix>& pre, Matrix grad, std::vector<DenseLayer>& out) {
  for (std::size_t k = stack.size(); k-- > 0;) {
    const Matrix dz = grad.cwiseProduct((pre[k].array() > 0.0).cast<double>().matrix());
    out[k].weight = dz.transpose() * inputs[k];
    out[k].bias = dz.colwise().sum();
    grad = dz * stack[k].weight;
  }
  return grad;
}

// Pooled value and d pooled / d x_h factor for one channel; `values` strided.
double gem_channel(const double* values, Eigen::Index count, Eigen::Index stride, double p) {
  double peak = 0.0;
  for (Eigen::Index h = 0; h < count; ++h) peak = std::max(peak, values[h * stride]);
  if (peak == 0.0) return 0.0;
  double acc = 0.0;
  for (Eigen::Index h = 0; h < count; ++h) acc += std::pow(values[h * stride] / peak, p);
  return peak * std::pow(acc / static_cast<double>(count), 1.0 / p);
}

}  // namespace

int EncoderParams::input_dim() const {
  const auto& first = specific_visible.empty() ? shared : specific_visible;
  return first.empty() ? static_cast<int>(bn_gamma.size()) : static_cast<int>(first.front().weight.cols());
}

int EncoderParams::embedding_dim() const { return static_cast<int>(bn_gamma.size()); }

EncoderShape EncoderParams::shape() const {
  EncoderShape s;
  s.input_dim = input_dim();
  s.specific_widths.clear();
  for (const auto& l : specific_visible) s.specific_widths.push_back(static_cast<int>(l.weight.rows()));
  s.shared_widths.clear();
  for (const auto& l : shared) s.shared_widths.push_back(static_cast<int>(l.weight.rows()));
  s.num_classes = num_classes();
  s.gem_p = gem_p;
  s.gem_learnable = gem_learnable;
  return s;
}

void EncoderParams::validate() const {
  if (specific_visible.size() != specific_thermal.size()) {
    throw Error(Errc::shape_mismatch, "visible and thermal stacks differ in depth");
  }
  for (std::size_t i = 0; i < specific_visible.size(); ++i) {
    if (specific_visible[i].weight.rows() != specific_thermal[i].weight.rows() ||
        specific_visible[i].weight.cols() != specific_thermal[i].weight.cols()) {
      throw Error(Errc::shape_mismatch, "visible and thermal layer " + std::to_string(i) + " differ in shape");
    }
  }
  const int in = input_dim();
  check_stack(specific_visible, in, "specific_visible");
  check_stack(specific_thermal, in, "specific_thermal");
  const int mid = stack_output(specific_visible, in);
  check_stack(shared, mid, "shared");
  const int d = stack_output(shared, mid);
  if (bn_gamma.size() != d || bn_beta.size() != d || bn_running_mean.size() != d ||
      bn_running_var.size() != d || classifier.cols() != d) {
    throw Error(Errc::shape_mismatch, "batch norm / classifier width does not match embedding width " +
                                          std::to_string(d));
  }
  if (!(gem_p >= 1.0)) {
    throw Error(Errc::invalid_argument, "GeM power must be >= 1, got " + std::to_string(gem_p));
  }
}

EncoderParams init_encoder(const EncoderShape& shape, Rng& rng) {
  if (shape.input_dim < 1 || shape.num_classes < 1 || shape.shared_widths.empty()) {
    throw Error(Errc::invalid_argument, "encoder needs a positive input width, classes and a shared stack");
  }
  EncoderParams p;
  int in = shape.input_dim;
  for (int w : shape.specific_widths) {
    p.specific_visible.push_back(make_layer(in, w, rng));
    p.specific_thermal.push_back(p.specific_visible.back());
    in = w;
  }
  for (int w : shape.shared_widths) {
    p.shared.push_back(make_layer(in, w, rng));
    in = w;
  }
  p.gem_p = shape.gem_p;
  p.gem_learnable = shape.gem_learnable;
  p.bn_gamma = RowVector::Ones(in);
  p.bn_beta = RowVector::Zero(in);
  p.bn_running_mean = RowVector::Zero(in);
  p.bn_running_var = RowVector::Ones(in);
  std::normal_distribution<double> cls(0.0, 0.01);
  p.classifier.resize(shape.num_classes, in);
  for (Eigen::Index i = 0; i < p.classifier.size(); ++i) p.classifier.data()[i] = cls(rng);
  p.validate();
  return p;
}

EncoderParams zeros_like(const EncoderParams& like) {
  EncoderParams z = like;
  visit_tensors(z, false, [](const std::string&, std::span<double> v, auto, auto, bool) {
    std::fill(v.begin(), v.end(), 0.0);
  });
  z.gem_learnable = like.gem_learnable;
  return z;
}

double gem_pool(std::span<const double> values, double p) {
  if (values.empty()) throw Error(Errc::invalid_argument, "GeM pooling needs at least one value");
  if (!(p >= 1.0)) throw Error(Errc::invalid_argument, "GeM power must be >= 1, got " + std::to_string(p));
  for (double v : values) {
    if (!(v >= 0.0)) {
      throw Error(Errc::invalid_argument, "GeM pooling input must be nonnegative, got " + std::to_string(v));
    }
  }
  return gem_channel(values.data(), static_cast<Eigen::Index>(values.size()), 1, p);
}

ForwardResult forward(const EncoderParams& params, const FeatureSet& samples, BatchNormMode mode) {
  params.validate();
  samples.validate();
  if (samples.descriptor_dim() != params.input_dim()) {
    throw Error(Errc::dimension_mismatch, "descriptor dimension " + std::to_string(samples.descriptor_dim()) +
                                              " does not match encoder input " +
                                              std::to_string(params.input_dim()));
  }
  if (samples.size() == 0) throw Error(Errc::invalid_argument, "forward needs at least one sample");

  ForwardResult out;
  Tape& t = out.tape;
  t.samples = static_cast<int>(samples.size());
  t.descriptors = samples.descriptor_count;
  t.mode = mode;
  const Eigen::Index n = t.samples;
  const Eigen::Index h = t.descriptors;
  const ConstMap descriptors(samples.features.data(), n * h, params.input_dim());

  for (std::size_t s = 0; s < samples.size(); ++s) {
    auto& rows = samples.modalities[s] == Modality::Visible ? t.visible_rows : t.thermal_rows;
    for (Eigen::Index k = 0; k < h; ++k) rows.push_back(s * static_cast<std::size_t>(h) + static_cast<std::size_t>(k));
  }

  const int mid = stack_output(params.specific_visible, params.input_dim());
  Matrix merged(n * h, mid);
  auto route = [&](const std::vector<std::size_t>& rows, const std::vector<DenseLayer>& stack,
                   std::vector<Matrix>& inputs, std::vector<Matrix>& pre) {
    if (rows.empty()) return;
    Matrix x(static_cast<Eigen::Index>(rows.size()), descriptors.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = descriptors.row(static_cast<Eigen::Index>(rows[i]));
    const Matrix y = run_stack(stack, std::move(x), inputs, pre);
    for (std::size_t i = 0; i < rows.size(); ++i) merged.row(static_cast<Eigen::Index>(rows[i])) = y.row(static_cast<Eigen::Index>(i));
  };
  route(t.visible_rows, params.specific_visible, t.visible_inputs, t.visible_pre);
  route(t.thermal_rows, params.specific_thermal, t.thermal_inputs, t.thermal_pre);

  t.gem_input = run_stack(params.shared, std::move(merged), t.shared_inputs, t.shared_pre);
  const Eigen::Index d = t.gem_input.cols();

  t.pooled.resize(n, d);
  for (Eigen::Index s = 0; s < n; ++s) {
    const double* block = t.gem_input.data() + s * h * d;
    for (Eigen::Index c = 0; c < d; ++c) t.pooled(s, c) = gem_channel(block + c, h, d, params.gem_p);
  }

  if (mode == BatchNormMode::Train) {
    t.bn_mean = t.pooled.colwise().mean();
    t.bn_var = (t.pooled.rowwise() - t.bn_mean).array().square().colwise().mean().matrix();
  } else {
    t.bn_mean = params.bn_running_mean;
    t.bn_var = params.bn_running_var;
  }
  t.bn_inv_std = (t.bn_var.array() + kBatchNormEps).rsqrt().matrix();
  t.bn_normalized = ((t.pooled.rowwise() - t.bn_mean).array().rowwise() * t.bn_inv_std.array()).matrix();
  t.bn_features = ((t.bn_normalized.array().rowwise() * params.bn_gamma.array()).rowwise() +
                   params.bn_beta.array())
                      .matrix();

  out.pooled = t.pooled;
  out.bn_features = t.bn_features;
  out.logits = t.bn_features * params.classifier.transpose();
  return out;
}

void update_running_stats(EncoderParams& params, const Tape& tape) {
  if (tape.mode != BatchNormMode::Train) return;
  const double n = tape.samples;
  const double unbias = n > 1 ? n / (n - 1.0) : 1.0;
  params.bn_running_mean = (1.0 - kBatchNormMomentum) * params.bn_running_mean + kBatchNormMomentum * tape.bn_mean;
  params.bn_running_var =
      (1.0 - kBatchNormMomentum) * params.bn_running_var + (kBatchNormMomentum * unbias) * tape.bn_var;
}

EncoderParams backward(const EncoderParams& params, const Tape& tape, const Matrix& grad_pooled,
                       const Matrix& grad_logits) {
  const Eigen::Index n = tape.samples;
  const Eigen::Index h = tape.descriptors;
  const Eigen::Index d = params.embedding_dim();
  if (tape.shared_pre.size() != params.shared.size() || tape.visible_pre.size() > params.specific_visible.size() ||
      tape.thermal_pre.size() > params.specific_thermal.size() || tape.gem_input.cols() != d ||
      tape.pooled.rows() != n) {
    throw Error(Errc::shape_mismatch, "tape does not match encoder parameters");
  }
  if (grad_pooled.rows() != n || grad_pooled.cols() != d || grad_logits.rows() != n ||
      grad_logits.cols() != params.num_classes()) {
    throw Error(Errc::shape_mismatch, "upstream gradients do not match the forward batch");
  }

  EncoderParams g = zeros_like(params);

  g.classifier = grad_logits.transpose() * tape.bn_features;
  const Matrix d_bn = grad_logits * params.classifier;

  g.bn_gamma = d_bn.cwiseProduct(tape.bn_normalized).colwise().sum();
  g.bn_beta = d_bn.colwise().sum();
  const Matrix d_norm = (d_bn.array().rowwise() * params.bn_gamma.array()).matrix();
  Matrix d_pooled;
  if (tape.mode == BatchNormMode::Train) {
    const double nd = static_cast<double>(n);
    const RowVector sum_d = d_norm.colwise().sum();
    const RowVector sum_dx = d_norm.cwiseProduct(tape.bn_normalized).colwise().sum();
    const Matrix centered = ((d_norm * nd).rowwise() - sum_d) -
                            (tape.bn_normalized.array().rowwise() * sum_dx.array()).matrix();
    d_pooled = ((centered.array().rowwise() * tape.bn_inv_std.array()) / nd).matrix();
  } else {
    d_pooled = (d_norm.array().rowwise() * tape.bn_inv_std.array()).matrix();
  }
  d_pooled += grad_pooled;

  const double p = params.gem_p;
  Matrix d_gem = Matrix::Zero(n * h, d);
  double d_p = 0.0;
  for (Eigen::Index s = 0; s < n; ++s) {
    for (Eigen::Index c = 0; c < d; ++c) {
      const double f = tape.pooled(s, c);
      const double up = d_pooled(s, c);
      if (f <= 0.0 || up == 0.0) continue;
      double peak = 0.0;
      for (Eigen::Index k = 0; k < h; ++k) peak = std::max(peak, tape.gem_input(s * h + k, c));
      double mean_u = 0.0, mean_ulogu = 0.0;
      for (Eigen::Index k = 0; k < h; ++k) {
        const double x = tape.gem_input(s * h + k, c);
        d_gem(s * h + k, c) = up * std::pow(x / f, p - 1.0) / static_cast<double>(h);
        if (params.gem_learnable && x > 0.0) {
          const double u = x / peak;
          const double up_ = std::pow(u, p);
          mean_u += up_;
          mean_ulogu += up_ * std::log(u);
        }
      }
      if (params.gem_learnable) {
        // d ln f / dp in units scaled by the channel max.
        mean_u /= static_cast<double>(h);
        mean_ulogu /= static_cast<double>(h);
        d_p += up * f * (-std::log(mean_u) / (p * p) + mean_ulogu / (mean_u * p));
      }
    }
  }
  g.gem_p = d_p;

  Matrix d_mid = backprop_stack(params.shared, tape.shared_inputs, tape.shared_pre, std::move(d_gem), g.shared);

  auto split = [&](const std::vector<std::size_t>& rows, const std::vector<DenseLayer>& stack,
                   const std::vector<Matrix>& inputs, const std::vector<Matrix>& pre,
                   std::vector<DenseLayer>& out) {
    if (rows.empty()) return;
    Matrix grad(static_cast<Eigen::Index>(rows.size()), d_mid.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) grad.row(static_cast<Eigen::Index>(i)) = d_mid.row(static_cast<Eigen::Index>(rows[i]));
    backprop_stack(stack, inputs, pre, std::move(grad), out);
  };
  split(tape.visible_rows, params.specific_visible, tape.visible_inputs, tape.visible_pre, g.specific_visible);
  split(tape.thermal_rows, params.specific_thermal, tape.thermal_inputs, tape.thermal_pre, g.specific_thermal);
  return g;
}

Matrix embed(const EncoderParams& params, const FeatureSet& samples, bool after_bn) {
  ForwardResult r = forward(params, samples, BatchNormMode::Eval);
  return after_bn ? std::move(r.bn_features) : std::move(r.pooled);
}

}  // namespace xmodal
