// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "xmodal/feature_set.hpp"
#include "xmodal/random.hpp"

#include <span>
#include <string>
#include <vector>

namespace xmodal {

struct DenseLayer {
  Matrix weight;  // out x in
  RowVector bias;
};

/// Layer widths of the two-stream encoder. Descriptors go through a
/// modality-specific stack, then a shared stack, each dense layer followed by
/// a ReLU; GeM pools the descriptors of a sample channel-wise, then BN and a
/// bias-free linear classifier.
struct EncoderShape {
  int input_dim = 16;
  std::vector<int> specific_widths = {32, 64};
  std::vector<int> shared_widths = {64, 64};
  int num_classes = 1;
  double gem_p = 3.0;
  bool gem_learnable = false;
};

struct EncoderParams {
  std::vector<DenseLayer> specific_visible;
  std::vector<DenseLayer> specific_thermal;
  std::vector<DenseLayer> shared;
  double gem_p = 3.0;
  bool gem_learnable = false;
  RowVector bn_gamma;
  RowVector bn_beta;
  RowVector bn_running_mean;
  RowVector bn_running_var;
  Matrix classifier;  // classes x embedding

  int input_dim() const;
  int embedding_dim() const;
  int num_classes() const { return static_cast<int>(classifier.rows()); }
  EncoderShape shape() const;

  void validate() const;
};

constexpr double kBatchNormEps = 1e-5;
constexpr double kBatchNormMomentum = 0.1;

/// He-style initialisation; BN starts at gamma = 1, beta = 0. Both specific
/// stacks start from the same draw and diverge during training.
EncoderParams init_encoder(const EncoderShape& shape, Rng& rng);

/// Same structure as `like`, every value zero.
EncoderParams zeros_like(const EncoderParams& like);

/// Calls f(name, span, rows, cols, decays) for every tensor. With
/// `trainable_only` the BN running statistics are skipped, and so is gem_p
/// unless it is learnable. `decays` is false for BN affine terms and gem_p.
template <class Params, class F>
void visit_tensors(Params& p, bool trainable_only, F&& f) {
  auto dense = [&](auto& stack, const std::string& prefix) {
    for (std::size_t i = 0; i < stack.size(); ++i) {
      auto& l = stack[i];
      const std::string base = prefix + "." + std::to_string(i);
      f(base + ".weight", std::span(l.weight.data(), static_cast<std::size_t>(l.weight.size())),
        l.weight.rows(), l.weight.cols(), true);
      f(base + ".bias", std::span(l.bias.data(), static_cast<std::size_t>(l.bias.size())), 1,
        l.bias.size(), true);
    }
  };
  dense(p.specific_visible, "specific_visible");
  dense(p.specific_thermal, "specific_thermal");
  dense(p.shared, "shared");
  if (!trainable_only || p.gem_learnable) f(std::string("gem.p"), std::span(&p.gem_p, 1), 1, 1, false);
  auto vec = [&](auto& v, const char* name, bool decays) {
    f(std::string(name), std::span(v.data(), static_cast<std::size_t>(v.size())), 1, v.size(), decays);
  };
  vec(p.bn_gamma, "bn.gamma", false);
  vec(p.bn_beta, "bn.beta", false);
  if (!trainable_only) {
    vec(p.bn_running_mean, "bn.running_mean", false);
    vec(p.bn_running_var, "bn.running_var", false);
  }
  f(std::string("classifier.weight"),
    std::span(p.classifier.data(), static_cast<std::size_t>(p.classifier.size())),
    p.classifier.rows(), p.classifier.cols(), true);
}

/// Generalised power mean of nonnegative values.
double gem_pool(std::span<const double> values, double p);

enum class BatchNormMode { Train, Eval };

/// Everything backward() needs from a forward pass.
struct Tape {
  int samples = 0;
  int descriptors = 0;
  BatchNormMode mode = BatchNormMode::Train;
  std::vector<std::size_t> visible_rows;  // descriptor rows routed to each stream
  std::vector<std::size_t> thermal_rows;
  // Per stack: layer inputs [0..L) and pre-activations [0..L).
  std::vector<Matrix> visible_inputs, visible_pre;
  std::vector<Matrix> thermal_inputs, thermal_pre;
  std::vector<Matrix> shared_inputs, shared_pre;
  Matrix gem_input;  // (samples * descriptors) x embedding, post-ReLU
  Matrix pooled;
  RowVector bn_mean, bn_var, bn_inv_std;
  Matrix bn_normalized;
  Matrix bn_features;
};

struct ForwardResult {
  Matrix pooled;
  Matrix bn_features;
  Matrix logits;
  Tape tape;
};

/// Runs a batch of raw samples (rows of `samples.features`, each holding
/// `samples.descriptor_count` descriptors) through the encoder. Does not
/// touch the BN running statistics; see update_running_stats().
ForwardResult forward(const EncoderParams& params, const FeatureSet& samples,
                      BatchNormMode mode = BatchNormMode::Train);

/// Folds the batch statistics recorded in a training-mode tape into the
/// running mean/variance.
void update_running_stats(EncoderParams& params, const Tape& tape);

/// Reverse pass: gradients of the loss for every trainable tensor, given
/// d loss / d pooled and d loss / d logits. Running statistics in the result
/// are zero.
EncoderParams backward(const EncoderParams& params, const Tape& tape, const Matrix& grad_pooled,
                       const Matrix& grad_logits);

/// Embeds samples with BN in eval mode. Returns the pooled features, or the
/// BN output when `after_bn` is set.
Matrix embed(const EncoderParams& params, const FeatureSet& samples, bool after_bn = false);

}  // namespace xmodal
