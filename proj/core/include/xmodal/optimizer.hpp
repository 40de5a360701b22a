// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "xmodal/encoder.hpp"

namespace xmodal {

struct SgdHyper {
  double base_lr = 0.001;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int warmup_epochs = 5;
  int total_epochs = 60;

  void validate() const;
};

/// Linear warmup from 0.1 * base_lr to base_lr over the warmup epochs, then
/// x0.1 from 60% of the run and x0.01 from 90%.
double learning_rate(const SgdHyper& hyper, int epoch);

struct SgdState {
  EncoderParams velocity;
  bool initialized = false;
};

/// One momentum SGD step (v = momentum * v + g + wd * w; w -= lr * v).
/// Weight decay skips BN affine terms and gem_p; a learnable gem_p is kept
/// >= 1. Throws on any non-finite gradient before touching the parameters.
void sgd_step(EncoderParams& params, const EncoderParams& grads, SgdState& state,
              const SgdHyper& hyper, int epoch);

}  // namespace xmodal
