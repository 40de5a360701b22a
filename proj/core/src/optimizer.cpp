// SPDX-License-Identifier: Apache-2.0
#include "xmodal/optimizer.hpp"

#include "xmodal/error.hpp"

#include <cmath>
#include <string>

namespace xmodal {

void SgdHyper::validate() const {
  if (!(base_lr > 0.0) || !(momentum >= 0.0 && momentum < 1.0) || !(weight_decay >= 0.0) ||
      warmup_epochs < 0 || total_epochs < 1) {
    throw Error(Errc::invalid_argument, "invalid SGD hyperparameters");
  }
}

double learning_rate(const SgdHyper& hyper, int epoch) {
  if (epoch < hyper.warmup_epochs) {
    return hyper.base_lr * (0.1 + 0.9 * static_cast<double>(epoch) / hyper.warmup_epochs);
  }
  const double t = static_cast<double>(hyper.total_epochs);
  if (epoch >= 0.9 * t) return hyper.base_lr * 0.01;
  if (epoch >= 0.6 * t) return hyper.base_lr * 0.1;
  return hyper.base_lr;
}

void sgd_step(EncoderParams& params, const EncoderParams& grads, SgdState& state,
              const SgdHyper& hyper, int epoch) {
  hyper.validate();
  visit_tensors(grads, true, [](const std::string& name, std::span<const double> g, auto, auto, bool) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i])) {
        throw Error(Errc::numeric, "non-finite gradient in " + name + "[" + std::to_string(i) +
                                       "] = " + std::to_string(g[i]));
      }
    }
  });
  if (!state.initialized) {
    state.velocity = zeros_like(params);
    state.initialized = true;
  }

  std::vector<std::span<const double>> g_views;
  visit_tensors(grads, true, [&](const std::string&, std::span<const double> g, auto, auto, bool) {
    g_views.push_back(g);
  });
  std::vector<std::span<double>> v_views;
  visit_tensors(state.velocity, true, [&](const std::string&, std::span<double> v, auto, auto, bool) {
    v_views.push_back(v);
  });

  const double lr = learning_rate(hyper, epoch);
  std::size_t k = 0;
  visit_tensors(params, true, [&](const std::string& name, std::span<double> w, auto, auto, bool decays) {
    const auto g = g_views.at(k);
    const auto v = v_views.at(k);
    ++k;
    if (g.size() != w.size() || v.size() != w.size()) {
      throw Error(Errc::shape_mismatch, "gradient shape does not match parameter " + name);
    }
    const double wd = decays ? hyper.weight_decay : 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = hyper.momentum * v[i] + g[i] + wd * w[i];
      w[i] -= lr * v[i];
    }
  });
  if (params.gem_learnable && params.gem_p < 1.0) params.gem_p = 1.0;
}

}  // namespace xmodal
