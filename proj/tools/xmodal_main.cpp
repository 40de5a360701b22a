// SPDX-License-Identifier: Apache-2.0
// xmodal: generate / train / eval / sweep-margin front-end.
#include "xmodal/error.hpp"
#include "xmodal/experiment.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "config file (key = value lines)");
  cmd->add_option("--set", c.overrides, "override, key=value (repeatable)")->allow_extra_args(false);
}

xmodal::ExperimentConfig resolve(const Common& c) {
  xmodal::ExperimentConfig cfg =
      c.config_path.empty() ? xmodal::ExperimentConfig{} : xmodal::ExperimentConfig::load(c.config_path);
  for (const auto& o : c.overrides) cfg.set_assignment(o);
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-modality MMD alignment experiments"};
  app.require_subcommand(1);

  Common gen, train, eval, sweep;
  std::vector<double> rhos = {0.8, 1.0, 1.2, 1.4, 1.6, 1.8};

  auto* g = app.add_subcommand("generate", "write synthetic train/test dumps and a manifest");
  add_common(g, gen);
  auto* t = app.add_subcommand("train", "train an encoder, write checkpoint.bin and train_log.csv");
  add_common(t, train);
  auto* e = app.add_subcommand("eval", "evaluate a checkpoint, write eval_report.csv and embeddings.csv");
  add_common(e, eval);
  auto* s = app.add_subcommand("sweep-margin", "train and evaluate once per margin, write margin_sweep.csv");
  add_common(s, sweep);
  s->add_option("--rho", rhos, "margin values")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    if (err.get_exit_code() == 0) return app.exit(err);
    std::fprintf(stderr, "xmodal: error[usage]: %s\n", err.what());
    return 2;
  }

  try {
    if (*g) {
      const auto cfg = resolve(gen);
      xmodal::cmd_generate(cfg);
      std::printf("wrote dataset to %s\n", cfg.resolved_data_dir().string().c_str());
    } else if (*t) {
      const auto cfg = resolve(train);
      const auto r = xmodal::cmd_train(cfg);
      const auto& last = r.log.back();
      std::printf("epochs=%zu final_loss=%.6f checkpoint=%s\n", r.log.size(), last.total,
                  cfg.resolved_checkpoint().string().c_str());
    } else if (*e) {
      const auto cfg = resolve(eval);
      const auto r = xmodal::cmd_eval(cfg);
      std::printf("rank1=%.6f rank10=%.6f mAP=%.6f intra=%.6f inter=%.6f\n", r.report.rank(1), r.report.rank(10),
                  r.report.map, r.stats.intra_mean, r.stats.inter_mean);
    } else if (*s) {
      const auto cfg = resolve(sweep);
      std::printf("rho,rank1,mAP\n");
      for (const auto& row : xmodal::cmd_sweep_margin(cfg, rhos)) {
        std::printf("%.6f,%.6f,%.6f\n", row.rho, row.rank1, row.map);
      }
    }
  } catch (const xmodal::Error& err) {
    std::fprintf(stderr, "xmodal: error[%s]: %s\n", std::string(xmodal::to_string(err.code())).c_str(), err.what());
    return 1;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "xmodal: error[internal]: %s\n", err.what());
    return 1;
  }
  return 0;
}
