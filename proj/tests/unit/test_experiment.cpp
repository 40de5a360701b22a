// SPDX-License-Identifier: Apache-2.0
#include "xmodal/error.hpp"
#include "xmodal/experiment.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace xmodal {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "xmodal_unit" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

ExperimentConfig tiny(const fs::path& out) {
  ExperimentConfig c = ExperimentConfig::parse(
      "data.num_identities = 8\n"
      "data.samples_per_identity = 4\n"
      "data.descriptor_count = 2\n"
      "data.descriptor_dim = 4\n"
      "data.shift_rank = 2\n"
      "encoder.specific_widths = 6\n"
      "encoder.shared_widths = 6,5\n"
      "batch.P = 3\n"
      "batch.K = 2\n"
      "train.epochs = 3\n"
      "eval.trials = 2\n"
      "optim.warmup_epochs = 1\n");
  c.output_dir = out;
  return c;
}

TEST(Generate, WritesReproducibleChecksums) {
  const fs::path a = scratch("gen_a"), b = scratch("gen_b");
  cmd_generate(tiny(a));
  cmd_generate(tiny(b));
  for (const char* f : {"train.csv", "test.csv", "manifest.txt", "generate.resolved.cfg"}) {
    EXPECT_TRUE(fs::exists(a / f)) << f;
  }
  EXPECT_EQ(slurp(a / "manifest.txt"), slurp(b / "manifest.txt"));
  EXPECT_NE(slurp(a / "manifest.txt").find("sha256 train.csv = "), std::string::npos);
  const auto d = load_dataset(a);
  EXPECT_EQ(d.train.present_identities().size() + d.test.present_identities().size(), 8u);
}

TEST(Generate, TamperedDataIsRefused) {
  const fs::path a = scratch("tamper");
  cmd_generate(tiny(a));
  {
    std::ofstream os(a / "test.csv", std::ios::app);
    os << "0,visible,1,2,3,4,5,6,7,8\n";
  }
  try {
    load_dataset(a);
    FAIL() << "tampered dataset accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::integrity);
  }
}

TEST(Generate, TooFewIdentitiesIsRejected) {
  ExperimentConfig c = tiny(scratch("few"));
  c.data.num_identities = 3;
  EXPECT_THROW(cmd_generate(c), Error);
}

TEST(Train, IdenticalConfigGivesIdenticalCheckpointBytes) {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  for (const auto& d : {a, b}) {
    const auto c = tiny(d);
    cmd_generate(c);
    cmd_train(c);
  }
  EXPECT_EQ(slurp(a / "checkpoint.bin"), slurp(b / "checkpoint.bin"));
  const std::string log = slurp(a / "train_log.csv");
  EXPECT_EQ(log.substr(0, log.find('\n')), "epoch,lr,total,id,mmd,hctri,active_classes,mean_class_mmd,seconds");
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 4);
}

TEST(Train, ZeroAlignmentWeightNeverTouchesTheKernel) {
  ExperimentConfig c = tiny(scratch("ablate"));
  const auto data = make_dataset(c);
  c.loss.weights.lambda_mmd = 0.0;
  const auto off = train_model(c, data.train);
  EXPECT_EQ(off.cost.kernel_pairs, 0u);
  EXPECT_GT(off.cost.center_distances, 0u);
  EXPECT_TRUE(std::isnan(off.log.back().mean_class_mmd));
  c.loss.weights.lambda_mmd = 0.25;
  c.loss.weights.lambda_hctri = 0.0;
  const auto on = train_model(c, data.train);
  EXPECT_GT(on.cost.kernel_pairs, 0u);
  EXPECT_EQ(on.cost.center_distances, 0u);
}

TEST(Train, DivergenceAbortsWithLastGoodCheckpoint) {
  ExperimentConfig c = tiny(scratch("diverge"));
  c.optim.base_lr = 1e200;
  c.optim.warmup_epochs = 0;
  cmd_generate(c);
  try {
    cmd_train(c);
    FAIL() << "training did not diverge";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::numeric);
  }
  EXPECT_TRUE(fs::exists(c.resolved_checkpoint()));
}

TEST(Eval, WritesReportAndOneEmbeddingRowPerTestSample) {
  const fs::path a = scratch("eval");
  const auto c = tiny(a);
  cmd_generate(c);
  cmd_train(c);
  const auto out = cmd_eval(c);
  const std::string emb = slurp(a / "embeddings.csv");
  EXPECT_EQ(static_cast<std::size_t>(std::count(emb.begin(), emb.end(), '\n')), out.embeddings.size() + 1);
  EXPECT_EQ(out.embeddings.size(), load_dataset(a).test.size());
  EXPECT_TRUE(fs::exists(a / "eval_report.csv"));
  EXPECT_TRUE(fs::exists(a / "eval.resolved.cfg"));
}

TEST(Eval, ShapeMismatchIsAnError) {
  const fs::path a = scratch("eval_shape");
  auto c = tiny(a);
  cmd_generate(c);
  cmd_train(c);
  c.encoder.shared_widths = {6, 7};
  try {
    cmd_eval(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::shape_mismatch);
  }
}

TEST(Sweep, NeedsTwoValuesAndEmitsOneRowEach) {
  const fs::path a = scratch("sweep");
  auto c = tiny(a);
  c.epochs = 1;
  EXPECT_THROW(cmd_sweep_margin(c, {1.4}), Error);
  EXPECT_THROW(cmd_sweep_margin(c, {1.4, -1.0}), Error);
  const auto rows = cmd_sweep_margin(c, {0.8, 1.4});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].rho, 0.8);
  const std::string table = slurp(a / "margin_sweep.csv");
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 3);
  EXPECT_TRUE(fs::exists(a / "rho_0.8" / "checkpoint.bin"));
  EXPECT_TRUE(fs::exists(a / "rho_1.4" / "eval_report.csv"));
}

#ifdef XMODAL_CLI_PATH
int run_cli(const std::string& args, const fs::path& err) {
  const std::string cmd = std::string(XMODAL_CLI_PATH) + " " + args + " >/dev/null 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

TEST(Cli, ErrorsCarryAMachineParsablePrefix) {
  const fs::path dir = scratch("cli");
  EXPECT_EQ(run_cli("generate --set batch.Q=3", dir / "e1"), 1);
  EXPECT_EQ(slurp(dir / "e1").rfind("xmodal: error[config]: ", 0), 0u) << slurp(dir / "e1");
  EXPECT_EQ(run_cli("frobnicate", dir / "e2"), 2);
  EXPECT_EQ(slurp(dir / "e2").rfind("xmodal: error[usage]: ", 0), 0u);
  EXPECT_EQ(run_cli("eval --set output_dir=" + (dir / "nothing").string(), dir / "e3"), 1);
  EXPECT_EQ(slurp(dir / "e3").rfind("xmodal: error[io]: ", 0), 0u);
  const std::string e1 = slurp(dir / "e1");
  EXPECT_EQ(std::count(e1.begin(), e1.end(), '\n'), 1);
}

TEST(Cli, GenerateSucceeds) {
  const fs::path dir = scratch("cli_ok");
  EXPECT_EQ(run_cli("generate --set output_dir=" + dir.string() + " --set data.num_identities=5", dir / "err"), 0);
  EXPECT_TRUE(fs::exists(dir / "manifest.txt"));
}
#endif

}  // namespace
}  // namespace xmodal
