// SPDX-License-Identifier: Apache-2.0
#include "xmodal/experiment.hpp"

#include "xmodal/checkpoint.hpp"
#include "xmodal/error.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace xmodal {

namespace fs = std::filesystem;

namespace {

constexpr const char* kTrainFile = "train.csv";
constexpr const char* kTestFile = "test.csv";
constexpr const char* kManifestFile = "manifest.txt";

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(Errc::io, "cannot create output directory " + dir.string());
  }
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(Errc::io, "cannot write " + p.string());
  return os;
}

void finish(std::ofstream& os, const fs::path& p) {
  os.flush();
  if (!os) throw Error(Errc::io, "write failed for " + p.string());
}

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw Error(Errc::io, "cannot open " + p.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(Errc::integrity, "sha256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string shortest(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::vector<int> sorted_identities(const FeatureSet& set) { return set.present_identities(); }

std::vector<int> labels_for(const FeatureSet& batch, const std::vector<int>& ids) {
  std::vector<int> labels(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto it = std::lower_bound(ids.begin(), ids.end(), batch.identities[i]);
    labels[i] = static_cast<int>(it - ids.begin());
  }
  return labels;
}

EncoderShape shape_for(const ExperimentConfig& cfg, const FeatureSet& train) {
  EncoderShape shape = cfg.encoder;
  shape.input_dim = train.descriptor_dim();
  shape.num_classes = static_cast<int>(sorted_identities(train).size());
  return shape;
}

FeatureSet split_modality(const FeatureSet& set, Modality m) { return set.subset(set.rows_where(m)); }

Modality other(Modality m) { return m == Modality::Visible ? Modality::Thermal : Modality::Visible; }

}  // namespace

void write_resolved_config(const ExperimentConfig& cfg, const std::string& command) {
  ensure_dir(cfg.output_dir);
  const fs::path p = cfg.output_dir / (command + ".resolved.cfg");
  auto os = open_out(p);
  os << cfg.to_text();
  finish(os, p);
}

SyntheticDataset make_dataset(const ExperimentConfig& cfg) {
  SyntheticSpec spec = cfg.data;
  spec.seed = stream_seed(cfg.seed, "data");
  return generate(spec);
}

void cmd_generate(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto data = make_dataset(cfg);
  const fs::path dir = cfg.resolved_data_dir();
  ensure_dir(dir);

  std::ostringstream train_text, test_text;
  write_dataset(train_text, data.train);
  write_dataset(test_text, data.test);

  std::ostringstream manifest;
  manifest << "seed = " << cfg.seed << "\n";
  manifest << "data_seed = " << stream_seed(cfg.seed, "data") << "\n";
  std::istringstream resolved(cfg.to_text());
  for (std::string line; std::getline(resolved, line);) {
    if (line.rfind("data.", 0) == 0) manifest << line << "\n";
  }
  manifest << "sha256 " << kTrainFile << " = " << sha256_hex(train_text.str()) << "\n";
  manifest << "sha256 " << kTestFile << " = " << sha256_hex(test_text.str()) << "\n";

  for (const auto& [name, body] : {std::pair{kTrainFile, train_text.str()}, std::pair{kTestFile, test_text.str()},
                                   std::pair{kManifestFile, manifest.str()}}) {
    const fs::path p = dir / name;
    auto os = open_out(p);
    os << body;
    finish(os, p);
  }
  write_resolved_config(cfg, "generate");
}

SyntheticDataset load_dataset(const fs::path& dir) {
  const std::string manifest = read_file(dir / kManifestFile);
  std::map<std::string, std::string> sums;
  std::istringstream ms(manifest);
  for (std::string line; std::getline(ms, line);) {
    if (line.rfind("sha256 ", 0) != 0) continue;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw Error(Errc::integrity, "malformed manifest line: " + line);
    sums[line.substr(7, eq - 7)] = line.substr(eq + 3);
  }
  SyntheticDataset out;
  for (const auto& [name, slot] : {std::pair{kTrainFile, &out.train}, std::pair{kTestFile, &out.test}}) {
    const auto it = sums.find(name);
    if (it == sums.end()) throw Error(Errc::integrity, std::string("manifest has no checksum for ") + name);
    const std::string body = read_file(dir / name);
    if (sha256_hex(body) != it->second) {
      throw Error(Errc::integrity, std::string("checksum mismatch for ") + (dir / name).string());
    }
    std::istringstream is(body);
    *slot = read_dataset(is);
  }
  return out;
}

TrainResult train_model(const ExperimentConfig& cfg, const FeatureSet& train) {
  cfg.validate();
  train.validate();
  TrainResult result;
  result.label_identities = sorted_identities(train);

  Rng init_rng = make_stream(cfg.seed, "init");
  result.params = init_encoder(shape_for(cfg, train), init_rng);
  BatchSampler sampler(train, cfg.batch, stream_seed(cfg.seed, "sampler"));
  SgdHyper hyper = cfg.optim;
  hyper.total_epochs = cfg.epochs;
  SgdState state;

  const int steps = sampler.batches_per_epoch();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    TrainLogRow row;
    row.epoch = epoch;
    row.lr = learning_rate(hyper, epoch);
    int mmd_evaluated = 0;
    double class_mmd_sum = 0.0;
    for (int s = 0; s < steps; ++s) {
      const FeatureSet batch = sampler.next();
      const auto labels = labels_for(batch, result.label_identities);
      ForwardResult fr = forward(result.params, batch, BatchNormMode::Train);
      const LossBundle bundle =
          loss_total(batch.with_features(fr.pooled), fr.logits, labels, cfg.loss, &result.cost);
      if (!std::isfinite(bundle.total)) {
        save_checkpoint(cfg.resolved_checkpoint(), result.params);
        throw Error(Errc::numeric, "non-finite loss at epoch " + std::to_string(epoch) + " step " +
                                       std::to_string(s) + "; last good checkpoint written to " +
                                       cfg.resolved_checkpoint().string());
      }
      const EncoderParams grads = backward(result.params, fr.tape, bundle.grad_features, bundle.grad_logits);
      try {
        EncoderParams next = result.params;
        update_running_stats(next, fr.tape);
        sgd_step(next, grads, state, hyper, epoch);
        result.params = std::move(next);
      } catch (const Error& e) {
        if (e.code() != Errc::numeric) throw;
        save_checkpoint(cfg.resolved_checkpoint(), result.params);
        throw;
      }
      row.total += bundle.total;
      row.id += bundle.id_term;
      row.mmd += bundle.mmd_term;
      row.hctri += bundle.hctri_term;
      row.active_classes += bundle.active_classes;
      if (!std::isnan(bundle.mean_class_mmd)) {
        class_mmd_sum += bundle.mean_class_mmd;
        ++mmd_evaluated;
      }
    }
    row.total /= steps;
    row.id /= steps;
    row.mmd /= steps;
    row.hctri /= steps;
    row.active_classes /= steps;
    row.mean_class_mmd =
        mmd_evaluated ? class_mmd_sum / mmd_evaluated : std::numeric_limits<double>::quiet_NaN();
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(row);
  }
  return result;
}

EvalOutcome evaluate_model(const ExperimentConfig& cfg, const EncoderParams& params, const FeatureSet& test) {
  test.validate();
  if (test.descriptor_dim() != params.input_dim()) {
    throw Error(Errc::shape_mismatch, "test descriptors have dimension " + std::to_string(test.descriptor_dim()) +
                                          ", checkpoint expects " + std::to_string(params.input_dim()));
  }
  EvalOutcome out;
  out.embeddings = test.with_features(embed(params, test, cfg.retrieve_after_bn));
  const FeatureSet query = split_modality(out.embeddings, cfg.query_modality);
  const FeatureSet gallery = split_modality(out.embeddings, other(cfg.query_modality));
  out.report = evaluate(query, gallery, cfg.eval_trials, stream_seed(cfg.seed, "gallery"), cfg.similarity);
  out.stats = similarity_stats(out.embeddings);
  return out;
}

TrainResult cmd_train(const ExperimentConfig& cfg) {
  cfg.validate();
  ensure_dir(cfg.output_dir);
  write_resolved_config(cfg, "train");
  const auto data = load_dataset(cfg.resolved_data_dir());
  TrainResult result = train_model(cfg, data.train);
  save_checkpoint(cfg.resolved_checkpoint(), result.params);

  const fs::path p = cfg.output_dir / "train_log.csv";
  auto os = open_out(p);
  os << "epoch,lr,total,id,mmd,hctri,active_classes,mean_class_mmd,seconds\n";
  char buf[256];
  for (const auto& r : result.log) {
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", r.epoch, r.lr, r.total, r.id,
                  r.mmd, r.hctri, r.active_classes, r.mean_class_mmd, r.seconds);
    os << buf;
  }
  finish(os, p);
  return result;
}

EvalOutcome cmd_eval(const ExperimentConfig& cfg) {
  cfg.validate();
  ensure_dir(cfg.output_dir);
  write_resolved_config(cfg, "eval");
  const auto data = load_dataset(cfg.resolved_data_dir());
  Rng unused(0);
  EncoderParams params = init_encoder(shape_for(cfg, data.train), unused);
  load_checkpoint(cfg.resolved_checkpoint(), params);
  EvalOutcome out = evaluate_model(cfg, params, data.test);

  const fs::path report_path = cfg.output_dir / "eval_report.csv";
  auto rs = open_out(report_path);
  write_report(rs, out.report, &out.stats);
  finish(rs, report_path);

  const fs::path emb_path = cfg.output_dir / "embeddings.csv";
  auto es = open_out(emb_path);
  write_embeddings(es, out.embeddings);
  finish(es, emb_path);
  return out;
}

std::vector<SweepRow> cmd_sweep_margin(const ExperimentConfig& cfg, const std::vector<double>& rhos) {
  cfg.validate();
  if (rhos.size() < 2) throw Error(Errc::invalid_argument, "a margin sweep needs at least 2 rho values");
  for (double r : rhos) {
    MarginConfig m = cfg.loss.margin;
    m.rho = r;
    m.validate();
  }
  ensure_dir(cfg.output_dir);
  write_resolved_config(cfg, "sweep-margin");

  const fs::path data_dir = cfg.resolved_data_dir();
  if (!fs::exists(data_dir / kManifestFile)) cmd_generate(cfg);

  std::vector<SweepRow> rows;
  for (double rho : rhos) {
    ExperimentConfig point = cfg;
    point.loss.margin.rho = rho;
    point.output_dir = cfg.output_dir / ("rho_" + shortest(rho));
    point.data_dir = data_dir;
    point.checkpoint.clear();
    cmd_train(point);
    const EvalOutcome e = cmd_eval(point);
    rows.push_back({rho, e.report.rank(1), e.report.map});
  }

  const fs::path p = cfg.output_dir / "margin_sweep.csv";
  auto os = open_out(p);
  os << "rho,rank1,mAP\n";
  char buf[96];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f\n", r.rho, r.rank1, r.map);
    os << buf;
  }
  finish(os, p);
  return rows;
}

}  // namespace xmodal
