// SPDX-License-Identifier: Apache-2.0
#include "xmodal/config.hpp"

#include "xmodal/error.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace xmodal {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw Error(Errc::config, "bad value '" + std::string(value) + "' for " + std::string(key) + " (expected " +
                                std::string(expected) + ")");
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc{} || r.ptr != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

template <class Int>
Int to_int(std::string_view key, std::string_view v) {
  Int out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc{} || r.ptr != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true") return true;
  if (v == "false") return false;
  bad_value(key, v, "true or false");
}

std::vector<std::string_view> split_list(std::string_view v) {
  std::vector<std::string_view> out;
  if (v.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto pos = v.find(',', start);
    out.push_back(trim(v.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string fmt(bool v) { return v ? "true" : "false"; }

template <class T>
std::string fmt_list(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>) out += fmt(xs[i]);
    else out += std::to_string(xs[i]);
  }
  return out;
}

struct Field {
  std::string key;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <class T, class Member>
Field number(std::string key, Member member) {
  return {key,
          [key, member](ExperimentConfig& c, std::string_view v) {
            auto& slot = std::invoke(member, c);
            if constexpr (std::is_floating_point_v<T>) slot = to_double(key, v);
            else slot = to_int<T>(key, v);
          },
          [member](const ExperimentConfig& c) {
            const auto& slot = std::invoke(member, c);
            if constexpr (std::is_floating_point_v<T>) return fmt(slot);
            else return std::to_string(slot);
          }};
}

template <class Member>
Field flag(std::string key, Member member) {
  return {key, [key, member](ExperimentConfig& c, std::string_view v) { std::invoke(member, c) = to_bool(key, v); },
          [member](const ExperimentConfig& c) { return fmt(std::invoke(member, c)); }};
}

template <class Member>
Field path(std::string key, Member member) {
  return {key, [member](ExperimentConfig& c, std::string_view v) { std::invoke(member, c) = std::string(v); },
          [member](const ExperimentConfig& c) { return std::invoke(member, c).string(); }};
}

template <class Member>
Field int_list(std::string key, Member member) {
  return {key,
          [key, member](ExperimentConfig& c, std::string_view v) {
            std::vector<int> xs;
            for (auto item : split_list(v)) xs.push_back(to_int<int>(key, item));
            std::invoke(member, c) = xs;
          },
          [member](const ExperimentConfig& c) { return fmt_list(std::invoke(member, c)); }};
}

template <class E, class Member>
Field enumeration(std::string key, Member member, std::vector<std::pair<std::string, E>> options) {
  std::string expected;
  for (const auto& [name, _] : options) expected += (expected.empty() ? "" : "|") + name;
  return {key,
          [key, member, options, expected](ExperimentConfig& c, std::string_view v) {
            for (const auto& [name, value] : options) {
              if (v == name) {
                std::invoke(member, c) = value;
                return;
              }
            }
            bad_value(key, v, expected);
          },
          [member, options](const ExperimentConfig& c) {
            for (const auto& [name, value] : options) {
              if (std::invoke(member, c) == value) return name;
            }
            return std::string("?");
          }};
}

const std::vector<Field>& fields() {
  using C = ExperimentConfig;
  static const std::vector<Field> table = {
      number<std::uint64_t>("seed", &C::seed),
      path("output_dir", &C::output_dir),
      path("data_dir", &C::data_dir),
      path("checkpoint", &C::checkpoint),

      number<int>("data.num_identities", [](auto& c) -> auto& { return c.data.num_identities; }),
      number<int>("data.samples_per_identity", [](auto& c) -> auto& { return c.data.samples_per_identity; }),
      number<int>("data.descriptor_count", [](auto& c) -> auto& { return c.data.descriptor_count; }),
      number<int>("data.descriptor_dim", [](auto& c) -> auto& { return c.data.descriptor_dim; }),
      number<double>("data.identity_spread", [](auto& c) -> auto& { return c.data.identity_spread; }),
      number<double>("data.within_noise", [](auto& c) -> auto& { return c.data.within_noise; }),
      number<double>("data.modality_shift", [](auto& c) -> auto& { return c.data.modality_shift; }),
      number<int>("data.shift_rank", [](auto& c) -> auto& { return c.data.shift_rank; }),
      flag("data.per_identity_rotation", [](auto& c) -> auto& { return c.data.per_identity_rotation; }),

      int_list("encoder.specific_widths", [](auto& c) -> auto& { return c.encoder.specific_widths; }),
      int_list("encoder.shared_widths", [](auto& c) -> auto& { return c.encoder.shared_widths; }),
      number<double>("encoder.gem_p", [](auto& c) -> auto& { return c.encoder.gem_p; }),
      flag("encoder.gem_learnable", [](auto& c) -> auto& { return c.encoder.gem_learnable; }),
      enumeration<bool>("encoder.retrieval_features", [](auto& c) -> auto& { return c.retrieve_after_bn; },
                        {{"pooled", false}, {"bn", true}}),

      number<int>("batch.P", [](auto& c) -> auto& { return c.batch.P; }),
      number<int>("batch.K", [](auto& c) -> auto& { return c.batch.K; }),

      enumeration<KernelSpec::Bandwidth>("kernel.bandwidth", [](auto& c) -> auto& { return c.loss.kernel.mode; },
                                         {{"fixed", KernelSpec::Bandwidth::Fixed},
                                          {"median", KernelSpec::Bandwidth::MedianHeuristic}}),
      number<double>("kernel.sigma_squared", [](auto& c) -> auto& { return c.loss.kernel.sigma_squared; }),
      {"kernel.scales",
       [](C& c, std::string_view v) {
         std::vector<double> xs;
         for (auto item : split_list(v)) xs.push_back(to_double("kernel.scales", item));
         c.loss.kernel.scales = xs;
       },
       [](const C& c) { return fmt_list(c.loss.kernel.scales); }},

      enumeration<Alignment>("mmd.alignment", [](auto& c) -> auto& { return c.loss.alignment; },
                             {{"mmd", Alignment::Marginal},
                              {"mmd_id", Alignment::Identity},
                              {"margin_mmd_id", Alignment::MarginIdentity}}),
      enumeration<Estimator>("mmd.estimator", [](auto& c) -> auto& { return c.loss.estimator; },
                             {{"biased", Estimator::Biased}, {"unbiased", Estimator::Unbiased}}),
      number<double>("mmd.rho", [](auto& c) -> auto& { return c.loss.margin.rho; }),
      flag("mmd.soft_hinge", [](auto& c) -> auto& { return c.loss.margin.soft_hinge; }),
      number<double>("hctri.rho1", [](auto& c) -> auto& { return c.loss.hctri.rho1; }),

      number<double>("loss.lambda_id", [](auto& c) -> auto& { return c.loss.weights.lambda_id; }),
      number<double>("loss.lambda_mmd", [](auto& c) -> auto& { return c.loss.weights.lambda_mmd; }),
      number<double>("loss.lambda_hctri", [](auto& c) -> auto& { return c.loss.weights.lambda_hctri; }),

      number<double>("optim.base_lr", [](auto& c) -> auto& { return c.optim.base_lr; }),
      number<double>("optim.momentum", [](auto& c) -> auto& { return c.optim.momentum; }),
      number<double>("optim.weight_decay", [](auto& c) -> auto& { return c.optim.weight_decay; }),
      number<int>("optim.warmup_epochs", [](auto& c) -> auto& { return c.optim.warmup_epochs; }),

      number<int>("train.epochs", &C::epochs),
      number<int>("eval.trials", &C::eval_trials),
      enumeration<Similarity>("eval.similarity", &C::similarity,
                              {{"cosine", Similarity::Cosine}, {"euclidean", Similarity::Euclidean}}),
      enumeration<Modality>("eval.query_modality", &C::query_modality,
                            {{"thermal", Modality::Thermal}, {"visible", Modality::Visible}}),
  };
  return table;
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
  loss.kernel = KernelSpec::median_heuristic({0.0625, 0.125, 0.25});
  optim.total_epochs = epochs;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

void ExperimentConfig::set(std::string_view key, std::string_view value) {
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(*this, trim(value));
      optim.total_epochs = epochs;
      return;
    }
  }
  throw Error(Errc::config, "unknown config key '" + std::string(key) + "'");
}

void ExperimentConfig::set_assignment(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw Error(Errc::config, "expected key=value, got '" + std::string(assignment) + "'");
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void ExperimentConfig::validate() const {
  data.validate();
  batch.validate();
  loss.kernel.validate();
  loss.margin.validate();
  loss.hctri.validate();
  loss.weights.validate();
  optim.validate();
  if (epochs < 1) throw Error(Errc::config, "train.epochs must be >= 1");
  if (eval_trials < 1) throw Error(Errc::config, "eval.trials must be >= 1");
  if (encoder.shared_widths.empty()) throw Error(Errc::config, "encoder.shared_widths must not be empty");
  for (int w : encoder.specific_widths) if (w < 1) throw Error(Errc::config, "encoder widths must be positive");
  for (int w : encoder.shared_widths) if (w < 1) throw Error(Errc::config, "encoder widths must be positive");
  if (!(encoder.gem_p >= 1.0)) throw Error(Errc::config, "encoder.gem_p must be >= 1");
  if (loss.estimator == Estimator::Unbiased && batch.K < 2 && loss.weights.lambda_mmd != 0.0) {
    throw Error(Errc::config, "the unbiased estimator needs batch.K >= 2");
  }
}

std::filesystem::path ExperimentConfig::resolved_data_dir() const {
  return data_dir.empty() ? output_dir : data_dir;
}

std::filesystem::path ExperimentConfig::resolved_checkpoint() const {
  return checkpoint.empty() ? output_dir / "checkpoint.bin" : checkpoint;
}

std::string ExperimentConfig::to_text() const {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(*this) + "\n";
  return out;
}

ExperimentConfig ExperimentConfig::parse(std::string_view text) {
  ExperimentConfig cfg;
  std::size_t lineno = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    auto line = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (!line.empty()) {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw Error(Errc::config, "line " + std::to_string(lineno) + ": expected key = value");
      }
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& p) {
  std::ifstream is(p);
  if (!is) throw Error(Errc::io, "cannot open config " + p.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse(ss.str());
}

}  // namespace xmodal
