#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "selfpro/graph.hpp"
#include "selfpro/metrics.hpp"
#include "selfpro/model.hpp"
#include "selfpro/pretrain.hpp"
#include "selfpro/prompt.hpp"

namespace selfpro {

struct EvalReport {
  std::string task;     // node_cls, link_pred_auc, link_pred_ap
  std::string variant;  // e.g. selfpro, Hard, Temp, k=3
  std::vector<double> values;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single repeat
  int n_repeats = 0;
  std::string config_hash;
  std::vector<std::uint64_t> seeds;
  double wall_seconds = 0.0;

  bool operator==(const EvalReport&) const = default;
};

// Fills mean, std and n_repeats from values.
void finalize(EvalReport& report);

enum class SplitProtocol { few_shot, semi_supervised };

struct HarnessOptions {
  int k = 1;
  int n_val_per_class = 5;
  int repeats = 10;
  std::uint64_t seed = 0;
  SplitProtocol protocol = SplitProtocol::few_shot;
  int semi_per_class = 20;
  int semi_val = 500;
  int semi_test = 1000;
  double val_frac = 0.2;
  double test_frac = 0.1;
  int threads = 1;
  // Link prediction: when set, every repeat pretrains a fresh encoder on its
  // own training edges so held-out edges never reach the encoder.
  std::optional<PretrainConfig> link_pretrain;
  PromptMode link_mode = PromptMode::none;
  std::string config_hash;
};

// Split for repeat r: seed = options.seed + r.
SplitSpec repeat_split(const Graph& g, const HarnessOptions& options, int repeat);

// Few-shot node classification over options.repeats fresh splits. Labels are
// read through a LabelGuard; test labels are only touched after tuning.
EvalReport run_few_shot(const Graph& g, const TrainState& state, const PromptConfig& cfg,
                        const HarnessOptions& options);

struct LinkReports {
  EvalReport auc;
  EvalReport ap;
};

LinkReports run_link_prediction(const Graph& g, const TrainState& state, const PromptConfig& cfg,
                                const HarnessOptions& options);

// Hard, Temp, Tune, Stru, Sem on identical splits per repeat. Stru and Sem
// use cfg's injection settings.
std::vector<EvalReport> run_ablation(const Graph& g, const TrainState& state, const PromptConfig& cfg,
                                     const HarnessOptions& options);

// One run_few_shot per k with a shared base seed; infeasible k are skipped.
std::vector<EvalReport> shot_sweep(const Graph& g, const TrainState& state, const PromptConfig& cfg,
                                   const HarnessOptions& options, std::span<const int> k_values);

struct ParameterAudit {
  std::size_t frozen = 0;  // online + target encoder
  std::size_t tuned = 0;   // projector
  std::size_t added = 0;   // new parameters introduced for tuning
};

ParameterAudit parameter_audit(const TrainState& state);

enum class ReportFormat { csv, json, markdown };

void emit_report(std::span<const EvalReport> reports, const std::filesystem::path& path, ReportFormat format);
std::vector<EvalReport> read_json_reports(const std::filesystem::path& path);

// Simple SVG charts: mean +- std per report.
void write_sweep_svg(std::span<const EvalReport> reports, std::span<const int> k_values,
                     const std::filesystem::path& path);
void write_bars_svg(std::span<const EvalReport> reports, const std::filesystem::path& path);

}  // namespace selfpro
