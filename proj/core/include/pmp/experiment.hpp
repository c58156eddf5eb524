#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pmp/checkpoint.hpp"
#include "pmp/data.hpp"
#include "pmp/trainer.hpp"

namespace pmp {

// Synthetic dataset knobs; defaults give the desk-scale benchmark
// (per_class counts train sequences; every class also gets half that many
// test sequences).
struct SynthSpec {
  int joints = 14;
  int classes = 5;
  int per_class = 60;
  int frames = 120;
  int chunks = 32;
  double noise_std = 0.01;
  std::uint64_t seed = 7;
};

// Either a synthetic recipe or a file on disk.
struct DatasetConfig {
  std::optional<SynthSpec> synth;
  std::string path;
  DataFormat format = DataFormat::Jsonl;
};

enum class Method { Pmp, Dense, Mp };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

struct SweepConfig {
  std::vector<double> rates;
  std::vector<std::pair<std::string, TargetDistribution>> targets;  // label, law
  std::vector<std::uint64_t> seeds;
  bool include_mp_baseline = true;
};

// Parsed experiment file. The JSON loader rejects unknown keys everywhere so
// typos fail loudly instead of silently using a default.
struct ExperimentConfig {
  int version = 1;
  std::string output_dir;
  DatasetConfig dataset;
  GcnHyper gcn;
  TrainConfig train;
  Method method = Method::Pmp;
  std::optional<SweepConfig> sweep;
};

ExperimentConfig load_config(const std::string& path);

// Preset target laws by kind name: gaussian(0, 0.3), laplace(0, 0.15),
// uniform(0.9).
TargetDistribution default_target(const std::string& kind);

Dataset realize_dataset(const DatasetConfig& dc);

// Relative paths are joined under $PMP_OUTPUT_ROOT when that is set.
std::string resolve_output_dir(const std::string& configured);

// One result line of a run or a sweep cell. wall_time_s is the only
// non-reproducible column and always sits last.
struct ReportRow {
  std::string method;
  double fixed_pr = 0.0;
  double observed_pr = 0.0;
  double gap = 0.0;  // |observed - fixed|
  std::string target;  // target label, "-" for gate-free baselines
  double accuracy = 0.0;
  std::uint64_t seed = 0;
  double wall_time_s = 0.0;
};

// Doubles round-trip exactly through these files (shortest-form encoding).
void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& history);
std::vector<EpochMetrics> read_metrics_csv(const std::string& path);
void write_report_csv(const std::string& path, const std::vector<ReportRow>& rows);
std::vector<ReportRow> read_report_csv(const std::string& path);

// Subcommand bodies; they print human output to `out`, diagnostics to `err`,
// and return the process exit code. A diverged `run` writes divergence.txt
// plus a snapshot checkpoint into the output directory and returns 2.
int cmd_run(const std::string& config_path, std::ostream& out, std::ostream& err);
int cmd_sweep(const std::string& config_path, std::ostream& out, std::ostream& err);
int cmd_dump_curves(const std::string& config_path, const std::string& checkpoint_path,
                    const std::string& out_dir_override, std::ostream& out, std::ostream& err);
int cmd_eval(const std::string& checkpoint_path, const std::string& config_path,
             std::ostream& out, std::ostream& err);
int cmd_data_synth(const SynthSpec& spec, const std::string& out_path, DataFormat format,
                   std::ostream& out, std::ostream& err);
int cmd_data_validate(const std::string& path, DataFormat format, std::ostream& out,
                      std::ostream& err);

}  // namespace pmp
