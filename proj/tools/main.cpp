#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pmp/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Probabilistic magnitude pruning: training, sweeps and dataset tools"};
  app.require_subcommand(1);

  std::string config_path;
  std::string checkpoint_path;
  std::string out_dir;
  std::string data_path;
  std::string format = "jsonl";
  pmp::SynthSpec spec;

  CLI::App* run = app.add_subcommand("run", "Train one model from a config file");
  run->add_option("--config", config_path, "experiment config (JSON)")->required();

  CLI::App* sweep = app.add_subcommand("sweep", "Train the configured rate/target/seed grid");
  sweep->add_option("--config", config_path, "experiment config (JSON)")->required();

  CLI::App* dump =
      app.add_subcommand("dump-curves", "Write gate, target and observed curves as CSV");
  dump->add_option("--config", config_path, "experiment config (JSON)")->required();
  dump->add_option("--checkpoint", checkpoint_path, "model whose latent histogram to dump");
  dump->add_option("--out", out_dir, "output directory (default <output_dir>/curves)");

  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  eval_cmd->add_option("checkpoint", checkpoint_path, "checkpoint file")->required();
  eval_cmd->add_option("--config", config_path, "config providing the dataset")->required();

  CLI::App* data = app.add_subcommand("data", "Dataset utilities");
  data->require_subcommand(1);
  CLI::App* synth = data->add_subcommand("synth", "Generate a synthetic skeleton dataset");
  synth->add_option("--out", data_path, "output file")->required();
  synth->add_option("--format", format, "jsonl or csv (default jsonl)");
  synth->add_option("--joints", spec.joints, "joints per skeleton");
  synth->add_option("--classes", spec.classes, "action classes");
  synth->add_option("--per-class", spec.per_class, "train sequences per class");
  synth->add_option("--frames", spec.frames, "frames per sequence");
  synth->add_option("--chunks", spec.chunks, "temporal chunks M");
  synth->add_option("--noise", spec.noise_std, "coordinate noise stddev");
  synth->add_option("--seed", spec.seed, "generator seed");
  CLI::App* validate = data->add_subcommand("validate", "Parse and sanity-check a dataset file");
  validate->add_option("file", data_path, "dataset file")->required();
  validate->add_option("--format", format, "jsonl or csv (default jsonl)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return pmp::cmd_run(config_path, std::cout, std::cerr);
    if (*sweep) return pmp::cmd_sweep(config_path, std::cout, std::cerr);
    if (*dump)
      return pmp::cmd_dump_curves(config_path, checkpoint_path, out_dir, std::cout, std::cerr);
    if (*eval_cmd) return pmp::cmd_eval(checkpoint_path, config_path, std::cout, std::cerr);
    if (*data) {
      const pmp::DataFormat fmt = pmp::data_format_from_string(format);
      if (*synth) return pmp::cmd_data_synth(spec, data_path, fmt, std::cout, std::cerr);
      if (*validate) return pmp::cmd_data_validate(data_path, fmt, std::cout, std::cerr);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
