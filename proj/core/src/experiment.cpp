#include "pmp/experiment.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <tuple>

#include <json.hpp>

#include "pmp/bandstop.hpp"
#include "pmp/histogram.hpp"
#include "text_util.hpp"

namespace pmp {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;
using detail::fmt_double;
using detail::parse_double;
using detail::parse_int;
using detail::split;

constexpr const char* kMetricsSchema = "# schema: pmp.metrics.v1";
constexpr const char* kMetricsHeader = "epoch,loss,ce,kld,observed_pr,lr,test_acc";
constexpr const char* kReportSchema = "# schema: pmp.report.v1";
constexpr const char* kReportHeader =
    "method,fixed_pr,observed_pr,gap,target,accuracy,seed,wall_time_s";

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    bool known = false;
    for (const char* a : allowed)
      if (key == a) {
        known = true;
        break;
      }
    if (!known) throw std::runtime_error("config: unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

TargetDistribution parse_target(const json& j, const std::string& where) {
  if (j.is_string()) return default_target(j.get<std::string>());
  if (!j.is_object())
    throw std::runtime_error("config: " + where + " must be a kind name or an object");
  if (!j.contains("kind")) throw std::runtime_error("config: " + where + " needs a 'kind'");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "gaussian") {
    check_keys(j, where, {"kind", "mu", "sigma"});
    return TargetDistribution::gaussian(get_or(j, "mu", 0.0), get_or(j, "sigma", 0.3));
  }
  if (kind == "laplace") {
    check_keys(j, where, {"kind", "loc", "scale"});
    return TargetDistribution::laplace(get_or(j, "loc", 0.0), get_or(j, "scale", 0.15));
  }
  if (kind == "uniform") {
    check_keys(j, where, {"kind", "half_width"});
    return TargetDistribution::uniform(get_or(j, "half_width", 0.9));
  }
  throw std::runtime_error("config: " + where + ": unknown target kind '" + kind + "'");
}

std::string target_label(const json& j) {
  return j.is_string() ? j.get<std::string>() : j.at("kind").get<std::string>();
}

DatasetConfig parse_dataset(const json& j) {
  check_keys(j, "dataset", {"synth", "path", "format"});
  DatasetConfig dc;
  const bool has_synth = j.contains("synth");
  const bool has_path = j.contains("path");
  if (has_synth == has_path)
    throw std::runtime_error("config: dataset needs exactly one of 'synth' or 'path'");
  if (has_synth) {
    const json& s = j.at("synth");
    check_keys(s, "dataset.synth",
               {"joints", "classes", "per_class", "frames", "chunks", "noise_std", "seed"});
    SynthSpec spec;
    spec.joints = get_or(s, "joints", spec.joints);
    spec.classes = get_or(s, "classes", spec.classes);
    spec.per_class = get_or(s, "per_class", spec.per_class);
    spec.frames = get_or(s, "frames", spec.frames);
    spec.chunks = get_or(s, "chunks", spec.chunks);
    spec.noise_std = get_or(s, "noise_std", spec.noise_std);
    spec.seed = get_or(s, "seed", spec.seed);
    dc.synth = spec;
  } else {
    dc.path = j.at("path").get<std::string>();
    dc.format = data_format_from_string(get_or<std::string>(j, "format", "jsonl"));
  }
  return dc;
}

TrainConfig parse_train(const json& j, std::optional<std::pair<double, double>>& omega) {
  check_keys(j, "train",
             {"epochs", "batch_size", "lambda", "rate", "bins", "lr0", "lr_min", "lr_max",
              "seed", "quantile_mode", "sigma0", "sigma_decay", "target", "omega"});
  TrainConfig tc;
  tc.epochs = get_or(j, "epochs", tc.epochs);
  tc.batch_size = get_or(j, "batch_size", tc.batch_size);
  tc.lambda = get_or(j, "lambda", tc.lambda);
  tc.rate = get_or(j, "rate", tc.rate);
  tc.bins = get_or(j, "bins", tc.bins);
  tc.lr0 = get_or(j, "lr0", tc.lr0);
  tc.lr_min = get_or(j, "lr_min", tc.lr_min);
  tc.lr_max = get_or(j, "lr_max", tc.lr_max);
  tc.seed = get_or(j, "seed", tc.seed);
  tc.quantile_mode =
      quantile_mode_from_string(get_or<std::string>(j, "quantile_mode", "magnitude"));
  tc.sigma.sigma0 = get_or(j, "sigma0", tc.sigma.sigma0);
  tc.sigma.decay = get_or(j, "sigma_decay", tc.sigma.decay);
  if (j.contains("target")) tc.target = parse_target(j.at("target"), "train.target");
  if (j.contains("omega")) {
    const json& o = j.at("omega");
    if (!o.is_array() || o.size() != 2)
      throw std::runtime_error("config: train.omega must be [min, max]");
    omega = {o.at(0).get<double>(), o.at(1).get<double>()};
    tc.target.omega_min = omega->first;
    tc.target.omega_max = omega->second;
  }
  return tc;
}

std::string mode_name(WeightMode m) {
  switch (m) {
    case WeightMode::BandStop: return "band-stop";
    case WeightMode::Plain: return "plain";
    case WeightMode::HardExport: return "hard-export";
  }
  return "?";
}

EpochCallback progress_printer(std::ostream& err, int epochs, const std::string& tag) {
  const int stride = std::max(1, epochs / 10);
  return [&err, stride, epochs, tag](const EpochMetrics& m) {
    if (m.epoch % stride == 0 || m.epoch + 1 == epochs)
      err << tag << " epoch " << (m.epoch + 1) << "/" << epochs << " loss=" << m.loss
          << " test_acc=" << m.test_acc << "\n";
  };
}

ReportRow row_from(const TrainResult& r, const std::string& method, double fixed_pr,
                   const std::string& target, std::uint64_t seed, double wall_s) {
  ReportRow row;
  row.method = method;
  row.fixed_pr = fixed_pr;
  row.observed_pr = r.history.back().observed_pr;
  row.gap = std::abs(row.observed_pr - fixed_pr);
  row.target = target;
  row.accuracy = r.final_test_acc;
  row.seed = seed;
  row.wall_time_s = wall_s;
  return row;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void require_stream(const std::ofstream& os, const std::string& path) {
  if (!os) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::Pmp: return "pmp";
    case Method::Dense: return "dense";
    case Method::Mp: return "mp";
  }
  return "?";
}

Method method_from_string(const std::string& s) {
  if (s == "pmp") return Method::Pmp;
  if (s == "dense") return Method::Dense;
  if (s == "mp") return Method::Mp;
  throw std::invalid_argument("unknown method '" + s + "' (expected pmp, dense or mp)");
}

TargetDistribution default_target(const std::string& kind) {
  // presets pin the default support [-1, 1]; explicit target objects get the
  // factory bounds instead
  if (kind == "gaussian") return TargetDistribution::gaussian(0.0, 0.3, -1.0, 1.0);
  if (kind == "laplace") return TargetDistribution::laplace(0.0, 0.15, -1.0, 1.0);
  if (kind == "uniform") return TargetDistribution::uniform(0.9, -1.0, 1.0);
  throw std::invalid_argument("unknown target kind '" + kind +
                              "' (expected gaussian, laplace or uniform)");
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw std::runtime_error("config '" + path + "': " + e.what());
  }
  if (!j.is_object())
    throw std::runtime_error("config '" + path + "': top level must be an object");
  check_keys(j, "the top level",
             {"version", "output_dir", "dataset", "gcn", "train", "method", "sweep"});

  ExperimentConfig cfg;
  if (!j.contains("version")) throw std::runtime_error("config: missing 'version'");
  cfg.version = j.at("version").get<int>();
  if (cfg.version != 1)
    throw std::runtime_error("config: unsupported version " + std::to_string(cfg.version));
  cfg.output_dir = get_or<std::string>(j, "output_dir", "");
  if (!j.contains("dataset")) throw std::runtime_error("config: missing 'dataset'");
  cfg.dataset = parse_dataset(j.at("dataset"));

  if (j.contains("gcn")) {
    const json& g = j.at("gcn");
    check_keys(g, "gcn", {"s_emb", "heads", "filters", "dense_dim", "depth"});
    cfg.gcn.s_emb = get_or(g, "s_emb", cfg.gcn.s_emb);
    cfg.gcn.heads = get_or(g, "heads", cfg.gcn.heads);
    cfg.gcn.filters = get_or(g, "filters", cfg.gcn.filters);
    cfg.gcn.dense_dim = get_or(g, "dense_dim", cfg.gcn.dense_dim);
    cfg.gcn.depth = get_or(g, "depth", cfg.gcn.depth);
  }

  std::optional<std::pair<double, double>> omega;
  if (j.contains("train")) cfg.train = parse_train(j.at("train"), omega);
  cfg.train.validate();
  cfg.method = method_from_string(get_or<std::string>(j, "method", "pmp"));

  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    check_keys(s, "sweep", {"rates", "targets", "seeds", "include_mp_baseline"});
    SweepConfig sw;
    sw.rates = s.at("rates").get<std::vector<double>>();
    sw.seeds = s.at("seeds").get<std::vector<std::uint64_t>>();
    for (const json& t : s.at("targets")) {
      TargetDistribution dist = parse_target(t, "sweep.targets");
      if (omega) {
        dist.omega_min = omega->first;
        dist.omega_max = omega->second;
      }
      dist.validate();
      sw.targets.emplace_back(target_label(t), dist);
    }
    sw.include_mp_baseline = get_or(s, "include_mp_baseline", true);
    if (sw.rates.empty() || sw.targets.empty() || sw.seeds.empty())
      throw std::runtime_error("config: sweep rates, targets and seeds must be non-empty");
    for (double r : sw.rates)
      if (!(r >= 0.0 && r < 1.0))
        throw std::runtime_error("config: sweep rates must lie in [0, 1)");
    cfg.sweep = std::move(sw);
  }
  return cfg;
}

Dataset realize_dataset(const DatasetConfig& dc) {
  if (dc.synth) {
    RawDataset raw = synth_dataset(dc.synth->joints, dc.synth->classes, dc.synth->per_class,
                                   dc.synth->frames, dc.synth->noise_std, dc.synth->seed);
    raw.meta.chunks = dc.synth->chunks;
    return build_dataset(raw);
  }
  return load_dataset(dc.path, dc.format);
}

std::string resolve_output_dir(const std::string& configured) {
  if (configured.empty()) return configured;
  const fs::path p(configured);
  const char* root = std::getenv("PMP_OUTPUT_ROOT");
  if (p.is_absolute() || root == nullptr || *root == '\0') return p.string();
  return (fs::path(root) / p).string();
}

void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& history) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  os << kMetricsSchema << "\n" << kMetricsHeader << "\n";
  for (const EpochMetrics& m : history)
    os << m.epoch << ',' << fmt_double(m.loss) << ',' << fmt_double(m.ce) << ','
       << fmt_double(m.kld) << ',' << fmt_double(m.observed_pr) << ',' << fmt_double(m.lr)
       << ',' << fmt_double(m.test_acc) << "\n";
  require_stream(os, path);
}

std::vector<EpochMetrics> read_metrics_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  std::string line;
  std::size_t lineno = 0;
  auto expect = [&](const char* want) {
    if (!std::getline(is, line) || line != want)
      throw std::runtime_error(path + ":" + std::to_string(lineno + 1) + ": expected '" +
                               want + "'");
    ++lineno;
  };
  expect(kMetricsSchema);
  expect(kMetricsHeader);
  std::vector<EpochMetrics> out;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    const auto f = split(line, ',');
    if (f.size() != 7) throw std::runtime_error(where + ": expected 7 fields");
    EpochMetrics m;
    m.epoch = static_cast<int>(parse_int(f[0], where));
    m.loss = parse_double(f[1], where);
    m.ce = parse_double(f[2], where);
    m.kld = parse_double(f[3], where);
    m.observed_pr = parse_double(f[4], where);
    m.lr = parse_double(f[5], where);
    m.test_acc = parse_double(f[6], where);
    out.push_back(m);
  }
  return out;
}

void write_report_csv(const std::string& path, const std::vector<ReportRow>& rows) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  os << kReportSchema << "\n" << kReportHeader << "\n";
  for (const ReportRow& r : rows)
    os << r.method << ',' << fmt_double(r.fixed_pr) << ',' << fmt_double(r.observed_pr) << ','
       << fmt_double(r.gap) << ',' << r.target << ',' << fmt_double(r.accuracy) << ','
       << r.seed << ',' << fmt_double(r.wall_time_s) << "\n";
  require_stream(os, path);
}

std::vector<ReportRow> read_report_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  std::string line;
  std::size_t lineno = 0;
  auto expect = [&](const char* want) {
    if (!std::getline(is, line) || line != want)
      throw std::runtime_error(path + ":" + std::to_string(lineno + 1) + ": expected '" +
                               want + "'");
    ++lineno;
  };
  expect(kReportSchema);
  expect(kReportHeader);
  std::vector<ReportRow> out;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    const auto f = split(line, ',');
    if (f.size() != 8) throw std::runtime_error(where + ": expected 8 fields");
    ReportRow r;
    r.method = f[0];
    r.fixed_pr = parse_double(f[1], where);
    r.observed_pr = parse_double(f[2], where);
    r.gap = parse_double(f[3], where);
    r.target = f[4];
    r.accuracy = parse_double(f[5], where);
    r.seed = static_cast<std::uint64_t>(detail::parse_uint(f[6], where));
    r.wall_time_s = parse_double(f[7], where);
    out.push_back(r);
  }
  return out;
}

int cmd_run(const std::string& config_path, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg = load_config(config_path);
  if (cfg.output_dir.empty())
    throw std::runtime_error("config: 'run' requires output_dir");
  const fs::path out_dir = resolve_output_dir(cfg.output_dir);
  fs::create_directories(out_dir);
  Dataset ds = realize_dataset(cfg.dataset);
  GcnConfig gcn = make_gcn_config(ds, cfg.gcn);
  const std::string label =
      cfg.method == Method::Pmp ? to_string(cfg.train.target.kind) : "-";
  const EpochCallback progress =
      progress_printer(err, cfg.train.epochs, to_string(cfg.method));

  try {
    const auto t0 = std::chrono::steady_clock::now();
    TrainResult result;
    WeightMode deploy = WeightMode::Plain;
    switch (cfg.method) {
      case Method::Pmp:
        result = train_pmp(ds, gcn, cfg.train, progress);
        deploy = WeightMode::HardExport;
        break;
      case Method::Dense:
        result = train_dense(ds, gcn, cfg.train, progress);
        break;
      case Method::Mp:
        result = train_mp_baseline(ds, gcn, cfg.train, progress);
        break;
    }
    const double fixed = cfg.method == Method::Dense ? 0.0 : cfg.train.rate;
    const ReportRow row =
        row_from(result, to_string(cfg.method), fixed, label, cfg.train.seed, seconds_since(t0));

    write_metrics_csv((out_dir / "metrics.csv").string(), result.history);
    write_report_csv((out_dir / "report.csv").string(), {row});
    save_checkpoint((out_dir / "checkpoint.bin").string(), Checkpoint{result.model, deploy});

    out << "method=" << row.method << " rate=" << fmt_double(row.fixed_pr)
        << " observed=" << fmt_double(row.observed_pr) << " target=" << row.target
        << " accuracy=" << fmt_double(row.accuracy) << " seed=" << row.seed << "\n";
    for (const char* name : {"metrics.csv", "report.csv", "checkpoint.bin"})
      out << "wrote " << (out_dir / name).string() << "\n";
    return 0;
  } catch (const TrainingDiverged& e) {
    const fs::path diag = out_dir / "divergence.txt";
    {
      std::ofstream os(diag, std::ios::trunc);
      os << "training diverged: " << e.what() << "\n";
      os << "epochs completed: " << e.history.size() << "\n";
      const std::size_t tail = e.history.size() > 5 ? e.history.size() - 5 : 0;
      for (std::size_t i = tail; i < e.history.size(); ++i)
        os << "epoch " << e.history[i].epoch << " loss=" << fmt_double(e.history[i].loss)
           << " lr=" << fmt_double(e.history[i].lr) << "\n";
    }
    const WeightMode snap_mode =
        cfg.method == Method::Pmp ? WeightMode::BandStop : WeightMode::Plain;
    save_checkpoint((out_dir / "checkpoint.diverged.bin").string(),
                    Checkpoint{e.snapshot, snap_mode});
    err << "error: training diverged: " << e.what() << " (details in " << diag.string()
        << ")\n";
    return 2;
  }
}

int cmd_sweep(const std::string& config_path, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg = load_config(config_path);
  if (!cfg.sweep)
    throw std::runtime_error("config: a 'sweep' section is required by the sweep command");
  if (cfg.output_dir.empty())
    throw std::runtime_error("config: 'sweep' requires output_dir");
  const SweepConfig& sw = *cfg.sweep;
  const fs::path out_dir = resolve_output_dir(cfg.output_dir);
  fs::create_directories(out_dir);
  Dataset ds = realize_dataset(cfg.dataset);
  GcnConfig gcn = make_gcn_config(ds, cfg.gcn);

  std::vector<ReportRow> rows;
  std::vector<std::array<std::string, 5>> failures;
  auto record_failure = [&](const std::string& method, double rate, const std::string& target,
                            std::uint64_t seed, const std::string& what) {
    std::string msg = what;
    for (char& c : msg)
      if (c == ',' || c == '\n') c = ';';
    failures.push_back({method, fmt_double(rate), target, std::to_string(seed), msg});
    err << "sweep cell failed: method=" << method << " rate=" << fmt_double(rate)
        << " target=" << target << " seed=" << seed << ": " << what << "\n";
  };

  for (std::uint64_t seed : sw.seeds) {
    TrainConfig base = cfg.train;
    base.seed = seed;
    if (sw.include_mp_baseline) {
      TrainConfig tc = base;
      tc.rate = 0.0;
      std::optional<TrainResult> stage1;
      try {
        const auto t0 = std::chrono::steady_clock::now();
        stage1 = train_dense(ds, gcn, tc, {});
        rows.push_back(row_from(*stage1, "dense", 0.0, "-", seed, seconds_since(t0)));
      } catch (const TrainingDiverged& e) {
        record_failure("dense", 0.0, "-", seed, e.what());
      }
      if (stage1)
        for (double rate : sw.rates) {
          TrainConfig tc2 = base;
          tc2.rate = rate;
          try {
            const auto t0 = std::chrono::steady_clock::now();
            TrainResult r = mp_prune_retrain(stage1->model, ds, gcn, tc2, {});
            rows.push_back(row_from(r, "mp", rate, "-", seed, seconds_since(t0)));
          } catch (const TrainingDiverged& e) {
            record_failure("mp", rate, "-", seed, e.what());
          }
        }
    }
    for (const auto& [target_name, dist] : sw.targets)
      for (double rate : sw.rates) {
        TrainConfig tc = base;
        tc.rate = rate;
        tc.target = dist;
        try {
          const auto t0 = std::chrono::steady_clock::now();
          TrainResult r = train_pmp(ds, gcn, tc, {});
          rows.push_back(row_from(r, "pmp", rate, target_name, seed, seconds_since(t0)));
        } catch (const TrainingDiverged& e) {
          record_failure("pmp", rate, target_name, seed, e.what());
        }
      }
  }

  write_report_csv((out_dir / "report.csv").string(), rows);
  {
    const std::string path = (out_dir / "failures.csv").string();
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    os << "# schema: pmp.failures.v1\nmethod,fixed_pr,target,seed,error\n";
    for (const auto& f : failures) os << f[0] << ',' << f[1] << ',' << f[2] << ',' << f[3]
                                      << ',' << f[4] << "\n";
    require_stream(os, path);
  }
  {
    // mean per (method, rate, target) across seeds
    struct Agg {
      std::size_t n = 0;
      double observed = 0, gap = 0, acc = 0;
    };
    std::map<std::tuple<std::string, double, std::string>, Agg> groups;
    for (const ReportRow& r : rows) {
      Agg& a = groups[{r.method, r.fixed_pr, r.target}];
      ++a.n;
      a.observed += r.observed_pr;
      a.gap += r.gap;
      a.acc += r.accuracy;
    }
    const std::string path = (out_dir / "aggregate.csv").string();
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    os << "# schema: pmp.aggregate.v1\n";
    os << "method,fixed_pr,target,runs,mean_observed_pr,mean_gap,mean_accuracy\n";
    for (const auto& [key, a] : groups) {
      const double n = static_cast<double>(a.n);
      os << std::get<0>(key) << ',' << fmt_double(std::get<1>(key)) << ','
         << std::get<2>(key) << ',' << a.n << ',' << fmt_double(a.observed / n) << ','
         << fmt_double(a.gap / n) << ',' << fmt_double(a.acc / n) << "\n";
      out << std::get<0>(key) << " rate=" << fmt_double(std::get<1>(key))
          << " target=" << std::get<2>(key) << " runs=" << a.n
          << " mean_observed=" << fmt_double(a.observed / n)
          << " mean_accuracy=" << fmt_double(a.acc / n) << "\n";
    }
    require_stream(os, path);
  }
  out << "wrote " << (out_dir / "report.csv").string() << "\n";
  out << "wrote " << (out_dir / "aggregate.csv").string() << "\n";
  out << "wrote " << (out_dir / "failures.csv").string() << "\n";
  if (!failures.empty())
    err << failures.size() << " sweep cell(s) failed; see failures.csv\n";
  return rows.empty() ? 1 : 0;
}

int cmd_dump_curves(const std::string& config_path, const std::string& checkpoint_path,
                    const std::string& out_dir_override, std::ostream& out, std::ostream&) {
  ExperimentConfig cfg = load_config(config_path);
  fs::path dir;
  if (!out_dir_override.empty())
    dir = resolve_output_dir(out_dir_override);
  else if (!cfg.output_dir.empty())
    dir = fs::path(resolve_output_dir(cfg.output_dir)) / "curves";
  else
    throw std::runtime_error("dump-curves needs --out or a config output_dir");
  fs::create_directories(dir);

  const TargetDistribution& target = cfg.train.target;
  BandStopConfig bs;
  bs.a = pruning_threshold(target, cfg.train.rate, cfg.train.quantile_mode);
  bs.sigma = cfg.train.sigma.at(0);
  bs.validate();
  const BinGrid grid = make_grid(target.omega_min, target.omega_max, cfg.train.bins);

  {
    const std::string path = (dir / "psi.csv").string();
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    os << "# schema: pmp.psi.v1\nw,psi,effective\n";
    const int points = 400;
    for (int i = 0; i < points; ++i) {
      const double w = target.omega_min +
                       (target.omega_max - target.omega_min) *
                           (static_cast<double>(i) / (points - 1));
      const double psi = band_stop(w, bs);
      os << fmt_double(w) << ',' << fmt_double(psi) << ',' << fmt_double(w * psi) << "\n";
    }
    require_stream(os, path);
    out << "wrote " << path << "\n";
  }
  {
    const DiscreteLaw law = discretize(target, grid.centers);
    const std::string path = (dir / "target.csv").string();
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    os << "# schema: pmp.target.v1\ncenter,prob\n";
    for (std::size_t k = 0; k < law.bins.size(); ++k)
      os << fmt_double(law.bins[k]) << ',' << fmt_double(law.probs[k]) << "\n";
    require_stream(os, path);
    out << "wrote " << path << "\n";
  }
  if (!checkpoint_path.empty()) {
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);
    const auto latents = ckpt.model.prunable_latents();
    const std::vector<double> soft = soft_histogram_eval(latents, grid);
    const std::vector<double> hard = hard_histogram(latents, grid);
    const std::string path = (dir / "observed.csv").string();
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    os << "# schema: pmp.observed.v1\ncenter,soft,hard\n";
    for (std::size_t k = 0; k < grid.centers.size(); ++k)
      os << fmt_double(grid.centers[k]) << ',' << fmt_double(soft[k]) << ','
         << fmt_double(hard[k]) << "\n";
    require_stream(os, path);
    out << "wrote " << path << "\n";
  }
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& config_path,
             std::ostream& out, std::ostream& err) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  ExperimentConfig cfg = load_config(config_path);
  Dataset ds = realize_dataset(cfg.dataset);
  if (ckpt.model.config.nodes != ds.nodes || ckpt.model.config.s_raw != ds.s_raw ||
      ckpt.model.config.classes != static_cast<int>(ds.meta.class_names.size()))
    throw std::runtime_error("checkpoint geometry does not match the dataset");
  if (ds.test.empty()) throw std::runtime_error("dataset has no test split");

  const EvalResult r = evaluate(ckpt.model, ds.test, ckpt.weight_mode);
  for (const std::string& w : r.warnings) err << "warning: " << w << "\n";
  out << "weights=" << mode_name(ckpt.weight_mode) << "\n";
  for (std::size_t c = 0; c < r.per_class.size(); ++c)
    out << "class " << ds.meta.class_names[c] << " accuracy=" << fmt_double(r.per_class[c])
        << " support=" << r.support[c] << "\n";
  out << "macro_accuracy=" << fmt_double(r.accuracy) << "\n";
  return 0;
}

int cmd_data_synth(const SynthSpec& spec, const std::string& out_path, DataFormat format,
                   std::ostream& out, std::ostream&) {
  RawDataset raw = synth_dataset(spec.joints, spec.classes, spec.per_class, spec.frames,
                                 spec.noise_std, spec.seed);
  raw.meta.chunks = spec.chunks;
  write_raw(out_path, raw, format);
  out << "wrote " << out_path << " (" << raw.records.size() << " records, " << spec.classes
      << " classes, " << spec.joints << " joints)\n";
  return 0;
}

int cmd_data_validate(const std::string& path, DataFormat format, std::ostream& out,
                      std::ostream&) {
  const RawDataset raw = read_raw(path, format);
  const Dataset ds = build_dataset(raw);
  out << "ok: " << raw.records.size() << " records, " << ds.meta.class_names.size()
      << " classes, " << ds.nodes << " joints, " << ds.train.size() << " train / "
      << ds.test.size() << " test, " << ds.meta.chunks << " chunks -> " << ds.s_raw
      << " channels per node\n";
  return 0;
}

}  // namespace pmp
