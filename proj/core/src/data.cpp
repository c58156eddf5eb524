#include "pmp/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "seed_util.hpp"
#include "text_util.hpp"

namespace pmp {

namespace {

using nlohmann::json;
using detail::mix_seed;
using detail::split;

constexpr const char* kFormatTag = "pmp-skeleton-v1";

[[noreturn]] void fail_line(const std::string& path, std::size_t line, const std::string& msg) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + msg);
}

void check_split_name(const std::string& s, const std::string& path, std::size_t line) {
  if (s != "train" && s != "test") fail_line(path, line, "split must be 'train' or 'test'");
}

}  // namespace

void SkeletonSequence::validate(int num_classes) const {
  if (label < 0 || label >= num_classes)
    throw std::invalid_argument("sequence label " + std::to_string(label) +
                                " outside [0, " + std::to_string(num_classes) + ")");
  if (joints.empty()) throw std::invalid_argument("sequence has no joints");
  const std::size_t frames = joints.front().size();
  if (frames == 0) throw std::invalid_argument("sequence has no frames");
  for (const auto& j : joints)
    if (j.size() != frames)
      throw std::invalid_argument("joints disagree on frame count");
  const int n = static_cast<int>(joints.size());
  for (const auto& [a, b] : edges) {
    if (a < 0 || a >= n || b < 0 || b >= n)
      throw std::invalid_argument("edge endpoint outside joint range");
    if (a == b) throw std::invalid_argument("self edges are implicit, do not list them");
  }
}

void RawDataset::validate() const {
  if (meta.class_names.empty()) throw std::invalid_argument("dataset has no classes");
  if (meta.chunks < 1) throw std::invalid_argument("dataset chunk count must be positive");
  if (records.empty()) throw std::invalid_argument("dataset has no records");
  const std::size_t n = records.front().seq.joints.size();
  const auto& edges = records.front().seq.edges;
  for (const SequenceRecord& r : records) {
    if (r.split != "train" && r.split != "test")
      throw std::invalid_argument("record split must be 'train' or 'test'");
    r.seq.validate(static_cast<int>(meta.class_names.size()));
    if (r.seq.joints.size() != n)
      throw std::invalid_argument("records disagree on joint count");
    if (r.seq.edges != edges)
      throw std::invalid_argument("records disagree on the skeleton edge set");
  }
}

Tensor temporal_chunking(const SkeletonSequence& seq, int M) {
  if (M < 1) throw std::invalid_argument("temporal_chunking: M must be positive");
  if (seq.joints.empty()) throw std::invalid_argument("temporal_chunking: no joints");
  const std::size_t n = seq.joints.size();
  const std::size_t T = seq.joints.front().size();
  if (T == 0) throw std::invalid_argument("temporal_chunking: no frames");
  for (const auto& j : seq.joints)
    if (j.size() != T)
      throw std::invalid_argument("temporal_chunking: joints disagree on frame count");

  // Timestamp order decides the frame index used by the chunk arithmetic.
  std::vector<std::size_t> order(T);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return seq.joints.front()[a].t < seq.joints.front()[b].t;
  });

  const std::size_t m = static_cast<std::size_t>(M);
  Tensor out({3 * m, n});
  std::vector<char> filled(m, 0);
  std::vector<double> mx(m), my(m), mz(m);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t c = 0; c < m; ++c) {
      const std::size_t lo = (c * T) / m;
      const std::size_t hi = ((c + 1) * T) / m;
      filled[c] = lo < hi;
      if (!filled[c]) continue;
      double sx = 0, sy = 0, sz = 0;
      for (std::size_t f = lo; f < hi; ++f) {
        const JointFrame& fr = seq.joints[j][order[f]];
        sx += fr.x;
        sy += fr.y;
        sz += fr.z;
      }
      const double cnt = static_cast<double>(hi - lo);
      mx[c] = sx / cnt;
      my[c] = sy / cnt;
      mz[c] = sz / cnt;
    }
    // forward fill, then backfill the leading run of empty chunks
    std::ptrdiff_t first_filled = -1;
    for (std::size_t c = 0; c < m; ++c) {
      if (filled[c]) {
        if (first_filled < 0) first_filled = static_cast<std::ptrdiff_t>(c);
        continue;
      }
      if (first_filled >= 0) {
        mx[c] = mx[c - 1];
        my[c] = my[c - 1];
        mz[c] = mz[c - 1];
        filled[c] = 1;
      }
    }
    if (first_filled > 0) {
      for (std::ptrdiff_t c = first_filled - 1; c >= 0; --c) {
        const std::size_t cc = static_cast<std::size_t>(c);
        mx[cc] = mx[cc + 1];
        my[cc] = my[cc + 1];
        mz[cc] = mz[cc + 1];
      }
    }
    for (std::size_t c = 0; c < m; ++c) {
      out.at(3 * c + 0, j) = mx[c];
      out.at(3 * c + 1, j) = my[c];
      out.at(3 * c + 2, j) = mz[c];
    }
  }
  return out;
}

SkeletonSequence standardize(const SkeletonSequence& seq) {
  if (seq.joints.empty()) throw std::invalid_argument("standardize: no joints");
  SkeletonSequence out = seq;
  double mean[3] = {0, 0, 0};
  std::size_t count = 0;
  for (const auto& j : seq.joints)
    for (const JointFrame& f : j) {
      mean[0] += f.x;
      mean[1] += f.y;
      mean[2] += f.z;
      ++count;
    }
  if (count == 0) throw std::invalid_argument("standardize: no frames");
  for (double& m : mean) m /= static_cast<double>(count);
  double var[3] = {0, 0, 0};
  for (const auto& j : seq.joints)
    for (const JointFrame& f : j) {
      var[0] += (f.x - mean[0]) * (f.x - mean[0]);
      var[1] += (f.y - mean[1]) * (f.y - mean[1]);
      var[2] += (f.z - mean[2]) * (f.z - mean[2]);
    }
  double inv[3];
  for (int d = 0; d < 3; ++d) {
    const double sd = std::sqrt(var[d] / static_cast<double>(count));
    inv[d] = sd > 1e-12 ? 1.0 / sd : 1.0;
  }
  for (auto& j : out.joints)
    for (JointFrame& f : j) {
      f.x = (f.x - mean[0]) * inv[0];
      f.y = (f.y - mean[1]) * inv[1];
      f.z = (f.z - mean[2]) * inv[2];
    }
  return out;
}

Tensor adjacency_from_edges(int n, const std::vector<std::pair<int, int>>& edges) {
  if (n < 1) throw std::invalid_argument("adjacency_from_edges: n must be positive");
  std::vector<std::vector<char>> nb(static_cast<std::size_t>(n),
                                    std::vector<char>(static_cast<std::size_t>(n), 0));
  for (int i = 0; i < n; ++i) nb[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 1;
  for (const auto& [a, b] : edges) {
    if (a < 0 || a >= n || b < 0 || b >= n)
      throw std::invalid_argument("adjacency_from_edges: edge endpoint outside [0, n)");
    nb[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = 1;
    nb[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)] = 1;
  }
  Tensor adj({static_cast<std::size_t>(n), static_cast<std::size_t>(n)});
  for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
    double deg = 0;
    for (std::size_t j = 0; j < static_cast<std::size_t>(n); ++j) deg += nb[i][j];
    for (std::size_t j = 0; j < static_cast<std::size_t>(n); ++j)
      if (nb[i][j]) adj.at(i, j) = 1.0 / deg;
  }
  return adj;
}

DataFormat data_format_from_string(const std::string& s) {
  if (s == "jsonl") return DataFormat::Jsonl;
  if (s == "csv") return DataFormat::Csv;
  throw std::invalid_argument("unknown data format '" + s + "' (expected jsonl or csv)");
}

RawDataset synth_dataset(int n_joints, int classes, int per_class, int frames,
                         double noise_std, std::uint64_t seed) {
  if (n_joints < 2) throw std::invalid_argument("synth_dataset: need at least two joints");
  if (classes < 2) throw std::invalid_argument("synth_dataset: need at least two classes");
  if (per_class < 1) throw std::invalid_argument("synth_dataset: per_class must be positive");
  if (frames < 1) throw std::invalid_argument("synth_dataset: frames must be positive");
  if (noise_std < 0.0) throw std::invalid_argument("synth_dataset: noise_std must be >= 0");

  RawDataset raw;
  raw.meta.chunks = 32;
  for (int c = 0; c < classes; ++c) raw.meta.class_names.push_back("class" + std::to_string(c));

  // root joint with branches of three
  std::vector<std::pair<int, int>> edges;
  for (int j = 1; j < n_joints; ++j) edges.emplace_back(j % 3 == 1 ? 0 : j - 1, j);

  struct Proto {
    double amp, freq, phase, offset;
  };
  std::vector<Proto> protos(static_cast<std::size_t>(classes * n_joints * 3));
  for (int c = 0; c < classes; ++c) {
    std::mt19937_64 rng(mix_seed(seed, 0x100000 + static_cast<std::uint64_t>(c)));
    std::uniform_real_distribution<double> amp(0.4, 1.2), freq(0.5, 2.75),
        phase(0.0, 2.0 * 3.14159265358979323846), offset(-0.5, 0.5);
    for (int j = 0; j < n_joints; ++j)
      for (int d = 0; d < 3; ++d)
        protos[static_cast<std::size_t>((c * n_joints + j) * 3 + d)] = {amp(rng), freq(rng),
                                                                        phase(rng), offset(rng)};
  }

  auto make_sequence = [&](int c, int sample_idx) {
    SkeletonSequence s;
    s.label = c;
    s.edges = edges;
    s.joints.resize(static_cast<std::size_t>(n_joints));
    std::mt19937_64 rng(
        mix_seed(seed, 0x200000 + static_cast<std::uint64_t>(c) * 100003 +
                           static_cast<std::uint64_t>(sample_idx)));
    std::normal_distribution<double> noise(0.0, noise_std);
    for (int j = 0; j < n_joints; ++j) {
      auto& traj = s.joints[static_cast<std::size_t>(j)];
      traj.resize(static_cast<std::size_t>(frames));
      for (int t = 0; t < frames; ++t) {
        const double u = static_cast<double>(t) / static_cast<double>(frames);
        double coord[3];
        for (int d = 0; d < 3; ++d) {
          const Proto& p = protos[static_cast<std::size_t>((c * n_joints + j) * 3 + d)];
          coord[d] = p.offset +
                     p.amp * std::sin(2.0 * 3.14159265358979323846 * p.freq * u + p.phase) +
                     (noise_std > 0.0 ? noise(rng) : 0.0);
        }
        traj[static_cast<std::size_t>(t)] = {static_cast<double>(t), coord[0], coord[1],
                                             coord[2]};
      }
    }
    return s;
  };

  const int test_per_class = (per_class + 1) / 2;
  for (int c = 0; c < classes; ++c)
    for (int i = 0; i < per_class; ++i)
      raw.records.push_back({"train", make_sequence(c, i)});
  for (int c = 0; c < classes; ++c)
    for (int i = 0; i < test_per_class; ++i)
      raw.records.push_back({"test", make_sequence(c, per_class + i)});
  raw.validate();
  return raw;
}

namespace {

json sequence_to_json(const SequenceRecord& r) {
  json rec;
  rec["split"] = r.split;
  rec["label"] = r.seq.label;
  rec["joints"] = r.seq.joints.size();
  rec["frames"] = r.seq.joints.front().size();
  json edges = json::array();
  for (const auto& [a, b] : r.seq.edges) edges.push_back(json::array({a, b}));
  rec["edges"] = std::move(edges);
  const std::size_t T = r.seq.joints.front().size();
  json coords = json::array();
  json times = json::array();
  bool default_times = true;
  for (std::size_t t = 0; t < T; ++t) {
    times.push_back(r.seq.joints.front()[t].t);
    if (r.seq.joints.front()[t].t != static_cast<double>(t)) default_times = false;
  }
  for (const auto& j : r.seq.joints)
    for (const JointFrame& f : j) {
      coords.push_back(f.x);
      coords.push_back(f.y);
      coords.push_back(f.z);
    }
  rec["coords"] = std::move(coords);
  if (!default_times) rec["times"] = std::move(times);
  return rec;
}

SequenceRecord sequence_from_json(const json& rec, const std::string& path, std::size_t line) {
  for (const auto& [key, _] : rec.items()) {
    (void)_;
    if (key != "split" && key != "label" && key != "joints" && key != "frames" &&
        key != "edges" && key != "coords" && key != "times")
      fail_line(path, line, "unknown key '" + key + "' in record");
  }
  SequenceRecord r;
  try {
    r.split = rec.at("split").get<std::string>();
    r.seq.label = rec.at("label").get<int>();
    const std::size_t n = rec.at("joints").get<std::size_t>();
    const std::size_t T = rec.at("frames").get<std::size_t>();
    for (const auto& e : rec.at("edges"))
      r.seq.edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    const auto& coords = rec.at("coords");
    if (coords.size() != n * T * 3)
      fail_line(path, line,
                "coords length " + std::to_string(coords.size()) + " does not match joints*frames*3");
    std::vector<double> times(T);
    for (std::size_t t = 0; t < T; ++t) times[t] = static_cast<double>(t);
    if (rec.contains("times")) {
      const auto& tv = rec.at("times");
      if (tv.size() != T) fail_line(path, line, "times length does not match frames");
      for (std::size_t t = 0; t < T; ++t) times[t] = tv.at(t).get<double>();
    }
    r.seq.joints.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      r.seq.joints[j].resize(T);
      for (std::size_t t = 0; t < T; ++t) {
        const std::size_t base = (j * T + t) * 3;
        r.seq.joints[j][t] = {times[t], coords.at(base).get<double>(),
                              coords.at(base + 1).get<double>(),
                              coords.at(base + 2).get<double>()};
      }
    }
  } catch (const json::exception& e) {
    fail_line(path, line, std::string("malformed record: ") + e.what());
  }
  check_split_name(r.split, path, line);
  return r;
}

RawDataset read_jsonl(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open dataset '" + path + "'");
  RawDataset raw;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      fail_line(path, lineno, std::string("invalid JSON: ") + e.what());
    }
    if (!have_header) {
      if (!rec.contains("format") || rec["format"] != kFormatTag)
        fail_line(path, lineno, std::string("first record must declare format '") + kFormatTag +
                                    "'");
      for (const auto& [key, _] : rec.items()) {
        (void)_;
        if (key != "format" && key != "classes" && key != "chunks")
          fail_line(path, lineno, "unknown key '" + key + "' in header");
      }
      try {
        raw.meta.class_names = rec.at("classes").get<std::vector<std::string>>();
        raw.meta.chunks = rec.at("chunks").get<int>();
      } catch (const json::exception& e) {
        fail_line(path, lineno, std::string("malformed header: ") + e.what());
      }
      have_header = true;
      continue;
    }
    raw.records.push_back(sequence_from_json(rec, path, lineno));
  }
  if (!have_header) throw std::runtime_error(path + ": empty dataset file");
  try {
    raw.validate();
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  return raw;
}

void write_jsonl(const std::string& path, const RawDataset& raw) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  json header;
  header["format"] = kFormatTag;
  header["classes"] = raw.meta.class_names;
  header["chunks"] = raw.meta.chunks;
  os << header.dump() << "\n";
  for (const SequenceRecord& r : raw.records) os << sequence_to_json(r).dump() << "\n";
  if (!os) throw std::runtime_error("write to '" + path + "' failed");
}

RawDataset read_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open dataset '" + path + "'");
  RawDataset raw;
  std::string line;
  std::size_t lineno = 0;

  if (!std::getline(is, line)) throw std::runtime_error(path + ": empty dataset file");
  ++lineno;
  {
    // "# pmp-skeleton-v1 classes=a|b|c chunks=32"
    std::istringstream ss(line);
    std::string hash, tag, classes_kv, chunks_kv;
    ss >> hash >> tag >> classes_kv >> chunks_kv;
    if (hash != "#" || tag != kFormatTag || classes_kv.rfind("classes=", 0) != 0 ||
        chunks_kv.rfind("chunks=", 0) != 0)
      fail_line(path, lineno, std::string("header must be '# ") + kFormatTag +
                                  " classes=<a|b|...> chunks=<M>'");
    for (const std::string& c : split(classes_kv.substr(8), '|'))
      if (!c.empty()) raw.meta.class_names.push_back(c);
    raw.meta.chunks = static_cast<int>(
        detail::parse_int(chunks_kv.substr(7), path + ":" + std::to_string(lineno)));
  }
  if (!std::getline(is, line)) throw std::runtime_error(path + ": missing column header");
  ++lineno;
  if (line != "split,label,joints,frames,edges,coords")
    fail_line(path, lineno, "expected column header 'split,label,joints,frames,edges,coords'");

  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    const auto fields = split(line, ',');
    if (fields.size() != 6) fail_line(path, lineno, "expected 6 comma-separated fields");
    SequenceRecord r;
    r.split = fields[0];
    check_split_name(r.split, path, lineno);
    r.seq.label = static_cast<int>(detail::parse_int(fields[1], where));
    const auto n = static_cast<std::size_t>(detail::parse_int(fields[2], where));
    const auto T = static_cast<std::size_t>(detail::parse_int(fields[3], where));
    if (!fields[4].empty())
      for (const std::string& e : split(fields[4], ';')) {
        const auto ends = split(e, '-');
        if (ends.size() != 2) fail_line(path, lineno, "edge '" + e + "' must look like 'a-b'");
        r.seq.edges.emplace_back(static_cast<int>(detail::parse_int(ends[0], where)),
                                 static_cast<int>(detail::parse_int(ends[1], where)));
      }
    const auto coords = split(fields[5], ';');
    if (coords.size() != n * T * 3)
      fail_line(path, lineno, "coords length " + std::to_string(coords.size()) +
                                  " does not match joints*frames*3");
    r.seq.joints.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      r.seq.joints[j].resize(T);
      for (std::size_t t = 0; t < T; ++t) {
        const std::size_t base = (j * T + t) * 3;
        r.seq.joints[j][t] = {static_cast<double>(t), detail::parse_double(coords[base], where),
                              detail::parse_double(coords[base + 1], where),
                              detail::parse_double(coords[base + 2], where)};
      }
    }
    raw.records.push_back(std::move(r));
  }
  try {
    raw.validate();
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  return raw;
}

void write_csv(const std::string& path, const RawDataset& raw) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  os << "# " << kFormatTag << " classes=";
  for (std::size_t i = 0; i < raw.meta.class_names.size(); ++i) {
    if (i) os << '|';
    os << raw.meta.class_names[i];
  }
  os << " chunks=" << raw.meta.chunks << "\n";
  os << "split,label,joints,frames,edges,coords\n";
  for (const SequenceRecord& r : raw.records) {
    os << r.split << ',' << r.seq.label << ',' << r.seq.joints.size() << ','
       << r.seq.joints.front().size() << ',';
    for (std::size_t i = 0; i < r.seq.edges.size(); ++i) {
      if (i) os << ';';
      os << r.seq.edges[i].first << '-' << r.seq.edges[i].second;
    }
    os << ',';
    bool first = true;
    for (const auto& j : r.seq.joints)
      for (const JointFrame& f : j) {
        if (!first) os << ';';
        first = false;
        os << detail::fmt_double(f.x) << ';' << detail::fmt_double(f.y) << ';'
           << detail::fmt_double(f.z);
      }
    os << "\n";
  }
  if (!os) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace

RawDataset read_raw(const std::string& path, DataFormat format) {
  return format == DataFormat::Jsonl ? read_jsonl(path) : read_csv(path);
}

void write_raw(const std::string& path, const RawDataset& raw, DataFormat format) {
  raw.validate();
  if (format == DataFormat::Jsonl)
    write_jsonl(path, raw);
  else
    write_csv(path, raw);
}

Dataset build_dataset(const RawDataset& raw) {
  raw.validate();
  Dataset ds;
  ds.meta = raw.meta;
  ds.nodes = static_cast<int>(raw.records.front().seq.joints.size());
  ds.s_raw = 3 * raw.meta.chunks;
  ds.adjacency = adjacency_from_edges(ds.nodes, raw.records.front().seq.edges);
  for (const SequenceRecord& r : raw.records) {
    GraphSample sample;
    sample.label = r.seq.label;
    sample.node_signal = temporal_chunking(standardize(r.seq), raw.meta.chunks);
    if (r.split == "train")
      ds.train.push_back(std::move(sample));
    else
      ds.test.push_back(std::move(sample));
  }
  return ds;
}

Dataset load_dataset(const std::string& path, DataFormat format) {
  return build_dataset(read_raw(path, format));
}

}  // namespace pmp
