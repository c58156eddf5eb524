#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pmp/gcn.hpp"
#include "pmp/tensor.hpp"

namespace pmp {

struct JointFrame {
  double t = 0.0;
  double x = 0.0, y = 0.0, z = 0.0;
};

// One recorded action: a trajectory per joint plus the skeleton edges. All
// joints carry the same number of frames.
struct SkeletonSequence {
  int label = 0;
  std::vector<std::vector<JointFrame>> joints;
  std::vector<std::pair<int, int>> edges;
  void validate(int num_classes) const;
};

struct SequenceRecord {
  std::string split;  // "train" or "test"
  SkeletonSequence seq;
};

struct DatasetMeta {
  std::vector<std::string> class_names;
  int chunks = 32;  // M, temporal chunks per sequence
};

// Sequences as stored on disk, before chunking.
struct RawDataset {
  DatasetMeta meta;
  std::vector<SequenceRecord> records;
  void validate() const;
};

// Model-ready view: standardized, chunked samples plus the shared
// row-stochastic adjacency.
struct Dataset {
  DatasetMeta meta;
  std::vector<GraphSample> train;
  std::vector<GraphSample> test;
  Tensor adjacency;  // nodes x nodes
  int nodes = 0;
  int s_raw = 0;  // 3 * meta.chunks
};

// Splits the frame index range [0, T) into M contiguous chunks, chunk i
// covering [floor(i*T/M), floor((i+1)*T/M)), and emits the per-chunk mean
// (x, y, z) of each joint, concatenated chunk-major into a 3M x n signal.
// Frames are ordered by timestamp first. Chunks that receive no frames copy
// the nearest preceding filled chunk (the nearest following one when no
// earlier chunk is filled), so e.g. a single-frame sequence repeats that
// frame in every chunk.
Tensor temporal_chunking(const SkeletonSequence& seq, int M);

// Zero mean, unit variance per coordinate axis over all joints and frames of
// one sequence. An axis with (near-)zero variance is left centered only.
SkeletonSequence standardize(const SkeletonSequence& seq);

// Row-normalized adjacency of the undirected edge set plus self-loops:
// A[i][j] = 1/deg(i) for j in N(i) u {i}.
Tensor adjacency_from_edges(int n, const std::vector<std::pair<int, int>>& edges);

enum class DataFormat { Jsonl, Csv };
DataFormat data_format_from_string(const std::string& s);

// Synthetic action corpus: every class owns a smooth sinusoid prototype per
// joint axis (class-seeded amplitude/frequency/phase/offset) and samples add
// N(0, noise_std) jitter. Joints connect as a root with three-joint branches.
// Emits per_class training and ceil(per_class/2) test sequences per class,
// bit-reproducible for a given seed.
RawDataset synth_dataset(int n_joints, int classes, int per_class, int frames,
                         double noise_std, std::uint64_t seed);

// Parse errors carry 1-based line numbers in the message.
RawDataset read_raw(const std::string& path, DataFormat format);
void write_raw(const std::string& path, const RawDataset& raw, DataFormat format);

// Standardize, chunk with meta.chunks, and build the shared adjacency. All
// records must agree on joint count and edge set.
Dataset build_dataset(const RawDataset& raw);

Dataset load_dataset(const std::string& path, DataFormat format);

}  // namespace pmp
