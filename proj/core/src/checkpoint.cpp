#include "pmp/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace pmp {

namespace {

constexpr char kMagic[8] = {'P', 'M', 'P', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(os, bits);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& is) {
  const std::uint64_t bits = get_u64(is);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

void put_tensor(std::ostream& os, const std::string& name, const Tensor& t) {
  put_u32(os, static_cast<std::uint32_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  put_u32(os, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) put_u64(os, d);
  for (std::size_t i = 0; i < t.numel(); ++i) put_f64(os, t[i]);
}

std::pair<std::string, Tensor> get_tensor(std::istream& is) {
  const std::uint32_t name_len = get_u32(is);
  std::string name(name_len, '\0');
  is.read(name.data(), name_len);
  if (!is) throw std::runtime_error("checkpoint: truncated tensor name");
  const std::uint32_t rank = get_u32(is);
  std::vector<std::size_t> shape(rank);
  std::size_t numel = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    shape[i] = static_cast<std::size_t>(get_u64(is));
    numel *= shape[i];
  }
  std::vector<double> data(numel);
  for (std::size_t i = 0; i < numel; ++i) data[i] = get_f64(is);
  return {std::move(name), Tensor(std::move(shape), std::move(data))};
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
  os.write(kMagic, sizeof(kMagic));
  put_u32(os, kVersion);

  const GcnConfig& c = ckpt.model.config;
  put_u32(os, static_cast<std::uint32_t>(c.nodes));
  put_u32(os, static_cast<std::uint32_t>(c.s_raw));
  put_u32(os, static_cast<std::uint32_t>(c.s_emb));
  put_u32(os, static_cast<std::uint32_t>(c.heads));
  put_u32(os, static_cast<std::uint32_t>(c.filters));
  put_u32(os, static_cast<std::uint32_t>(c.dense_dim));
  put_u32(os, static_cast<std::uint32_t>(c.classes));
  put_u32(os, static_cast<std::uint32_t>(c.depth));
  put_f64(os, ckpt.model.bandstop.a);
  put_f64(os, ckpt.model.bandstop.sigma);
  put_u32(os, static_cast<std::uint32_t>(ckpt.weight_mode));

  const std::uint32_t n_tensors =
      3 + static_cast<std::uint32_t>(ckpt.model.attention.size() + ckpt.model.conv.size()) + 1;
  put_u32(os, n_tensors);
  put_tensor(os, "adjacency_init", c.adjacency_init);
  put_tensor(os, "embed", ckpt.model.embed.latent);
  for (std::size_t i = 0; i < ckpt.model.attention.size(); ++i)
    put_tensor(os, "attention" + std::to_string(i), ckpt.model.attention[i]);
  for (std::size_t i = 0; i < ckpt.model.conv.size(); ++i)
    put_tensor(os, ckpt.model.conv[i].name, ckpt.model.conv[i].latent);
  put_tensor(os, "dense", ckpt.model.dense.latent);
  put_tensor(os, "classifier", ckpt.model.classifier);
  if (!os) throw std::runtime_error("checkpoint: write to '" + path + "' failed");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: '" + path + "' is not a checkpoint file");
  const std::uint32_t version = get_u32(is);
  if (version != kVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));

  Checkpoint ckpt;
  GcnConfig& c = ckpt.model.config;
  c.nodes = static_cast<int>(get_u32(is));
  c.s_raw = static_cast<int>(get_u32(is));
  c.s_emb = static_cast<int>(get_u32(is));
  c.heads = static_cast<int>(get_u32(is));
  c.filters = static_cast<int>(get_u32(is));
  c.dense_dim = static_cast<int>(get_u32(is));
  c.classes = static_cast<int>(get_u32(is));
  c.depth = static_cast<int>(get_u32(is));
  ckpt.model.bandstop.a = get_f64(is);
  ckpt.model.bandstop.sigma = get_f64(is);
  ckpt.weight_mode = static_cast<WeightMode>(get_u32(is));

  const std::uint32_t n_tensors = get_u32(is);
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    auto [name, t] = get_tensor(is);
    if (name == "adjacency_init") {
      c.adjacency_init = std::move(t);
    } else if (name == "embed") {
      ckpt.model.embed = {"embed", std::move(t)};
    } else if (name.rfind("attention", 0) == 0) {
      ckpt.model.attention.push_back(std::move(t));
    } else if (name.rfind("conv", 0) == 0) {
      ckpt.model.conv.push_back({name, std::move(t)});
    } else if (name == "dense") {
      ckpt.model.dense = {"dense", std::move(t)};
    } else if (name == "classifier") {
      ckpt.model.classifier = std::move(t);
    } else {
      throw std::runtime_error("checkpoint: unknown tensor '" + name + "'");
    }
  }
  ckpt.model.config.validate();
  return ckpt;
}

}  // namespace pmp
