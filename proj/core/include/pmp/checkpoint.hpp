#pragma once

#include <string>

#include "pmp/gcn.hpp"

namespace pmp {

// On-disk model container, little-endian binary, magic "PMPCKPT1". Doubles
// are stored as raw IEEE-754 bits, so save followed by load reproduces every
// tensor bit for bit. weight_mode records how the weights are meant to be
// used at inference time (band-stop training state vs plain baseline state).
struct Checkpoint {
  GcnModel model;
  WeightMode weight_mode = WeightMode::BandStop;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace pmp
