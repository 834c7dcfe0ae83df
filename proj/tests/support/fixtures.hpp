// SPDX-License-Identifier: Apache-2.0
// Small configs and datasets that keep end-to-end tests fast.
#pragma once

#include <synctva/config.hpp>
#include <synctva/dataio.hpp>
#include <synctva/trainer.hpp>

#include <cstring>

namespace synctva::testing {

inline ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.d = 8;
  cfg.d_ff = 16;
  cfg.heads = 2;
  cfg.dropout = 0.1;
  cfg.lr = 1e-3;
  cfg.batch_size = 4;
  cfg.epochs = 4;
  return cfg;
}

inline FeatureSet tiny_data(std::size_t conversations = 12, std::size_t classes = 4,
                            std::uint64_t seed = 7) {
  SynthOptions o;
  o.seed = seed;
  o.conversations = conversations;
  o.min_utterances = 2;
  o.max_utterances = 5;
  o.dims = {6, 5, 4};
  o.classes = classes;
  return synth_dataset(o);
}

// Bitwise equality of every parameter value.
inline bool same_parameters(const SyncTvaModel &a, const SyncTvaModel &b) {
  const ParamList pa = a.parameters(), pb = b.parameters();
  if (pa.size() != pb.size())
    return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const auto va = pa[i].tensor.values(), vb = pb[i].tensor.values();
    if (pa[i].name != pb[i].name || va.size() != vb.size() ||
        std::memcmp(va.data(), vb.data(), va.size() * sizeof(double)) != 0)
      return false;
  }
  return true;
}

// EpochLog compares NaN fields as unequal; compare the bit patterns instead.
inline bool same_log(const std::vector<EpochLog> &a, const std::vector<EpochLog> &b) {
  return a.size() == b.size() &&
         (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(EpochLog)) == 0);
}

} // namespace synctva::testing
