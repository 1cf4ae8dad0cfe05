#pragma once

#include <cstdint>
#include <string>

#include "qtrack/associator.hpp"
#include "qtrack/training.hpp"

namespace qtrack::io {

/// Provenance carried alongside the tensors.
struct CheckpointMeta {
  int schema_version = 1;
  std::uint64_t seed = 0;
  int epochs_trained = 0;
  double final_loss = 0.0;
};

/// Serializes every model parameter plus a fingerprint of the architecture
/// (the full associator config) and the loss weights it was trained with.
void save_checkpoint(const std::string& path,
                     const assoc::AssociatorModel& model,
                     const train::LossWeights& weights,
                     const CheckpointMeta& meta);

/// Reads only the embedded associator config, for constructing a model with
/// the right architecture before loading.
assoc::AssociatorConfig peek_checkpoint_config(const std::string& path);

/// Loads tensors into `model`. Every fingerprint field must equal the
/// model's config and every tensor must match by name and shape; any
/// mismatch throws std::runtime_error naming the offending field.
CheckpointMeta load_checkpoint(const std::string& path,
                               assoc::AssociatorModel& model);

}  // namespace qtrack::io
