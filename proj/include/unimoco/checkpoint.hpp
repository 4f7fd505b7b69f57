#pragma once

#include <string>

#include "unimoco/config.hpp"
#include "unimoco/container.hpp"
#include "unimoco/pipeline.hpp"

namespace unimoco {

struct Checkpoint {
  ExperimentConfig config;
  TrainState state;
};

/// Header carries config, dims, step, rng state and layer order; payload
/// holds query, key and velocity parameters followed by the queue.
Container checkpoint_container(const Checkpoint& ckpt);
Checkpoint checkpoint_from_container(const Container& c);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

Container dataset_container(const Dataset& d);
Dataset dataset_from_container(const Container& c);

void save_dataset(const std::string& path, const Dataset& d);
Dataset load_dataset(const std::string& path);

}  // namespace unimoco
