#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "servo/dataset.hpp"
#include "servo/dynamics.hpp"
#include "servo/policy.hpp"

namespace servo {

/* Single-file tensor container: 8-byte magic, little-endian uint64 header
 * length, UTF-8 JSON header, then the raw little-endian float32 payloads in
 * the order declared by the header's "tensors" array. */

struct ContainerTensor {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<float> data;
};

struct Container {
  std::string header_json;  // serialized header, exactly as stored
  std::vector<ContainerTensor> tensors;
};

extern const char kContainerMagic[9];  // 8 chars + terminator

void write_container(const std::string& path, const Container& container);
Container read_container(const std::string& path);

void save_dataset(const std::string& path, const TrajectoryDataset& dataset);
TrajectoryDataset load_dataset(const std::string& path);

/* The model file carries the featurizer id and the standardizer fitted on
 * its training set, so downstream policies reproduce the training-time
 * feature space exactly. */
struct ModelBundle {
  BilinearModel model;
  std::string featurizer_id;
  Standardizer standardizer;
};

void save_model(const std::string& path, const ModelBundle& bundle);
ModelBundle load_model(const std::string& path);

void save_weights(const std::string& path, const PolicyWeights& weights);
PolicyWeights load_weights(const std::string& path);

}  // namespace servo
