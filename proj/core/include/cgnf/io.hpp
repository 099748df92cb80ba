#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cgnf/flow.hpp"

namespace cgnf {

std::uint64_t fnv1a_64(const std::uint8_t* data, std::size_t size);
std::uint64_t hash_file(const std::string& path);

/// Versioned binary net dump: layer sizes, output activation, then row-major
/// weights and biases per layer.
void serialize_net(const DenseNet& net, std::vector<std::uint8_t>& out);
DenseNet deserialize_net(const std::uint8_t*& cursor, const std::uint8_t* end);

/// Model container: DAG, per-normalizer networks, sigma_z, preprocessing
/// constants, the training-data hash, and a config echo. Byte-stable for a
/// fixed seed and platform; ends in a content checksum.
std::vector<std::uint8_t> serialize_model(const Cgnf& cgnf,
                                          std::uint64_t data_hash,
                                          const std::string& config_echo);

struct LoadedModel {
  Cgnf cgnf;
  std::uint64_t data_hash = 0;
  std::string config_echo;
};

LoadedModel deserialize_model(const std::vector<std::uint8_t>& bytes);

void save_model(const Cgnf& cgnf, const std::string& path,
                std::uint64_t data_hash, const std::string& config_echo);
LoadedModel load_model(const std::string& path);

}  // namespace cgnf
