#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edgecache/cnn.hpp"
#include "edgecache/cost.hpp"
#include "edgecache/encoder.hpp"
#include "edgecache/netmodel.hpp"
#include "edgecache/policies.hpp"
#include "edgecache/solver.hpp"

namespace edgecache {

// Versioned JSON documents. Serialization is lossless for finite doubles;
// infinities map to null. Parsers throw std::invalid_argument on malformed
// input.

std::string topology_to_json(const Topology& topology);
Topology topology_from_json(const std::string& text);

std::string instance_to_json(const Instance& instance);
Instance instance_from_json(const std::string& text);

std::string solution_to_json(const Instance& instance, const Solution& solution);
Solution solution_from_json(const Instance& instance, const std::string& text);

std::string image_to_json(const FeatureImage& image);
FeatureImage image_from_json(const std::string& text);

std::string models_to_json(const ModelEnsemble& models);
ModelEnsemble models_from_json(const std::string& text);

std::string mask_to_json(const CandidateMask& mask);
CandidateMask mask_from_json(const std::string& text);

std::string outcome_to_json(const Instance& instance, const PolicyOutcome& outcome);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);
void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes);

}  // namespace edgecache
