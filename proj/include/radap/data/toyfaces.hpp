#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "radap/core/image.hpp"

namespace radap::data {

struct Dataset {
  std::vector<Image> images;
  std::vector<int> labels;
  int num_classes = 0;

  std::size_t size() const { return images.size(); }
};

// Procedurally generated class-consistent face-like images. Each identity is
// a fixed bundle of rendering parameters (skin tone, hair, eye geometry,
// mouth, beauty marks); per-image jitter varies pose, lighting and noise.
// Identity cues are spread across several face regions so partial occlusion
// removes some but not all of the signal.
struct ToyFacesConfig {
  int identities = 16;
  int images_per_identity = 100;
  int height = 32;
  int width = 32;
  std::uint64_t seed = 1;
  // Offset into the identity parameter space; disjoint offsets give disjoint
  // identity pools (used for open-set evaluation identities).
  int identity_offset = 0;

  void validate() const;
};

Dataset generate_toyfaces(const ToyFacesConfig& config);

// Directory-per-class layout of PPM files.
void save_directory(const Dataset& dataset, const std::filesystem::path& root);
Dataset load_directory(const std::filesystem::path& root);

// Deterministic train/test split by per-identity image index.
struct Split {
  Dataset train;
  Dataset test;
};
Split split_per_identity(const Dataset& dataset, int num_classes, double train_fraction);

}  // namespace radap::data
