#pragma once

#include <filesystem>

#include "lane/training.hpp"

namespace lane {

// Generates the procedural multi-lighting dataset: for every scene, one set
// of car placements and cameras shared across all lighting conditions, plus
// trailing car-free frames for clean world evaluation.  Deterministic for
// (spec, seed); validated with read_dataset before returning.
DatasetManifest generate_dataset(const DatasetSpec& spec, const std::filesystem::path& dir);

// Rebuilds the oracle scene recorded in the manifest (for diagnostics and
// the acceptance oracle checks).
OracleScene scene_from_manifest(const DatasetManifest& manifest, const std::string& scene_id);

// Pixel ids covered by a mask.
std::vector<int> mask_pixels(const Mask& mask);
std::vector<int> all_pixels(int width, int height);
std::vector<int> complement_pixels(const Mask& mask);

// PlacedCar list for a frame (oracle-side mirror of the frame objects).
std::vector<PlacedCar> placed_cars_of_frame(const DatasetManifest& manifest,
                                            const FrameRecord& frame);

}  // namespace lane
