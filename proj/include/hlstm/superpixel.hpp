#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "hlstm/config.hpp"
#include "hlstm/tensor.hpp"

namespace hlstm {

/// Pixel-to-region assignment at one scale. Region ids are contiguous in
/// [0, region_count) and numbered in raster order of each region's first pixel.
struct SuperpixelMap {
    std::size_t height = 0;
    std::size_t width = 0;
    double scale = 0.0;
    std::size_t region_count = 0;
    std::vector<std::uint32_t> assignment;

    std::uint32_t at(std::size_t y, std::size_t x) const { return assignment[y * width + x]; }
    std::vector<std::vector<std::size_t>> region_pixels() const;
    std::vector<std::size_t> region_sizes() const;

    bool operator==(const SuperpixelMap&) const = default;
};

/// Rook (4-neighbor) adjacency between distinct regions.
struct AdjacencyGraph {
    std::size_t node_count = 0;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;          // a < b, sorted
    std::vector<std::pair<std::uint32_t, std::uint32_t>> ordered_pairs;  // both orientations, sorted
    std::vector<std::vector<std::uint32_t>> neighbors;                   // sorted per node

    bool operator==(const AdjacencyGraph&) const = default;
};

struct SlicOptions {
    double compactness = 0.1;
    std::size_t iterations = 10;
    ScaleMeaning meaning = ScaleMeaning::kPixelsPerRegion;

    static SlicOptions from_config(const ModelConfig& config) {
        return {config.slic_compactness, config.slic_iterations, config.scale_means};
    }
};

/// Number of grid seeds for an image and scale, before connectivity merging.
std::size_t target_region_count(std::size_t height, std::size_t width, double scale, ScaleMeaning meaning);

/// SLIC-style local k-means in color + position space with grid seeds, a
/// fixed iteration count, and connectivity enforcement. Ties in distance go
/// to the spatially nearest center, then the smaller center index.
/// Throws std::invalid_argument for empty images or scales outside the
/// admissible range.
SuperpixelMap oversegment(const Tensor& image, double scale, const SlicOptions& options = {});

AdjacencyGraph adjacency(const SuperpixelMap& map);

/// Writes each region's column of `region_values` (d x K) to all of its
/// pixels, giving a (d, H, W) field. Throws if the column count is not K.
Tensor assign_back(const Tensor& region_values, const SuperpixelMap& map);
std::pair<Tensor, Tensor> assign_back(const Tensor& region_h, const Tensor& region_m, const SuperpixelMap& map);

/// Per-region mean of a (d, H, W) field, as d x K.
Tensor region_mean(const Tensor& field, const SuperpixelMap& map);

/// Every pixel has an id < region_count and every id is used.
bool is_partition(const SuperpixelMap& map);
/// Every region is a single 4-connected component.
bool regions_connected(const SuperpixelMap& map);

}  // namespace hlstm
