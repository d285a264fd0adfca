#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "hlstm/tensor.hpp"

namespace hlstm {

inline constexpr std::size_t kNeighborCount = 8;

/// Neighbor directions in gather order.
enum class Direction : std::size_t { N = 0, NE, E, SE, S, SW, W, NW };

struct Offset {
    int dy;
    int dx;
};

inline constexpr std::array<Offset, kNeighborCount> kDirectionOffsets{{
    {-1, 0}, {-1, 1}, {0, 1}, {1, 1}, {1, 0}, {1, -1}, {0, -1}, {-1, -1},
}};

/// Index of the direction pointing the other way (N <-> S, NE <-> SW, ...).
constexpr std::size_t opposite(std::size_t direction) { return (direction + 4) % kNeighborCount; }

/// Per-pixel hidden and memory fields of one P-LSTM layer, each (d, H, W).
///
/// h_spatial[n] at pixel j is the hidden cell j sends toward its neighbor in
/// direction n. m_spatial[n] stays at j.
struct PixelLayerState {
    std::vector<Tensor> h_spatial;
    std::vector<Tensor> m_spatial;
    Tensor h_depth;
    Tensor m_depth;

    static PixelLayerState zeros(std::size_t d, std::size_t height, std::size_t width,
                                 std::size_t neighbors = kNeighborCount);

    std::size_t hidden_dim() const { return h_depth.dim(0); }
    std::size_t height() const { return h_depth.dim(1); }
    std::size_t width() const { return h_depth.dim(2); }

    PixelLayerState& operator+=(const PixelLayerState& other);
    bool operator==(const PixelLayerState&) const = default;
};

}  // namespace hlstm
