#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace hlstm {

/// Geometric surface classes. The first three are the main classes; the
/// extended set adds the vertical subclasses.
enum class SurfaceClass : std::uint8_t {
    kSky = 0,
    kGround = 1,
    kVertical = 2,
    kLeft = 3,
    kCenter = 4,
    kRight = 5,
    kPorous = 6,
    kSolid = 7,
};

inline constexpr std::size_t kMainClassCount = 3;
inline constexpr std::size_t kExtendedClassCount = 8;

std::string_view surface_class_name(std::size_t cls);
/// True for kVertical and every vertical subclass.
bool is_vertical_like(std::size_t cls);

enum class RelationLabel : std::uint8_t {
    kLayering = 0,
    kSupporting = 1,
    kSiding = 2,
    kAffinity = 3,
};

inline constexpr std::size_t kRelationCount = 4;

std::string_view relation_name(RelationLabel label);
/// Throws std::invalid_argument for unknown names.
RelationLabel relation_from_name(std::string_view name);

/// Per-pixel surface class indices, row-major.
struct SurfaceLabelMap {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t num_classes = kMainClassCount;
    std::vector<std::uint8_t> labels;

    SurfaceLabelMap() = default;
    SurfaceLabelMap(std::size_t h, std::size_t w, std::size_t classes, std::uint8_t fill = 0)
        : height(h), width(w), num_classes(classes), labels(h * w, fill) {}

    std::uint8_t at(std::size_t y, std::size_t x) const { return labels[y * width + x]; }
    std::uint8_t& at(std::size_t y, std::size_t x) { return labels[y * width + x]; }
    std::size_t size() const { return labels.size(); }

    /// Throws std::invalid_argument if any label >= num_classes.
    void validate() const;

    bool operator==(const SurfaceLabelMap&) const = default;
};

}  // namespace hlstm
