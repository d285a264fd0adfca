#include "hlstm/labels.hpp"

#include <array>
#include <stdexcept>
#include <string>

namespace hlstm {
namespace {

constexpr std::array<std::string_view, kExtendedClassCount> kSurfaceNames{
    "sky", "ground", "vertical", "left", "center", "right", "porous", "solid"};
constexpr std::array<std::string_view, kRelationCount> kRelationNames{"layering", "supporting", "siding", "affinity"};

}  // namespace

std::string_view surface_class_name(std::size_t cls) {
    return cls < kSurfaceNames.size() ? kSurfaceNames[cls] : std::string_view("unknown");
}

bool is_vertical_like(std::size_t cls) { return cls >= static_cast<std::size_t>(SurfaceClass::kVertical); }

std::string_view relation_name(RelationLabel label) { return kRelationNames[static_cast<std::size_t>(label)]; }

RelationLabel relation_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kRelationNames.size(); ++i) {
        if (kRelationNames[i] == name) return static_cast<RelationLabel>(i);
    }
    throw std::invalid_argument("unknown relation label \"" + std::string(name) + "\"");
}

void SurfaceLabelMap::validate() const {
    if (labels.size() != height * width) throw std::invalid_argument("label map size does not match its extents");
    for (std::uint8_t l : labels) {
        if (l >= num_classes) {
            throw std::invalid_argument("label " + std::to_string(l) + " >= number of classes " +
                                        std::to_string(num_classes));
        }
    }
}

}  // namespace hlstm
