#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "hlstm/config.hpp"
#include "hlstm/labels.hpp"
#include "hlstm/rng.hpp"
#include "hlstm/superpixel.hpp"
#include "hlstm/training.hpp"

namespace hlstm {

using Color = std::array<double, 3>;

/// A vertical block standing on the ground line, drawn over the vertical band
/// and possibly reaching into the sky.
struct WallSegment {
    std::size_t col_begin = 0;
    std::size_t col_end = 0;        // exclusive
    double height_fraction = 0.5;   // of the image height, measured up from the ground line
    Color color{0.6, 0.25, 0.2};
    SurfaceClass cls = SurfaceClass::kVertical;
};

/// Rows [0, horizon) are sky, rows [ground_start, H) are ground with
/// ground_start = H - round(ground_fraction * H), and the rows between are a
/// full-width vertical band. Walls overlay the band.
struct SceneSpec {
    std::size_t width = 32;
    std::size_t height = 32;
    double horizon_fraction = 1.0 / 3.0;
    double ground_fraction = 1.0 / 3.0;
    std::vector<WallSegment> walls;
    Color sky_color{0.45, 0.7, 0.95};
    Color ground_color{0.3, 0.55, 0.2};
    Color vertical_color{0.55, 0.5, 0.5};
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;

    std::size_t horizon_row() const;
    std::size_t ground_row() const;
    /// Throws std::invalid_argument for degenerate extents or fractions.
    void validate() const;
};

/// Label map implied by the layout, before any noise.
SurfaceLabelMap render_labels(const SceneSpec& spec);
/// Colored regions plus Gaussian noise, quantized to 8 bits.
Tensor render_image(const SceneSpec& spec);

/// Per-region summary the relation rule reads.
struct RegionSummary {
    std::size_t cls = 0;
    double centroid_row = 0.0;
    double centroid_col = 0.0;
    std::size_t pixels = 0;
};

/// Relation for an ordered adjacent region pair; replaceable.
using RelationRule = std::function<RelationLabel(const RegionSummary& a, const RegionSummary& b)>;

/// Same class: affinity. Ground with a vertical-like region whose centroid is
/// higher: supporting. Any pair with sky: layering. Two different vertical
/// classes: siding. Otherwise layering. Symmetric in its arguments.
RelationLabel default_relation_rule(const RegionSummary& a, const RegionSummary& b);

/// Majority class (ties to the smaller index) and centroid of each region.
std::vector<RegionSummary> summarize_regions(const SurfaceLabelMap& labels, const SuperpixelMap& map);

/// Ground-truth relation for every ordered adjacent pair of `map`.
RelationTruth derive_relations(const SurfaceLabelMap& labels, const SuperpixelMap& map,
                               const RelationRule& rule = default_relation_rule);

/// Segments the image at every configured scale and derives relations there.
TrainingExample make_example(Tensor image, SurfaceLabelMap labels, const ModelConfig& config,
                             const RelationRule& rule = default_relation_rule);

TrainingExample generate_synthetic(const SceneSpec& spec, const ModelConfig& config);

/// Noiseless sky / vertical / ground thirds.
SceneSpec thirds_scene(std::size_t width, std::size_t height);

/// Random layout, palette colors, and 0 to 2 walls.
SceneSpec random_scene_spec(std::size_t width, std::size_t height, Rng& rng, double noise_sigma = 0.03);

/// `count` scenes of size x size drawn from one seed.
std::vector<TrainingExample> generate_dataset(std::size_t count, std::size_t size, std::uint64_t seed,
                                              const ModelConfig& config);

}  // namespace hlstm
