#include "hlstm/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "hlstm/image_io.hpp"
#include "hlstm/model.hpp"

namespace hlstm {

namespace {

std::size_t wall_top(const SceneSpec& spec, const WallSegment& w) {
    const auto rise = static_cast<std::size_t>(std::lround(w.height_fraction * static_cast<double>(spec.height)));
    return spec.ground_row() > rise ? spec.ground_row() - rise : 0;
}

std::size_t label_classes(const SceneSpec& spec) {
    for (const WallSegment& w : spec.walls) {
        if (static_cast<std::size_t>(w.cls) >= kMainClassCount) return kExtendedClassCount;
    }
    return kMainClassCount;
}

Color jitter(const Color& base, double amount, Rng& rng) {
    Color c;
    for (std::size_t i = 0; i < 3; ++i) c[i] = std::clamp(base[i] + rng.uniform(-amount, amount), 0.0, 1.0);
    return c;
}

}  // namespace

std::size_t SceneSpec::horizon_row() const {
    return static_cast<std::size_t>(std::lround(horizon_fraction * static_cast<double>(height)));
}

std::size_t SceneSpec::ground_row() const {
    const auto g = static_cast<std::size_t>(std::lround(ground_fraction * static_cast<double>(height)));
    return g >= height ? 0 : height - g;
}

void SceneSpec::validate() const {
    if (width == 0 || height == 0) throw std::invalid_argument("scene: empty extents");
    if (!(horizon_fraction > 0.0 && horizon_fraction < 1.0) || !(ground_fraction > 0.0 && ground_fraction < 1.0)) {
        throw std::invalid_argument("scene: horizon and ground fractions must lie in (0, 1)");
    }
    if (horizon_fraction + ground_fraction >= 1.0) {
        throw std::invalid_argument("scene: horizon and ground fractions leave no vertical band");
    }
    const std::size_t h = horizon_row();
    const std::size_t g = ground_row();
    if (h == 0 || g >= height || h >= g) {
        throw std::invalid_argument("scene: sky, vertical band and ground must each cover at least one row (horizon " +
                                    std::to_string(h) + ", ground " + std::to_string(g) + ")");
    }
    if (!(noise_sigma >= 0.0)) throw std::invalid_argument("scene: noise_sigma must be >= 0");
    for (const WallSegment& w : walls) {
        if (w.col_begin >= w.col_end || w.col_end > width) throw std::invalid_argument("scene: wall column range invalid");
        if (!(w.height_fraction > 0.0 && w.height_fraction <= 1.0)) {
            throw std::invalid_argument("scene: wall height fraction must lie in (0, 1]");
        }
        if (!is_vertical_like(static_cast<std::size_t>(w.cls))) {
            throw std::invalid_argument("scene: walls must carry a vertical class");
        }
    }
}

SurfaceLabelMap render_labels(const SceneSpec& spec) {
    spec.validate();
    SurfaceLabelMap labels(spec.height, spec.width, label_classes(spec));
    const std::size_t h = spec.horizon_row();
    const std::size_t g = spec.ground_row();
    for (std::size_t y = 0; y < spec.height; ++y) {
        const SurfaceClass cls = y < h ? SurfaceClass::kSky : (y < g ? SurfaceClass::kVertical : SurfaceClass::kGround);
        for (std::size_t x = 0; x < spec.width; ++x) labels.at(y, x) = static_cast<std::uint8_t>(cls);
    }
    for (const WallSegment& w : spec.walls) {
        for (std::size_t y = wall_top(spec, w); y < g; ++y) {
            for (std::size_t x = w.col_begin; x < w.col_end; ++x) labels.at(y, x) = static_cast<std::uint8_t>(w.cls);
        }
    }
    return labels;
}

Tensor render_image(const SceneSpec& spec) {
    spec.validate();
    const std::size_t n = spec.height * spec.width;
    // Which color source covers each pixel: 0 sky, 1 ground, 2 band, 3 + i wall i.
    std::vector<std::size_t> source(n);
    const std::size_t h = spec.horizon_row();
    const std::size_t g = spec.ground_row();
    for (std::size_t y = 0; y < spec.height; ++y) {
        for (std::size_t x = 0; x < spec.width; ++x) source[y * spec.width + x] = y < h ? 0 : (y < g ? 2 : 1);
    }
    for (std::size_t i = 0; i < spec.walls.size(); ++i) {
        const WallSegment& w = spec.walls[i];
        for (std::size_t y = wall_top(spec, w); y < g; ++y) {
            for (std::size_t x = w.col_begin; x < w.col_end; ++x) source[y * spec.width + x] = 3 + i;
        }
    }
    Rng rng(spec.seed);
    Tensor image({3, spec.height, spec.width});
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t s = source[i];
        const Color& c = s == 0 ? spec.sky_color
                         : s == 1 ? spec.ground_color
                         : s == 2 ? spec.vertical_color
                                  : spec.walls[s - 3].color;
        for (std::size_t ch = 0; ch < 3; ++ch) {
            const double noise = spec.noise_sigma > 0.0 ? spec.noise_sigma * rng.normal() : 0.0;
            image[ch * n + i] = c[ch] + noise;
        }
    }
    quantize_8bit(image);
    return image;
}

RelationLabel default_relation_rule(const RegionSummary& a, const RegionSummary& b) {
    if (a.cls == b.cls) return RelationLabel::kAffinity;
    const auto ground = static_cast<std::size_t>(SurfaceClass::kGround);
    const auto sky = static_cast<std::size_t>(SurfaceClass::kSky);
    if (a.cls == ground && is_vertical_like(b.cls) && b.centroid_row < a.centroid_row) return RelationLabel::kSupporting;
    if (b.cls == ground && is_vertical_like(a.cls) && a.centroid_row < b.centroid_row) return RelationLabel::kSupporting;
    if (a.cls == sky || b.cls == sky) return RelationLabel::kLayering;
    if (is_vertical_like(a.cls) && is_vertical_like(b.cls)) return RelationLabel::kSiding;
    return RelationLabel::kLayering;
}

std::vector<RegionSummary> summarize_regions(const SurfaceLabelMap& labels, const SuperpixelMap& map) {
    if (labels.height != map.height || labels.width != map.width) {
        throw std::invalid_argument("summarize_regions: label map and superpixel map differ in extents");
    }
    const std::size_t k = map.region_count;
    std::vector<std::vector<std::size_t>> counts(k, std::vector<std::size_t>(256, 0));
    std::vector<RegionSummary> out(k);
    for (std::size_t y = 0; y < map.height; ++y) {
        for (std::size_t x = 0; x < map.width; ++x) {
            const std::uint32_t r = map.at(y, x);
            ++counts[r][labels.at(y, x)];
            out[r].centroid_row += static_cast<double>(y);
            out[r].centroid_col += static_cast<double>(x);
            ++out[r].pixels;
        }
    }
    for (std::size_t r = 0; r < k; ++r) {
        if (out[r].pixels == 0) throw std::invalid_argument("summarize_regions: region " + std::to_string(r) + " is empty");
        out[r].centroid_row /= static_cast<double>(out[r].pixels);
        out[r].centroid_col /= static_cast<double>(out[r].pixels);
        // max_element keeps the first maximum, so ties go to the smaller class.
        out[r].cls = static_cast<std::size_t>(std::max_element(counts[r].begin(), counts[r].end()) - counts[r].begin());
    }
    return out;
}

RelationTruth derive_relations(const SurfaceLabelMap& labels, const SuperpixelMap& map, const RelationRule& rule) {
    const std::vector<RegionSummary> regions = summarize_regions(labels, map);
    const AdjacencyGraph graph = adjacency(map);
    RelationTruth truth;
    for (const auto& [a, b] : graph.ordered_pairs) truth[{a, b}] = rule(regions[a], regions[b]);
    return truth;
}

TrainingExample make_example(Tensor image, SurfaceLabelMap labels, const ModelConfig& config, const RelationRule& rule) {
    if (image.rank() != 3 || image.dim(1) != labels.height || image.dim(2) != labels.width) {
        throw std::invalid_argument("make_example: image " + shape_string(image.shape()) + " does not match labels");
    }
    TrainingExample ex;
    ex.structure = segment_scene(image, config);
    for (const SuperpixelMap& map : ex.structure.maps) ex.relations.push_back(derive_relations(labels, map, rule));
    ex.image = std::move(image);
    ex.surface = std::move(labels);
    return ex;
}

TrainingExample generate_synthetic(const SceneSpec& spec, const ModelConfig& config) {
    return make_example(render_image(spec), render_labels(spec), config);
}

SceneSpec thirds_scene(std::size_t width, std::size_t height) {
    SceneSpec spec;
    spec.width = width;
    spec.height = height;
    return spec;
}

SceneSpec random_scene_spec(std::size_t width, std::size_t height, Rng& rng, double noise_sigma) {
    static const Color kGreen{0.3, 0.55, 0.2};
    static const Color kBrown{0.5, 0.38, 0.22};
    static const Color kRed{0.7, 0.25, 0.2};
    static const Color kGray{0.5, 0.5, 0.52};

    SceneSpec spec;
    spec.width = width;
    spec.height = height;
    spec.horizon_fraction = rng.uniform(0.2, 0.4);
    spec.ground_fraction = rng.uniform(0.25, 0.45);
    spec.sky_color = jitter({0.45, 0.7, 0.95}, 0.06, rng);
    spec.ground_color = jitter(rng.below(2) == 0 ? kGreen : kBrown, 0.05, rng);
    spec.vertical_color = jitter(rng.below(2) == 0 ? kRed : kGray, 0.05, rng);
    spec.noise_sigma = noise_sigma;

    // On tiny images rounding can empty a band; give each band a row.
    if (height >= 3 && (spec.horizon_row() == 0 || spec.ground_row() <= spec.horizon_row())) {
        const double rows = static_cast<double>(height);
        const auto sky = std::clamp<long>(std::lround(spec.horizon_fraction * rows), 1, static_cast<long>(height) - 2);
        const auto ground = std::clamp<long>(std::lround(spec.ground_fraction * rows), 1,
                                             static_cast<long>(height) - 1 - sky);
        spec.horizon_fraction = static_cast<double>(sky) / rows;
        spec.ground_fraction = static_cast<double>(ground) / rows;
    }

    const std::size_t walls = rng.below(3);
    const double band = 1.0 - spec.horizon_fraction - spec.ground_fraction;
    for (std::size_t i = 0; i < walls && width >= 8; ++i) {
        WallSegment w;
        const std::size_t span = width / 8 + rng.below(std::max<std::size_t>(1, width / 4));
        w.col_begin = rng.below(width - span + 1);
        w.col_end = w.col_begin + span;
        w.height_fraction = std::min(1.0, band + rng.uniform(0.05, 0.25));
        w.color = jitter(rng.below(2) == 0 ? kRed : kGray, 0.05, rng);
        spec.walls.push_back(w);
    }
    spec.seed = rng.fork_seed();
    return spec;
}

std::vector<TrainingExample> generate_dataset(std::size_t count, std::size_t size, std::uint64_t seed,
                                              const ModelConfig& config) {
    Rng rng(seed);
    std::vector<TrainingExample> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(generate_synthetic(random_scene_spec(size, size, rng), config));
    return out;
}

}  // namespace hlstm
