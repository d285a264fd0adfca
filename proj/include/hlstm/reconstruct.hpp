#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "hlstm/labels.hpp"
#include "hlstm/mslstm.hpp"
#include "hlstm/superpixel.hpp"
#include "hlstm/tensor.hpp"
#include "hlstm/training.hpp"

namespace hlstm {

struct Point2 {
    double x = 0.0;  // column, pixel edges at integers
    double y = 0.0;  // row, growing downward
    bool operator==(const Point2&) const = default;
};

using Vec3 = std::array<double, 3>;  // x right, y up (elevation), z toward the viewer

enum class BoundaryKind { kGroundVerticalFold, kGroundSkyCut, kVerticalSkyCut };

struct Boundary {
    BoundaryKind kind = BoundaryKind::kGroundVerticalFold;
    std::vector<Point2> polyline;  // ordered by x, at least two points
    RelationLabel relation_source = RelationLabel::kSupporting;
};

/// Douglas-Peucker simplification; keeps both endpoints.
std::vector<Point2> simplify_polyline(const std::vector<Point2>& points, double tolerance);

/// Region pairs whose predicted relation (argmax of the probabilities averaged
/// over both orders) is supporting between ground and a vertical class become
/// folds; pairs with sky whose relation is layering become cuts. Boundary
/// points are the midpoints of the horizontal pixel edges between the two
/// regions, grouped into 8-connected runs, averaged per column, and
/// simplified with `tolerance`.
std::vector<Boundary> extract_boundaries(const SurfaceLabelMap& labels, const RelationGraphPrediction& relations,
                                         const SuperpixelMap& map, double tolerance = 1.5);

/// One-hot predictions from ground-truth relations, for reconstructing from labels.
RelationGraphPrediction prediction_from_truth(const SuperpixelMap& map, const RelationTruth& truth);

/// Minimum fold row minus `margin`, clamped to [0, height). Throws
/// std::domain_error ("horizon undefined") without a fold boundary.
double estimate_horizon(const std::vector<Boundary>& boundaries, std::size_t height, double margin = 1.0);

struct CameraOptions {
    double height = 1.6;
    double focal_length = 0.0;  // 0 means max(H, W)
};

/// Pinhole camera at (0, height, 0) looking along -z with a horizontal
/// optical axis; the principal point is (W / 2, horizon_row).
struct Camera {
    double focal_length = 0.0;
    double height = 1.6;
    double horizon_row = 0.0;
    double cx = 0.0;

    /// Intersection of the pixel ray with the elevation-0 plane. Throws
    /// std::domain_error for rows at or above the horizon.
    Vec3 ground_point(const Point2& p) const;
    Point2 project(const Vec3& v) const;
    Vec3 center() const { return {0.0, height, 0.0}; }
};

enum class PlaneRole { kGround, kVertical };

struct Plane {
    PlaneRole role = PlaneRole::kGround;
    std::vector<Vec3> vertices;     // counter-clockwise seen from the camera
    std::vector<Point2> texcoords;  // (u / W, 1 - v / H)
    std::vector<Point2> image_points;
};

struct PopUpModel {
    Camera camera;
    std::size_t image_width = 0;
    std::size_t image_height = 0;
    std::vector<Plane> planes;
};

/// Ground quad from the bottom row up to the highest fold point, plus one
/// vertical quad per fold segment reaching the topmost vertical pixel above
/// it. Sky gets no geometry. Throws std::domain_error when a fold lies
/// entirely at or above the horizon.
PopUpModel build_model(const SurfaceLabelMap& labels, const std::vector<Boundary>& boundaries, double horizon,
                       const CameraOptions& options = {});

/// Writes <dir>/<name>.obj, .mtl and .ppm. Throws FileError with the path.
void export_obj(const PopUpModel& model, const Tensor& image, const std::string& dir, const std::string& name);

/// Parsed OBJ content, for validation.
struct ObjMesh {
    std::vector<Vec3> vertices;
    std::vector<Point2> texcoords;
    std::vector<std::vector<std::array<std::size_t, 2>>> faces;  // 1-based (v, vt) pairs
};

/// Throws FormatError on malformed records or out-of-range indices.
ObjMesh parse_obj(const std::string& text);

}  // namespace hlstm
