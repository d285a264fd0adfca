#include "hlstm/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "hlstm/errors.hpp"
#include "hlstm/image_io.hpp"
#include "hlstm/synthetic.hpp"

namespace hlstm {

namespace {

using Cell = std::pair<long, long>;  // (column, row of the lower pixel)

double segment_distance(const Point2& p, const Point2& a, const Point2& b) {
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    if (len2 == 0.0) return std::hypot(p.x - a.x, p.y - a.y);
    return std::abs(dy * (p.x - a.x) - dx * (p.y - a.y)) / std::sqrt(len2);
}

void douglas_peucker(const std::vector<Point2>& pts, std::size_t lo, std::size_t hi, double tol,
                     std::vector<bool>& keep) {
    if (hi <= lo + 1) return;
    double worst = -1.0;
    std::size_t at = lo;
    for (std::size_t i = lo + 1; i < hi; ++i) {
        const double dist = segment_distance(pts[i], pts[lo], pts[hi]);
        if (dist > worst) {
            worst = dist;
            at = i;
        }
    }
    if (worst > tol) {
        keep[at] = true;
        douglas_peucker(pts, lo, at, tol, keep);
        douglas_peucker(pts, at, hi, tol, keep);
    }
}

std::vector<std::vector<Cell>> components(const std::set<Cell>& cells) {
    std::vector<std::vector<Cell>> out;
    std::set<Cell> seen;
    for (const Cell& start : cells) {
        if (seen.contains(start)) continue;
        std::vector<Cell> comp{start};
        seen.insert(start);
        for (std::size_t i = 0; i < comp.size(); ++i) {
            const Cell c = comp[i];
            for (long dc = -1; dc <= 1; ++dc) {
                for (long dr = -1; dr <= 1; ++dr) {
                    const Cell n{c.first + dc, c.second + dr};
                    if (cells.contains(n) && !seen.contains(n)) {
                        seen.insert(n);
                        comp.push_back(n);
                    }
                }
            }
        }
        out.push_back(std::move(comp));
    }
    return out;
}

std::vector<Point2> trace(const std::vector<Cell>& comp) {
    std::map<long, std::pair<double, std::size_t>> rows;  // column -> (sum of rows, count)
    for (const auto& [c, r] : comp) {
        rows[c].first += static_cast<double>(r);
        ++rows[c].second;
    }
    std::vector<Point2> pts;
    const long first = rows.begin()->first;
    const long last = rows.rbegin()->first;
    pts.push_back({static_cast<double>(first), rows.begin()->second.first / rows.begin()->second.second});
    for (const auto& [c, acc] : rows) pts.push_back({c + 0.5, acc.first / static_cast<double>(acc.second)});
    pts.push_back({static_cast<double>(last + 1), rows.rbegin()->second.first / rows.rbegin()->second.second});
    return pts;
}

Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

// Newell normal of a polygon.
Vec3 polygon_normal(const std::vector<Vec3>& v) {
    Vec3 n{0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < v.size(); ++i) {
        const Vec3& a = v[i];
        const Vec3& b = v[(i + 1) % v.size()];
        n[0] += (a[1] - b[1]) * (a[2] + b[2]);
        n[1] += (a[2] - b[2]) * (a[0] + b[0]);
        n[2] += (a[0] - b[0]) * (a[1] + b[1]);
    }
    return n;
}

void face_camera(Plane& plane, const Camera& camera) {
    Vec3 centroid{0.0, 0.0, 0.0};
    for (const Vec3& v : plane.vertices) {
        for (int i = 0; i < 3; ++i) centroid[i] += v[i] / static_cast<double>(plane.vertices.size());
    }
    const Vec3 n = polygon_normal(plane.vertices);
    const Vec3 to_cam = sub(camera.center(), centroid);
    if (n[0] * to_cam[0] + n[1] * to_cam[1] + n[2] * to_cam[2] < 0.0) {
        std::reverse(plane.vertices.begin(), plane.vertices.end());
        std::reverse(plane.texcoords.begin(), plane.texcoords.end());
        std::reverse(plane.image_points.begin(), plane.image_points.end());
    }
}

Point2 texcoord(const Point2& p, std::size_t width, std::size_t height) {
    return {p.x / static_cast<double>(width), 1.0 - p.y / static_cast<double>(height)};
}

}  // namespace

std::vector<Point2> simplify_polyline(const std::vector<Point2>& points, double tolerance) {
    if (points.size() <= 2) return points;
    std::vector<bool> keep(points.size(), false);
    keep.front() = keep.back() = true;
    douglas_peucker(points, 0, points.size() - 1, tolerance, keep);
    std::vector<Point2> out;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (keep[i]) out.push_back(points[i]);
    }
    return out;
}

std::vector<Boundary> extract_boundaries(const SurfaceLabelMap& labels, const RelationGraphPrediction& relations,
                                         const SuperpixelMap& map, double tolerance) {
    const std::vector<RegionSummary> regions = summarize_regions(labels, map);

    std::map<std::pair<std::uint32_t, std::uint32_t>, std::array<double, kRelationCount>> averaged;
    for (const RelationPrediction& p : relations.pairs) {
        if (p.region_a >= map.region_count || p.region_b >= map.region_count) {
            throw std::invalid_argument("extract_boundaries: relation names a region outside the superpixel map");
        }
        auto& acc = averaged[{std::min(p.region_a, p.region_b), std::max(p.region_a, p.region_b)}];
        for (std::size_t r = 0; r < kRelationCount; ++r) acc[r] += p.probs[r];
    }

    const auto sky = static_cast<std::size_t>(SurfaceClass::kSky);
    const auto ground = static_cast<std::size_t>(SurfaceClass::kGround);
    std::map<std::pair<std::uint32_t, std::uint32_t>, BoundaryKind> kinds;
    for (const auto& [key, probs] : averaged) {
        const auto rel = static_cast<RelationLabel>(std::max_element(probs.begin(), probs.end()) - probs.begin());
        const std::size_t ca = regions[key.first].cls;
        const std::size_t cb = regions[key.second].cls;
        const bool has_sky = ca == sky || cb == sky;
        if (rel == RelationLabel::kSupporting && ((ca == ground && is_vertical_like(cb)) ||
                                                  (cb == ground && is_vertical_like(ca)))) {
            kinds[key] = BoundaryKind::kGroundVerticalFold;
        } else if (rel == RelationLabel::kLayering && has_sky && ca != cb) {
            const std::size_t other = ca == sky ? cb : ca;
            if (other == ground) kinds[key] = BoundaryKind::kGroundSkyCut;
            if (is_vertical_like(other)) kinds[key] = BoundaryKind::kVerticalSkyCut;
        }
    }

    std::map<BoundaryKind, std::set<Cell>> cells;
    for (std::size_t y = 1; y < map.height; ++y) {
        for (std::size_t x = 0; x < map.width; ++x) {
            const std::uint32_t a = map.at(y - 1, x);
            const std::uint32_t b = map.at(y, x);
            if (a == b) continue;
            const auto it = kinds.find({std::min(a, b), std::max(a, b)});
            if (it != kinds.end()) cells[it->second].insert({static_cast<long>(x), static_cast<long>(y)});
        }
    }

    std::vector<Boundary> out;
    for (const auto& [kind, set] : cells) {
        for (const std::vector<Cell>& comp : components(set)) {
            Boundary b;
            b.kind = kind;
            b.relation_source = kind == BoundaryKind::kGroundVerticalFold ? RelationLabel::kSupporting
                                                                          : RelationLabel::kLayering;
            b.polyline = simplify_polyline(trace(comp), tolerance);
            out.push_back(std::move(b));
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const Boundary& a, const Boundary& b) {
        if (a.kind != b.kind) return a.kind < b.kind;
        return std::make_pair(a.polyline.front().x, a.polyline.front().y) <
               std::make_pair(b.polyline.front().x, b.polyline.front().y);
    });
    return out;
}

RelationGraphPrediction prediction_from_truth(const SuperpixelMap& map, const RelationTruth& truth) {
    RelationGraphPrediction pred;
    pred.scale = map.scale;
    for (const auto& [a, b] : adjacency(map).ordered_pairs) {
        const auto it = truth.find({a, b});
        if (it == truth.end()) throw std::out_of_range("prediction_from_truth: missing relation for an adjacent pair");
        RelationPrediction p;
        p.region_a = a;
        p.region_b = b;
        p.probs[static_cast<std::size_t>(it->second)] = 1.0;
        pred.pairs.push_back(p);
    }
    return pred;
}

double estimate_horizon(const std::vector<Boundary>& boundaries, std::size_t height, double margin) {
    double top = std::numeric_limits<double>::infinity();
    for (const Boundary& b : boundaries) {
        if (b.kind != BoundaryKind::kGroundVerticalFold) continue;
        for (const Point2& p : b.polyline) top = std::min(top, p.y);
    }
    if (!std::isfinite(top)) throw std::domain_error("horizon undefined: no ground-vertical fold boundary");
    if (height == 0) throw std::invalid_argument("estimate_horizon: zero image height");
    return std::clamp(top - margin, 0.0, static_cast<double>(height - 1));
}

Vec3 Camera::ground_point(const Point2& p) const {
    const double dv = p.y - horizon_row;
    if (!(dv > 0.0)) throw std::domain_error("ground_point: image point does not lie below the horizon");
    const double depth = focal_length * height / dv;
    return {(p.x - cx) * height / dv, 0.0, -depth};
}

Point2 Camera::project(const Vec3& v) const {
    const double depth = -v[2];
    if (!(depth > 0.0)) throw std::domain_error("project: point is not in front of the camera");
    return {cx + focal_length * v[0] / depth, horizon_row - focal_length * (v[1] - height) / depth};
}

PopUpModel build_model(const SurfaceLabelMap& labels, const std::vector<Boundary>& boundaries, double horizon,
                       const CameraOptions& options) {
    if (labels.height == 0 || labels.width == 0) throw std::invalid_argument("build_model: empty label map");
    if (!(horizon >= 0.0 && horizon < static_cast<double>(labels.height))) {
        throw std::invalid_argument("build_model: horizon row outside the image");
    }
    PopUpModel model;
    model.image_width = labels.width;
    model.image_height = labels.height;
    Camera& cam = model.camera;
    cam.height = options.height;
    cam.focal_length = options.focal_length > 0.0 ? options.focal_length
                                                  : static_cast<double>(std::max(labels.height, labels.width));
    cam.horizon_row = horizon;
    cam.cx = static_cast<double>(labels.width) / 2.0;

    std::vector<const Boundary*> folds;
    for (const Boundary& b : boundaries) {
        if (b.kind != BoundaryKind::kGroundVerticalFold) continue;
        if (std::all_of(b.polyline.begin(), b.polyline.end(), [&](const Point2& p) { return p.y <= horizon; })) {
            throw std::domain_error("build_model: fold polyline lies entirely at or above the horizon");
        }
        folds.push_back(&b);
    }
    if (folds.empty()) throw std::domain_error("build_model: no fold boundary to erect walls on");

    const double w = static_cast<double>(labels.width);
    const double h = static_cast<double>(labels.height);
    double top = h;
    for (const Boundary* b : folds) {
        for (const Point2& p : b->polyline) {
            if (p.y > horizon) top = std::min(top, p.y);
        }
    }
    if (top < h) {
        Plane ground;
        ground.role = PlaneRole::kGround;
        ground.image_points = {{0.0, h}, {w, h}, {w, top}, {0.0, top}};
        for (const Point2& p : ground.image_points) {
            ground.vertices.push_back(cam.ground_point(p));
            ground.texcoords.push_back(texcoord(p, labels.width, labels.height));
        }
        face_camera(ground, cam);
        model.planes.push_back(std::move(ground));
    }

    for (const Boundary* b : folds) {
        for (std::size_t i = 0; i + 1 < b->polyline.size(); ++i) {
            const Point2 p0 = b->polyline[i];
            const Point2 p1 = b->polyline[i + 1];
            if (p0.y <= horizon || p1.y <= horizon) continue;
            const auto c0 = static_cast<std::size_t>(std::max(0.0, std::floor(std::min(p0.x, p1.x))));
            const auto c1 = static_cast<std::size_t>(std::min(w, std::ceil(std::max(p0.x, p1.x))));
            const auto below = static_cast<std::size_t>(std::ceil(std::max(p0.y, p1.y)));
            std::size_t v_top = labels.height;
            for (std::size_t x = c0; x < c1; ++x) {
                for (std::size_t y = 0; y < std::min(below, labels.height); ++y) {
                    if (is_vertical_like(labels.at(y, x))) {
                        v_top = std::min(v_top, y);
                        break;
                    }
                }
            }
            const double vt = static_cast<double>(v_top);
            if (v_top == labels.height || vt >= std::min(p0.y, p1.y)) continue;

            Plane wall;
            wall.role = PlaneRole::kVertical;
            const Vec3 b0 = cam.ground_point(p0);
            const Vec3 b1 = cam.ground_point(p1);
            auto lift = [&](const Vec3& base) {
                const double depth = -base[2];
                return Vec3{base[0], cam.height + (cam.horizon_row - vt) * depth / cam.focal_length, base[2]};
            };
            wall.vertices = {b0, b1, lift(b1), lift(b0)};
            wall.image_points = {p0, p1, {p1.x, vt}, {p0.x, vt}};
            for (const Point2& p : wall.image_points) {
                wall.texcoords.push_back(texcoord(p, labels.width, labels.height));
            }
            face_camera(wall, cam);
            model.planes.push_back(std::move(wall));
        }
    }
    return model;
}

void export_obj(const PopUpModel& model, const Tensor& image, const std::string& dir, const std::string& name) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw FileError(dir, "cannot create directory: " + ec.message());
    const std::filesystem::path base = std::filesystem::path(dir) / name;

    std::ostringstream obj;
    obj << std::setprecision(17);
    obj << "mtllib " << name << ".mtl\n";
    obj << "o " << name << "\n";
    for (const Plane& p : model.planes) {
        for (const Vec3& v : p.vertices) obj << "v " << v[0] << ' ' << v[1] << ' ' << v[2] << '\n';
    }
    for (const Plane& p : model.planes) {
        for (const Point2& t : p.texcoords) obj << "vt " << t.x << ' ' << t.y << '\n';
    }
    obj << "usemtl scene\n";
    std::size_t next = 1;
    for (const Plane& p : model.planes) {
        obj << "f";
        for (std::size_t i = 0; i < p.vertices.size(); ++i) obj << ' ' << next + i << '/' << next + i;
        obj << '\n';
        next += p.vertices.size();
    }

    std::ostringstream mtl;
    mtl << "newmtl scene\nKa 1 1 1\nKd 1 1 1\nKs 0 0 0\nillum 1\nmap_Kd " << name << ".ppm\n";

    for (const auto& [ext, text] : {std::pair{".obj", obj.str()}, std::pair{".mtl", mtl.str()}}) {
        const std::string path = base.string() + ext;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw FileError(path, "cannot open for writing");
        out << text;
        out.flush();
        if (!out) throw FileError(path, "write failed");
    }
    write_ppm(base.string() + ".ppm", image);
}

ObjMesh parse_obj(const std::string& text) {
    ObjMesh mesh;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& what) {
        throw FormatError("OBJ line " + std::to_string(line_no) + ": " + what);
    };
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag) || tag[0] == '#') continue;
        if (tag == "v") {
            Vec3 v;
            if (!(ls >> v[0] >> v[1] >> v[2])) fail("malformed vertex");
            mesh.vertices.push_back(v);
        } else if (tag == "vt") {
            Point2 t;
            if (!(ls >> t.x >> t.y)) fail("malformed texture coordinate");
            mesh.texcoords.push_back(t);
        } else if (tag == "f") {
            std::vector<std::array<std::size_t, 2>> face;
            std::string ref;
            while (ls >> ref) {
                std::size_t v = 0;
                std::size_t t = 0;
                char slash = 0;
                std::istringstream rs(ref);
                if (!(rs >> v)) fail("malformed face index");
                if (rs >> slash) {
                    if (slash != '/' || !(rs >> t)) fail("malformed face index");
                }
                if (v == 0 || v > mesh.vertices.size()) fail("vertex index out of range");
                if (t > mesh.texcoords.size()) fail("texture index out of range");
                face.push_back({v, t});
            }
            if (face.size() < 3) fail("face with fewer than three vertices");
            mesh.faces.push_back(std::move(face));
        }
    }
    return mesh;
}

}  // namespace hlstm
