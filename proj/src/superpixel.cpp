#include "hlstm/superpixel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>

namespace hlstm {

std::vector<std::vector<std::size_t>> SuperpixelMap::region_pixels() const {
    std::vector<std::vector<std::size_t>> out(region_count);
    for (std::size_t p = 0; p < assignment.size(); ++p) out[assignment[p]].push_back(p);
    return out;
}

std::vector<std::size_t> SuperpixelMap::region_sizes() const {
    std::vector<std::size_t> out(region_count, 0);
    for (std::uint32_t r : assignment) ++out[r];
    return out;
}

std::size_t target_region_count(std::size_t height, std::size_t width, double scale, ScaleMeaning meaning) {
    const std::size_t pixels = height * width;
    if (height == 0 || width == 0) throw std::invalid_argument("oversegment: image has a zero extent");
    if (!(scale >= 1.0) || scale > static_cast<double>(pixels)) {
        throw std::invalid_argument("oversegment: scale " + std::to_string(scale) + " outside [1, " +
                                    std::to_string(pixels) + "]");
    }
    if (meaning == ScaleMeaning::kRegionCount) {
        return std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(scale)), 1, pixels);
    }
    return static_cast<std::size_t>(std::ceil(static_cast<double>(pixels) / scale - 1e-9));
}

namespace {

struct Center {
    double y = 0.0;
    double x = 0.0;
    std::vector<double> color;
};

/// Keeps the largest 4-connected component of every label and merges each
/// remaining component into the adjacent region with the most pixels.
std::vector<std::uint32_t> enforce_connectivity(const std::vector<std::uint32_t>& labels, std::size_t height,
                                                std::size_t width) {
    const std::size_t n = labels.size();
    constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

    std::vector<std::size_t> comp(n, kNone);
    std::vector<std::uint32_t> comp_label;
    std::vector<std::size_t> comp_size;
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < n; ++start) {
        if (comp[start] != kNone) continue;
        const std::size_t id = comp_label.size();
        comp_label.push_back(labels[start]);
        comp_size.push_back(0);
        comp[start] = id;
        stack.push_back(start);
        while (!stack.empty()) {
            const std::size_t p = stack.back();
            stack.pop_back();
            ++comp_size[id];
            const std::size_t y = p / width;
            const std::size_t x = p % width;
            const std::size_t nbrs[4] = {y > 0 ? p - width : kNone, y + 1 < height ? p + width : kNone,
                                         x > 0 ? p - 1 : kNone, x + 1 < width ? p + 1 : kNone};
            for (std::size_t q : nbrs) {
                if (q != kNone && comp[q] == kNone && labels[q] == labels[p]) {
                    comp[q] = id;
                    stack.push_back(q);
                }
            }
        }
    }

    const std::size_t comps = comp_label.size();
    std::vector<std::set<std::size_t>> comp_adj(comps);
    for (std::size_t p = 0; p < n; ++p) {
        const std::size_t x = p % width;
        if (x + 1 < width && comp[p] != comp[p + 1]) {
            comp_adj[comp[p]].insert(comp[p + 1]);
            comp_adj[comp[p + 1]].insert(comp[p]);
        }
        if (p + width < n && comp[p] != comp[p + width]) {
            comp_adj[comp[p]].insert(comp[p + width]);
            comp_adj[comp[p + width]].insert(comp[p]);
        }
    }

    // Largest component per label wins; ties go to the earlier component.
    std::vector<std::size_t> keeper_of_label;
    for (std::size_t c = 0; c < comps; ++c) {
        const std::uint32_t l = comp_label[c];
        if (keeper_of_label.size() <= l) keeper_of_label.resize(l + 1, kNone);
        if (keeper_of_label[l] == kNone || comp_size[c] > comp_size[keeper_of_label[l]]) keeper_of_label[l] = c;
    }
    // Each component resolves to a keeper component, which stands for a final region.
    std::vector<std::size_t> owner(comps, kNone);
    std::vector<std::size_t> owner_size(comps, 0);
    for (std::size_t c = 0; c < comps; ++c) {
        if (keeper_of_label[comp_label[c]] == c) {
            owner[c] = c;
            owner_size[c] = comp_size[c];
        }
    }
    bool pending = true;
    while (pending) {
        pending = false;
        bool progressed = false;
        for (std::size_t c = 0; c < comps; ++c) {
            if (owner[c] != kNone) continue;
            std::size_t best = kNone;
            for (std::size_t nb : comp_adj[c]) {
                const std::size_t o = owner[nb];
                if (o == kNone) continue;
                if (best == kNone || owner_size[o] > owner_size[best] || (owner_size[o] == owner_size[best] && o < best)) {
                    best = o;
                }
            }
            if (best == kNone) {
                pending = true;
                continue;
            }
            owner[c] = best;
            owner_size[best] += comp_size[c];
            progressed = true;
        }
        if (pending && !progressed) throw std::logic_error("enforce_connectivity: orphan component without owner");
    }

    // Relabel keepers in raster order of their first pixel.
    std::vector<std::uint32_t> region_of_keeper(comps, std::numeric_limits<std::uint32_t>::max());
    std::vector<std::uint32_t> out(n);
    std::uint32_t next = 0;
    for (std::size_t p = 0; p < n; ++p) {
        const std::size_t k = owner[comp[p]];
        if (region_of_keeper[k] == std::numeric_limits<std::uint32_t>::max()) region_of_keeper[k] = next++;
        out[p] = region_of_keeper[k];
    }
    return out;
}

}  // namespace

SuperpixelMap oversegment(const Tensor& image, double scale, const SlicOptions& options) {
    if (image.rank() != 3) throw std::invalid_argument("oversegment expects a (C, H, W) image");
    const std::size_t channels = image.dim(0);
    const std::size_t height = image.dim(1);
    const std::size_t width = image.dim(2);
    const std::size_t seeds_wanted = target_region_count(height, width, scale, options.meaning);
    const std::size_t n = height * width;

    const double spacing = std::sqrt(static_cast<double>(n) / static_cast<double>(seeds_wanted));
    const std::size_t rows = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(static_cast<double>(height) / spacing)), 1, height);
    const std::size_t cols = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(static_cast<double>(seeds_wanted) / static_cast<double>(rows))), 1,
        width);

    auto color_at = [&](std::size_t c, std::size_t p) { return image[c * n + p]; };

    std::vector<Center> centers;
    centers.reserve(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            Center k;
            k.y = (static_cast<double>(r) + 0.5) * static_cast<double>(height) / static_cast<double>(rows) - 0.5;
            k.x = (static_cast<double>(c) + 0.5) * static_cast<double>(width) / static_cast<double>(cols) - 0.5;
            const auto py = std::min<std::size_t>(height - 1, static_cast<std::size_t>(std::floor(k.y + 0.5)));
            const auto px = std::min<std::size_t>(width - 1, static_cast<std::size_t>(std::floor(k.x + 0.5)));
            k.color.resize(channels);
            for (std::size_t ch = 0; ch < channels; ++ch) k.color[ch] = color_at(ch, py * width + px);
            centers.push_back(std::move(k));
        }
    }

    const double inv_s2 = 1.0 / (spacing * spacing);
    const double m2 = options.compactness * options.compactness;
    const double window = 2.0 * spacing;
    std::vector<std::uint32_t> labels(n, 0);
    std::vector<double> best_d(n);
    std::vector<double> best_s(n);

    for (std::size_t iter = 0; iter < options.iterations; ++iter) {
        std::fill(best_d.begin(), best_d.end(), std::numeric_limits<double>::infinity());
        std::fill(best_s.begin(), best_s.end(), std::numeric_limits<double>::infinity());
        for (std::size_t k = 0; k < centers.size(); ++k) {
            const Center& ctr = centers[k];
            const long y0 = std::max<long>(0, static_cast<long>(std::floor(ctr.y - window)));
            const long y1 = std::min<long>(static_cast<long>(height) - 1, static_cast<long>(std::ceil(ctr.y + window)));
            const long x0 = std::max<long>(0, static_cast<long>(std::floor(ctr.x - window)));
            const long x1 = std::min<long>(static_cast<long>(width) - 1, static_cast<long>(std::ceil(ctr.x + window)));
            for (long y = y0; y <= y1; ++y) {
                for (long x = x0; x <= x1; ++x) {
                    const std::size_t p = static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x);
                    double dc = 0.0;
                    for (std::size_t ch = 0; ch < channels; ++ch) {
                        const double diff = color_at(ch, p) - ctr.color[ch];
                        dc += diff * diff;
                    }
                    const double dy = static_cast<double>(y) - ctr.y;
                    const double dx = static_cast<double>(x) - ctr.x;
                    const double ds = dy * dy + dx * dx;
                    const double dist = dc + m2 * ds * inv_s2;
                    // Centers are visited in index order, so strict comparison
                    // leaves exact ties with the smaller index.
                    if (dist < best_d[p] || (dist == best_d[p] && ds < best_s[p])) {
                        best_d[p] = dist;
                        best_s[p] = ds;
                        labels[p] = static_cast<std::uint32_t>(k);
                    }
                }
            }
        }

        std::vector<double> sum_y(centers.size(), 0.0);
        std::vector<double> sum_x(centers.size(), 0.0);
        std::vector<double> sum_c(centers.size() * channels, 0.0);
        std::vector<std::size_t> count(centers.size(), 0);
        for (std::size_t p = 0; p < n; ++p) {
            const std::uint32_t k = labels[p];
            sum_y[k] += static_cast<double>(p / width);
            sum_x[k] += static_cast<double>(p % width);
            for (std::size_t ch = 0; ch < channels; ++ch) sum_c[k * channels + ch] += color_at(ch, p);
            ++count[k];
        }
        for (std::size_t k = 0; k < centers.size(); ++k) {
            if (count[k] == 0) continue;
            const double inv = 1.0 / static_cast<double>(count[k]);
            centers[k].y = sum_y[k] * inv;
            centers[k].x = sum_x[k] * inv;
            for (std::size_t ch = 0; ch < channels; ++ch) centers[k].color[ch] = sum_c[k * channels + ch] * inv;
        }
    }

    SuperpixelMap map;
    map.height = height;
    map.width = width;
    map.scale = scale;
    map.assignment = enforce_connectivity(labels, height, width);
    map.region_count = map.assignment.empty()
                           ? 0
                           : static_cast<std::size_t>(*std::max_element(map.assignment.begin(), map.assignment.end())) + 1;
    return map;
}

AdjacencyGraph adjacency(const SuperpixelMap& map) {
    std::set<std::pair<std::uint32_t, std::uint32_t>> edges;
    const std::size_t n = map.assignment.size();
    for (std::size_t p = 0; p < n; ++p) {
        const std::uint32_t a = map.assignment[p];
        if ((p % map.width) + 1 < map.width) {
            const std::uint32_t b = map.assignment[p + 1];
            if (a != b) edges.insert(std::minmax(a, b));
        }
        if (p + map.width < n) {
            const std::uint32_t b = map.assignment[p + map.width];
            if (a != b) edges.insert(std::minmax(a, b));
        }
    }
    AdjacencyGraph g;
    g.node_count = map.region_count;
    g.edges.assign(edges.begin(), edges.end());
    g.neighbors.resize(map.region_count);
    for (const auto& [a, b] : g.edges) {
        g.ordered_pairs.emplace_back(a, b);
        g.ordered_pairs.emplace_back(b, a);
        g.neighbors[a].push_back(b);
        g.neighbors[b].push_back(a);
    }
    std::sort(g.ordered_pairs.begin(), g.ordered_pairs.end());
    for (auto& nb : g.neighbors) std::sort(nb.begin(), nb.end());
    return g;
}

Tensor assign_back(const Tensor& region_values, const SuperpixelMap& map) {
    if (region_values.rank() != 2 || region_values.dim(1) != map.region_count) {
        throw std::invalid_argument("assign_back: expected one value column per region (" +
                                    std::to_string(map.region_count) + "), got " +
                                    shape_string(region_values.shape()));
    }
    const std::size_t d = region_values.dim(0);
    const std::size_t n = map.assignment.size();
    const std::size_t k = map.region_count;
    Tensor out({d, map.height, map.width});
    for (std::size_t c = 0; c < d; ++c) {
        const double* src = region_values.raw() + c * k;
        double* dst = out.raw() + c * n;
        for (std::size_t p = 0; p < n; ++p) dst[p] = src[map.assignment[p]];
    }
    return out;
}

std::pair<Tensor, Tensor> assign_back(const Tensor& region_h, const Tensor& region_m, const SuperpixelMap& map) {
    return {assign_back(region_h, map), assign_back(region_m, map)};
}

Tensor region_mean(const Tensor& field, const SuperpixelMap& map) {
    const std::size_t d = field.dim(0);
    const std::size_t n = map.assignment.size();
    if (field.size() != d * n) throw std::invalid_argument("region_mean: field does not match map extents");
    const std::size_t k = map.region_count;
    Tensor out({d, k});
    const std::vector<std::size_t> sizes = map.region_sizes();
    for (std::size_t c = 0; c < d; ++c) {
        const double* src = field.raw() + c * n;
        double* dst = out.raw() + c * k;
        for (std::size_t p = 0; p < n; ++p) dst[map.assignment[p]] += src[p];
        for (std::size_t r = 0; r < k; ++r) dst[r] /= static_cast<double>(sizes[r]);
    }
    return out;
}

bool is_partition(const SuperpixelMap& map) {
    if (map.assignment.size() != map.height * map.width || map.region_count == 0) return false;
    std::vector<bool> used(map.region_count, false);
    for (std::uint32_t r : map.assignment) {
        if (r >= map.region_count) return false;
        used[r] = true;
    }
    return std::all_of(used.begin(), used.end(), [](bool u) { return u; });
}

bool regions_connected(const SuperpixelMap& map) {
    const std::size_t n = map.assignment.size();
    std::vector<bool> seen(n, false);
    std::vector<bool> region_done(map.region_count, false);
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < n; ++start) {
        if (seen[start]) continue;
        const std::uint32_t r = map.assignment[start];
        if (region_done[r]) return false;  // a second component of the same region
        region_done[r] = true;
        seen[start] = true;
        stack.push_back(start);
        while (!stack.empty()) {
            const std::size_t p = stack.back();
            stack.pop_back();
            const std::size_t y = p / map.width;
            const std::size_t x = p % map.width;
            auto visit = [&](std::size_t q) {
                if (!seen[q] && map.assignment[q] == r) {
                    seen[q] = true;
                    stack.push_back(q);
                }
            };
            if (y > 0) visit(p - map.width);
            if (y + 1 < map.height) visit(p + map.width);
            if (x > 0) visit(p - 1);
            if (x + 1 < map.width) visit(p + 1);
        }
    }
    return true;
}

}  // namespace hlstm
