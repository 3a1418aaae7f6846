#include "posevid/mask.hpp"

#include "posevid/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>

namespace posevid {

namespace {

void require_same_grid(const Mask& a, const Mask& b, const char* op)
{
    if (a.height() != b.height() || a.width() != b.width()) {
        throw DimensionError(std::string(op) + ": grid mismatch " + std::to_string(a.height()) + "x" +
                             std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                             std::to_string(b.width()));
    }
}

// 1-D "any set within radius" along rows or columns using prefix counts.
Mask box_dilate_axis(const Mask& m, int radius, bool along_rows)
{
    const auto h = static_cast<long>(m.height());
    const auto w = static_cast<long>(m.width());
    Mask out(m.height(), m.width(), m.label());
    const long lines = along_rows ? h : w;
    const long len = along_rows ? w : h;
    std::vector<long> prefix(static_cast<std::size_t>(len) + 1);
    for (long line = 0; line < lines; ++line) {
        for (long i = 0; i < len; ++i) {
            const bool on = along_rows ? m.get(line, i) : m.get(i, line);
            prefix[i + 1] = prefix[i] + (on ? 1 : 0);
        }
        for (long i = 0; i < len; ++i) {
            const long lo = std::max(0L, i - radius);
            const long hi = std::min(len - 1, i + radius);
            if (prefix[hi + 1] - prefix[lo] > 0) {
                if (along_rows) {
                    out.set(line, i);
                } else {
                    out.set(i, line);
                }
            }
        }
    }
    return out;
}

long squared_distance(GridPoint a, GridPoint b)
{
    const long dr = a.row - b.row;
    const long dc = a.col - b.col;
    return dr * dr + dc * dc;
}

// Smallest non-negative integer r with r*r >= d2.
int ceil_sqrt(long d2)
{
    auto r = static_cast<long>(std::sqrt(static_cast<double>(d2)));
    while (r * r < d2) {
        ++r;
    }
    while (r > 0 && (r - 1) * (r - 1) >= d2) {
        --r;
    }
    return static_cast<int>(r);
}

std::vector<GridPoint> segment_pixels_on_grid(const SkeletonSegment& seg, std::size_t height, std::size_t width)
{
    validate_segment(seg);
    for (const auto& p : seg.points) {
        if (p.row < 0 || p.col < 0 || static_cast<std::size_t>(p.row) >= height ||
            static_cast<std::size_t>(p.col) >= width) {
            throw DomainError("segment point (" + std::to_string(p.row) + "," + std::to_string(p.col) +
                              ") outside " + std::to_string(height) + "x" + std::to_string(width) + " grid");
        }
    }
    return seg.points;
}

}  // namespace

Mask::Mask(std::size_t height, std::size_t width, std::string label)
    : height_(height), width_(width), bits_(height * width, 0), label_(std::move(label))
{
    if (height == 0 || width == 0) {
        throw DimensionError("mask grid must be at least 1x1");
    }
}

Mask::Mask(std::size_t height, std::size_t width, std::vector<std::uint8_t> bits, std::string label)
    : Mask(height, width, std::move(label))
{
    if (bits.size() != bits_.size()) {
        throw DimensionError("mask bit buffer does not match grid size");
    }
    for (std::size_t i = 0; i < bits.size(); ++i) {
        bits_[i] = bits[i] ? 1 : 0;
    }
}

bool Mask::contains(GridPoint p) const
{
    return p.row >= 0 && p.col >= 0 && static_cast<std::size_t>(p.row) < height_ &&
           static_cast<std::size_t>(p.col) < width_;
}

std::size_t Mask::area() const
{
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

bool Mask::same_pixels(const Mask& other) const
{
    return height_ == other.height_ && width_ == other.width_ && bits_ == other.bits_;
}

bool Mask::subset_of(const Mask& other) const
{
    require_same_grid(*this, other, "subset_of");
    for (std::size_t i = 0; i < bits_.size(); ++i) {
        if (bits_[i] && !other.bits_[i]) {
            return false;
        }
    }
    return true;
}

Mask mask_union(const Mask& a, const Mask& b)
{
    require_same_grid(a, b, "mask_union");
    Mask out(a.height(), a.width(), a.label());
    for (std::size_t r = 0; r < a.height(); ++r) {
        for (std::size_t c = 0; c < a.width(); ++c) {
            out.set(r, c, a.get(r, c) || b.get(r, c));
        }
    }
    return out;
}

Mask mask_intersection(const Mask& a, const Mask& b)
{
    require_same_grid(a, b, "mask_intersection");
    Mask out(a.height(), a.width(), a.label());
    for (std::size_t r = 0; r < a.height(); ++r) {
        for (std::size_t c = 0; c < a.width(); ++c) {
            out.set(r, c, a.get(r, c) && b.get(r, c));
        }
    }
    return out;
}

std::size_t intersection_area(const Mask& a, const Mask& b)
{
    require_same_grid(a, b, "intersection_area");
    std::size_t n = 0;
    const auto ba = a.bits();
    const auto bb = b.bits();
    for (std::size_t i = 0; i < ba.size(); ++i) {
        n += (ba[i] & bb[i]);
    }
    return n;
}

double iou(const Mask& a, const Mask& b)
{
    require_same_grid(a, b, "iou");
    const std::size_t inter = intersection_area(a, b);
    const std::size_t uni = a.area() + b.area() - inter;
    if (uni == 0) {
        return 0.0;
    }
    return static_cast<double>(inter) / static_cast<double>(uni);
}

void validate_segment(const SkeletonSegment& seg)
{
    if (seg.points.empty()) {
        throw DomainError("skeleton segment has no points");
    }
    for (std::size_t i = 1; i < seg.points.size(); ++i) {
        const int dr = std::abs(seg.points[i].row - seg.points[i - 1].row);
        const int dc = std::abs(seg.points[i].col - seg.points[i - 1].col);
        if (dr > 1 || dc > 1) {
            throw DomainError("skeleton segment " + std::to_string(seg.segment_index) +
                              ": points " + std::to_string(i - 1) + " and " + std::to_string(i) +
                              " are not 8-neighbours");
        }
    }
}

std::vector<GridPoint> densify_polyline(std::span<const GridPoint> vertices)
{
    std::vector<GridPoint> out;
    if (vertices.empty()) {
        return out;
    }
    out.push_back(vertices.front());
    for (std::size_t v = 1; v < vertices.size(); ++v) {
        int r0 = vertices[v - 1].row, c0 = vertices[v - 1].col;
        const int r1 = vertices[v].row, c1 = vertices[v].col;
        const int dr = std::abs(r1 - r0), dc = std::abs(c1 - c0);
        const int sr = r0 < r1 ? 1 : -1, sc = c0 < c1 ? 1 : -1;
        int err = dc - dr;
        while (r0 != r1 || c0 != c1) {
            const int e2 = 2 * err;
            if (e2 > -dr) {
                err -= dr;
                c0 += sc;
            }
            if (e2 < dc) {
                err += dc;
                r0 += sr;
            }
            out.push_back({r0, c0});
        }
    }
    return out;
}

void PartMaskConfig::validate() const
{
    if (alpha_cap < 0) {
        throw DomainError("alpha_cap must be non-negative");
    }
    if (!(coverage_tau > 0.0 && coverage_tau <= 1.0)) {
        throw DomainError("coverage_tau must lie in (0, 1]");
    }
}

Mask dilate(const Mask& m, int alpha, const PartMaskConfig& cfg)
{
    if (alpha < 0) {
        throw DomainError("dilate: alpha must be non-negative");
    }
    if (alpha == 0) {
        return m;
    }
    if (cfg.element == StructuringElement::square) {
        return box_dilate_axis(box_dilate_axis(m, alpha, true), alpha, false);
    }

    // Disk: the nearest set pixel to any unset pixel is a boundary pixel,
    // so stamping boundary pixels suffices.
    const auto h = static_cast<int>(m.height());
    const auto w = static_cast<int>(m.width());
    std::vector<GridPoint> offsets;
    for (int dr = -alpha; dr <= alpha; ++dr) {
        for (int dc = -alpha; dc <= alpha; ++dc) {
            if (dr * dr + dc * dc <= alpha * alpha) {
                offsets.push_back({dr, dc});
            }
        }
    }
    Mask out = m;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (!m.get(r, c)) {
                continue;
            }
            const bool interior = r > 0 && r < h - 1 && c > 0 && c < w - 1 && m.get(r - 1, c) &&
                                  m.get(r + 1, c) && m.get(r, c - 1) && m.get(r, c + 1);
            if (interior) {
                continue;
            }
            for (const auto& o : offsets) {
                const int rr = r + o.row, cc = c + o.col;
                if (rr >= 0 && rr < h && cc >= 0 && cc < w) {
                    out.set(rr, cc);
                }
            }
        }
    }
    return out;
}

Mask rasterize_segment(const SkeletonSegment& seg, std::size_t height, std::size_t width)
{
    Mask out(height, width);
    for (const auto& p : segment_pixels_on_grid(seg, height, width)) {
        out.set(p.row, p.col);
    }
    return out;
}

std::vector<Mask> part_body_region(const Mask& subject, std::span<const SkeletonSegment> segments)
{
    if (segments.empty()) {
        throw DomainError("part_body_region: empty segment list");
    }
    if (subject.empty()) {
        throw DomainError("part_body_region: empty subject mask");
    }
    std::vector<std::vector<GridPoint>> pixels;
    pixels.reserve(segments.size());
    for (const auto& s : segments) {
        pixels.push_back(segment_pixels_on_grid(s, subject.height(), subject.width()));
    }
    // Visit segments in (segment_index, position) order so strict < keeps the lowest index on ties.
    std::vector<std::size_t> order(segments.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return segments[a].segment_index < segments[b].segment_index;
    });

    std::vector<Mask> parts(segments.size(), Mask(subject.height(), subject.width(), subject.label()));
    for (std::size_t r = 0; r < subject.height(); ++r) {
        for (std::size_t c = 0; c < subject.width(); ++c) {
            if (!subject.get(r, c)) {
                continue;
            }
            const GridPoint p{static_cast<int>(r), static_cast<int>(c)};
            long best = std::numeric_limits<long>::max();
            std::size_t owner = order.front();
            for (std::size_t s : order) {
                for (const auto& q : pixels[s]) {
                    const long d = squared_distance(p, q);
                    if (d < best) {
                        best = d;
                        owner = s;
                    }
                }
            }
            parts[owner].set(r, c);
        }
    }
    return parts;
}

int adaptive_dilation_radius(const SkeletonSegment& seg, const Mask& body, const PartMaskConfig& cfg)
{
    cfg.validate();
    if (body.empty()) {
        throw DomainError("adaptive_dilation_radius: empty body mask");
    }
    const auto pixels = segment_pixels_on_grid(seg, body.height(), body.width());

    // Per body pixel, the smallest alpha whose dilation reaches it.
    std::vector<int> reach;
    reach.reserve(body.area());
    for (std::size_t r = 0; r < body.height(); ++r) {
        for (std::size_t c = 0; c < body.width(); ++c) {
            if (!body.get(r, c)) {
                continue;
            }
            const GridPoint p{static_cast<int>(r), static_cast<int>(c)};
            long best = std::numeric_limits<long>::max();
            for (const auto& q : pixels) {
                long d = 0;
                if (cfg.element == StructuringElement::square) {
                    d = std::max(std::abs(p.row - q.row), std::abs(p.col - q.col));
                } else {
                    d = squared_distance(p, q);
                }
                best = std::min(best, d);
            }
            reach.push_back(cfg.element == StructuringElement::square ? static_cast<int>(best) : ceil_sqrt(best));
        }
    }
    std::sort(reach.begin(), reach.end());

    // Smallest covered count k with k / n >= tau, evaluated exactly as the ratio test.
    const std::size_t n = reach.size();
    const auto nd = static_cast<double>(n);
    auto k = static_cast<std::size_t>(std::ceil(cfg.coverage_tau * nd));
    k = std::min(k, n);
    while (k > 0 && static_cast<double>(k - 1) / nd >= cfg.coverage_tau) {
        --k;
    }
    while (k < n && static_cast<double>(k) / nd < cfg.coverage_tau) {
        ++k;
    }
    if (k == 0) {
        return 0;
    }
    return std::min(reach[k - 1], cfg.alpha_cap);
}

Mask token_footprint(const Mask& m, std::size_t patch_h, std::size_t patch_w, double rho)
{
    if (patch_h == 0 || patch_w == 0) {
        throw DomainError("token_footprint: patch sizes must be >= 1");
    }
    if (!(rho > 0.0 && rho <= 1.0)) {
        throw DomainError("token_footprint: rho must lie in (0, 1]");
    }
    const std::size_t th = (m.height() + patch_h - 1) / patch_h;
    const std::size_t tw = (m.width() + patch_w - 1) / patch_w;
    Mask out(th, tw, m.label());
    for (std::size_t tr = 0; tr < th; ++tr) {
        for (std::size_t tc = 0; tc < tw; ++tc) {
            const std::size_t r1 = std::min(m.height(), (tr + 1) * patch_h);
            const std::size_t c1 = std::min(m.width(), (tc + 1) * patch_w);
            std::size_t on = 0, total = 0;
            for (std::size_t r = tr * patch_h; r < r1; ++r) {
                for (std::size_t c = tc * patch_w; c < c1; ++c) {
                    on += m.get(r, c) ? 1 : 0;
                    ++total;
                }
            }
            out.set(tr, tc, static_cast<double>(on) / static_cast<double>(total) >= rho);
        }
    }
    return out;
}

std::vector<std::size_t> set_indices(const Mask& m)
{
    std::vector<std::size_t> idx;
    const auto bits = m.bits();
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i]) {
            idx.push_back(i);
        }
    }
    return idx;
}

}  // namespace posevid
