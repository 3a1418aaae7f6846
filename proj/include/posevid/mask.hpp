#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace posevid {

struct GridPoint {
    int row = 0;
    int col = 0;
    friend bool operator==(const GridPoint&, const GridPoint&) = default;
};

// Binary occupancy grid, row-major. `label` carries the segmentation class.
class Mask {
public:
    Mask() = default;
    Mask(std::size_t height, std::size_t width, std::string label = {});
    Mask(std::size_t height, std::size_t width, std::vector<std::uint8_t> bits, std::string label = {});

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t pixel_count() const { return bits_.size(); }
    const std::string& label() const { return label_; }
    void set_label(std::string label) { label_ = std::move(label); }

    bool get(std::size_t r, std::size_t c) const { return bits_[r * width_ + c] != 0; }
    void set(std::size_t r, std::size_t c, bool on = true) { bits_[r * width_ + c] = on ? 1 : 0; }
    bool contains(GridPoint p) const;

    std::span<const std::uint8_t> bits() const { return bits_; }
    std::size_t area() const;
    bool empty() const { return area() == 0; }

    // Same grid and same occupancy; labels are ignored.
    bool same_pixels(const Mask& other) const;
    // Every set pixel of this mask is set in `other`.
    bool subset_of(const Mask& other) const;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<std::uint8_t> bits_;
    std::string label_;
};

Mask mask_union(const Mask& a, const Mask& b);
Mask mask_intersection(const Mask& a, const Mask& b);
std::size_t intersection_area(const Mask& a, const Mask& b);

// |a ∩ b| / |a ∪ b|; 0 when both are empty.
double iou(const Mask& a, const Mask& b);

// Per-frame lists of labelled masks.
using MaskSequence = std::vector<std::vector<Mask>>;

// A polyline on the pixel grid. Consecutive points are 8-neighbours.
struct SkeletonSegment {
    std::vector<GridPoint> points;
    int frame_index = 0;
    int segment_index = 0;
};

// Throws DomainError unless the segment has a point and every step is an 8-neighbour move.
void validate_segment(const SkeletonSegment& seg);

// Connects arbitrary vertices with Bresenham lines so the result is a valid segment.
std::vector<GridPoint> densify_polyline(std::span<const GridPoint> vertices);

enum class StructuringElement { square, disk };

struct PartMaskConfig {
    int alpha_cap = 100;
    double coverage_tau = 1.0;
    // square: alpha iterations of a 3×3 square (Chebyshev radius alpha).
    // disk: Euclidean disk of radius alpha.
    StructuringElement element = StructuringElement::square;

    void validate() const;
};

Mask dilate(const Mask& m, int alpha, const PartMaskConfig& cfg = {});

Mask rasterize_segment(const SkeletonSegment& seg, std::size_t height, std::size_t width);

// Splits the subject mask among the segments by nearest segment pixel
// (Euclidean); ties go to the lowest segment_index.
std::vector<Mask> part_body_region(const Mask& subject, std::span<const SkeletonSegment> segments);

// Smallest alpha in [0, alpha_cap] whose dilation covers at least
// coverage_tau of the body; alpha_cap when none does.
int adaptive_dilation_radius(const SkeletonSegment& seg, const Mask& body, const PartMaskConfig& cfg = {});

// Token grid of ceil(H/patch_h) × ceil(W/patch_w); a token is set when at
// least `rho` of its (boundary-clipped) patch pixels are set.
Mask token_footprint(const Mask& m, std::size_t patch_h, std::size_t patch_w, double rho);

// Flat row-major indices of the set cells.
std::vector<std::size_t> set_indices(const Mask& m);

}  // namespace posevid
