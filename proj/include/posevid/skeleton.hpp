#pragma once

#include "posevid/mask.hpp"

#include <vector>

namespace posevid {

struct SkeletonFrame {
    std::vector<SkeletonSegment> segments;
    // Sparse pose injection marks frames without a pose condition as invalid.
    bool valid = true;
};

struct SkeletonSequence {
    std::vector<SkeletonFrame> frames;

    std::size_t size() const { return frames.size(); }
    std::size_t valid_count() const;
};

// Renders every valid frame's segments into one mask per frame.
std::vector<Mask> render_skeleton(const SkeletonSequence& seq, std::size_t height, std::size_t width);

}  // namespace posevid
