#include "posevid/skeleton.hpp"

#include <algorithm>

namespace posevid {

std::size_t SkeletonSequence::valid_count() const
{
    return static_cast<std::size_t>(
        std::count_if(frames.begin(), frames.end(), [](const SkeletonFrame& f) { return f.valid; }));
}

std::vector<Mask> render_skeleton(const SkeletonSequence& seq, std::size_t height, std::size_t width)
{
    std::vector<Mask> out;
    out.reserve(seq.frames.size());
    for (const auto& frame : seq.frames) {
        Mask m(height, width);
        if (frame.valid) {
            for (const auto& seg : frame.segments) {
                m = mask_union(m, rasterize_segment(seg, height, width));
            }
        }
        out.push_back(std::move(m));
    }
    return out;
}

}  // namespace posevid
