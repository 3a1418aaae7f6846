#include <doctest.h>

#include "posevid/error.hpp"
#include "posevid/io.hpp"
#include "posevid/mask.hpp"
#include "posevid/rng.hpp"
#include "posevid/skeleton.hpp"

#include <cmath>

using namespace posevid;

namespace {

Mask from_points(std::size_t h, std::size_t w, std::initializer_list<GridPoint> pts)
{
    Mask m(h, w);
    for (auto p : pts) {
        m.set(static_cast<std::size_t>(p.row), static_cast<std::size_t>(p.col));
    }
    return m;
}

// Direct definition: a pixel is set when some input pixel lies within the element.
Mask naive_dilate(const Mask& m, int alpha, StructuringElement e)
{
    Mask out(m.height(), m.width());
    for (std::size_t r = 0; r < m.height(); ++r) {
        for (std::size_t c = 0; c < m.width(); ++c) {
            for (std::size_t r2 = 0; r2 < m.height() && !out.get(r, c); ++r2) {
                for (std::size_t c2 = 0; c2 < m.width(); ++c2) {
                    if (!m.get(r2, c2)) {
                        continue;
                    }
                    const long dr = static_cast<long>(r) - static_cast<long>(r2);
                    const long dc = static_cast<long>(c) - static_cast<long>(c2);
                    const bool inside = e == StructuringElement::square
                                            ? std::max(std::labs(dr), std::labs(dc)) <= alpha
                                            : dr * dr + dc * dc <= static_cast<long>(alpha) * alpha;
                    if (inside) {
                        out.set(r, c);
                        break;
                    }
                }
            }
        }
    }
    return out;
}

int scan_radius(const SkeletonSegment& seg, const Mask& body, const PartMaskConfig& cfg)
{
    const Mask base = rasterize_segment(seg, body.height(), body.width());
    for (int a = 0; a <= cfg.alpha_cap; ++a) {
        const Mask d = dilate(base, a, cfg);
        std::size_t hit = 0;
        for (std::size_t r = 0; r < body.height(); ++r) {
            for (std::size_t c = 0; c < body.width(); ++c) {
                hit += (d.get(r, c) && body.get(r, c)) ? 1 : 0;
            }
        }
        if (static_cast<double>(hit) / static_cast<double>(body.area()) >= cfg.coverage_tau) {
            return a;
        }
    }
    return cfg.alpha_cap;
}

}  // namespace

TEST_CASE("iou")
{
    const Mask a = from_points(4, 4, {{1, 1}, {1, 2}});
    CHECK(iou(a, a) == 1.0);
    CHECK(iou(a, from_points(4, 4, {{3, 3}})) == 0.0);
    CHECK(iou(a, from_points(4, 4, {{1, 2}, {1, 3}})) == doctest::Approx(1.0 / 3.0));
    CHECK(iou(Mask(4, 4), Mask(4, 4)) == 0.0);
    CHECK_THROWS_AS(iou(a, Mask(4, 5)), DimensionError);

    CounterRng rng(2);
    for (int k = 0; k < 20; ++k) {
        Mask x(6, 6), y(6, 6);
        for (std::size_t i = 0; i < 6; ++i) {
            for (std::size_t j = 0; j < 6; ++j) {
                x.set(i, j, rng.uniform() < 0.4);
                y.set(i, j, rng.uniform() < 0.4);
            }
        }
        CHECK(iou(x, y) == iou(y, x));
    }
}

TEST_CASE("dilate examples")
{
    const Mask centre = from_points(7, 7, {{3, 3}});
    CHECK(dilate(centre, 0).same_pixels(centre));
    const Mask block = dilate(centre, 1);
    CHECK(block.area() == 9);
    for (int r = 2; r <= 4; ++r) {
        for (int c = 2; c <= 4; ++c) {
            CHECK(block.get(r, c));
        }
    }
    const Mask corner = dilate(from_points(5, 5, {{0, 0}}), 1);
    CHECK(corner.area() == 4);
    CHECK(corner.get(1, 1));
    CHECK_THROWS_AS(dilate(centre, -1), DomainError);
}

TEST_CASE("dilate matches the direct definition and is monotone")
{
    CounterRng rng(11);
    for (int k = 0; k < 30; ++k) {
        Mask m(9, 11);
        for (std::size_t i = 0; i < 9; ++i) {
            for (std::size_t j = 0; j < 11; ++j) {
                m.set(i, j, rng.uniform() < 0.08);
            }
        }
        for (auto e : {StructuringElement::square, StructuringElement::disk}) {
            PartMaskConfig cfg;
            cfg.element = e;
            Mask prev = m;
            for (int a = 0; a <= 4; ++a) {
                const Mask d = dilate(m, a, cfg);
                CHECK(d.same_pixels(naive_dilate(m, a, e)));
                CHECK(prev.subset_of(d));
                prev = d;
            }
        }
    }
}

TEST_CASE("rasterize segment")
{
    SkeletonSegment s;
    s.points = {{2, 2}};
    CHECK(rasterize_segment(s, 5, 5).area() == 1);
    s.points = {{0, 0}, {1, 1}, {2, 2}};
    CHECK(rasterize_segment(s, 5, 5).area() == 3);
    s.points = {{0, 0}, {1, 0}, {2, 0}, {2, 1}, {2, 2}};
    const Mask l = rasterize_segment(s, 5, 5);
    CHECK(l.area() == 5);
    CHECK(l.get(2, 2));
    s.points = {{0, 0}, {5, 0}};
    CHECK_THROWS_AS(rasterize_segment(s, 5, 5), DomainError);
    s.points = {{0, 0}, {0, 2}};
    CHECK_THROWS_AS(validate_segment(s), DomainError);
    const GridPoint v[2] = {{0, 0}, {3, 7}};
    s.points = densify_polyline(v);
    CHECK_NOTHROW(validate_segment(s));
}

TEST_CASE("part body region")
{
    Mask bar(1, 7);
    for (std::size_t c = 0; c < 7; ++c) {
        bar.set(0, c);
    }
    SkeletonSegment a, b;
    a.points = {{0, 0}};
    a.segment_index = 0;
    b.points = {{0, 6}};
    b.segment_index = 1;

    const std::vector<SkeletonSegment> one{a};
    CHECK(part_body_region(bar, one)[0].same_pixels(bar));

    const std::vector<SkeletonSegment> two{a, b};
    const auto parts = part_body_region(bar, two);
    CHECK(parts[0].area() == 4);  // column 3 is equidistant and goes to index 0
    CHECK(parts[0].get(0, 3));
    CHECK(parts[1].area() == 3);

    SkeletonSegment outside;
    outside.points = {{4, 4}};
    Mask subject(5, 5);
    subject.set(0, 0);
    subject.set(0, 1);
    const std::vector<SkeletonSegment> far{outside};
    CHECK(part_body_region(subject, far)[0].same_pixels(subject));
    CHECK_THROWS_AS(part_body_region(subject, std::vector<SkeletonSegment>{}), DomainError);

    CounterRng rng(4);
    for (int k = 0; k < 20; ++k) {
        Mask s(12, 12);
        for (std::size_t i = 0; i < 12; ++i) {
            for (std::size_t j = 0; j < 12; ++j) {
                s.set(i, j, rng.uniform() < 0.5);
            }
        }
        std::vector<SkeletonSegment> segs(3);
        for (int j = 0; j < 3; ++j) {
            segs[j].segment_index = j;
            segs[j].points = {{static_cast<int>(rng.uniform_int(0, 11)), static_cast<int>(rng.uniform_int(0, 11))}};
        }
        const auto regions = part_body_region(s, segs);
        Mask all(12, 12);
        std::size_t total = 0;
        for (const auto& r : regions) {
            total += r.area();
            all = mask_union(all, r);
        }
        CHECK(all.same_pixels(s));
        CHECK(total == s.area());
    }
}

TEST_CASE("adaptive dilation radius")
{
    SkeletonSegment seg;
    seg.points = {{5, 5}, {5, 6}, {5, 7}};
    const Mask raster = rasterize_segment(seg, 15, 15);

    CHECK(adaptive_dilation_radius(seg, raster) == 0);
    CHECK(adaptive_dilation_radius(seg, dilate(raster, 3)) == 3);

    PartMaskConfig half;
    half.coverage_tau = 0.5;
    CHECK(adaptive_dilation_radius(seg, dilate(raster, 3), half) == scan_radius(seg, dilate(raster, 3), half));

    PartMaskConfig small;
    small.alpha_cap = 4;
    const Mask far = from_points(15, 15, {{14, 14}});
    CHECK(adaptive_dilation_radius(seg, far, small) == 4);
    CHECK_THROWS_AS(adaptive_dilation_radius(seg, Mask(15, 15)), DomainError);

    CounterRng rng(8);
    for (int k = 0; k < 40; ++k) {
        Mask body(16, 16);
        for (std::size_t i = 0; i < 16; ++i) {
            for (std::size_t j = 0; j < 16; ++j) {
                body.set(i, j, rng.uniform() < 0.3);
            }
        }
        if (body.empty()) {
            continue;
        }
        PartMaskConfig cfg;
        cfg.coverage_tau = 0.25 + 0.75 * rng.uniform();
        cfg.alpha_cap = static_cast<int>(rng.uniform_int(0, 20));
        cfg.element = rng.uniform() < 0.5 ? StructuringElement::square : StructuringElement::disk;
        const GridPoint v[2] = {{static_cast<int>(rng.uniform_int(0, 15)), static_cast<int>(rng.uniform_int(0, 15))},
                                {static_cast<int>(rng.uniform_int(0, 15)), static_cast<int>(rng.uniform_int(0, 15))}};
        SkeletonSegment s;
        s.points = densify_polyline(v);
        CHECK(adaptive_dilation_radius(s, body, cfg) == scan_radius(s, body, cfg));
    }
}

TEST_CASE("token footprint")
{
    Mask full(4, 4);
    for (std::size_t i = 0; i < 16; ++i) {
        full.set(i / 4, i % 4);
    }
    CHECK(token_footprint(full, 2, 2, 0.5).area() == 4);
    CHECK(token_footprint(Mask(4, 4), 2, 2, 0.5).area() == 0);

    const Mask half = from_points(2, 2, {{0, 0}, {0, 1}});
    CHECK(token_footprint(half, 2, 2, 0.5).area() == 1);
    CHECK(token_footprint(half, 2, 2, 0.6).area() == 0);

    const Mask edge = from_points(3, 3, {{2, 2}});
    const Mask t = token_footprint(edge, 2, 2, 1.0);
    CHECK(t.height() == 2);
    CHECK(t.width() == 2);
    CHECK(t.get(1, 1));  // clipped patch holds a single pixel
}

TEST_CASE("PGM mask round trip and value validation")
{
    const Mask m = from_points(3, 4, {{0, 1}, {2, 3}});
    const Mask back = mask_from_pgm(decode_pgm(encode_pgm(mask_to_pgm(m))));
    CHECK(back.same_pixels(m));

    GrayImage img;
    img.height = 1;
    img.width = 2;
    img.max_value = 255;
    img.pixels = {0, 7};
    CHECK_THROWS_AS(mask_from_pgm(img), FormatError);
    CHECK_THROWS_AS(decode_pgm("P2\n1 1\n255\n0"), FormatError);
    const std::string bytes("P5\n# note\n2 1\n255\n\x00\xff", 20);
    CHECK(decode_pgm(bytes).pixels[1] == 255);
}

TEST_CASE("skeleton JSON and rendering")
{
    const json doc = json::parse(R"([[[[0,0],[0,1]]], {"segments": [], "valid": false}])");
    const SkeletonSequence seq = skeleton_from_json(doc);
    CHECK(seq.size() == 2);
    CHECK(seq.valid_count() == 1);
    CHECK(skeleton_from_json(skeleton_to_json(seq)).frames[0].segments[0].points.size() == 2);
    const auto masks = render_skeleton(seq, 2, 2);
    CHECK(masks[0].area() == 2);
    CHECK(masks[1].area() == 0);
    CHECK_THROWS_AS(skeleton_from_json(json::parse(R"({"a":1})")), FormatError);
}
