#include <doctest.h>

#include "posevid/error.hpp"
#include "posevid/metrics.hpp"
#include "posevid/rng.hpp"

#include <cmath>

using namespace posevid;

namespace {

Frame constant(std::size_t h, std::size_t w, double v, double max = 255.0)
{
    Frame f;
    f.height = h;
    f.width = w;
    f.max_value = max;
    f.pixels.assign(h * w, v);
    return f;
}

Frame random_frame(std::size_t h, std::size_t w, CounterRng& rng)
{
    Frame f = constant(h, w, 0.0);
    for (double& v : f.pixels) {
        v = std::floor(rng.uniform() * 256.0);
    }
    return f;
}

}  // namespace

TEST_CASE("psnr")
{
    Frame a = constant(4, 4, 100);
    Frame b = a;
    for (std::size_t i = 0; i < b.pixels.size(); ++i) {
        b.pixels[i] += (i % 2 == 0) ? 1.0 : -1.0;
    }
    CHECK(psnr({a, b}) == doctest::Approx(20.0 * std::log10(255.0)).epsilon(1e-12));
    CHECK(psnr({a, b}) == doctest::Approx(48.1308).epsilon(1e-5));
    CHECK(psnr({a, a}) == kPsnrCap);
    CHECK(psnr({constant(3, 3, 0), constant(3, 3, 255)}) == doctest::Approx(0.0));
    CHECK_THROWS_AS(psnr({a, constant(4, 5, 1)}), DimensionError);
    CHECK_THROWS_AS(psnr({a, constant(4, 4, 300)}), DomainError);
}

TEST_CASE("ssim")
{
    CounterRng rng(1);
    const Frame r = random_frame(16, 16, rng);
    CHECK(ssim({r, r}) == doctest::Approx(1.0));

    // Constant frames: variances vanish so SSIM is the luminance term only.
    const double c1 = (0.01 * 255) * (0.01 * 255);
    const double expect = (2 * 50.0 * 200.0 + c1) / (50.0 * 50.0 + 200.0 * 200.0 + c1);
    CHECK(ssim({constant(12, 12, 50), constant(12, 12, 200)}) == doctest::Approx(expect).epsilon(1e-12));

    // Mirrored pattern around mid-grey: perfectly anti-correlated.
    Frame neg = r;
    for (double& v : neg.pixels) {
        v = 255.0 - v;
    }
    CHECK(ssim({r, neg}) < 0.0);

    const Frame other = random_frame(16, 16, rng);
    CHECK(ssim({r, other}) == doctest::Approx(ssim({other, r})).epsilon(1e-12));
    CHECK(ssim({r, other}, 3) <= 1.0);
    CHECK_THROWS_AS(ssim({r, r}, 4), DomainError);
    CHECK_THROWS_AS(ssim({constant(5, 5, 1), constant(5, 5, 1)}), DimensionError);
}

TEST_CASE("l1")
{
    CHECK(l1({constant(4, 4, 7), constant(4, 4, 7)}) == 0.0);
    CHECK(l1({constant(4, 4, 0), constant(4, 4, 255)}) == 1.0);
    CHECK(l1({constant(4, 4, 0), constant(4, 4, 127.5)}) == 0.5);
    CounterRng rng(2);
    const Frame a = random_frame(6, 6, rng);
    const Frame b = random_frame(6, 6, rng);
    CHECK(l1({a, b}) == l1({b, a}));
}

TEST_CASE("video metric is the frame mean")
{
    const std::vector<FramePair> frames{{constant(4, 4, 0), constant(4, 4, 255)},
                                        {constant(4, 4, 0), constant(4, 4, 0)}};
    CHECK(video_metric(frames, l1) == 0.5);
    CHECK(video_metric(frames, metric_by_name("psnr")) == doctest::Approx(50.0));
    CHECK_THROWS(metric_by_name("lpips"));
    CHECK_THROWS(metric_by_name("fvd"));
    CHECK_THROWS_AS(video_metric({}, l1), DomainError);
}
