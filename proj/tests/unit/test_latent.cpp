#include <doctest.h>

#include "posevid/error.hpp"
#include "posevid/latent.hpp"
#include "posevid/rng.hpp"

using namespace posevid;

namespace {

VideoLatent random_latent(std::size_t f, std::size_t h, std::size_t w, std::size_t c, std::uint64_t seed)
{
    CounterRng rng(seed);
    return VideoLatent::noise(f, h, w, c, rng);
}

}  // namespace

TEST_CASE("encode latent")
{
    VideoLatent constant(2, 4, 6, 3, 0.75);
    const VideoLatent enc = encode_latent(constant, 2);
    CHECK(enc.height() == 2);
    CHECK(enc.width() == 3);
    for (double v : enc.tensor().data()) {
        CHECK(v == 0.75);
    }
    const VideoLatent r = random_latent(2, 3, 3, 2, 1);
    CHECK(encode_latent(r, 1) == r);

    VideoLatent block(1, 2, 2, 1);
    block.at(0, 1, 0, 0) = 2;
    block.at(0, 1, 1, 0) = 2;
    CHECK(encode_latent(block, 2).at(0, 0, 0, 0) == 1.0);

    // Ragged edge: the last block averages only the pixels that exist.
    VideoLatent ragged(1, 1, 3, 1);
    ragged.at(0, 0, 2, 0) = 5;
    const VideoLatent re = encode_latent(ragged, 2);
    CHECK(re.width() == 2);
    CHECK(re.at(0, 0, 1, 0) == 5.0);
    CHECK_THROWS_AS(encode_latent(ragged, 0), DomainError);
}

TEST_CASE("channel concat")
{
    const VideoLatent a = random_latent(2, 4, 4, 3, 2);
    const VideoLatent b = random_latent(2, 4, 4, 3, 3);
    const VideoLatent z = inject_channel_concat(a, b);
    CHECK(z.tensor().shape() == Tensor::Shape{2, 4, 4, 6});
    CHECK(slice_channels(z, 0, 3) == a);
    CHECK(slice_channels(z, 3, 6) == b);
    const VideoLatent zero = slice_channels(inject_channel_concat(a, VideoLatent(2, 4, 4, 3)), 3, 6);
    for (double v : zero.tensor().data()) {
        CHECK(v == 0.0);
    }
    CHECK_THROWS_AS(inject_channel_concat(a, random_latent(2, 4, 5, 3, 1)), DimensionError);
}

TEST_CASE("width concat")
{
    const VideoLatent a = random_latent(2, 4, 4, 3, 4);
    const VideoLatent b = random_latent(2, 4, 4, 3, 5);
    const VideoLatent z = inject_width_concat(a, b);
    CHECK(z.tensor().shape() == Tensor::Shape{2, 4, 8, 3});
    CHECK(slice_width(z, 0, 4) == a);
    CHECK(slice_width(z, 4, 8) == b);
    const VideoLatent sym = inject_width_concat(a, a);
    CHECK(inject_width_concat(slice_width(sym, 4, 8), slice_width(sym, 0, 4)) == sym);
    CHECK_THROWS_AS(inject_width_concat(a, random_latent(2, 4, 4, 2, 1)), DimensionError);
}

TEST_CASE("mlp add")
{
    const VideoLatent a = random_latent(2, 3, 3, 2, 6);
    const VideoLatent p = random_latent(2, 3, 3, 2, 7);

    CounterRng rng(8);
    MlpWeights zero_last = MlpWeights::zeros(2, 5, 2);
    zero_last.w1 = Tensor::random_normal({2, 5}, rng);
    zero_last.b1 = Tensor::random_normal({1, 5}, rng);
    CHECK(inject_mlp_add(a, p, zero_last) == a);

    MlpWeights no_bias = zero_last;
    no_bias.b1 = Tensor({1, 5});
    no_bias.w2 = Tensor::random_normal({5, 2}, rng);
    CHECK(inject_mlp_add(a, VideoLatent(2, 3, 3, 2), no_bias) == a);

    // One hidden unit per channel passing positive inputs through ReLU unchanged.
    const VideoLatent pos(2, 3, 3, 2, 0.5);
    MlpWeights ident = MlpWeights::zeros(2, 2, 2);
    ident.w1 = Tensor::identity(2);
    ident.w2 = Tensor::identity(2);
    const VideoLatent sum = inject_mlp_add(a, pos, ident);
    for (std::size_t i = 0; i < sum.tensor().size(); ++i) {
        CHECK(sum.tensor()[i] == a.tensor()[i] + 0.5);
    }
    CHECK_THROWS_AS(inject_mlp_add(a, p, MlpWeights::zeros(2, 3, 4)), DimensionError);
}

TEST_CASE("pose alignment prepends a copy of the first pose frame")
{
    const VideoLatent p = random_latent(3, 2, 2, 1, 9);
    const VideoLatent al = align_pose_latent(p);
    CHECK(al.frames() == 4);
    CHECK(slice_frames(al, 0, 1) == slice_frames(p, 0, 1));
    CHECK(slice_frames(al, 1, 4) == p);
}

TEST_CASE("patchify shapes, order and projection")
{
    const VideoLatent z = random_latent(2, 4, 4, 6, 10);
    CounterRng rng(11);
    PatchifyConfig cfg;
    cfg.patch_f = 1;
    cfg.patch_h = 2;
    cfg.patch_w = 2;
    cfg.projection = Tensor::random_normal({4 * 6, 8}, rng);
    const TokenGrid g = patchify(z, cfg);
    CHECK(g.tokens.shape() == Tensor::Shape{8, 8});
    CHECK(g.f == 2);
    CHECK(g.h == 2);
    CHECK(g.w == 2);

    // Token 5 = frame 1, patch row 0, patch col 1; row vector ordered (dh, dw, c).
    const TokenGrid raw = extract_patches(z, 1, 2, 2);
    for (std::size_t dh = 0; dh < 2; ++dh) {
        for (std::size_t dw = 0; dw < 2; ++dw) {
            for (std::size_t c = 0; c < 6; ++c) {
                CHECK(raw.tokens.at(5, (dh * 2 + dw) * 6 + c) == z.at(1, dh, 2 + dw, c));
            }
        }
    }
    CHECK(max_abs_diff(g.tokens, matmul(raw.tokens, cfg.projection)) == 0.0);
    CHECK(fold_patches(raw.tokens, 1, 2, 2, 6, 2, 4, 4) == z);

    PatchifyConfig unit;
    unit.projection = Tensor::identity(6);
    const TokenGrid same = patchify(z, unit);
    CHECK(same.tokens.values() == z.tensor().values());

    const TokenGrid zero = patchify(VideoLatent(2, 4, 4, 6), cfg);
    for (double v : zero.tokens.data()) {
        CHECK(v == 0.0);
    }

    PatchifyConfig bad = cfg;
    bad.projection = Tensor({4 * 3, 8});
    CHECK_THROWS_AS(patchify(z, bad), DimensionError);
}

TEST_CASE("patchify pads ragged latents with zeros")
{
    const VideoLatent z = random_latent(1, 3, 3, 1, 12);
    const TokenGrid raw = extract_patches(z, 1, 2, 2);
    CHECK(raw.h == 2);
    CHECK(raw.w == 2);
    CHECK(raw.tokens.at(3, 0) == z.at(0, 2, 2, 0));
    CHECK(raw.tokens.at(3, 1) == 0.0);
    CHECK(fold_patches(raw.tokens, 1, 2, 2, 1, 1, 3, 3) == z);
}
