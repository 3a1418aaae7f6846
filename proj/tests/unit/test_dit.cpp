#include <doctest.h>

#include "corpus.hpp"

#include "posevid/dit.hpp"
#include "posevid/error.hpp"
#include "posevid/rng.hpp"

#include <cmath>

using namespace posevid;

namespace {

VideoLatent noise(std::size_t f, std::size_t h, std::size_t w, std::size_t c, std::uint64_t seed)
{
    CounterRng rng(seed);
    return VideoLatent::noise(f, h, w, c, rng);
}

}  // namespace

TEST_CASE("multi-head attention splits columns per head")
{
    CounterRng rng(1);
    const Tensor x = Tensor::random_normal({5, 4}, rng);
    AttentionWeights w{Tensor::random_normal({4, 4}, rng), Tensor::random_normal({4, 4}, rng),
                       Tensor::random_normal({4, 4}, rng), Tensor::random_normal({4, 4}, rng), 2};
    Tensor mean;
    const Tensor out = multi_head_attention(x, x, w, &mean);

    const Tensor q = matmul(x, w.wq), k = matmul(x, w.wk), v = matmul(x, w.wv);
    Tensor mixed({5, 4});
    Tensor expect_mean({5, 5});
    for (std::size_t h = 0; h < 2; ++h) {
        Tensor qh({5, 2}), kh({5, 2}), vh({5, 2});
        for (std::size_t r = 0; r < 5; ++r) {
            for (std::size_t c = 0; c < 2; ++c) {
                qh.at(r, c) = q.at(r, 2 * h + c);
                kh.at(r, c) = k.at(r, 2 * h + c);
                vh.at(r, c) = v.at(r, 2 * h + c);
            }
        }
        const auto a = scaled_dot_attention(qh, kh, vh);
        for (std::size_t r = 0; r < 5; ++r) {
            for (std::size_t c = 0; c < 2; ++c) {
                mixed.at(r, 2 * h + c) = a.out.at(r, c);
            }
        }
        expect_mean = add(expect_mean, scale(a.weights, 0.5));
    }
    CHECK(max_abs_diff(out, matmul(mixed, w.wo)) < 1e-14);
    CHECK(max_abs_diff(mean, expect_mean) < 1e-15);

    w.heads = 3;
    CHECK_THROWS_AS(multi_head_attention(x, x, w), DimensionError);
}

TEST_CASE("block with zero residual outputs is the identity")
{
    DitConfig cfg;
    DitWeights w = init_dit_weights(cfg, 3);
    zero_residual_outputs(w);
    CounterRng rng(4);
    const Tensor x = Tensor::random_normal({6, cfg.width}, rng);
    CHECK(dit_block_forward(x, w.cond, w.blocks[0]) == x);
    CHECK_THROWS_AS(dit_block_forward(Tensor({2, 3}), w.cond, w.blocks[0]), DimensionError);
}

TEST_CASE("absent PTCM inputs and an empty assignment agree")
{
    DitConfig cfg;
    const DitWeights w = init_dit_weights(cfg, 5);
    CounterRng rng(6);
    const Tensor x = Tensor::random_normal({12, cfg.width}, rng);
    PtcmVideoInputs empty;
    empty.tokens_per_frame = 4;
    empty.parts_0 = {{0, 1}};
    empty.parts = {{}, {{2}}, {{3}}};
    empty.matches = {{}, {}, {}};
    CHECK(dit_block_forward(x, w.cond, w.blocks[0], &empty) == dit_block_forward(x, w.cond, w.blocks[0]));
}

TEST_CASE("hand-evaluated block at d = 2")
{
    // Zero query/key projections give uniform attention; value and output are
    // identities; cross-attention and feed-forward outputs are zero.
    BlockWeights b;
    b.self_attn = {Tensor({2, 2}), Tensor({2, 2}), Tensor::identity(2), Tensor::identity(2), 1};
    b.cross_attn = {Tensor::identity(2), Tensor::identity(2), Tensor::identity(2), Tensor({2, 2}), 1};
    b.ptcm = PtcmWeights::zeros(2);
    b.ff = {Tensor({2, 3}, 1.0), Tensor({1, 3}), Tensor({3, 2}), Tensor({1, 2})};
    const Tensor x = Tensor::from_rows({{1, 3}, {2, 2}});
    const Tensor out = dit_block_forward(x, Tensor({1, 2}, 1.0), b);
    // LN rows: [-1, 1] / sqrt(1 + 1e-6) and [0, 0]; their mean is added to each row.
    const double s = 0.5 / std::sqrt(1.0 + 1e-6);
    CHECK(out.at(0, 0) == doctest::Approx(1 - s).epsilon(1e-12));
    CHECK(out.at(0, 1) == doctest::Approx(3 + s).epsilon(1e-12));
    CHECK(out.at(1, 0) == doctest::Approx(2 - s).epsilon(1e-12));
    CHECK(out.at(1, 1) == doctest::Approx(2 + s).epsilon(1e-12));
}

TEST_CASE("PTCM inside a block leaves unmasked token rows untouched")
{
    DitConfig cfg;
    const DitWeights w = init_dit_weights(cfg, 7);
    const ToyDit model(cfg, w);
    const VideoLatent z = noise(3, 8, 8, 4, 8);
    const VideoLatent ref = noise(1, 8, 8, 4, 9);
    const VideoLatent pose = noise(3, 8, 8, 4, 10);
    const TokenGrid grid = model.embed(concat_frames(ref, z), align_pose_latent(pose), 500.0);
    const std::size_t tpf = grid.tokens_per_frame();
    CHECK(tpf == 16);

    PtcmVideoInputs in;
    in.tokens_per_frame = tpf;
    in.parts_0 = {{0, 1, 4}, {10, 11}};
    in.parts = {{}, {{0, 5}, {9}}, {{2}, {14, 15}}, {{3, 7}, {8}}};
    in.matches = {{}, {{0, 0, 1}, {1, 1, 1}}, {{0, 1, 1}, {1, 1, 1}}, {{0, 0, 1}}};

    const Tensor with = dit_block_forward(grid.tokens, w.cond, w.blocks[0], &in);
    const Tensor without = dit_block_forward(grid.tokens, w.cond, w.blocks[0]);
    std::vector<bool> touched(grid.tokens.rows(), false);
    for (std::size_t f = 1; f < in.matches.size(); ++f) {
        for (const auto& m : in.matches[f]) {
            for (auto t : in.parts[f][m.j_prime]) {
                touched[f * tpf + t] = true;
            }
        }
    }
    std::size_t changed = 0;
    for (std::size_t r = 0; r < grid.tokens.rows(); ++r) {
        bool same = true;
        for (std::size_t c = 0; c < cfg.width; ++c) {
            same = same && with.at(r, c) == without.at(r, c);
        }
        if (!touched[r]) {
            CHECK(same);
        } else if (!same) {
            ++changed;
        }
    }
    CHECK(changed > 0);
}

TEST_CASE("config JSON and validation")
{
    DitConfig cfg;
    cfg.strategy = InjectionStrategy::width;
    cfg.ptcm_blocks = {1};
    const DitConfig back = dit_config_from_json(to_json(cfg));
    CHECK(back.strategy == InjectionStrategy::width);
    CHECK(back.ptcm_blocks == std::vector<std::size_t>{1});
    CHECK(back.ptcm_in_block(1));
    CHECK_FALSE(back.ptcm_in_block(0));
    CHECK(DitConfig{}.input_channels() == 8);
    CHECK_THROWS_AS(injection_from_string("sideways"), FormatError);
    json bad = to_json(cfg);
    bad["heads"] = 3;
    CHECK_THROWS_AS(dit_config_from_json(bad), DomainError);
}

TEST_CASE("toy model predicts one noise frame per generated frame")
{
    for (auto strategy : {InjectionStrategy::channel, InjectionStrategy::mlp, InjectionStrategy::width}) {
        DitConfig cfg;
        cfg.strategy = strategy;
        const ToyDit model(cfg, init_dit_weights(cfg, 11));
        const VideoLatent z = noise(4, 8, 8, 4, 12);
        const VideoLatent out = model.predict(z, noise(1, 8, 8, 4, 13), noise(4, 8, 8, 4, 14), 700.0);
        CHECK(out.tensor().shape() == z.tensor().shape());
        CHECK(all_finite(out.tensor()));
        CHECK(out == model.predict(z, noise(1, 8, 8, 4, 13), noise(4, 8, 8, 4, 14), 700.0));
    }
    DitConfig cfg;
    const ToyDit model(cfg, init_dit_weights(cfg, 11));
    CHECK_THROWS_AS(model.predict(noise(4, 8, 8, 4, 1), noise(1, 8, 8, 4, 2), noise(3, 8, 8, 4, 3), 1.0),
                    DimensionError);
}

TEST_CASE("zero pose with zero injection weights reduces to the unconditioned path")
{
    const VideoLatent base = noise(3, 4, 4, 4, 15);
    const VideoLatent zero_pose(3, 4, 4, 4);

    SUBCASE("channel: pose rows of the projection are zero")
    {
        DitConfig cfg;
        DitWeights w = init_dit_weights(cfg, 16);
        // Patch vector ordering is (dh, dw, channel) with 2C channels; zero the pose half.
        Tensor& p = w.patch.projection;
        PatchifyConfig plain = w.patch;
        plain.projection = Tensor({4 * 4, cfg.width});
        for (std::size_t slot = 0; slot < 4; ++slot) {
            for (std::size_t c = 0; c < 8; ++c) {
                for (std::size_t k = 0; k < cfg.width; ++k) {
                    if (c >= 4) {
                        p.at(slot * 8 + c, k) = 0.0;
                    } else {
                        plain.projection.at(slot * 4 + c, k) = p.at(slot * 8 + c, k);
                    }
                }
            }
        }
        const ToyDit model(cfg, w);
        const TokenGrid cond = model.embed(base, zero_pose, 0.0);
        const TokenGrid uncond = patchify(base, plain);
        const Tensor t0 = timestep_embedding(0.0, cfg.width);
        for (std::size_t r = 0; r < uncond.tokens.rows(); ++r) {
            for (std::size_t k = 0; k < cfg.width; ++k) {
                CHECK(cond.tokens.at(r, k) == uncond.tokens.at(r, k) + t0.at(0, k));
            }
        }
    }
    SUBCASE("mlp: zero final layer")
    {
        DitConfig cfg;
        cfg.strategy = InjectionStrategy::mlp;
        DitWeights w = init_dit_weights(cfg, 17);
        w.pose_mlp.w2 = Tensor(w.pose_mlp.w2.shape());
        const ToyDit model(cfg, w);
        CHECK(model.aggregate(base, noise(3, 4, 4, 4, 18)) == base);
    }
    SUBCASE("width: left half tokens match the unconditioned tokens")
    {
        DitConfig cfg;
        cfg.strategy = InjectionStrategy::width;
        const DitWeights w = init_dit_weights(cfg, 19);
        const ToyDit model(cfg, w);
        const TokenGrid cond = model.embed(base, zero_pose, 0.0);
        const TokenGrid uncond = patchify(base, w.patch);
        const Tensor t0 = timestep_embedding(0.0, cfg.width);
        CHECK(cond.w == 2 * uncond.w);
        for (std::size_t f = 0; f < uncond.f; ++f) {
            for (std::size_t h = 0; h < uncond.h; ++h) {
                for (std::size_t x = 0; x < uncond.w; ++x) {
                    const std::size_t rc = (f * cond.h + h) * cond.w + x;
                    const std::size_t ru = (f * uncond.h + h) * uncond.w + x;
                    for (std::size_t k = 0; k < cfg.width; ++k) {
                        CHECK(cond.tokens.at(rc, k) == uncond.tokens.at(ru, k) + t0.at(0, k));
                    }
                }
            }
        }
    }
}

TEST_CASE("attention trace records the selected block above the threshold")
{
    DitConfig cfg;
    cfg.blocks = 3;
    const ToyDit model(cfg, init_dit_weights(cfg, 20));
    AttentionTrace trace(2, 950.0);
    const VideoLatent z = noise(2, 4, 4, 4, 21);
    model.predict(z, noise(1, 4, 4, 4, 22), z, 1000.0, nullptr, &trace);
    model.predict(z, noise(1, 4, 4, 4, 22), z, 900.0, nullptr, &trace);
    REQUIRE(trace.records().size() == 1);
    CHECK(trace.records()[0].block == 2);
    CHECK(trace.records()[0].weights.rows() == 3 * 4);
    for (std::size_t r = 0; r < 12; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < 12; ++c) {
            s += trace.records()[0].weights.at(r, c);
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("checkpoint round trip")
{
    DitConfig cfg;
    cfg.strategy = InjectionStrategy::mlp;
    const DitWeights w = init_dit_weights(cfg, 23);
    const auto dir = fixtures::fresh_temp_dir("checkpoint");
    save_checkpoint(dir, cfg, w);
    const auto [cfg2, w2] = load_checkpoint(dir);
    CHECK(cfg2.strategy == InjectionStrategy::mlp);
    CHECK(w2.blocks.size() == w.blocks.size());
    // Stored as float32, so compare after one round of narrowing.
    CHECK(max_abs_diff(w2.blocks[1].ptcm.wv, w.blocks[1].ptcm.wv) < 1e-6);
    CHECK(max_abs_diff(w2.out_proj, w.out_proj) < 1e-6);
    CHECK_THROWS_AS(load_checkpoint(dir / "missing"), IoError);
}
