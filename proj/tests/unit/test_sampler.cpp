#include <doctest.h>

#include "posevid/error.hpp"
#include "posevid/sampler.hpp"

using namespace posevid;

namespace {

SampleConfig small_config()
{
    SampleConfig c;
    c.scene.frames = 5;
    c.guidance.steps = 3;
    return c;
}

}  // namespace

TEST_CASE("sampling is reproducible for a seed")
{
    const SampleConfig cfg = small_config();
    const SampleResult a = run_sample(cfg, 11);
    const SampleResult b = run_sample(cfg, 11);
    CHECK(a.latent == b.latent);
    CHECK(a.latent.tensor().shape() == Tensor::Shape{5, 8, 8, 4});
    CHECK(all_finite(a.latent.tensor()));
    CHECK(a.assignment.seed == 11);
    CHECK(a.assignment.frames.size() == 5);
    CHECK(to_json(a.assignment) == to_json(b.assignment));
    CHECK_FALSE(run_sample(cfg, 12).latent == a.latent);
}

TEST_CASE("every injection strategy and guidance mode samples")
{
    for (auto s : {InjectionStrategy::channel, InjectionStrategy::mlp, InjectionStrategy::width}) {
        for (auto m : {GuidanceMode::paired, GuidanceMode::additive}) {
            SampleConfig cfg = small_config();
            cfg.model.strategy = s;
            cfg.guidance.mode = m;
            const SampleResult r = run_sample(cfg, 3);
            CHECK(r.latent.tensor().shape() == Tensor::Shape{5, 8, 8, 4});
            CHECK(all_finite(r.latent.tensor()));
        }
    }
}

TEST_CASE("sparse poses and disabled PTCM")
{
    SampleConfig cfg = small_config();
    cfg.scene.sparse = true;
    const SampleResult r = run_sample(cfg, 5);
    REQUIRE(r.sparse.has_value());
    CHECK(r.sparse->indices.front() == 0);

    cfg.scene.ptcm = false;
    CHECK(run_sample(cfg, 5).assignment.frames.empty());
}

TEST_CASE("sampling rejects a schedule that never reaches the match threshold")
{
    SampleConfig cfg = small_config();
    cfg.guidance.t_start = 0.9;
    CHECK_THROWS_AS(run_sample(cfg, 1), PolicyError);
    cfg.scene.ptcm = false;
    CHECK_NOTHROW(run_sample(cfg, 1));
}

TEST_CASE("pose condition latent")
{
    const SkeletonSequence walker = synthetic_walker(3, 16, 16);
    const VideoLatent subj = pose_condition_latent(walker, nullptr, 16, 16, 4, 2);
    CHECK(subj.tensor().shape() == Tensor::Shape{3, 4, 4, 2});
    double ch0 = 0, ch1 = 0;
    for (std::size_t f = 0; f < 3; ++f) {
        for (std::size_t r = 0; r < 4; ++r) {
            for (std::size_t c = 0; c < 4; ++c) {
                ch0 += subj.at(f, r, c, 0);
                ch1 += subj.at(f, r, c, 1);
            }
        }
    }
    CHECK(ch0 > 0.0);
    CHECK(ch1 == 0.0);

    const SkeletonSequence cam = build_camera_anchor(CameraDirection::left, 1.0, {4, 4, 8, 8}, 3, 16, 16);
    const VideoLatent both = pose_condition_latent(walker, &cam, 16, 16, 4, 2);
    CHECK(slice_channels(both, 0, 1) == slice_channels(subj, 0, 1));
    const VideoLatent mono = pose_condition_latent(walker, &cam, 16, 16, 4, 1);
    for (std::size_t i = 0; i < mono.tensor().size(); ++i) {
        CHECK(mono.tensor()[i] == doctest::Approx(both.tensor()[2 * i] + both.tensor()[2 * i + 1]));
    }
    const SkeletonSequence shorter = synthetic_walker(2, 16, 16);
    CHECK_THROWS_AS(pose_condition_latent(walker, &shorter, 16, 16, 4, 2), DimensionError);
}

TEST_CASE("part tokens and empty-part matching")
{
    const SkeletonSequence walker = synthetic_walker(1, 32, 32);
    const PartTokens parts = frame_part_tokens(walker.frames[0], 32, 32, 8, 8, 2, 0.5);
    CHECK(parts.size() == 5);
    for (const auto& p : parts) {
        for (auto t : p) {
            CHECK(t < 16);
        }
    }
    SkeletonFrame off = walker.frames[0];
    off.valid = false;
    CHECK(frame_part_tokens(off, 32, 32, 8, 8, 2, 0.5).empty());

    const AttentionMap attn = attention_map_from_weights(Tensor::from_rows({{1, 9, 0}, {9, 1, 0}, {1, 1, 1}}));
    const PartTokens p0{{0}, {}, {1}};
    const PartTokens pi{{}, {0}, {1}};
    const auto m = match_nonempty_parts(attn, p0, pi);
    REQUIRE(m.size() == 2);
    CHECK(m[0].j == 0);
    CHECK(m[0].j_prime == 2);
    CHECK(m[1].j == 2);
    CHECK(m[1].j_prime == 1);
    CHECK(match_nonempty_parts(attn, PartTokens{{}}, pi).empty());
}

TEST_CASE("sample config JSON")
{
    const json doc = json::parse(R"({
        "mode": "decoupled", "s_s": 2.0, "s_c": 0.5, "steps": 4, "frames": 9,
        "latent": {"height": 6, "width": 10, "channels": 3}, "sparse": true,
        "camera": {"direction": "up", "speed": 0.5, "rect": [1, 2, 3, 4]},
        "match": {"block": 0, "threshold": 900, "reduction": "mean"}
    })");
    const SampleConfig c = sample_config_from_json(doc, "/tmp");
    CHECK(c.guidance.mode == GuidanceMode::additive);
    CHECK(c.guidance.s_c == 0.5);
    CHECK(c.scene.frames == 9);
    CHECK(c.scene.latent_width == 10);
    CHECK(c.model.latent_channels == 3);
    CHECK(c.scene.camera_direction == CameraDirection::up);
    CHECK(c.scene.camera_rect->width == 4);
    CHECK(c.match->reduction == TimestepReduction::mean);
    const SampleConfig back = sample_config_from_json(to_json(c), "/tmp");
    CHECK(to_json(back) == to_json(c));
    CHECK_THROWS_AS(sample_config_from_json(json::parse(R"({"camera": {"rect": [1, 2]}})"), "/tmp"), FormatError);
    CHECK_THROWS_AS(sample_config_from_json(json::parse(R"({"token_rho": 0})"), "/tmp"), DomainError);
}
