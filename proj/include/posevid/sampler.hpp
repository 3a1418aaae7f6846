#pragma once

#include "posevid/dit.hpp"
#include "posevid/guidance.hpp"
#include "posevid/io.hpp"
#include "posevid/matching.hpp"

#include <cstdint>
#include <optional>

namespace posevid {

struct SceneConfig {
    std::size_t frames = 81;
    std::size_t latent_height = 8;
    std::size_t latent_width = 8;
    std::size_t stride = 4;  // pixel grid is latent size * stride
    CameraDirection camera_direction = CameraDirection::left;
    double camera_speed = 1.0;
    std::optional<GridRect> camera_rect;  // pixel coordinates; default centred box
    bool sparse = false;
    bool ptcm = true;
    int part_alpha = 2;
    double token_rho = 0.5;
    std::optional<fs::path> subject_file;  // skeleton JSON; default synthetic walker

    std::size_t pixel_height() const { return latent_height * stride; }
    std::size_t pixel_width() const { return latent_width * stride; }
    void validate() const;
};

struct SampleConfig {
    GuidanceConfig guidance;
    DitConfig model;
    SceneConfig scene;
    std::optional<fs::path> checkpoint;
    std::optional<MatchPolicy> match;  // default: MatchPolicy::for_model(depth)
};

// Relative paths inside the document resolve against `base_dir`.
SampleConfig sample_config_from_json(const json& doc, const fs::path& base_dir);
json to_json(const SampleConfig& c);

// Five-segment stick figure whose limbs swing over time.
SkeletonSequence synthetic_walker(std::size_t frames, std::size_t height, std::size_t width);

// Frame-major pose latent: channel 0 carries `subject`, channel 1 `camera`
// (summed into channel 0 when the latent has a single channel).
VideoLatent pose_condition_latent(const SkeletonSequence& subject, const SkeletonSequence* camera,
                                  std::size_t height, std::size_t width, std::size_t stride, std::size_t channels);

// Token sets per segment: rasterise, dilate by alpha, threshold per patch.
PartTokens frame_part_tokens(const SkeletonFrame& frame, std::size_t height, std::size_t width,
                             std::size_t patch_h, std::size_t patch_w, int alpha, double rho);

// Matches first-frame parts to frame-i parts, ignoring parts without tokens.
std::vector<PartMatch> match_nonempty_parts(const AttentionMap& attn, const PartTokens& parts0,
                                            const PartTokens& parts_i);

struct SampleResult {
    VideoLatent latent;
    PartAssignment assignment;
    std::optional<SparseDraw> sparse;
};

SampleResult run_sample(const SampleConfig& cfg, std::uint64_t seed);

}  // namespace posevid
