#pragma once

#include "posevid/io.hpp"
#include "posevid/latent.hpp"
#include "posevid/skeleton.hpp"
#include "posevid/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace posevid {

class CounterRng;

// eps_neg + s * (eps_pos - eps_neg)
Tensor cfg_paired(const Tensor& eps_pos, const Tensor& eps_neg, double s);

// eps_base + s_s * (eps_subject - eps_base) - s_c * (eps_camera - eps_base)
Tensor cfg_decoupled(const Tensor& eps_base, const Tensor& eps_subject, const Tensor& eps_camera, double s_s,
                     double s_c);

// Every valid frame takes the segments of the first valid frame.
SkeletonSequence build_static_pose_anchor(const SkeletonSequence& poses);

enum class CameraDirection { left, right, up, down };

const char* to_string(CameraDirection d);
CameraDirection camera_direction_from_string(const std::string& s);

struct GridRect {
    int row = 0;
    int col = 0;
    int height = 1;
    int width = 1;
};

// Rectangle outline moved by round(t * speed) pixels along `dir` in frame t,
// clipped to the grid. Frames where no outline pixel remains are invalid.
SkeletonSequence build_camera_anchor(CameraDirection dir, double speed, GridRect rect, std::size_t frames,
                                     std::size_t height, std::size_t width);

struct SparseBucket {
    double probability = 0.0;
    std::size_t keep_lo = 1;
    std::size_t keep_hi = 1;
};

enum class SparseScheme { random, uniform };

const char* to_string(SparseScheme s);

struct SparsePolicy {
    std::vector<SparseBucket> buckets{{0.35, 21, 81}, {0.20, 11, 21}, {0.45, 1, 11}};
    double random_probability = 0.5;

    void validate() const;
};

struct SparseDraw {
    std::size_t bucket = 0;
    SparseScheme scheme = SparseScheme::random;
    std::size_t keep_count = 0;
    std::vector<std::size_t> indices;  // ascending, always starts with 0
};

SparseDraw sparse_pose_mask(std::size_t total_frames, const SparsePolicy& policy, CounterRng& rng);

// Marks frames outside `kept` invalid.
SkeletonSequence apply_sparse_mask(const SkeletonSequence& seq, const std::vector<std::size_t>& kept);

enum class GuidanceMode { paired, additive };

const char* to_string(GuidanceMode m);
GuidanceMode guidance_mode_from_string(const std::string& s);

struct GuidanceConfig {
    GuidanceMode mode = GuidanceMode::additive;
    double s = 1.0;
    double s_s = 1.0;
    double s_c = 0.0;
    std::size_t steps = 20;
    std::uint64_t seed = 0;
    // Schedule positions in [0, 1]; the denoiser sees t * 1000.
    double t_start = 1.0;
    double t_end = 0.0;

    void validate() const;
};

json to_json(const GuidanceConfig& g);
GuidanceConfig guidance_config_from_json(const json& doc);

enum class Condition { base, subject, camera };

class Denoiser {
public:
    virtual ~Denoiser() = default;
    virtual VideoLatent predict(const VideoLatent& z, Condition c, double timestep) = 0;
};

// Guided noise estimate for one step. Paired mode uses the subject anchor as
// positive and the camera anchor as negative.
Tensor guided_epsilon(Denoiser& model, const VideoLatent& z, const GuidanceConfig& cfg, double timestep);

// Explicit Euler z <- z - eps * dt with dt = (t_start - t_end) / steps.
// Throws EvaluationError naming the step when a non-finite value appears.
VideoLatent denoise_loop(Denoiser& model, const VideoLatent& z_init, const GuidanceConfig& cfg);

}  // namespace posevid
