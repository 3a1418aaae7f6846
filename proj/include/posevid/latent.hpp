#pragma once

#include "posevid/tensor.hpp"

#include <cstddef>

namespace posevid {

class CounterRng;

// Video tensor with axes (frames, height, width, channels). Also used for
// pixel-space clips before encoding.
class VideoLatent {
public:
    VideoLatent() = default;
    VideoLatent(std::size_t frames, std::size_t height, std::size_t width, std::size_t channels, double fill = 0.0);
    explicit VideoLatent(Tensor t);

    static VideoLatent noise(std::size_t frames, std::size_t height, std::size_t width, std::size_t channels,
                             CounterRng& rng);

    std::size_t frames() const { return t_.dim(0); }
    std::size_t height() const { return t_.dim(1); }
    std::size_t width() const { return t_.dim(2); }
    std::size_t channels() const { return t_.dim(3); }

    double& at(std::size_t f, std::size_t h, std::size_t w, std::size_t c)
    {
        return t_[((f * height() + h) * width() + w) * channels() + c];
    }
    double at(std::size_t f, std::size_t h, std::size_t w, std::size_t c) const
    {
        return t_[((f * height() + h) * width() + w) * channels() + c];
    }

    const Tensor& tensor() const { return t_; }
    Tensor& tensor() { return t_; }

    friend bool operator==(const VideoLatent&, const VideoLatent&) = default;

private:
    Tensor t_;
};

// Strided average pooling over height and width; partial border blocks
// average the pixels they contain.
VideoLatent encode_latent(const VideoLatent& pixels, std::size_t stride);
// Nearest-neighbour upsampling back to pixel resolution (transpose of the pooling layout).
VideoLatent decode_latent(const VideoLatent& latent, std::size_t stride, std::size_t height, std::size_t width);

// Frames of `a` followed by frames of `b`.
VideoLatent concat_frames(const VideoLatent& a, const VideoLatent& b);
VideoLatent slice_frames(const VideoLatent& z, std::size_t begin, std::size_t end);
// Prepends a copy of the first frame so the pose latent lines up with [Z_i, noise].
VideoLatent align_pose_latent(const VideoLatent& pose);

// Strategy 1: (F,H,W,C) + (F,H,W,C) -> (F,H,W,2C), base channels first.
VideoLatent inject_channel_concat(const VideoLatent& base, const VideoLatent& pose);
VideoLatent slice_channels(const VideoLatent& z, std::size_t begin, std::size_t end);

// Two linear layers with a ReLU between them, applied per position on the channel vector.
struct MlpWeights {
    Tensor w1;  // C_in × hidden
    Tensor b1;  // 1 × hidden
    Tensor w2;  // hidden × C_out
    Tensor b2;  // 1 × C_out

    static MlpWeights zeros(std::size_t in, std::size_t hidden, std::size_t out);
    std::size_t in_channels() const { return w1.rows(); }
    std::size_t out_channels() const { return w2.cols(); }
};

VideoLatent apply_mlp(const VideoLatent& z, const MlpWeights& mlp);

// Strategy 2: base + MLP(pose).
VideoLatent inject_mlp_add(const VideoLatent& base, const VideoLatent& pose, const MlpWeights& mlp);

// Strategy 3: (F,H,W,C) + (F,H,W,C) -> (F,H,2W,C), base on the left.
VideoLatent inject_width_concat(const VideoLatent& base, const VideoLatent& pose);
VideoLatent slice_width(const VideoLatent& z, std::size_t begin, std::size_t end);

struct PatchifyConfig {
    std::size_t patch_f = 1;
    std::size_t patch_h = 1;
    std::size_t patch_w = 1;
    // (patch_f * patch_h * patch_w * C_in) × width; no bias.
    Tensor projection;

    std::size_t patch_volume() const { return patch_f * patch_h * patch_w; }
    std::size_t width() const { return projection.cols(); }
};

struct TokenGrid {
    Tensor tokens;  // (f*h*w) × width, ordered by frame, then row, then column
    std::size_t f = 0;
    std::size_t h = 0;
    std::size_t w = 0;

    std::size_t tokens_per_frame() const { return h * w; }
};

// Non-overlapping patches (zero-padded at the far edges), flattened as
// (df, dh, dw, channel) and projected to the configured width.
TokenGrid patchify(const VideoLatent& z, const PatchifyConfig& cfg);

// Raw patch vectors before projection: (f*h*w) × (patch volume * C).
TokenGrid extract_patches(const VideoLatent& z, std::size_t pf, std::size_t ph, std::size_t pw);

// Inverse of extract_patches; `patches` is (f*h*w) × (pf*ph*pw*channels). Padding is cropped.
VideoLatent fold_patches(const Tensor& patches, std::size_t pf, std::size_t ph, std::size_t pw, std::size_t channels,
                         std::size_t frames, std::size_t height, std::size_t width);

}  // namespace posevid
