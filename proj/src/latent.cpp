#include "posevid/latent.hpp"

#include "posevid/error.hpp"
#include "posevid/rng.hpp"

#include <algorithm>

namespace posevid {

namespace {

std::string dims(const VideoLatent& z)
{
    return shape_string(z.tensor().shape());
}

void require_axes_equal(const VideoLatent& a, const VideoLatent& b, bool frames, bool height, bool width,
                        bool channels, const char* op)
{
    if ((frames && a.frames() != b.frames()) || (height && a.height() != b.height()) ||
        (width && a.width() != b.width()) || (channels && a.channels() != b.channels())) {
        throw DimensionError(std::string(op) + ": axis mismatch " + dims(a) + " vs " + dims(b));
    }
}

std::size_t ceil_div(std::size_t a, std::size_t b)
{
    return (a + b - 1) / b;
}

}  // namespace

VideoLatent::VideoLatent(std::size_t frames, std::size_t height, std::size_t width, std::size_t channels, double fill)
    : t_({frames, height, width, channels}, fill)
{
}

VideoLatent::VideoLatent(Tensor t) : t_(std::move(t))
{
    if (t_.rank() != 4) {
        throw DimensionError("video latent needs 4 axes (F,H,W,C), got " + shape_string(t_.shape()));
    }
}

VideoLatent VideoLatent::noise(std::size_t frames, std::size_t height, std::size_t width, std::size_t channels,
                               CounterRng& rng)
{
    return VideoLatent(Tensor::random_normal({frames, height, width, channels}, rng));
}

VideoLatent encode_latent(const VideoLatent& pixels, std::size_t stride)
{
    if (stride == 0) {
        throw DomainError("encode_latent: stride must be >= 1");
    }
    if (pixels.tensor().empty()) {
        throw DomainError("encode_latent: empty input");
    }
    const std::size_t lh = ceil_div(pixels.height(), stride);
    const std::size_t lw = ceil_div(pixels.width(), stride);
    VideoLatent out(pixels.frames(), lh, lw, pixels.channels());
    for (std::size_t f = 0; f < pixels.frames(); ++f) {
        for (std::size_t y = 0; y < lh; ++y) {
            for (std::size_t x = 0; x < lw; ++x) {
                const std::size_t y1 = std::min(pixels.height(), (y + 1) * stride);
                const std::size_t x1 = std::min(pixels.width(), (x + 1) * stride);
                const auto count = static_cast<double>((y1 - y * stride) * (x1 - x * stride));
                for (std::size_t c = 0; c < pixels.channels(); ++c) {
                    double s = 0.0;
                    for (std::size_t py = y * stride; py < y1; ++py) {
                        for (std::size_t px = x * stride; px < x1; ++px) {
                            s += pixels.at(f, py, px, c);
                        }
                    }
                    out.at(f, y, x, c) = s / count;
                }
            }
        }
    }
    return out;
}

VideoLatent decode_latent(const VideoLatent& latent, std::size_t stride, std::size_t height, std::size_t width)
{
    if (stride == 0 || ceil_div(height, stride) != latent.height() || ceil_div(width, stride) != latent.width()) {
        throw DimensionError("decode_latent: target size inconsistent with latent and stride");
    }
    VideoLatent out(latent.frames(), height, width, latent.channels());
    for (std::size_t f = 0; f < latent.frames(); ++f) {
        for (std::size_t y = 0; y < height; ++y) {
            for (std::size_t x = 0; x < width; ++x) {
                for (std::size_t c = 0; c < latent.channels(); ++c) {
                    out.at(f, y, x, c) = latent.at(f, y / stride, x / stride, c);
                }
            }
        }
    }
    return out;
}

VideoLatent concat_frames(const VideoLatent& a, const VideoLatent& b)
{
    require_axes_equal(a, b, false, true, true, true, "concat_frames");
    VideoLatent out(a.frames() + b.frames(), a.height(), a.width(), a.channels());
    auto dst = out.tensor().data();
    std::copy(a.tensor().data().begin(), a.tensor().data().end(), dst.begin());
    std::copy(b.tensor().data().begin(), b.tensor().data().end(),
              dst.begin() + static_cast<std::ptrdiff_t>(a.tensor().size()));
    return out;
}

VideoLatent slice_frames(const VideoLatent& z, std::size_t begin, std::size_t end)
{
    if (begin >= end || end > z.frames()) {
        throw DimensionError("slice_frames: bad range");
    }
    const std::size_t per = z.height() * z.width() * z.channels();
    VideoLatent out(end - begin, z.height(), z.width(), z.channels());
    std::copy_n(z.tensor().data().begin() + static_cast<std::ptrdiff_t>(begin * per), (end - begin) * per,
                out.tensor().data().begin());
    return out;
}

VideoLatent align_pose_latent(const VideoLatent& pose)
{
    return concat_frames(slice_frames(pose, 0, 1), pose);
}

VideoLatent inject_channel_concat(const VideoLatent& base, const VideoLatent& pose)
{
    require_axes_equal(base, pose, true, true, true, false, "inject_channel_concat");
    const std::size_t cb = base.channels(), cp = pose.channels();
    VideoLatent out(base.frames(), base.height(), base.width(), cb + cp);
    for (std::size_t f = 0; f < base.frames(); ++f) {
        for (std::size_t y = 0; y < base.height(); ++y) {
            for (std::size_t x = 0; x < base.width(); ++x) {
                for (std::size_t c = 0; c < cb; ++c) {
                    out.at(f, y, x, c) = base.at(f, y, x, c);
                }
                for (std::size_t c = 0; c < cp; ++c) {
                    out.at(f, y, x, cb + c) = pose.at(f, y, x, c);
                }
            }
        }
    }
    return out;
}

VideoLatent slice_channels(const VideoLatent& z, std::size_t begin, std::size_t end)
{
    if (begin >= end || end > z.channels()) {
        throw DimensionError("slice_channels: bad range");
    }
    VideoLatent out(z.frames(), z.height(), z.width(), end - begin);
    for (std::size_t f = 0; f < z.frames(); ++f) {
        for (std::size_t y = 0; y < z.height(); ++y) {
            for (std::size_t x = 0; x < z.width(); ++x) {
                for (std::size_t c = begin; c < end; ++c) {
                    out.at(f, y, x, c - begin) = z.at(f, y, x, c);
                }
            }
        }
    }
    return out;
}

MlpWeights MlpWeights::zeros(std::size_t in, std::size_t hidden, std::size_t out)
{
    return {Tensor({in, hidden}), Tensor({1, hidden}), Tensor({hidden, out}), Tensor({1, out})};
}

VideoLatent apply_mlp(const VideoLatent& z, const MlpWeights& mlp)
{
    if (mlp.w1.rows() != z.channels() || mlp.w1.cols() != mlp.b1.cols() || mlp.w2.rows() != mlp.w1.cols() ||
        mlp.w2.cols() != mlp.b2.cols()) {
        throw DimensionError("apply_mlp: weights do not fit a " + std::to_string(z.channels()) + "-channel input");
    }
    const std::size_t positions = z.frames() * z.height() * z.width();
    Tensor x = z.tensor().reshaped({positions, z.channels()});
    Tensor hidden = matmul(x, mlp.w1);
    for (std::size_t r = 0; r < hidden.rows(); ++r) {
        for (std::size_t c = 0; c < hidden.cols(); ++c) {
            hidden.at(r, c) = std::max(0.0, hidden.at(r, c) + mlp.b1.at(0, c));
        }
    }
    Tensor y = matmul(hidden, mlp.w2);
    for (std::size_t r = 0; r < y.rows(); ++r) {
        for (std::size_t c = 0; c < y.cols(); ++c) {
            y.at(r, c) += mlp.b2.at(0, c);
        }
    }
    return VideoLatent(y.reshaped({z.frames(), z.height(), z.width(), mlp.out_channels()}));
}

VideoLatent inject_mlp_add(const VideoLatent& base, const VideoLatent& pose, const MlpWeights& mlp)
{
    VideoLatent fused = apply_mlp(pose, mlp);
    if (fused.tensor().shape() != base.tensor().shape()) {
        throw DimensionError("inject_mlp_add: MLP output " + dims(fused) + " does not match base " + dims(base));
    }
    return VideoLatent(add(base.tensor(), fused.tensor()));
}

VideoLatent inject_width_concat(const VideoLatent& base, const VideoLatent& pose)
{
    require_axes_equal(base, pose, true, true, false, true, "inject_width_concat");
    const std::size_t wb = base.width(), wp = pose.width();
    VideoLatent out(base.frames(), base.height(), wb + wp, base.channels());
    for (std::size_t f = 0; f < base.frames(); ++f) {
        for (std::size_t y = 0; y < base.height(); ++y) {
            for (std::size_t c = 0; c < base.channels(); ++c) {
                for (std::size_t x = 0; x < wb; ++x) {
                    out.at(f, y, x, c) = base.at(f, y, x, c);
                }
                for (std::size_t x = 0; x < wp; ++x) {
                    out.at(f, y, wb + x, c) = pose.at(f, y, x, c);
                }
            }
        }
    }
    return out;
}

VideoLatent slice_width(const VideoLatent& z, std::size_t begin, std::size_t end)
{
    if (begin >= end || end > z.width()) {
        throw DimensionError("slice_width: bad range");
    }
    VideoLatent out(z.frames(), z.height(), end - begin, z.channels());
    for (std::size_t f = 0; f < z.frames(); ++f) {
        for (std::size_t y = 0; y < z.height(); ++y) {
            for (std::size_t x = begin; x < end; ++x) {
                for (std::size_t c = 0; c < z.channels(); ++c) {
                    out.at(f, y, x - begin, c) = z.at(f, y, x, c);
                }
            }
        }
    }
    return out;
}

TokenGrid extract_patches(const VideoLatent& z, std::size_t pf, std::size_t ph, std::size_t pw)
{
    if (pf == 0 || ph == 0 || pw == 0) {
        throw DomainError("patch sizes must be >= 1");
    }
    TokenGrid grid;
    grid.f = ceil_div(z.frames(), pf);
    grid.h = ceil_div(z.height(), ph);
    grid.w = ceil_div(z.width(), pw);
    const std::size_t c = z.channels();
    grid.tokens = Tensor({grid.f * grid.h * grid.w, pf * ph * pw * c});
    std::size_t token = 0;
    for (std::size_t tf = 0; tf < grid.f; ++tf) {
        for (std::size_t th = 0; th < grid.h; ++th) {
            for (std::size_t tw = 0; tw < grid.w; ++tw, ++token) {
                std::size_t col = 0;
                for (std::size_t df = 0; df < pf; ++df) {
                    for (std::size_t dh = 0; dh < ph; ++dh) {
                        for (std::size_t dw = 0; dw < pw; ++dw) {
                            const std::size_t f = tf * pf + df, y = th * ph + dh, x = tw * pw + dw;
                            const bool inside = f < z.frames() && y < z.height() && x < z.width();
                            for (std::size_t ch = 0; ch < c; ++ch, ++col) {
                                grid.tokens.at(token, col) = inside ? z.at(f, y, x, ch) : 0.0;
                            }
                        }
                    }
                }
            }
        }
    }
    return grid;
}

VideoLatent fold_patches(const Tensor& patches, std::size_t pf, std::size_t ph, std::size_t pw, std::size_t channels,
                         std::size_t frames, std::size_t height, std::size_t width)
{
    const std::size_t gf = ceil_div(frames, pf), gh = ceil_div(height, ph), gw = ceil_div(width, pw);
    if (patches.rank() != 2 || patches.rows() != gf * gh * gw || patches.cols() != pf * ph * pw * channels) {
        throw DimensionError("fold_patches: patch matrix " + shape_string(patches.shape()) +
                             " does not match the target layout");
    }
    VideoLatent out(frames, height, width, channels);
    std::size_t token = 0;
    for (std::size_t tf = 0; tf < gf; ++tf) {
        for (std::size_t th = 0; th < gh; ++th) {
            for (std::size_t tw = 0; tw < gw; ++tw, ++token) {
                std::size_t col = 0;
                for (std::size_t df = 0; df < pf; ++df) {
                    for (std::size_t dh = 0; dh < ph; ++dh) {
                        for (std::size_t dw = 0; dw < pw; ++dw) {
                            const std::size_t f = tf * pf + df, y = th * ph + dh, x = tw * pw + dw;
                            const bool inside = f < frames && y < height && x < width;
                            for (std::size_t ch = 0; ch < channels; ++ch, ++col) {
                                if (inside) {
                                    out.at(f, y, x, ch) = patches.at(token, col);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

TokenGrid patchify(const VideoLatent& z, const PatchifyConfig& cfg)
{
    if (cfg.projection.rank() != 2) {
        throw DimensionError("patchify: projection must be a matrix");
    }
    const std::size_t expected = cfg.patch_volume() * z.channels();
    if (cfg.projection.rows() != expected) {
        throw DimensionError("patchify: projection expects " + std::to_string(cfg.projection.rows()) +
                             " inputs per patch, latent provides " + std::to_string(expected) + " (" +
                             std::to_string(z.channels()) + " channels)");
    }
    TokenGrid grid = extract_patches(z, cfg.patch_f, cfg.patch_h, cfg.patch_w);
    grid.tokens = matmul(grid.tokens, cfg.projection);
    return grid;
}

}  // namespace posevid
