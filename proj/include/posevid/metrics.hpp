#pragma once

#include "posevid/io.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace posevid {

// Grayscale frame with values in [0, max_value].
struct Frame {
    std::size_t height = 0;
    std::size_t width = 0;
    double max_value = 255.0;
    std::vector<double> pixels;

    double at(std::size_t r, std::size_t c) const { return pixels[r * width + c]; }
};

Frame frame_from_pgm(const GrayImage& img);

struct FramePair {
    Frame predicted;
    Frame reference;
};

// 10 log10(MAX^2 / MSE), capped at 100 dB.
double psnr(const FramePair& p);

// Mean local SSIM over every window position, uniform window weights.
double ssim(const FramePair& p, std::size_t window = 11, double k1 = 0.01, double k2 = 0.03);

// sum |pred - ref| / (N * MAX)
double l1(const FramePair& p);

using FrameMetric = std::function<double(const FramePair&)>;

double video_metric(std::span<const FramePair> frames, const FrameMetric& metric);

// "psnr", "ssim" or "l1"; LPIPS and FVD are rejected as unavailable.
FrameMetric metric_by_name(const std::string& name);

inline constexpr double kPsnrCap = 100.0;

}  // namespace posevid
