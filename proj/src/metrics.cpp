#include "posevid/metrics.hpp"

#include "posevid/error.hpp"

#include <algorithm>
#include <cmath>

namespace posevid {

namespace {

void check_pair(const FramePair& p)
{
    const auto& a = p.predicted;
    const auto& b = p.reference;
    if (a.height != b.height || a.width != b.width || a.pixels.size() != b.pixels.size()) {
        throw DimensionError("frame pair: " + std::to_string(a.height) + "x" + std::to_string(a.width) + " vs " +
                             std::to_string(b.height) + "x" + std::to_string(b.width));
    }
    if (a.pixels.empty() || a.pixels.size() != a.height * a.width) {
        throw DimensionError("frame pair: empty or inconsistent frame");
    }
    if (a.max_value != b.max_value || !(a.max_value > 0.0)) {
        throw DomainError("frame pair: frames need the same positive dynamic range");
    }
    for (const Frame* f : {&a, &b}) {
        for (double v : f->pixels) {
            if (!(v >= 0.0 && v <= f->max_value)) {
                throw DomainError("frame pair: pixel value outside [0, MAX]");
            }
        }
    }
}

}  // namespace

Frame frame_from_pgm(const GrayImage& img)
{
    Frame f;
    f.height = img.height;
    f.width = img.width;
    f.max_value = img.max_value;
    f.pixels.assign(img.pixels.begin(), img.pixels.end());
    return f;
}

double psnr(const FramePair& p)
{
    check_pair(p);
    double se = 0.0;
    for (std::size_t i = 0; i < p.predicted.pixels.size(); ++i) {
        const double d = p.predicted.pixels[i] - p.reference.pixels[i];
        se += d * d;
    }
    const double mse = se / static_cast<double>(p.predicted.pixels.size());
    if (mse == 0.0) {
        return kPsnrCap;
    }
    const double max = p.predicted.max_value;
    return std::min(kPsnrCap, 10.0 * std::log10(max * max / mse));
}

double ssim(const FramePair& p, std::size_t window, double k1, double k2)
{
    check_pair(p);
    if (window == 0 || window % 2 == 0) {
        throw DomainError("ssim: window must be odd");
    }
    const auto& a = p.predicted;
    const auto& b = p.reference;
    if (a.height < window || a.width < window) {
        throw DimensionError("ssim: frame smaller than the " + std::to_string(window) + "-pixel window");
    }
    const double c1 = (k1 * a.max_value) * (k1 * a.max_value);
    const double c2 = (k2 * a.max_value) * (k2 * a.max_value);
    const auto n = static_cast<double>(window * window);

    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t r0 = 0; r0 + window <= a.height; ++r0) {
        for (std::size_t c0 = 0; c0 + window <= a.width; ++c0) {
            double sa = 0.0, sb = 0.0;
            for (std::size_t r = r0; r < r0 + window; ++r) {
                for (std::size_t c = c0; c < c0 + window; ++c) {
                    sa += a.at(r, c);
                    sb += b.at(r, c);
                }
            }
            const double ma = sa / n;
            const double mb = sb / n;
            double va = 0.0, vb = 0.0, cov = 0.0;
            for (std::size_t r = r0; r < r0 + window; ++r) {
                for (std::size_t c = c0; c < c0 + window; ++c) {
                    const double da = a.at(r, c) - ma;
                    const double db = b.at(r, c) - mb;
                    va += da * da;
                    vb += db * db;
                    cov += da * db;
                }
            }
            va /= n;
            vb /= n;
            cov /= n;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

double l1(const FramePair& p)
{
    check_pair(p);
    double s = 0.0;
    for (std::size_t i = 0; i < p.predicted.pixels.size(); ++i) {
        s += std::abs(p.predicted.pixels[i] - p.reference.pixels[i]);
    }
    return s / (static_cast<double>(p.predicted.pixels.size()) * p.predicted.max_value);
}

double video_metric(std::span<const FramePair> frames, const FrameMetric& metric)
{
    if (frames.empty()) {
        throw DomainError("video_metric: no frames");
    }
    double s = 0.0;
    for (const auto& f : frames) {
        s += metric(f);
    }
    return s / static_cast<double>(frames.size());
}

FrameMetric metric_by_name(const std::string& name)
{
    if (name == "psnr") {
        return [](const FramePair& p) { return psnr(p); };
    }
    if (name == "ssim") {
        return [](const FramePair& p) { return ssim(p); };
    }
    if (name == "l1") {
        return [](const FramePair& p) { return l1(p); };
    }
    if (name == "lpips" || name == "fvd") {
        throw DomainError(name + " is unavailable: it needs a pretrained network");
    }
    throw DomainError("unknown metric \"" + name + "\" (expected psnr, ssim or l1)");
}

}  // namespace posevid
