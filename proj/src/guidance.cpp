#include "posevid/guidance.hpp"

#include "posevid/error.hpp"
#include "posevid/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace posevid {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* where)
{
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(where) + ": shapes " + shape_string(a.shape()) + " and " +
                             shape_string(b.shape()) + " differ");
    }
}

void require_finite_scalar(double v, const char* name)
{
    if (!std::isfinite(v)) {
        throw DomainError(std::string(name) + " must be finite");
    }
}

// Inclusive pixel run [lo, hi] clipped to [0, n).
bool clip_run(int& lo, int& hi, int n)
{
    lo = std::max(lo, 0);
    hi = std::min(hi, n - 1);
    return lo <= hi;
}

}  // namespace

Tensor cfg_paired(const Tensor& eps_pos, const Tensor& eps_neg, double s)
{
    require_same_shape(eps_pos, eps_neg, "cfg_paired");
    require_finite_scalar(s, "cfg scale s");
    Tensor out(eps_pos.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        // Weighted form so s = 1 and s = 0 return the anchors exactly.
        out[i] = s * eps_pos[i] + (1.0 - s) * eps_neg[i];
    }
    return out;
}

Tensor cfg_decoupled(const Tensor& eps_base, const Tensor& eps_subject, const Tensor& eps_camera, double s_s,
                     double s_c)
{
    require_same_shape(eps_base, eps_subject, "cfg_decoupled");
    require_same_shape(eps_base, eps_camera, "cfg_decoupled");
    require_finite_scalar(s_s, "cfg scale s_s");
    require_finite_scalar(s_c, "cfg scale s_c");
    Tensor out(eps_base.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = eps_base[i] + s_s * (eps_subject[i] - eps_base[i]) - s_c * (eps_camera[i] - eps_base[i]);
    }
    return out;
}

SkeletonSequence build_static_pose_anchor(const SkeletonSequence& poses)
{
    const auto first = std::find_if(poses.frames.begin(), poses.frames.end(), [](const auto& f) { return f.valid; });
    if (first == poses.frames.end()) {
        throw DomainError("static pose anchor: sequence has no valid frame");
    }
    SkeletonSequence out = poses;
    for (std::size_t t = 0; t < out.frames.size(); ++t) {
        auto& f = out.frames[t];
        if (!f.valid) {
            continue;
        }
        f.segments = first->segments;
        for (auto& s : f.segments) {
            s.frame_index = static_cast<int>(t);
        }
    }
    return out;
}

const char* to_string(CameraDirection d)
{
    switch (d) {
    case CameraDirection::left:
        return "left";
    case CameraDirection::right:
        return "right";
    case CameraDirection::up:
        return "up";
    case CameraDirection::down:
        return "down";
    }
    return "left";
}

CameraDirection camera_direction_from_string(const std::string& s)
{
    if (s == "left") {
        return CameraDirection::left;
    }
    if (s == "right") {
        return CameraDirection::right;
    }
    if (s == "up") {
        return CameraDirection::up;
    }
    if (s == "down") {
        return CameraDirection::down;
    }
    throw FormatError("unknown camera direction \"" + s + "\" (expected left, right, up or down)");
}

SkeletonSequence build_camera_anchor(CameraDirection dir, double speed, GridRect rect, std::size_t frames,
                                     std::size_t height, std::size_t width)
{
    if (!(speed >= 0.0) || !std::isfinite(speed)) {
        throw DomainError("camera anchor: speed must be finite and >= 0");
    }
    if (rect.height < 1 || rect.width < 1 || height == 0 || width == 0) {
        throw DomainError("camera anchor: empty rectangle or grid");
    }
    const int gh = static_cast<int>(height);
    const int gw = static_cast<int>(width);
    int dr = 0;
    int dc = 0;
    switch (dir) {
    case CameraDirection::left:
        dc = -1;
        break;
    case CameraDirection::right:
        dc = 1;
        break;
    case CameraDirection::up:
        dr = -1;
        break;
    case CameraDirection::down:
        dr = 1;
        break;
    }

    SkeletonSequence seq;
    seq.frames.resize(frames);
    for (std::size_t t = 0; t < frames; ++t) {
        const auto shift = static_cast<int>(std::llround(static_cast<double>(t) * speed));
        const int r0 = rect.row + dr * shift;
        const int c0 = rect.col + dc * shift;
        const int r1 = r0 + rect.height - 1;
        const int c1 = c0 + rect.width - 1;

        auto& frame = seq.frames[t];
        auto push = [&](std::vector<GridPoint> pts) {
            SkeletonSegment s;
            s.points = std::move(pts);
            s.frame_index = static_cast<int>(t);
            s.segment_index = static_cast<int>(frame.segments.size());
            frame.segments.push_back(std::move(s));
        };
        auto horizontal = [&](int row, int from, int to, bool reverse) {
            if (row < 0 || row >= gh || !clip_run(from, to, gw)) {
                return;
            }
            std::vector<GridPoint> pts;
            for (int c = from; c <= to; ++c) {
                pts.push_back({row, c});
            }
            if (reverse) {
                std::reverse(pts.begin(), pts.end());
            }
            push(std::move(pts));
        };
        auto vertical = [&](int col, int from, int to, bool reverse) {
            if (col < 0 || col >= gw || !clip_run(from, to, gh)) {
                return;
            }
            std::vector<GridPoint> pts;
            for (int r = from; r <= to; ++r) {
                pts.push_back({r, col});
            }
            if (reverse) {
                std::reverse(pts.begin(), pts.end());
            }
            push(std::move(pts));
        };

        horizontal(r0, c0, c1, false);
        if (rect.width > 1) {
            vertical(c1, r0, r1, false);
        }
        if (rect.height > 1) {
            horizontal(r1, c0, c1, true);
        }
        vertical(c0, r0, r1, true);

        frame.valid = !frame.segments.empty();
        if (t == 0 && !frame.valid) {
            throw DomainError("camera anchor: rectangle lies entirely off the grid at frame 0");
        }
    }
    return seq;
}

const char* to_string(SparseScheme s)
{
    return s == SparseScheme::random ? "random" : "uniform";
}

void SparsePolicy::validate() const
{
    if (buckets.empty()) {
        throw DomainError("sparse policy: no buckets");
    }
    double total = 0.0;
    for (const auto& b : buckets) {
        if (!(b.probability >= 0.0) || b.keep_lo < 1 || b.keep_lo > b.keep_hi) {
            throw DomainError("sparse policy: bucket needs probability >= 0 and 1 <= keep_lo <= keep_hi");
        }
        total += b.probability;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw DomainError("sparse policy: bucket probabilities must sum to 1");
    }
    if (!(random_probability >= 0.0 && random_probability <= 1.0)) {
        throw DomainError("sparse policy: scheme probability outside [0, 1]");
    }
}

SparseDraw sparse_pose_mask(std::size_t total_frames, const SparsePolicy& policy, CounterRng& rng)
{
    policy.validate();
    if (total_frames == 0) {
        throw DomainError("sparse_pose_mask: total_frames must be >= 1");
    }
    SparseDraw d;
    const double u = rng.uniform();
    double acc = 0.0;
    d.bucket = policy.buckets.size() - 1;
    for (std::size_t b = 0; b < policy.buckets.size(); ++b) {
        acc += policy.buckets[b].probability;
        if (u < acc) {
            d.bucket = b;
            break;
        }
    }
    const auto& bucket = policy.buckets[d.bucket];
    const auto drawn = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(bucket.keep_lo),
                                                                static_cast<std::int64_t>(bucket.keep_hi)));
    d.keep_count = std::min(drawn, total_frames);
    d.scheme = rng.uniform() < policy.random_probability ? SparseScheme::random : SparseScheme::uniform;

    if (d.scheme == SparseScheme::uniform) {
        if (d.keep_count == 1) {
            d.indices = {0};
        } else {
            for (std::size_t k = 0; k < d.keep_count; ++k) {
                d.indices.push_back(k * (total_frames - 1) / (d.keep_count - 1));
            }
        }
        return d;
    }

    // Frame 0 plus keep_count - 1 of the remaining frames, by partial Fisher-Yates.
    std::vector<std::size_t> pool(total_frames - 1);
    std::iota(pool.begin(), pool.end(), std::size_t{1});
    const std::size_t extra = d.keep_count - 1;
    for (std::size_t k = 0; k < extra; ++k) {
        const auto pick = static_cast<std::size_t>(
            rng.uniform_int(static_cast<std::int64_t>(k), static_cast<std::int64_t>(pool.size() - 1)));
        std::swap(pool[k], pool[pick]);
    }
    d.indices.push_back(0);
    d.indices.insert(d.indices.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(extra));
    std::sort(d.indices.begin(), d.indices.end());
    return d;
}

SkeletonSequence apply_sparse_mask(const SkeletonSequence& seq, const std::vector<std::size_t>& kept)
{
    SkeletonSequence out = seq;
    std::vector<bool> keep(seq.size(), false);
    for (auto k : kept) {
        if (k >= seq.size()) {
            throw DomainError("sparse mask: frame " + std::to_string(k) + " beyond the sequence");
        }
        keep[k] = true;
    }
    for (std::size_t t = 0; t < out.frames.size(); ++t) {
        out.frames[t].valid = out.frames[t].valid && keep[t];
    }
    return out;
}

const char* to_string(GuidanceMode m)
{
    return m == GuidanceMode::paired ? "paired" : "additive";
}

GuidanceMode guidance_mode_from_string(const std::string& s)
{
    if (s == "paired") {
        return GuidanceMode::paired;
    }
    if (s == "additive" || s == "decoupled") {
        return GuidanceMode::additive;
    }
    throw FormatError("unknown guidance mode \"" + s + "\" (expected paired or additive)");
}

void GuidanceConfig::validate() const
{
    for (double v : {s, s_s, s_c, t_start, t_end}) {
        require_finite_scalar(v, "guidance parameter");
    }
    if (t_start < t_end || t_end < 0.0 || t_start > 1.0) {
        throw DomainError("guidance: schedule needs 0 <= t_end <= t_start <= 1");
    }
}

json to_json(const GuidanceConfig& g)
{
    return {{"mode", to_string(g.mode)}, {"s", g.s},       {"s_s", g.s_s},         {"s_c", g.s_c},
            {"steps", g.steps},          {"seed", g.seed}, {"t_start", g.t_start}, {"t_end", g.t_end}};
}

GuidanceConfig guidance_config_from_json(const json& doc)
{
    if (!doc.is_object()) {
        throw FormatError("guidance config must be a JSON object");
    }
    GuidanceConfig g;
    try {
        if (doc.contains("mode")) {
            g.mode = guidance_mode_from_string(doc.at("mode").get<std::string>());
        }
        g.s = doc.value("s", g.s);
        g.s_s = doc.value("s_s", g.s_s);
        g.s_c = doc.value("s_c", g.s_c);
        g.steps = doc.value("steps", g.steps);
        g.seed = doc.value("seed", g.seed);
        g.t_start = doc.value("t_start", g.t_start);
        g.t_end = doc.value("t_end", g.t_end);
    } catch (const json::exception& e) {
        throw FormatError(std::string("guidance config: ") + e.what());
    }
    g.validate();
    return g;
}

Tensor guided_epsilon(Denoiser& model, const VideoLatent& z, const GuidanceConfig& cfg, double timestep)
{
    if (cfg.mode == GuidanceMode::paired) {
        const VideoLatent pos = model.predict(z, Condition::subject, timestep);
        const VideoLatent neg = model.predict(z, Condition::camera, timestep);
        return cfg_paired(pos.tensor(), neg.tensor(), cfg.s);
    }
    const VideoLatent base = model.predict(z, Condition::base, timestep);
    const VideoLatent subject = model.predict(z, Condition::subject, timestep);
    const VideoLatent camera = model.predict(z, Condition::camera, timestep);
    return cfg_decoupled(base.tensor(), subject.tensor(), camera.tensor(), cfg.s_s, cfg.s_c);
}

VideoLatent denoise_loop(Denoiser& model, const VideoLatent& z_init, const GuidanceConfig& cfg)
{
    cfg.validate();
    VideoLatent z = z_init;
    if (cfg.steps == 0) {
        return z;
    }
    const double dt = (cfg.t_start - cfg.t_end) / static_cast<double>(cfg.steps);
    for (std::size_t k = 0; k < cfg.steps; ++k) {
        const double t = cfg.t_start - static_cast<double>(k) * dt;
        Tensor eps;
        try {
            eps = guided_epsilon(model, z, cfg, t * 1000.0);
        } catch (const EvaluationError& e) {
            throw EvaluationError("denoise_loop: step " + std::to_string(k) + ": " + e.what());
        }
        if (eps.shape() != z.tensor().shape()) {
            throw DimensionError("denoise_loop: denoiser output " + shape_string(eps.shape()) +
                                 " does not match latent " + shape_string(z.tensor().shape()));
        }
        auto data = z.tensor().data();
        for (std::size_t i = 0; i < data.size(); ++i) {
            data[i] -= eps[i] * dt;
        }
        if (!all_finite(z.tensor())) {
            throw EvaluationError("denoise_loop: non-finite latent at step " + std::to_string(k));
        }
    }
    return z;
}

}  // namespace posevid
