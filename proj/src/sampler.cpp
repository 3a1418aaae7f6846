#include "posevid/sampler.hpp"

#include "posevid/error.hpp"
#include "posevid/mask.hpp"
#include "posevid/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace posevid {

namespace {

constexpr std::uint64_t kNoiseStream = 1;
constexpr std::uint64_t kReferenceStream = 2;
constexpr std::uint64_t kSparseStream = 3;

GridRect default_camera_rect(const SceneConfig& s)
{
    const int h = static_cast<int>(s.pixel_height());
    const int w = static_cast<int>(s.pixel_width());
    return {h / 4, w / 4, std::max(1, h / 2), std::max(1, w / 2)};
}

class DitDenoiser : public Denoiser {
public:
    DitDenoiser(const ToyDit& model, const VideoLatent& reference, const VideoLatent& base,
                const VideoLatent& subject, const VideoLatent& camera, const PtcmVideoInputs* ptcm)
        : model_(model), reference_(reference), base_(base), subject_(subject), camera_(camera), ptcm_(ptcm)
    {
    }

    VideoLatent predict(const VideoLatent& z, Condition c, double timestep) override
    {
        const VideoLatent& pose = c == Condition::subject ? subject_ : c == Condition::camera ? camera_ : base_;
        return model_.predict(z, reference_, pose, timestep, ptcm_);
    }

private:
    const ToyDit& model_;
    const VideoLatent& reference_;
    const VideoLatent& base_;
    const VideoLatent& subject_;
    const VideoLatent& camera_;
    const PtcmVideoInputs* ptcm_;
};

}  // namespace

void SceneConfig::validate() const
{
    if (frames == 0 || latent_height == 0 || latent_width == 0 || stride == 0) {
        throw DomainError("scene: frames, latent size and stride must be >= 1");
    }
    if (!(camera_speed >= 0.0) || !std::isfinite(camera_speed)) {
        throw DomainError("scene: camera speed must be finite and >= 0");
    }
    if (part_alpha < 0) {
        throw DomainError("scene: part_alpha must be >= 0");
    }
    if (!(token_rho > 0.0 && token_rho <= 1.0)) {
        throw DomainError("scene: token_rho must lie in (0, 1]");
    }
}

SampleConfig sample_config_from_json(const json& doc, const fs::path& base_dir)
{
    if (!doc.is_object()) {
        throw FormatError("sample config must be a JSON object");
    }
    SampleConfig c;
    c.guidance = guidance_config_from_json(doc);
    if (doc.contains("model")) {
        c.model = dit_config_from_json(doc.at("model"));
    }
    try {
        auto& s = c.scene;
        s.frames = doc.value("frames", s.frames);
        if (doc.contains("latent")) {
            const auto& l = doc.at("latent");
            s.latent_height = l.value("height", s.latent_height);
            s.latent_width = l.value("width", s.latent_width);
            c.model.latent_channels = l.value("channels", c.model.latent_channels);
        }
        s.stride = doc.value("stride", s.stride);
        s.sparse = doc.value("sparse", s.sparse);
        s.ptcm = doc.value("ptcm", s.ptcm);
        s.part_alpha = doc.value("part_alpha", s.part_alpha);
        s.token_rho = doc.value("token_rho", s.token_rho);
        if (doc.contains("camera")) {
            const auto& cam = doc.at("camera");
            if (cam.contains("direction")) {
                s.camera_direction = camera_direction_from_string(cam.at("direction").get<std::string>());
            }
            s.camera_speed = cam.value("speed", s.camera_speed);
            if (cam.contains("rect")) {
                const auto r = cam.at("rect").get<std::vector<int>>();
                if (r.size() != 4) {
                    throw FormatError("camera.rect must be [row, col, height, width]");
                }
                s.camera_rect = GridRect{r[0], r[1], r[2], r[3]};
            }
        }
        if (doc.contains("subject")) {
            s.subject_file = base_dir / doc.at("subject").get<std::string>();
        }
        if (doc.contains("checkpoint")) {
            c.checkpoint = base_dir / doc.at("checkpoint").get<std::string>();
        }
        if (doc.contains("match")) {
            const auto& m = doc.at("match");
            MatchPolicy p = MatchPolicy::for_model(c.model.blocks);
            p.block = m.value("block", p.block);
            p.timestep_threshold = m.value("threshold", p.timestep_threshold);
            if (m.value("reduction", std::string("first")) == "mean") {
                p.reduction = TimestepReduction::mean;
            }
            c.match = p;
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("sample config: ") + e.what());
    }
    c.scene.validate();
    c.model.validate();
    return c;
}

json to_json(const SampleConfig& c)
{
    json j = to_json(c.guidance);
    j["model"] = to_json(c.model);
    j["frames"] = c.scene.frames;
    j["latent"] = {{"height", c.scene.latent_height},
                   {"width", c.scene.latent_width},
                   {"channels", c.model.latent_channels}};
    j["stride"] = c.scene.stride;
    j["sparse"] = c.scene.sparse;
    j["ptcm"] = c.scene.ptcm;
    j["part_alpha"] = c.scene.part_alpha;
    j["token_rho"] = c.scene.token_rho;
    j["camera"] = {{"direction", to_string(c.scene.camera_direction)}, {"speed", c.scene.camera_speed}};
    if (c.scene.camera_rect) {
        const auto& r = *c.scene.camera_rect;
        j["camera"]["rect"] = {r.row, r.col, r.height, r.width};
    }
    if (c.match) {
        j["match"] = {{"block", c.match->block},
                      {"threshold", c.match->timestep_threshold},
                      {"reduction", c.match->reduction == TimestepReduction::mean ? "mean" : "first"}};
    }
    return j;
}

SkeletonSequence synthetic_walker(std::size_t frames, std::size_t height, std::size_t width)
{
    if (height < 4 || width < 4) {
        throw DomainError("synthetic walker needs at least a 4x4 grid");
    }
    const double h = static_cast<double>(height);
    const double w = static_cast<double>(width);
    auto clamp_point = [&](double r, double c) {
        return GridPoint{static_cast<int>(std::clamp(std::lround(r), 0L, static_cast<long>(height) - 1)),
                         static_cast<int>(std::clamp(std::lround(c), 0L, static_cast<long>(width) - 1))};
    };
    const double cx = w / 2.0;
    const double head = 0.15 * h;
    const double shoulder = 0.3 * h;
    const double hip = 0.6 * h;
    const double arm = 0.25 * h;
    const double leg = 0.3 * h;

    SkeletonSequence seq;
    seq.frames.resize(frames);
    for (std::size_t t = 0; t < frames; ++t) {
        const double phase = std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / 16.0);
        const double arm_l = 0.6 + 0.4 * phase;
        const double arm_r = 0.6 - 0.4 * phase;
        const double leg_l = 0.35 - 0.25 * phase;
        const double leg_r = 0.35 + 0.25 * phase;
        const std::vector<std::pair<GridPoint, GridPoint>> ends{
            {clamp_point(head, cx), clamp_point(hip, cx)},
            {clamp_point(shoulder, cx), clamp_point(shoulder + arm * std::cos(arm_l), cx - arm * std::sin(arm_l))},
            {clamp_point(shoulder, cx), clamp_point(shoulder + arm * std::cos(arm_r), cx + arm * std::sin(arm_r))},
            {clamp_point(hip, cx), clamp_point(hip + leg * std::cos(leg_l), cx - leg * std::sin(leg_l))},
            {clamp_point(hip, cx), clamp_point(hip + leg * std::cos(leg_r), cx + leg * std::sin(leg_r))},
        };
        for (std::size_t j = 0; j < ends.size(); ++j) {
            const GridPoint v[2] = {ends[j].first, ends[j].second};
            SkeletonSegment s;
            s.points = densify_polyline(v);
            s.frame_index = static_cast<int>(t);
            s.segment_index = static_cast<int>(j);
            seq.frames[t].segments.push_back(std::move(s));
        }
    }
    return seq;
}

VideoLatent pose_condition_latent(const SkeletonSequence& subject, const SkeletonSequence* camera,
                                  std::size_t height, std::size_t width, std::size_t stride, std::size_t channels)
{
    if (camera && camera->size() != subject.size()) {
        throw DimensionError("pose condition: subject and camera sequences differ in length");
    }
    const std::size_t frames = subject.size();
    if (frames == 0) {
        throw DomainError("pose condition: empty pose sequence");
    }
    const std::size_t camera_channel = channels > 1 ? 1 : 0;
    VideoLatent pixels(frames, height, width, channels);
    auto paint = [&](const std::vector<Mask>& masks, std::size_t ch) {
        for (std::size_t f = 0; f < frames; ++f) {
            for (std::size_t r = 0; r < height; ++r) {
                for (std::size_t c = 0; c < width; ++c) {
                    if (masks[f].get(r, c)) {
                        pixels.at(f, r, c, ch) += 1.0;
                    }
                }
            }
        }
    };
    paint(render_skeleton(subject, height, width), 0);
    if (camera) {
        paint(render_skeleton(*camera, height, width), camera_channel);
    }
    return encode_latent(pixels, stride);
}

PartTokens frame_part_tokens(const SkeletonFrame& frame, std::size_t height, std::size_t width,
                             std::size_t patch_h, std::size_t patch_w, int alpha, double rho)
{
    PartTokens parts;
    if (!frame.valid) {
        return parts;
    }
    parts.reserve(frame.segments.size());
    for (const auto& seg : frame.segments) {
        const Mask m = dilate(rasterize_segment(seg, height, width), alpha);
        parts.push_back(set_indices(token_footprint(m, patch_h, patch_w, rho)));
    }
    return parts;
}

std::vector<PartMatch> match_nonempty_parts(const AttentionMap& attn, const PartTokens& parts0,
                                            const PartTokens& parts_i)
{
    PartTokens q, k;
    std::vector<std::size_t> q_ids, k_ids;
    for (std::size_t j = 0; j < parts0.size(); ++j) {
        if (!parts0[j].empty()) {
            q.push_back(parts0[j]);
            q_ids.push_back(j);
        }
    }
    for (std::size_t t = 0; t < parts_i.size(); ++t) {
        if (!parts_i[t].empty()) {
            k.push_back(parts_i[t]);
            k_ids.push_back(t);
        }
    }
    if (q.empty() || k.empty()) {
        return {};
    }
    std::vector<PartMatch> out = match_parts(attn, q, k);
    for (auto& m : out) {
        m.j = q_ids[m.j];
        m.j_prime = k_ids[m.j_prime];
    }
    return out;
}

SampleResult run_sample(const SampleConfig& cfg, std::uint64_t seed)
{
    cfg.guidance.validate();
    cfg.scene.validate();
    const auto& scene = cfg.scene;

    DitConfig model_cfg = cfg.model;
    DitWeights weights;
    if (cfg.checkpoint) {
        std::tie(model_cfg, weights) = load_checkpoint(*cfg.checkpoint);
    } else {
        weights = init_dit_weights(model_cfg, seed);
    }
    const ToyDit model(model_cfg, weights);
    const std::size_t channels = model_cfg.latent_channels;
    const std::size_t ph = scene.pixel_height();
    const std::size_t pw = scene.pixel_width();

    SampleResult result;
    result.assignment.seed = seed;

    SkeletonSequence subject = scene.subject_file ? read_skeleton_file(*scene.subject_file)
                                                  : synthetic_walker(scene.frames, ph, pw);
    if (subject.size() != scene.frames) {
        throw DimensionError("sample: subject has " + std::to_string(subject.size()) + " frames, config asks for " +
                             std::to_string(scene.frames));
    }
    if (scene.sparse) {
        CounterRng rng(seed, kSparseStream);
        result.sparse = sparse_pose_mask(scene.frames, SparsePolicy{}, rng);
        subject = apply_sparse_mask(subject, result.sparse->indices);
    }
    const SkeletonSequence still = build_static_pose_anchor(subject);
    const SkeletonSequence rect = build_camera_anchor(scene.camera_direction, scene.camera_speed,
                                                      scene.camera_rect.value_or(default_camera_rect(scene)),
                                                      scene.frames, ph, pw);

    const VideoLatent pose_subject = pose_condition_latent(subject, nullptr, ph, pw, scene.stride, channels);
    const VideoLatent pose_camera = pose_condition_latent(still, &rect, ph, pw, scene.stride, channels);
    const VideoLatent pose_base = pose_condition_latent(still, nullptr, ph, pw, scene.stride, channels);

    CounterRng noise_rng(seed, kNoiseStream);
    const VideoLatent z_init =
        VideoLatent::noise(scene.frames, scene.latent_height, scene.latent_width, channels, noise_rng);
    CounterRng ref_rng(seed, kReferenceStream);
    const VideoLatent reference = VideoLatent::noise(1, scene.latent_height, scene.latent_width, channels, ref_rng);

    std::optional<PtcmVideoInputs> ptcm;
    if (scene.ptcm) {
        if (model_cfg.patch_f != 1) {
            throw DomainError("sample: PTCM needs temporal patch size 1");
        }
        const std::size_t tok_h = (scene.latent_height + model_cfg.patch_h - 1) / model_cfg.patch_h;
        const std::size_t tok_w = (scene.latent_width + model_cfg.patch_w - 1) / model_cfg.patch_w;
        const std::size_t patch_px_h = model_cfg.patch_h * scene.stride;
        const std::size_t patch_px_w = model_cfg.patch_w * scene.stride;

        // Width concatenation puts the pose tokens to the right of the video
        // tokens in each row, so video token (r, c) sits in a row twice as wide.
        const std::size_t row_w = model_cfg.strategy == InjectionStrategy::width ? 2 * tok_w : tok_w;
        const auto parts_of = [&](const SkeletonFrame& frame) {
            PartTokens parts = frame_part_tokens(frame, ph, pw, patch_px_h, patch_px_w, scene.part_alpha,
                                                 scene.token_rho);
            for (auto& p : parts) {
                for (auto& t : p) {
                    t = (t / tok_w) * row_w + t % tok_w;
                }
            }
            return parts;
        };

        PtcmVideoInputs in;
        in.tokens_per_frame = tok_h * row_w;
        // Token frame 0 holds the reference latent aligned with pose frame 0;
        // token frame k + 1 holds generated frame k.
        in.parts_0 = parts_of(subject.frames[0]);
        in.parts.resize(scene.frames + 1);
        in.matches.resize(scene.frames + 1);
        for (std::size_t k = 0; k < scene.frames; ++k) {
            in.parts[k + 1] = parts_of(subject.frames[k]);
        }

        const MatchPolicy policy = cfg.match.value_or(MatchPolicy::for_model(model_cfg.blocks));
        policy.validate(model_cfg.blocks);
        const double probe_t = cfg.guidance.t_start * 1000.0;
        AttentionTrace trace(policy.block, policy.timestep_threshold);
        model.predict(z_init, reference, pose_subject, probe_t, nullptr, &trace);
        if (trace.records().empty()) {
            throw PolicyError("sample: first timestep " + std::to_string(probe_t) + " does not exceed the match threshold " +
                              std::to_string(policy.timestep_threshold));
        }
        for (std::size_t i = 1; i <= scene.frames; ++i) {
            const AttentionMap attn = extract_attention(trace, policy, in.tokens_per_frame, 0, i);
            in.matches[i] = match_nonempty_parts(attn, in.parts_0, in.parts[i]);
            result.assignment.frames.push_back({i - 1, in.matches[i]});
        }
        ptcm = std::move(in);
    }

    DitDenoiser denoiser(model, reference, pose_base, pose_subject, pose_camera, ptcm ? &*ptcm : nullptr);
    GuidanceConfig g = cfg.guidance;
    g.seed = seed;
    result.latent = denoise_loop(denoiser, z_init, g);
    return result;
}

}  // namespace posevid
