#include "commands.hpp"

#include "posevid/curation.hpp"
#include "posevid/error.hpp"
#include "posevid/gradcheck.hpp"
#include "posevid/io.hpp"
#include "posevid/mask.hpp"
#include "posevid/matching.hpp"
#include "posevid/metrics.hpp"
#include "posevid/rng.hpp"
#include "posevid/sampler.hpp"
#include "posevid/threads.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

namespace posevid::cli {

namespace {

void emit(const json& doc, const std::string& out_path, std::ostream& out)
{
    if (out_path.empty()) {
        out << doc.dump(2) << '\n';
    } else {
        write_file(out_path, doc.dump(2) + "\n");
    }
}

json read_json(const fs::path& path)
{
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

std::string frame_name(std::size_t i)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%05zu.pgm", i);
    return buf;
}

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> items;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) {
            items.push_back(item);
        }
    }
    return items;
}

struct CurateArgs {
    std::string manifest, out, summary;
    double lo = 0.2, hi = 0.8, skel = 0.8;
    std::vector<std::string> require, forbid;
};

int run_curate(const CurateArgs& a, std::uint64_t seed, std::ostream& out)
{
    curation::CurationConfig cfg;
    cfg.area_lo = a.lo;
    cfg.area_hi = a.hi;
    cfg.skeleton_threshold = a.skel;
    cfg.required_tags = a.require;
    cfg.forbidden_tags = a.forbid;
    cfg.workers = configured_worker_count();
    if (!(cfg.area_lo < cfg.area_hi)) {
        throw DomainError("curate: --lo must be below --hi");
    }
    const fs::path manifest(a.manifest);
    const auto records = curation::read_records_jsonl(manifest);
    const curation::FileVideoSource source(manifest.parent_path());
    const auto result = curation::run_pipeline(records, cfg, source);
    curation::write_decisions_jsonl(a.out, result.decisions, seed);
    json summary = curation::to_json(result.summary);
    summary["seed"] = seed;
    emit(summary, a.summary, out);
    return 0;
}

struct PartmaskArgs {
    std::string skeleton, subject, out_dir, element = "square";
    std::size_t frame = 0;
    double tau = 1.0;
    int cap = 100;
    std::size_t patch = 0;
    double rho = 0.5;
};

int run_partmask(const PartmaskArgs& a, std::uint64_t seed, std::ostream& out)
{
    PartMaskConfig cfg;
    cfg.alpha_cap = a.cap;
    cfg.coverage_tau = a.tau;
    cfg.element = a.element == "disk" ? StructuringElement::disk : StructuringElement::square;
    cfg.validate();

    const SkeletonSequence seq = read_skeleton_file(a.skeleton);
    if (a.frame >= seq.size()) {
        throw DomainError("partmask: frame " + std::to_string(a.frame) + " beyond the " +
                          std::to_string(seq.size()) + "-frame skeleton");
    }
    const auto& segments = seq.frames[a.frame].segments;
    if (segments.empty()) {
        throw DomainError("partmask: frame " + std::to_string(a.frame) + " has no segments");
    }
    const Mask subject = read_mask_pgm(a.subject);
    const auto bodies = part_body_region(subject, segments);

    const fs::path dir(a.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create " + dir.string());
    }
    json parts = json::array();
    for (std::size_t j = 0; j < segments.size(); ++j) {
        const int alpha = adaptive_dilation_radius(segments[j], bodies[j], cfg);
        const Mask part =
            dilate(rasterize_segment(segments[j], subject.height(), subject.width()), alpha, cfg);
        const std::string file = "part_" + std::to_string(j) + ".pgm";
        write_mask_pgm(dir / file, part);
        json p = {{"segment_index", segments[j].segment_index},
                  {"alpha", alpha},
                  {"capped", alpha == cfg.alpha_cap},
                  {"area", part.area()},
                  {"body_area", bodies[j].area()},
                  {"file", file}};
        if (a.patch > 0) {
            p["tokens"] = set_indices(token_footprint(part, a.patch, a.patch, a.rho));
        }
        parts.push_back(std::move(p));
    }
    const json index = {{"seed", seed}, {"frame", a.frame}, {"element", a.element}, {"parts", parts}};
    write_file(dir / "parts.json", index.dump(2) + "\n");
    out << index.dump(2) << '\n';
    return 0;
}

struct MatchArgs {
    std::string attn, parts0, partsi, out;
};

int run_match(const MatchArgs& a, std::uint64_t seed)
{
    const Tensor attn = read_patn(a.attn);
    const PartTokens parts0 = part_tokens_from_json(read_json(a.parts0));
    const json partsi_doc = read_json(a.partsi);

    // Either one frame's token sets or a list of them, one per frame.
    std::vector<PartTokens> frames;
    const bool per_frame = partsi_doc.is_array() && !partsi_doc.empty() && partsi_doc[0].is_array() &&
                           !partsi_doc[0].empty() && partsi_doc[0][0].is_array();
    if (per_frame) {
        for (const auto& f : partsi_doc) {
            frames.push_back(part_tokens_from_json(f));
        }
    } else {
        frames.push_back(part_tokens_from_json(partsi_doc));
    }

    PartAssignment assignment;
    assignment.seed = seed;
    if (attn.rank() == 2) {
        if (frames.size() != 1) {
            throw DimensionError("match: a single attention matrix needs exactly one frame of parts");
        }
        assignment.frames.push_back({1, match_parts(attention_map_from_weights(attn), parts0, frames[0])});
    } else if (attn.rank() == 3) {
        if (attn.dim(0) != frames.size()) {
            throw DimensionError("match: attention holds " + std::to_string(attn.dim(0)) + " frames, parts list " +
                                 std::to_string(frames.size()));
        }
        const std::size_t nq = attn.dim(1);
        const std::size_t nk = attn.dim(2);
        for (std::size_t f = 0; f < frames.size(); ++f) {
            std::vector<double> slice(attn.data().begin() + static_cast<std::ptrdiff_t>(f * nq * nk),
                                      attn.data().begin() + static_cast<std::ptrdiff_t>((f + 1) * nq * nk));
            const AttentionMap m = attention_map_from_weights(Tensor({nq, nk}, std::move(slice)));
            assignment.frames.push_back({f + 1, match_parts(m, parts0, frames[f])});
        }
    } else {
        throw DimensionError("match: attention tensor must have rank 2 or 3, got " + shape_string(attn.shape()));
    }
    write_file(a.out, to_json(assignment).dump(2) + "\n");
    return 0;
}

struct SampleArgs {
    std::string config, out, assignment_out, camera_dir;
    std::optional<double> camera_speed;
};

int run_sample_cmd(const SampleArgs& a, std::uint64_t seed, std::ostream& out)
{
    const fs::path cfg_path(a.config);
    SampleConfig cfg = sample_config_from_json(read_json(cfg_path), cfg_path.parent_path());
    if (!a.camera_dir.empty()) {
        cfg.scene.camera_direction = camera_direction_from_string(a.camera_dir);
    }
    if (a.camera_speed) {
        cfg.scene.camera_speed = *a.camera_speed;
    }
    cfg.guidance.seed = seed;
    const SampleResult r = run_sample(cfg, seed);
    write_patn(a.out, r.latent.tensor());
    if (!a.assignment_out.empty()) {
        write_file(a.assignment_out, to_json(r.assignment).dump(2) + "\n");
    }
    json summary = {{"seed", seed},
                    {"out", a.out},
                    {"shape", r.latent.tensor().shape()},
                    {"config", to_json(cfg)},
                    {"matched_frames", r.assignment.frames.size()}};
    if (r.sparse) {
        summary["sparse"] = {{"bucket", r.sparse->bucket},
                             {"scheme", to_string(r.sparse->scheme)},
                             {"keep_count", r.sparse->keep_count}};
    }
    out << summary.dump(2) << '\n';
    return 0;
}

int run_sparsemask(std::size_t frames, std::uint64_t seed, const std::string& out_path, std::ostream& out)
{
    CounterRng rng(seed);
    const SparseDraw d = sparse_pose_mask(frames, SparsePolicy{}, rng);
    const json doc = {{"seed", seed},
                      {"frames", frames},
                      {"bucket", d.bucket},
                      {"scheme", to_string(d.scheme)},
                      {"keep_count", d.keep_count},
                      {"indices", d.indices}};
    emit(doc, out_path, out);
    return 0;
}

struct EvalArgs {
    std::string pred, ref, metrics = "psnr,ssim,l1", out;
};

int run_eval(const EvalArgs& a, std::uint64_t seed, std::ostream& out)
{
    const fs::path pred(a.pred);
    const fs::path ref(a.ref);
    std::vector<FramePair> pairs;
    for (std::size_t i = 0; fs::exists(ref / frame_name(i)); ++i) {
        if (!fs::exists(pred / frame_name(i))) {
            throw IoError("eval: prediction lacks frame " + (pred / frame_name(i)).string());
        }
        pairs.push_back({frame_from_pgm(read_pgm(pred / frame_name(i))), frame_from_pgm(read_pgm(ref / frame_name(i)))});
    }
    if (pairs.empty()) {
        throw IoError("eval: no frames named 00000.pgm, 00001.pgm, ... in " + ref.string());
    }

    json values = json::object();
    json per_frame = json::object();
    json unavailable = json::array();
    for (const auto& name : split_list(a.metrics)) {
        if (name == "lpips" || name == "fvd") {
            unavailable.push_back(name);
            continue;
        }
        const FrameMetric metric = metric_by_name(name);
        json frames = json::array();
        for (const auto& p : pairs) {
            frames.push_back(metric(p));
        }
        values[name] = video_metric(pairs, metric);
        per_frame[name] = std::move(frames);
    }
    const json doc = {{"seed", seed},
                      {"frames", pairs.size()},
                      {"metrics", values},
                      {"per_frame", per_frame},
                      {"unavailable", unavailable}};
    emit(doc, a.out, out);
    return 0;
}

struct GradArgs {
    std::size_t seeds = 20, width = 8, parts = 2, tokens = 16;
    double eps = 1e-4, tol = 1e-4;
    std::string out;
};

int run_gradcheck(const GradArgs& a, std::uint64_t seed, std::ostream& out, std::ostream& err)
{
    GradcheckOptions opt;
    opt.width = a.width;
    opt.parts = a.parts;
    opt.max_tokens = a.tokens;
    opt.eps = a.eps;
    json runs = json::array();
    double worst = 0.0;
    for (std::size_t k = 0; k < a.seeds; ++k) {
        const GradcheckResult r = ptcm_gradcheck(seed + k, opt);
        worst = std::max(worst, r.worst());
        runs.push_back({{"seed", r.seed},
                        {"wq", r.wq},
                        {"wk", r.wk},
                        {"wv", r.wv},
                        {"wo", r.wo},
                        {"x", r.x},
                        {"x0", r.x0}});
    }
    const bool pass = worst <= a.tol;
    const json doc = {{"seed", seed}, {"tolerance", a.tol}, {"worst", worst}, {"pass", pass}, {"runs", runs}};
    emit(doc, a.out, out);
    if (!pass) {
        err << "gradcheck: worst relative error " << worst << " exceeds " << a.tol << '\n';
        return 1;
    }
    return 0;
}

int run_stats(const std::string& decisions_path, std::uint64_t seed, const std::string& out_path, std::ostream& out)
{
    const auto decisions = curation::read_decisions_jsonl(decisions_path);
    json doc = curation::to_json(curation::summarize(decisions));
    // Mean tracked area ratio per video in ten bins over [0, 1].
    std::vector<std::size_t> bins(10, 0);
    for (const auto& d : decisions) {
        const auto& ratios = d.stats.area_ratios;
        if (ratios.empty()) {
            continue;
        }
        double mean = 0.0;
        for (double r : ratios) {
            mean += r;
        }
        mean /= static_cast<double>(ratios.size());
        bins[std::min<std::size_t>(9, static_cast<std::size_t>(mean * 10.0))] += 1;
    }
    doc["area_ratio_histogram"] = bins;
    doc["seed"] = seed;
    emit(doc, out_path, out);
    return 0;
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Pose-guided video diffusion mechanisms: curation, part masks, matching, guided sampling, metrics"};
    app.name("posevid");
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    std::function<int()> action;

    auto* curate = app.add_subcommand("curate", "Run the three-stage curation filter over a manifest");
    CurateArgs ca;
    curate->add_option("--manifest", ca.manifest, "Input JSON Lines of video records")->required();
    curate->add_option("--out", ca.out, "Output JSON Lines of decisions")->required();
    curate->add_option("--summary", ca.summary, "Write the summary JSON here instead of stdout");
    curate->add_option("--lo", ca.lo, "Lower area-ratio bound (exclusive)");
    curate->add_option("--hi", ca.hi, "Upper area-ratio bound (exclusive)");
    curate->add_option("--skel-threshold", ca.skel, "Minimum skeleton frame rate");
    curate->add_option("--require-tag", ca.require, "Tag every record must carry");
    curate->add_option("--forbid-tag", ca.forbid, "Tag that rejects a record");
    curate->add_option("--seed", seed, "Seed echoed into the output");
    curate->callback([&] { action = [&] { return run_curate(ca, seed, out); }; });

    auto* partmask = app.add_subcommand("partmask", "Adaptive part masks for one skeleton frame");
    PartmaskArgs pa;
    partmask->add_option("--skeleton", pa.skeleton, "Skeleton sequence JSON")->required();
    partmask->add_option("--subject", pa.subject, "Subject mask PGM for the frame")->required();
    partmask->add_option("--out-dir", pa.out_dir, "Directory for part PGMs and parts.json")->required();
    partmask->add_option("--frame", pa.frame, "Frame index");
    partmask->add_option("--element", pa.element, "Structuring element")->check(CLI::IsMember({"square", "disk"}));
    partmask->add_option("--tau", pa.tau, "Required body coverage");
    partmask->add_option("--cap", pa.cap, "Largest dilation radius");
    partmask->add_option("--patch", pa.patch, "Token patch size in pixels; 0 skips token sets");
    partmask->add_option("--rho", pa.rho, "Token occupancy threshold");
    partmask->add_option("--seed", seed, "Seed echoed into the output");
    partmask->callback([&] { action = [&] { return run_partmask(pa, seed, out); }; });

    auto* match = app.add_subcommand("match", "Match first-frame parts to later-frame parts by attention");
    MatchArgs ma;
    match->add_option("--attn", ma.attn, "PATN attention, [n0 x ni] or [frames x n0 x ni]")->required();
    match->add_option("--parts0", ma.parts0, "First-frame token sets JSON")->required();
    match->add_option("--partsi", ma.partsi, "Later-frame token sets JSON")->required();
    match->add_option("--out", ma.out, "Assignment JSON")->required();
    match->add_option("--seed", seed, "Seed echoed into the output");
    match->callback([&] { action = [&] { return run_match(ma, seed); }; });

    auto* sample = app.add_subcommand("sample", "Guided sampling with the toy pose-conditioned model");
    SampleArgs sa;
    sample->add_option("--config", sa.config, "Sampling config JSON")->required();
    sample->add_option("--seed", seed, "Seed for weights, noise and sparse masking")->required();
    sample->add_option("--out", sa.out, "Output latent PATN")->required();
    sample->add_option("--assignment-out", sa.assignment_out, "Write the part assignment JSON here");
    sample->add_option("--camera-dir", sa.camera_dir, "Desired camera motion")
        ->check(CLI::IsMember({"left", "right", "up", "down"}));
    sample->add_option("--camera-speed", sa.camera_speed, "Camera anchor speed in pixels per frame");
    sample->callback([&] { action = [&] { return run_sample_cmd(sa, seed, out); }; });

    auto* sparse = app.add_subcommand("sparsemask", "Draw a sparse pose keep-set");
    std::size_t sparse_frames = 81;
    std::string sparse_out;
    sparse->add_option("--frames", sparse_frames, "Total frames");
    sparse->add_option("--seed", seed, "Seed")->required();
    sparse->add_option("--out", sparse_out, "Write JSON here instead of stdout");
    sparse->callback([&] { action = [&] { return run_sparsemask(sparse_frames, seed, sparse_out, out); }; });

    auto* eval = app.add_subcommand("eval", "PSNR, SSIM and L1 between two PGM frame directories");
    EvalArgs ea;
    eval->add_option("--pred", ea.pred, "Predicted frames directory")->required();
    eval->add_option("--ref", ea.ref, "Reference frames directory")->required();
    eval->add_option("--metrics", ea.metrics, "Comma-separated metric names");
    eval->add_option("--out", ea.out, "Write JSON here instead of stdout");
    eval->add_option("--seed", seed, "Seed echoed into the output");
    eval->callback([&] { action = [&] { return run_eval(ea, seed, out); }; });

    auto* grad = app.add_subcommand("gradcheck", "Compare analytic PTCM gradients with central differences");
    GradArgs ga;
    grad->add_option("--seeds", ga.seeds, "Number of random cases");
    grad->add_option("--d", ga.width, "Token width");
    grad->add_option("--parts", ga.parts, "Parts per frame");
    grad->add_option("--tokens", ga.tokens, "Maximum tokens per frame");
    grad->add_option("--eps", ga.eps, "Finite-difference step");
    grad->add_option("--tol", ga.tol, "Relative error tolerance");
    grad->add_option("--out", ga.out, "Write JSON here instead of stdout");
    grad->add_option("--seed", seed, "First seed");
    grad->callback([&] { action = [&] { return run_gradcheck(ga, seed, out, err); }; });

    auto* stats = app.add_subcommand("stats", "Histograms over a curation decision manifest");
    std::string stats_in, stats_out;
    stats->add_option("--decisions", stats_in, "Decisions JSON Lines")->required();
    stats->add_option("--out", stats_out, "Write JSON here instead of stdout");
    stats->add_option("--seed", seed, "Seed echoed into the output");
    stats->callback([&] { action = [&] { return run_stats(stats_in, seed, stats_out, out); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return 2;
    }

    try {
        return action ? action() : 2;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace posevid::cli
