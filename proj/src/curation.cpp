#include "posevid/curation.hpp"

#include "posevid/error.hpp"
#include "posevid/threads.hpp"

#include <algorithm>
#include <sstream>

namespace posevid::curation {

namespace {

constexpr std::pair<Reason, const char*> kReasonNames[] = {
    {Reason::ok, "ok"},
    {Reason::stage1_missing_tag, "stage1_missing_tag"},
    {Reason::stage1_forbidden_tag, "stage1_forbidden_tag"},
    {Reason::empty_first_frame, "empty_first_frame"},
    {Reason::area_ratio_out_of_range, "area_ratio_out_of_range"},
    {Reason::skeleton_rate_below_threshold, "skeleton_rate_below_threshold"},
    {Reason::io_error, "io_error"},
};

CurationDecision rejected(int stage, Reason reason, std::string detail = {})
{
    CurationDecision d;
    d.verdict = Verdict::rejected;
    d.stage = stage;
    d.reason = reason;
    d.detail = std::move(detail);
    return d;
}

bool has_tag(const VideoRecord& rec, const std::string& tag)
{
    return std::find(rec.metadata_tags.begin(), rec.metadata_tags.end(), tag) != rec.metadata_tags.end();
}

template <typename T>
T required_field(const json& j, const char* key)
{
    if (!j.contains(key)) {
        throw FormatError(std::string("missing field \"") + key + "\"");
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw FormatError(std::string("field \"") + key + "\" has the wrong type");
    }
}

}  // namespace

void VideoRecord::validate() const
{
    if (id.empty()) {
        throw DomainError("video record without id");
    }
    if (frame_count < 1 || height < 1 || width < 1) {
        throw DomainError("video " + id + ": frame count and grid sizes must be >= 1");
    }
}

const char* to_string(Verdict v)
{
    return v == Verdict::retained ? "retained" : "rejected";
}

const char* to_string(Reason r)
{
    for (const auto& [reason, name] : kReasonNames) {
        if (reason == r) {
            return name;
        }
    }
    return "unknown";
}

Reason reason_from_string(const std::string& s)
{
    for (const auto& [reason, name] : kReasonNames) {
        if (s == name) {
            return reason;
        }
    }
    throw FormatError("unknown reason code \"" + s + "\"");
}

CurationDecision stage1_filter(const VideoRecord& rec, std::span<const std::string> required_tags,
                               std::span<const std::string> forbidden_tags)
{
    for (const auto& tag : forbidden_tags) {
        if (has_tag(rec, tag)) {
            auto d = rejected(1, Reason::stage1_forbidden_tag, tag);
            d.video_id = rec.id;
            return d;
        }
    }
    for (const auto& tag : required_tags) {
        if (!has_tag(rec, tag)) {
            auto d = rejected(1, Reason::stage1_missing_tag, tag);
            d.video_id = rec.id;
            return d;
        }
    }
    CurationDecision d;
    d.video_id = rec.id;
    d.stage = 1;
    return d;
}

CurationDecision area_ratio_filter(std::span<const Mask> tracked, std::size_t height, std::size_t width,
                                   double lo, double hi)
{
    if (tracked.empty()) {
        throw DomainError("area_ratio_filter: empty mask sequence");
    }
    const auto total = static_cast<double>(height * width);
    CurationDecision d;
    d.stage = 2;
    for (std::size_t i = 0; i < tracked.size(); ++i) {
        if (tracked[i].height() != height || tracked[i].width() != width) {
            throw DimensionError("area_ratio_filter: mask grid differs from " + std::to_string(height) + "x" +
                                 std::to_string(width));
        }
        d.stats.area_ratios.push_back(static_cast<double>(tracked[i].area()) / total);
    }
    for (std::size_t i = 0; i < d.stats.area_ratios.size(); ++i) {
        const double ratio = d.stats.area_ratios[i];
        if (!(ratio > lo && ratio < hi)) {
            d.verdict = Verdict::rejected;
            d.reason = Reason::area_ratio_out_of_range;
            std::ostringstream os;
            os << "tracked mask " << i << " has area ratio " << ratio;
            d.detail = os.str();
            break;
        }
    }
    return d;
}

std::size_t select_primary_index(std::span<const Mask> first_frame_masks)
{
    if (first_frame_masks.empty()) {
        throw DomainError("select_primary_mask: empty mask list");
    }
    std::size_t best = 0;
    std::size_t best_area = first_frame_masks[0].area();
    for (std::size_t i = 1; i < first_frame_masks.size(); ++i) {
        const std::size_t a = first_frame_masks[i].area();
        if (a > best_area) {
            best = i;
            best_area = a;
        }
    }
    return best;
}

Mask select_primary_mask(std::span<const Mask> first_frame_masks)
{
    return first_frame_masks[select_primary_index(first_frame_masks)];
}

TrackResult track_primary_mask(const MaskSequence& masks)
{
    if (masks.empty() || masks.front().empty()) {
        throw DomainError("track_primary_mask: first frame has no masks");
    }
    TrackResult result;
    const std::size_t first = select_primary_index(masks.front());
    result.tracked.push_back({0, masks.front()[first], first, 1.0});
    const std::string& label = masks.front()[first].label();

    for (std::size_t t = 1; t < masks.size(); ++t) {
        const Mask& previous = result.tracked.back().mask;
        std::optional<std::size_t> best;
        double best_iou = -1.0;
        for (std::size_t k = 0; k < masks[t].size(); ++k) {
            const Mask& candidate = masks[t][k];
            if (candidate.label() != label) {
                continue;
            }
            const double v = iou(candidate, previous);
            if (v > best_iou) {
                best_iou = v;
                best = k;
            }
        }
        if (!best) {
            result.skipped.push_back(t);
            continue;
        }
        result.tracked.push_back({t, masks[t][*best], *best, best_iou});
    }
    return result;
}

CurationDecision skeleton_rate_filter(const SkeletonSequence& skeletons, std::size_t total_frames, double threshold)
{
    if (total_frames == 0) {
        throw DomainError("skeleton_rate_filter: total frame count must be >= 1");
    }
    std::size_t t_skel = 0;
    for (const auto& frame : skeletons.frames) {
        if (frame.valid && !frame.segments.empty()) {
            ++t_skel;
        }
    }
    CurationDecision d;
    d.stage = 3;
    d.stats.skeleton_frames = t_skel;
    d.stats.segment_count = modal_segment_count(skeletons);
    const double rate = static_cast<double>(t_skel) / static_cast<double>(total_frames);
    if (rate < threshold) {
        d.verdict = Verdict::rejected;
        d.reason = Reason::skeleton_rate_below_threshold;
        d.detail = std::to_string(t_skel) + "/" + std::to_string(total_frames) + " frames with skeletons";
    }
    return d;
}

std::optional<std::size_t> modal_segment_count(const SkeletonSequence& skeletons)
{
    std::map<std::size_t, std::size_t> counts;
    for (const auto& frame : skeletons.frames) {
        if (frame.valid && !frame.segments.empty()) {
            ++counts[frame.segments.size()];
        }
    }
    std::optional<std::size_t> mode;
    std::size_t best = 0;
    for (const auto& [segments, n] : counts) {
        if (n > best) {
            best = n;
            mode = segments;
        }
    }
    return mode;
}

MaskSequence FileVideoSource::load_masks(const VideoRecord& rec) const
{
    return read_mask_sequence(base_ / rec.mask_file);
}

SkeletonSequence FileVideoSource::load_skeletons(const VideoRecord& rec) const
{
    return read_skeleton_file(base_ / rec.skeleton_file);
}

CurationDecision evaluate_stage2(const VideoRecord& rec, const MaskSequence& masks, const CurationConfig& cfg)
{
    if (masks.size() != rec.frame_count) {
        auto d = rejected(2, Reason::io_error,
                          "mask sequence has " + std::to_string(masks.size()) + " frames, record declares " +
                              std::to_string(rec.frame_count));
        d.video_id = rec.id;
        return d;
    }
    if (masks.front().empty()) {
        auto d = rejected(2, Reason::empty_first_frame, "no masks in the first frame");
        d.video_id = rec.id;
        return d;
    }
    for (const auto& frame : masks) {
        for (const auto& m : frame) {
            if (m.height() != rec.height || m.width() != rec.width) {
                auto d = rejected(2, Reason::io_error, "mask grid differs from the record's frame size");
                d.video_id = rec.id;
                return d;
            }
        }
    }

    const TrackResult track = track_primary_mask(masks);
    std::vector<Mask> tracked;
    tracked.reserve(track.tracked.size());
    CurationStats stats;
    for (const auto& tf : track.tracked) {
        tracked.push_back(tf.mask);
        if (tf.frame > 0) {
            stats.tracked_ious.push_back(tf.iou_with_previous);
        }
    }
    stats.skipped_frames = track.skipped;

    CurationDecision d = area_ratio_filter(tracked, rec.height, rec.width, cfg.area_lo, cfg.area_hi);
    d.video_id = rec.id;
    stats.area_ratios = std::move(d.stats.area_ratios);
    d.stats = std::move(stats);
    return d;
}

CurationDecision evaluate_stage3(const VideoRecord& rec, CurationStats stats, const SkeletonSequence& skeletons,
                                 const CurationConfig& cfg)
{
    if (skeletons.size() != rec.frame_count) {
        auto d = rejected(3, Reason::io_error,
                          "skeleton file has " + std::to_string(skeletons.size()) + " frames, record declares " +
                              std::to_string(rec.frame_count));
        d.video_id = rec.id;
        d.stats = std::move(stats);
        return d;
    }
    CurationDecision d = skeleton_rate_filter(skeletons, rec.frame_count, cfg.skeleton_threshold);
    d.video_id = rec.id;
    stats.skeleton_frames = d.stats.skeleton_frames;
    stats.segment_count = d.stats.segment_count;
    d.stats = std::move(stats);
    return d;
}

CurationDecision evaluate_loaded(const VideoRecord& rec, const MaskSequence& masks,
                                 const SkeletonSequence& skeletons, const CurationConfig& cfg)
{
    CurationDecision s2 = evaluate_stage2(rec, masks, cfg);
    if (!s2.retained()) {
        return s2;
    }
    return evaluate_stage3(rec, std::move(s2.stats), skeletons, cfg);
}

CurationDecision curate_video(const VideoRecord& rec, const CurationConfig& cfg, const VideoSource& source)
{
    CurationDecision s1 = stage1_filter(rec, cfg.required_tags, cfg.forbidden_tags);
    if (!s1.retained()) {
        return s1;
    }
    CurationDecision s2;
    try {
        s2 = evaluate_stage2(rec, source.load_masks(rec), cfg);
    } catch (const Error& e) {
        s2 = rejected(2, Reason::io_error, e.what());
        s2.video_id = rec.id;
    }
    if (!s2.retained()) {
        return s2;
    }
    try {
        return evaluate_stage3(rec, std::move(s2.stats), source.load_skeletons(rec), cfg);
    } catch (const Error& e) {
        auto d = rejected(3, Reason::io_error, e.what());
        d.video_id = rec.id;
        return d;
    }
}

ManifestSummary summarize(std::span<const CurationDecision> decisions)
{
    ManifestSummary s;
    s.total = decisions.size();
    for (const auto& d : decisions) {
        ++s.reasons[to_string(d.reason)];
        if (d.retained()) {
            ++s.retained;
            if (d.stats.segment_count) {
                ++s.segment_count_histogram[*d.stats.segment_count];
            }
        } else {
            ++s.rejected_by_stage[d.stage];
        }
    }
    return s;
}

CurationManifest run_pipeline(std::span<const VideoRecord> records, const CurationConfig& cfg,
                              const VideoSource& source)
{
    CurationManifest manifest;
    manifest.decisions.resize(records.size());
    parallel_for(records.size(), cfg.workers, [&](std::size_t i) {
        try {
            records[i].validate();
            manifest.decisions[i] = curate_video(records[i], cfg, source);
        } catch (const Error& e) {
            auto d = rejected(1, Reason::io_error, e.what());
            d.video_id = records[i].id;
            manifest.decisions[i] = std::move(d);
        }
    });
    manifest.summary = summarize(manifest.decisions);
    return manifest;
}

json to_json(const VideoRecord& rec)
{
    return {{"id", rec.id},
            {"frame_count", rec.frame_count},
            {"height", rec.height},
            {"width", rec.width},
            {"metadata_tags", rec.metadata_tags},
            {"mask_file", rec.mask_file},
            {"skeleton_file", rec.skeleton_file}};
}

VideoRecord record_from_json(const json& j)
{
    if (!j.is_object()) {
        throw FormatError("video record must be a JSON object");
    }
    VideoRecord rec;
    rec.id = required_field<std::string>(j, "id");
    rec.frame_count = required_field<std::size_t>(j, "frame_count");
    rec.height = required_field<std::size_t>(j, "height");
    rec.width = required_field<std::size_t>(j, "width");
    if (j.contains("metadata_tags")) {
        rec.metadata_tags = required_field<std::vector<std::string>>(j, "metadata_tags");
    }
    rec.mask_file = required_field<std::string>(j, "mask_file");
    rec.skeleton_file = required_field<std::string>(j, "skeleton_file");
    return rec;
}

json to_json(const CurationDecision& d)
{
    json stats = {{"area_ratios", d.stats.area_ratios},
                  {"tracked_ious", d.stats.tracked_ious},
                  {"skipped_frames", d.stats.skipped_frames}};
    stats["skeleton_frames"] = d.stats.skeleton_frames ? json(*d.stats.skeleton_frames) : json(nullptr);
    stats["segment_count"] = d.stats.segment_count ? json(*d.stats.segment_count) : json(nullptr);
    return {{"video_id", d.video_id},
            {"verdict", to_string(d.verdict)},
            {"stage", d.stage},
            {"reason", to_string(d.reason)},
            {"detail", d.detail},
            {"stats", std::move(stats)}};
}

CurationDecision decision_from_json(const json& j)
{
    CurationDecision d;
    d.video_id = required_field<std::string>(j, "video_id");
    const auto verdict = required_field<std::string>(j, "verdict");
    if (verdict != "retained" && verdict != "rejected") {
        throw FormatError("unknown verdict \"" + verdict + "\"");
    }
    d.verdict = verdict == "retained" ? Verdict::retained : Verdict::rejected;
    d.stage = required_field<int>(j, "stage");
    d.reason = reason_from_string(required_field<std::string>(j, "reason"));
    if (j.contains("detail")) {
        d.detail = required_field<std::string>(j, "detail");
    }
    if (j.contains("stats")) {
        const json& s = j["stats"];
        d.stats.area_ratios = s.value("area_ratios", std::vector<double>{});
        d.stats.tracked_ious = s.value("tracked_ious", std::vector<double>{});
        d.stats.skipped_frames = s.value("skipped_frames", std::vector<std::size_t>{});
        if (s.contains("skeleton_frames") && !s["skeleton_frames"].is_null()) {
            d.stats.skeleton_frames = s["skeleton_frames"].get<std::size_t>();
        }
        if (s.contains("segment_count") && !s["segment_count"].is_null()) {
            d.stats.segment_count = s["segment_count"].get<std::size_t>();
        }
    }
    return d;
}

json to_json(const ManifestSummary& s)
{
    json by_stage = json::object();
    for (const auto& [stage, n] : s.rejected_by_stage) {
        by_stage[std::to_string(stage)] = n;
    }
    json hist = json::object();
    for (const auto& [segments, n] : s.segment_count_histogram) {
        hist[std::to_string(segments)] = n;
    }
    return {{"total", s.total},
            {"retained", s.retained},
            {"rejected_by_stage", std::move(by_stage)},
            {"reasons", s.reasons},
            {"segment_count_histogram", std::move(hist)}};
}

std::vector<VideoRecord> read_records_jsonl(const fs::path& path)
{
    std::istringstream in(read_file(path));
    std::vector<VideoRecord> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            records.push_back(record_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        } catch (const FormatError& e) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return records;
}

void write_decisions_jsonl(const fs::path& path, std::span<const CurationDecision> decisions, std::uint64_t seed)
{
    std::string out;
    for (const auto& d : decisions) {
        json j = to_json(d);
        j["seed"] = seed;
        out += j.dump();
        out += '\n';
    }
    write_file(path, out);
}

std::vector<CurationDecision> read_decisions_jsonl(const fs::path& path)
{
    std::istringstream in(read_file(path));
    std::vector<CurationDecision> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            out.push_back(decision_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace posevid::curation
