#pragma once

#include "posevid/io.hpp"
#include "posevid/mask.hpp"
#include "posevid/skeleton.hpp"

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace posevid::curation {

struct VideoRecord {
    std::string id;
    std::size_t frame_count = 1;
    std::size_t height = 1;
    std::size_t width = 1;
    std::vector<std::string> metadata_tags;
    std::string mask_file;
    std::string skeleton_file;

    void validate() const;
};

enum class Verdict { retained, rejected };

// Closed set of decision reasons.
enum class Reason {
    ok,
    stage1_missing_tag,
    stage1_forbidden_tag,
    empty_first_frame,
    area_ratio_out_of_range,
    skeleton_rate_below_threshold,
    io_error,
};

const char* to_string(Verdict v);
const char* to_string(Reason r);
Reason reason_from_string(const std::string& s);

struct CurationStats {
    std::vector<double> area_ratios;      // per tracked frame
    std::vector<double> tracked_ious;     // per tracked frame after the first
    std::vector<std::size_t> skipped_frames;
    std::optional<std::size_t> skeleton_frames;  // T_skel
    std::optional<std::size_t> segment_count;    // modal segments per skeleton frame
};

struct CurationDecision {
    std::string video_id;
    Verdict verdict = Verdict::retained;
    int stage = 1;
    Reason reason = Reason::ok;
    std::string detail;
    CurationStats stats;

    bool retained() const { return verdict == Verdict::retained; }
};

struct CurationConfig {
    std::vector<std::string> required_tags;
    std::vector<std::string> forbidden_tags;
    double area_lo = 0.2;
    double area_hi = 0.8;
    double skeleton_threshold = 0.8;
    std::size_t workers = 1;
};

CurationDecision stage1_filter(const VideoRecord& rec, std::span<const std::string> required_tags,
                               std::span<const std::string> forbidden_tags);

// Retained iff every tracked mask's area / (H*W) lies strictly inside (lo, hi).
CurationDecision area_ratio_filter(std::span<const Mask> tracked, std::size_t height, std::size_t width,
                                   double lo = 0.2, double hi = 0.8);

// Largest mask; ties go to the lowest index.
std::size_t select_primary_index(std::span<const Mask> first_frame_masks);
Mask select_primary_mask(std::span<const Mask> first_frame_masks);

struct TrackedFrame {
    std::size_t frame = 0;
    Mask mask;
    std::size_t candidate_index = 0;  // position within that frame's mask list
    double iou_with_previous = 1.0;   // 1 for the first frame
};

struct TrackResult {
    std::vector<TrackedFrame> tracked;
    std::vector<std::size_t> skipped;
};

// Follows the first frame's largest mask through later frames by best IoU
// among same-label candidates; frames without a candidate are skipped.
TrackResult track_primary_mask(const MaskSequence& masks);

// T_skel counts valid frames with at least one segment; rejected iff T_skel / T < threshold.
CurationDecision skeleton_rate_filter(const SkeletonSequence& skeletons, std::size_t total_frames,
                                      double threshold = 0.8);

// Mode of the per-frame segment counts over frames with segments (ties: smaller count).
std::optional<std::size_t> modal_segment_count(const SkeletonSequence& skeletons);

// Supplies per-video masks and skeletons; the pipeline calls it only for
// videos that pass stage 1.
class VideoSource {
public:
    virtual ~VideoSource() = default;
    virtual MaskSequence load_masks(const VideoRecord& rec) const = 0;
    virtual SkeletonSequence load_skeletons(const VideoRecord& rec) const = 0;
};

// Resolves record paths relative to `base_dir`.
class FileVideoSource : public VideoSource {
public:
    explicit FileVideoSource(fs::path base_dir = {}) : base_(std::move(base_dir)) {}
    MaskSequence load_masks(const VideoRecord& rec) const override;
    SkeletonSequence load_skeletons(const VideoRecord& rec) const override;

private:
    fs::path base_;
};

// Stage 2 alone: frame-count and grid checks, tracking, area rule.
CurationDecision evaluate_stage2(const VideoRecord& rec, const MaskSequence& masks, const CurationConfig& cfg);

// Stages 2 and 3 on already-loaded inputs.
CurationDecision evaluate_loaded(const VideoRecord& rec, const MaskSequence& masks,
                                 const SkeletonSequence& skeletons, const CurationConfig& cfg);

CurationDecision curate_video(const VideoRecord& rec, const CurationConfig& cfg, const VideoSource& source);

struct ManifestSummary {
    std::size_t total = 0;
    std::size_t retained = 0;
    std::map<int, std::size_t> rejected_by_stage;
    std::map<std::string, std::size_t> reasons;
    std::map<std::size_t, std::size_t> segment_count_histogram;  // retained videos only
};

struct CurationManifest {
    std::vector<CurationDecision> decisions;  // one per input record, input order
    ManifestSummary summary;
};

ManifestSummary summarize(std::span<const CurationDecision> decisions);

CurationManifest run_pipeline(std::span<const VideoRecord> records, const CurationConfig& cfg,
                              const VideoSource& source);

json to_json(const VideoRecord& rec);
VideoRecord record_from_json(const json& j);
json to_json(const CurationDecision& d);
CurationDecision decision_from_json(const json& j);
json to_json(const ManifestSummary& s);

std::vector<VideoRecord> read_records_jsonl(const fs::path& path);
// Each line also carries "seed" so result files are self-describing.
void write_decisions_jsonl(const fs::path& path, std::span<const CurationDecision> decisions, std::uint64_t seed);
std::vector<CurationDecision> read_decisions_jsonl(const fs::path& path);

}  // namespace posevid::curation
