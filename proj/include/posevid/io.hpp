#pragma once

#include "posevid/mask.hpp"
#include "posevid/skeleton.hpp"
#include "posevid/tensor.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace posevid {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string read_file(const fs::path& path);
void write_file(const fs::path& path, std::string_view contents);

// PATN tensor files: "PATN", u32 rank, u32 dims, then float32 values, all
// little-endian. Values are narrowed to float on write.
std::string encode_patn(const Tensor& t);
Tensor decode_patn(std::string_view bytes);
void write_patn(const fs::path& path, const Tensor& t);
Tensor read_patn(const fs::path& path);

struct GrayImage {
    std::size_t height = 0;
    std::size_t width = 0;
    int max_value = 255;
    std::vector<std::uint16_t> pixels;

    std::uint16_t at(std::size_t r, std::size_t c) const { return pixels[r * width + c]; }
};

// Binary PGM (P5). Max values above 255 use two bytes per sample, big-endian.
GrayImage decode_pgm(std::string_view bytes);
std::string encode_pgm(const GrayImage& img);
GrayImage read_pgm(const fs::path& path);
void write_pgm(const fs::path& path, const GrayImage& img);

// Mask PGMs hold only 0 (background) and 255 (foreground).
Mask mask_from_pgm(const GrayImage& img, std::string label = {});
GrayImage mask_to_pgm(const Mask& m);
Mask read_mask_pgm(const fs::path& path, std::string label = {});
void write_mask_pgm(const fs::path& path, const Mask& m);

// Skeleton JSON: an array of frames; a frame is either an array of segments
// or {"segments": [...], "valid": bool}; a segment is an array of [row, col].
SkeletonSequence skeleton_from_json(const json& doc);
json skeleton_to_json(const SkeletonSequence& seq);
SkeletonSequence read_skeleton_file(const fs::path& path);
void write_skeleton_file(const fs::path& path, const SkeletonSequence& seq);

// Mask sequence index: {"frames": [[{"label": str, "file": str}, ...], ...]}
// with file paths relative to the index file.
MaskSequence read_mask_sequence(const fs::path& index_path);
void write_mask_sequence(const fs::path& index_path, const MaskSequence& seq);

}  // namespace posevid
