#include "posevid/io.hpp"

#include "posevid/error.hpp"

#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>

namespace posevid {

namespace {

constexpr std::string_view kPatnMagic = "PATN";

void put_u32(std::string& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
    }
}

std::uint32_t get_u32(std::string_view bytes, std::size_t offset)
{
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
    }
    return v;
}

// Header tokens are separated by whitespace; '#' starts a comment to end of line.
class PgmHeaderReader {
public:
    explicit PgmHeaderReader(std::string_view bytes) : bytes_(bytes) {}

    std::string token()
    {
        skip_space_and_comments();
        std::string tok;
        while (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_])) &&
               bytes_[pos_] != '#') {
            tok.push_back(bytes_[pos_++]);
        }
        if (tok.empty()) {
            throw FormatError("PGM: truncated header");
        }
        return tok;
    }

    long number()
    {
        const std::string tok = token();
        for (char ch : tok) {
            if (!std::isdigit(static_cast<unsigned char>(ch))) {
                throw FormatError("PGM: bad header field '" + tok + "'");
            }
        }
        if (tok.size() > 9) {
            throw FormatError("PGM: header field too large");
        }
        return std::stol(tok);
    }

    // Exactly one whitespace byte separates the header from the raster.
    std::size_t raster_offset()
    {
        if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
            throw FormatError("PGM: missing whitespace before raster");
        }
        return pos_ + 1;
    }

private:
    void skip_space_and_comments()
    {
        while (pos_ < bytes_.size()) {
            if (std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') {
                    ++pos_;
                }
            } else {
                break;
            }
        }
    }

    std::string_view bytes_;
    std::size_t pos_ = 0;
};

int json_int(const json& v, const char* what)
{
    if (!v.is_number_integer()) {
        throw FormatError(std::string("skeleton JSON: ") + what + " must be an integer");
    }
    return v.get<int>();
}

}  // namespace

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) {
        throw IoError("error reading " + path.string());
    }
    return ss.str();
}

void write_file(const fs::path& path, std::string_view contents)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) {
        throw IoError("error writing " + path.string());
    }
}

std::string encode_patn(const Tensor& t)
{
    if (t.empty()) {
        throw DimensionError("PATN: cannot encode an empty tensor");
    }
    std::string out(kPatnMagic);
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) {
        put_u32(out, static_cast<std::uint32_t>(d));
    }
    out.reserve(out.size() + 4 * t.size());
    for (double x : t.data()) {
        put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
    }
    return out;
}

Tensor decode_patn(std::string_view bytes)
{
    if (bytes.size() < 8 || bytes.substr(0, 4) != kPatnMagic) {
        throw FormatError("PATN: bad magic");
    }
    const std::uint32_t rank = get_u32(bytes, 4);
    if (rank == 0 || rank > 16) {
        throw FormatError("PATN: unsupported rank " + std::to_string(rank));
    }
    const std::size_t header = 8 + 4 * static_cast<std::size_t>(rank);
    if (bytes.size() < header) {
        throw FormatError("PATN: truncated shape");
    }
    Tensor::Shape shape(rank);
    std::size_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        shape[i] = get_u32(bytes, 8 + 4 * i);
        if (shape[i] == 0) {
            throw FormatError("PATN: zero dimension");
        }
        count *= shape[i];
    }
    if (bytes.size() != header + 4 * count) {
        throw FormatError("PATN: payload holds " + std::to_string(bytes.size() - header) +
                          " bytes, expected " + std::to_string(4 * count));
    }
    std::vector<double> data(count);
    for (std::size_t i = 0; i < count; ++i) {
        data[i] = std::bit_cast<float>(get_u32(bytes, header + 4 * i));
    }
    return Tensor(std::move(shape), std::move(data));
}

void write_patn(const fs::path& path, const Tensor& t)
{
    write_file(path, encode_patn(t));
}

Tensor read_patn(const fs::path& path)
{
    return decode_patn(read_file(path));
}

GrayImage decode_pgm(std::string_view bytes)
{
    PgmHeaderReader hdr(bytes);
    if (hdr.token() != "P5") {
        throw FormatError("PGM: only binary P5 is supported");
    }
    GrayImage img;
    const long w = hdr.number();
    const long h = hdr.number();
    const long maxval = hdr.number();
    if (w <= 0 || h <= 0) {
        throw FormatError("PGM: non-positive size");
    }
    if (maxval <= 0 || maxval > 65535) {
        throw FormatError("PGM: max value out of range");
    }
    img.width = static_cast<std::size_t>(w);
    img.height = static_cast<std::size_t>(h);
    img.max_value = static_cast<int>(maxval);
    const std::size_t offset = hdr.raster_offset();
    const std::size_t bps = maxval > 255 ? 2 : 1;
    const std::size_t n = img.width * img.height;
    if (bytes.size() - offset != n * bps) {
        throw FormatError("PGM: raster size mismatch");
    }
    img.pixels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (bps == 1) {
            img.pixels[i] = static_cast<unsigned char>(bytes[offset + i]);
        } else {
            img.pixels[i] = static_cast<std::uint16_t>(
                (static_cast<unsigned char>(bytes[offset + 2 * i]) << 8) |
                static_cast<unsigned char>(bytes[offset + 2 * i + 1]));
        }
        if (img.pixels[i] > img.max_value) {
            throw FormatError("PGM: sample exceeds max value");
        }
    }
    return img;
}

std::string encode_pgm(const GrayImage& img)
{
    if (img.pixels.size() != img.width * img.height || img.width == 0 || img.height == 0) {
        throw DimensionError("PGM: pixel buffer does not match size");
    }
    std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n" +
                      std::to_string(img.max_value) + "\n";
    for (auto p : img.pixels) {
        if (img.max_value > 255) {
            out.push_back(static_cast<char>(p >> 8));
        }
        out.push_back(static_cast<char>(p & 0xFF));
    }
    return out;
}

GrayImage read_pgm(const fs::path& path)
{
    try {
        return decode_pgm(read_file(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_pgm(const fs::path& path, const GrayImage& img)
{
    write_file(path, encode_pgm(img));
}

Mask mask_from_pgm(const GrayImage& img, std::string label)
{
    Mask m(img.height, img.width, std::move(label));
    for (std::size_t r = 0; r < img.height; ++r) {
        for (std::size_t c = 0; c < img.width; ++c) {
            const auto v = img.at(r, c);
            if (v != 0 && v != 255) {
                throw FormatError("mask PGM: value " + std::to_string(v) + " is neither 0 nor 255");
            }
            m.set(r, c, v == 255);
        }
    }
    return m;
}

GrayImage mask_to_pgm(const Mask& m)
{
    GrayImage img;
    img.height = m.height();
    img.width = m.width();
    img.max_value = 255;
    img.pixels.reserve(m.pixel_count());
    for (auto b : m.bits()) {
        img.pixels.push_back(b ? 255 : 0);
    }
    return img;
}

Mask read_mask_pgm(const fs::path& path, std::string label)
{
    try {
        return mask_from_pgm(read_pgm(path), std::move(label));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_mask_pgm(const fs::path& path, const Mask& m)
{
    write_pgm(path, mask_to_pgm(m));
}

SkeletonSequence skeleton_from_json(const json& doc)
{
    if (!doc.is_array()) {
        throw FormatError("skeleton JSON: top level must be an array of frames");
    }
    SkeletonSequence seq;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const json& fr = doc[i];
        SkeletonFrame frame;
        const json* segs = &fr;
        if (fr.is_object()) {
            if (!fr.contains("segments") || !fr["segments"].is_array()) {
                throw FormatError("skeleton JSON: frame object needs a \"segments\" array");
            }
            segs = &fr["segments"];
            if (fr.contains("valid")) {
                if (!fr["valid"].is_boolean()) {
                    throw FormatError("skeleton JSON: \"valid\" must be boolean");
                }
                frame.valid = fr["valid"].get<bool>();
            }
        } else if (!fr.is_array()) {
            throw FormatError("skeleton JSON: frame must be an array or object");
        }
        for (std::size_t j = 0; j < segs->size(); ++j) {
            const json& sj = (*segs)[j];
            if (!sj.is_array() || sj.empty()) {
                throw FormatError("skeleton JSON: segment must be a nonempty array of points");
            }
            SkeletonSegment seg;
            seg.frame_index = static_cast<int>(i);
            seg.segment_index = static_cast<int>(j);
            for (const auto& pt : sj) {
                if (!pt.is_array() || pt.size() != 2) {
                    throw FormatError("skeleton JSON: point must be [row, col]");
                }
                seg.points.push_back({json_int(pt[0], "row"), json_int(pt[1], "col")});
            }
            frame.segments.push_back(std::move(seg));
        }
        seq.frames.push_back(std::move(frame));
    }
    return seq;
}

json skeleton_to_json(const SkeletonSequence& seq)
{
    json doc = json::array();
    for (const auto& frame : seq.frames) {
        json segs = json::array();
        for (const auto& seg : frame.segments) {
            json pts = json::array();
            for (const auto& p : seg.points) {
                pts.push_back({p.row, p.col});
            }
            segs.push_back(std::move(pts));
        }
        doc.push_back({{"segments", std::move(segs)}, {"valid", frame.valid}});
    }
    return doc;
}

SkeletonSequence read_skeleton_file(const fs::path& path)
{
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    try {
        return skeleton_from_json(doc);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_skeleton_file(const fs::path& path, const SkeletonSequence& seq)
{
    write_file(path, skeleton_to_json(seq).dump());
}

MaskSequence read_mask_sequence(const fs::path& index_path)
{
    json doc;
    try {
        doc = json::parse(read_file(index_path));
    } catch (const json::parse_error& e) {
        throw FormatError(index_path.string() + ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("frames") || !doc["frames"].is_array()) {
        throw FormatError(index_path.string() + ": mask index needs a \"frames\" array");
    }
    const fs::path base = index_path.parent_path();
    MaskSequence seq;
    for (const auto& frame : doc["frames"]) {
        if (!frame.is_array()) {
            throw FormatError(index_path.string() + ": each frame must be an array of masks");
        }
        std::vector<Mask> masks;
        for (const auto& entry : frame) {
            if (!entry.is_object() || !entry.contains("file") || !entry["file"].is_string()) {
                throw FormatError(index_path.string() + ": mask entry needs a \"file\" string");
            }
            std::string label;
            if (entry.contains("label")) {
                if (!entry["label"].is_string()) {
                    throw FormatError(index_path.string() + ": \"label\" must be a string");
                }
                label = entry["label"].get<std::string>();
            }
            masks.push_back(read_mask_pgm(base / entry["file"].get<std::string>(), std::move(label)));
        }
        seq.push_back(std::move(masks));
    }
    return seq;
}

void write_mask_sequence(const fs::path& index_path, const MaskSequence& seq)
{
    const fs::path base = index_path.parent_path();
    const std::string stem = index_path.stem().string();
    json frames = json::array();
    for (std::size_t f = 0; f < seq.size(); ++f) {
        json entries = json::array();
        for (std::size_t k = 0; k < seq[f].size(); ++k) {
            const std::string name = stem + "_f" + std::to_string(f) + "_m" + std::to_string(k) + ".pgm";
            write_mask_pgm(base / name, seq[f][k]);
            entries.push_back({{"label", seq[f][k].label()}, {"file", name}});
        }
        frames.push_back(std::move(entries));
    }
    write_file(index_path, json{{"frames", std::move(frames)}}.dump());
}

}  // namespace posevid
