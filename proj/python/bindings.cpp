#include "posevid/curation.hpp"
#include "posevid/error.hpp"
#include "posevid/gradcheck.hpp"
#include "posevid/guidance.hpp"
#include "posevid/io.hpp"
#include "posevid/mask.hpp"
#include "posevid/matching.hpp"
#include "posevid/metrics.hpp"
#include "posevid/rng.hpp"
#include "posevid/sampler.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace posevid;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using ByteArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const DoubleArray& a)
{
    Tensor::Shape shape(a.shape(), a.shape() + a.ndim());
    if (shape.empty()) {
        shape = {1};
    }
    return Tensor(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

DoubleArray to_array(const Tensor& t)
{
    DoubleArray out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
    std::copy(t.values().begin(), t.values().end(), out.mutable_data());
    return out;
}

Mask to_mask(const ByteArray& a)
{
    if (a.ndim() != 2) {
        throw DimensionError("mask arrays must be 2-D");
    }
    std::vector<std::uint8_t> bits(a.data(), a.data() + a.size());
    for (auto& b : bits) {
        b = b != 0;
    }
    return Mask(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)), std::move(bits));
}

ByteArray to_array(const Mask& m)
{
    ByteArray out({static_cast<py::ssize_t>(m.height()), static_cast<py::ssize_t>(m.width())});
    std::copy(m.bits().begin(), m.bits().end(), out.mutable_data());
    return out;
}

Frame to_frame(const DoubleArray& a, double max_value)
{
    if (a.ndim() != 2) {
        throw DimensionError("frames must be 2-D arrays");
    }
    Frame f;
    f.height = static_cast<std::size_t>(a.shape(0));
    f.width = static_cast<std::size_t>(a.shape(1));
    f.max_value = max_value;
    f.pixels.assign(a.data(), a.data() + a.size());
    return f;
}

StructuringElement element_from(const std::string& s)
{
    if (s == "square") {
        return StructuringElement::square;
    }
    if (s == "disk") {
        return StructuringElement::disk;
    }
    throw DomainError("element must be \"square\" or \"disk\"");
}

SkeletonSegment segment_from(const std::vector<std::pair<int, int>>& points)
{
    SkeletonSegment s;
    for (const auto& [r, c] : points) {
        s.points.push_back({r, c});
    }
    return s;
}

py::object json_to_py(const json& j)
{
    return py::module_::import("json").attr("loads")(j.dump());
}

json py_to_json(const py::object& o)
{
    return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

}  // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Pose-guided video diffusion mechanisms";

    auto base = py::register_exception<Error>(m, "Error");
    py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
    py::register_exception<DomainError>(m, "DomainError", base.ptr());
    py::register_exception<EvaluationError>(m, "EvaluationError", base.ptr());
    py::register_exception<FormatError>(m, "FormatError", base.ptr());
    py::register_exception<IoError>(m, "IoError", base.ptr());
    py::register_exception<PolicyError>(m, "PolicyError", base.ptr());

    m.def(
        "cfg_paired",
        [](const DoubleArray& pos, const DoubleArray& neg, double s) {
            return to_array(cfg_paired(to_tensor(pos), to_tensor(neg), s));
        },
        py::arg("eps_pos"), py::arg("eps_neg"), py::arg("s"));
    m.def(
        "cfg_decoupled",
        [](const DoubleArray& b, const DoubleArray& subj, const DoubleArray& cam, double s_s, double s_c) {
            return to_array(cfg_decoupled(to_tensor(b), to_tensor(subj), to_tensor(cam), s_s, s_c));
        },
        py::arg("eps_base"), py::arg("eps_subject"), py::arg("eps_camera"), py::arg("s_s"), py::arg("s_c"));

    m.def(
        "iou", [](const ByteArray& a, const ByteArray& b) { return iou(to_mask(a), to_mask(b)); }, py::arg("a"),
        py::arg("b"));
    m.def(
        "dilate",
        [](const ByteArray& a, int alpha, const std::string& element) {
            PartMaskConfig cfg;
            cfg.element = element_from(element);
            return to_array(dilate(to_mask(a), alpha, cfg));
        },
        py::arg("mask"), py::arg("alpha"), py::arg("element") = "square");
    m.def(
        "adaptive_dilation_radius",
        [](const std::vector<std::pair<int, int>>& points, const ByteArray& body, double tau, int cap,
           const std::string& element) {
            PartMaskConfig cfg;
            cfg.coverage_tau = tau;
            cfg.alpha_cap = cap;
            cfg.element = element_from(element);
            return adaptive_dilation_radius(segment_from(points), to_mask(body), cfg);
        },
        py::arg("points"), py::arg("body"), py::arg("tau") = 1.0, py::arg("cap") = 100,
        py::arg("element") = "square");

    m.def(
        "sparse_pose_mask",
        [](std::size_t total_frames, std::uint64_t seed) {
            CounterRng rng(seed);
            const SparseDraw d = sparse_pose_mask(total_frames, SparsePolicy{}, rng);
            py::dict out;
            out["bucket"] = d.bucket;
            out["scheme"] = to_string(d.scheme);
            out["keep_count"] = d.keep_count;
            out["indices"] = d.indices;
            return out;
        },
        py::arg("total_frames"), py::arg("seed"));

    m.def(
        "match_parts",
        [](const DoubleArray& attn, const PartTokens& parts0, const PartTokens& parts_i) {
            std::vector<std::tuple<std::size_t, std::size_t, double>> out;
            for (const auto& p : match_parts(attention_map_from_weights(to_tensor(attn)), parts0, parts_i)) {
                out.emplace_back(p.j, p.j_prime, p.confidence);
            }
            return out;
        },
        py::arg("attention"), py::arg("parts0"), py::arg("parts_i"));

    m.def(
        "psnr",
        [](const DoubleArray& p, const DoubleArray& r, double max_value) {
            return psnr({to_frame(p, max_value), to_frame(r, max_value)});
        },
        py::arg("pred"), py::arg("ref"), py::arg("max_value") = 255.0);
    m.def(
        "ssim",
        [](const DoubleArray& p, const DoubleArray& r, double max_value, std::size_t window) {
            return ssim({to_frame(p, max_value), to_frame(r, max_value)}, window);
        },
        py::arg("pred"), py::arg("ref"), py::arg("max_value") = 255.0, py::arg("window") = 11);
    m.def(
        "l1",
        [](const DoubleArray& p, const DoubleArray& r, double max_value) {
            return l1({to_frame(p, max_value), to_frame(r, max_value)});
        },
        py::arg("pred"), py::arg("ref"), py::arg("max_value") = 255.0);

    m.def(
        "ptcm_gradcheck",
        [](std::uint64_t seed) {
            const GradcheckResult r = ptcm_gradcheck(seed);
            py::dict out;
            out["wq"] = r.wq;
            out["wk"] = r.wk;
            out["wv"] = r.wv;
            out["wo"] = r.wo;
            out["x"] = r.x;
            out["x0"] = r.x0;
            out["worst"] = r.worst();
            return out;
        },
        py::arg("seed"));

    m.def(
        "sample",
        [](const py::dict& config, std::uint64_t seed, const std::string& base_dir) {
            const SampleConfig cfg = sample_config_from_json(py_to_json(config), base_dir);
            SampleResult r;
            {
                py::gil_scoped_release release;
                r = run_sample(cfg, seed);
            }
            return py::make_tuple(to_array(r.latent.tensor()), json_to_py(to_json(r.assignment)));
        },
        py::arg("config"), py::arg("seed"), py::arg("base_dir") = ".");

    m.def(
        "curate",
        [](const std::string& manifest, const std::string& out, const std::vector<std::string>& require,
           const std::vector<std::string>& forbid, std::uint64_t seed) {
            curation::CurationConfig cfg;
            cfg.required_tags = require;
            cfg.forbidden_tags = forbid;
            const fs::path path(manifest);
            const auto records = curation::read_records_jsonl(path);
            const auto result = curation::run_pipeline(records, cfg, curation::FileVideoSource(path.parent_path()));
            curation::write_decisions_jsonl(out, result.decisions, seed);
            return json_to_py(curation::to_json(result.summary));
        },
        py::arg("manifest"), py::arg("out"), py::arg("require_tags") = std::vector<std::string>{},
        py::arg("forbid_tags") = std::vector<std::string>{}, py::arg("seed") = 0);

    m.def(
        "read_patn", [](const std::string& path) { return to_array(read_patn(path)); }, py::arg("path"));
    m.def(
        "write_patn", [](const std::string& path, const DoubleArray& a) { write_patn(path, to_tensor(a)); },
        py::arg("path"), py::arg("array"));
}
