#include "posevid/dit.hpp"

#include "posevid/error.hpp"
#include "posevid/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace posevid {

namespace {

Tensor column_block(const Tensor& m, std::size_t begin, std::size_t width)
{
    Tensor out({m.rows(), width});
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < width; ++c) {
            out.at(r, c) = m.at(r, begin + c);
        }
    }
    return out;
}

void put_column_block(Tensor& m, std::size_t begin, const Tensor& block)
{
    for (std::size_t r = 0; r < block.rows(); ++r) {
        for (std::size_t c = 0; c < block.cols(); ++c) {
            m.at(r, begin + c) = block.at(r, c);
        }
    }
}

void add_row_bias(Tensor& m, const Tensor& bias)
{
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            m.at(r, c) += bias.at(0, c);
        }
    }
}

double gelu(double x)
{
    constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
    return 0.5 * x * (1.0 + std::tanh(k * (x + 0.044715 * x * x * x)));
}

Tensor scaled_normal(Tensor::Shape shape, CounterRng& rng)
{
    const double fan_in = static_cast<double>(shape.front());
    return Tensor::random_normal(std::move(shape), rng, 1.0 / std::sqrt(fan_in));
}

AttentionWeights init_attention(std::size_t d, std::size_t heads, CounterRng& rng)
{
    return {scaled_normal({d, d}, rng), scaled_normal({d, d}, rng), scaled_normal({d, d}, rng),
            scaled_normal({d, d}, rng), heads};
}

template <typename Fn>
void for_each_tensor(DitWeights& w, Fn fn)
{
    fn("patch.projection", w.patch.projection);
    fn("pose_mlp.w1", w.pose_mlp.w1);
    fn("pose_mlp.b1", w.pose_mlp.b1);
    fn("pose_mlp.w2", w.pose_mlp.w2);
    fn("pose_mlp.b2", w.pose_mlp.b2);
    for (std::size_t b = 0; b < w.blocks.size(); ++b) {
        const std::string p = "blocks." + std::to_string(b) + ".";
        auto& bw = w.blocks[b];
        fn(p + "self_attn.wq", bw.self_attn.wq);
        fn(p + "self_attn.wk", bw.self_attn.wk);
        fn(p + "self_attn.wv", bw.self_attn.wv);
        fn(p + "self_attn.wo", bw.self_attn.wo);
        fn(p + "cross_attn.wq", bw.cross_attn.wq);
        fn(p + "cross_attn.wk", bw.cross_attn.wk);
        fn(p + "cross_attn.wv", bw.cross_attn.wv);
        fn(p + "cross_attn.wo", bw.cross_attn.wo);
        fn(p + "ptcm.wq", bw.ptcm.wq);
        fn(p + "ptcm.wk", bw.ptcm.wk);
        fn(p + "ptcm.wv", bw.ptcm.wv);
        fn(p + "ptcm.wo", bw.ptcm.wo);
        fn(p + "ff.w1", bw.ff.w1);
        fn(p + "ff.b1", bw.ff.b1);
        fn(p + "ff.w2", bw.ff.w2);
        fn(p + "ff.b2", bw.ff.b2);
    }
    fn("out_proj", w.out_proj);
    fn("cond", w.cond);
}

}  // namespace

Tensor multi_head_attention(const Tensor& xq, const Tensor& xkv, const AttentionWeights& w, Tensor* head_mean)
{
    const std::size_t d = xq.cols();
    if (w.heads == 0 || d % w.heads != 0) {
        throw DimensionError("attention: width " + std::to_string(d) + " not divisible by " +
                             std::to_string(w.heads) + " heads");
    }
    const Tensor q = matmul(xq, w.wq);
    const Tensor k = matmul(xkv, w.wk);
    const Tensor v = matmul(xkv, w.wv);
    const std::size_t dh = d / w.heads;
    Tensor mixed({xq.rows(), d});
    if (head_mean) {
        *head_mean = Tensor({xq.rows(), xkv.rows()});
    }
    for (std::size_t h = 0; h < w.heads; ++h) {
        AttentionResult r = scaled_dot_attention(column_block(q, h * dh, dh), column_block(k, h * dh, dh),
                                                 column_block(v, h * dh, dh));
        put_column_block(mixed, h * dh, r.out);
        if (head_mean) {
            for (std::size_t i = 0; i < r.weights.size(); ++i) {
                (*head_mean)[i] += r.weights[i];
            }
        }
    }
    if (head_mean) {
        for (auto& x : head_mean->data()) {
            x /= static_cast<double>(w.heads);
        }
    }
    return matmul(mixed, w.wo);
}

Tensor layer_norm_rows(const Tensor& x, double eps)
{
    Tensor out(x.shape());
    const auto n = static_cast<double>(x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double mean = 0.0;
        for (std::size_t c = 0; c < x.cols(); ++c) {
            mean += x.at(r, c);
        }
        mean /= n;
        double var = 0.0;
        for (std::size_t c = 0; c < x.cols(); ++c) {
            const double dlt = x.at(r, c) - mean;
            var += dlt * dlt;
        }
        var /= n;
        const double inv = 1.0 / std::sqrt(var + eps);
        for (std::size_t c = 0; c < x.cols(); ++c) {
            out.at(r, c) = (x.at(r, c) - mean) * inv;
        }
    }
    return out;
}

Tensor feed_forward(const Tensor& x, const FeedForward& ff)
{
    Tensor h = matmul(x, ff.w1);
    add_row_bias(h, ff.b1);
    for (auto& v : h.data()) {
        v = gelu(v);
    }
    Tensor y = matmul(h, ff.w2);
    add_row_bias(y, ff.b2);
    return y;
}

Tensor dit_block_forward(const Tensor& x, const Tensor& cond, const BlockWeights& w, const PtcmVideoInputs* ptcm,
                         Tensor* self_attention_weights)
{
    if (x.rank() != 2 || cond.rank() != 2 || cond.cols() != x.cols()) {
        throw DimensionError("dit block: token and conditioning widths differ");
    }
    Tensor h = x;
    {
        const Tensor n = layer_norm_rows(h);
        h = add(h, multi_head_attention(n, n, w.self_attn, self_attention_weights));
    }
    h = add(h, multi_head_attention(layer_norm_rows(h), cond, w.cross_attn));

    if (ptcm) {
        const std::size_t tpf = ptcm->tokens_per_frame;
        if (tpf == 0 || h.rows() % tpf != 0) {
            throw DimensionError("dit block: token count is not a multiple of tokens_per_frame");
        }
        const std::size_t frames = h.rows() / tpf;
        std::vector<std::size_t> frame0(tpf);
        for (std::size_t t = 0; t < tpf; ++t) {
            frame0[t] = t;
        }
        const Tensor x0 = gather_rows(h, frame0);
        const std::size_t limit = std::min(frames, ptcm->matches.size());
        for (std::size_t f = 1; f < limit; ++f) {
            if (ptcm->matches[f].empty()) {
                continue;
            }
            if (f >= ptcm->parts.size()) {
                throw DomainError("dit block: PTCM matches for frame " + std::to_string(f) + " without parts");
            }
            std::vector<std::size_t> rows(tpf);
            for (std::size_t t = 0; t < tpf; ++t) {
                rows[t] = f * tpf + t;
            }
            const Tensor xi = gather_rows(h, rows);
            const Tensor updated = ptcm_forward(xi, x0, ptcm->parts[f], ptcm->parts_0, ptcm->matches[f], w.ptcm);
            scatter_add_rows(h, rows, subtract(updated, xi));
        }
    }

    h = add(h, feed_forward(layer_norm_rows(h), w.ff));
    return h;
}

const char* to_string(InjectionStrategy s)
{
    switch (s) {
    case InjectionStrategy::channel:
        return "channel";
    case InjectionStrategy::mlp:
        return "mlp";
    case InjectionStrategy::width:
        return "width";
    }
    return "channel";
}

InjectionStrategy injection_from_string(const std::string& s)
{
    if (s == "channel") {
        return InjectionStrategy::channel;
    }
    if (s == "mlp") {
        return InjectionStrategy::mlp;
    }
    if (s == "width") {
        return InjectionStrategy::width;
    }
    throw FormatError("unknown injection strategy \"" + s + "\" (expected channel, mlp or width)");
}

void DitConfig::validate() const
{
    if (latent_channels == 0 || width == 0 || blocks == 0 || heads == 0 || ff_hidden == 0 || pose_hidden == 0 ||
        cond_tokens == 0) {
        throw DomainError("dit config: sizes must be >= 1");
    }
    if (patch_f == 0 || patch_h == 0 || patch_w == 0) {
        throw DomainError("dit config: patch sizes must be >= 1");
    }
    if (width % heads != 0) {
        throw DomainError("dit config: width must be divisible by heads");
    }
    for (auto b : ptcm_blocks) {
        if (b >= blocks) {
            throw DomainError("dit config: PTCM block " + std::to_string(b) + " beyond model depth");
        }
    }
}

std::size_t DitConfig::input_channels() const
{
    return strategy == InjectionStrategy::channel ? 2 * latent_channels : latent_channels;
}

bool DitConfig::ptcm_in_block(std::size_t block) const
{
    return ptcm_blocks.empty() || std::find(ptcm_blocks.begin(), ptcm_blocks.end(), block) != ptcm_blocks.end();
}

json to_json(const DitConfig& c)
{
    return {{"latent_channels", c.latent_channels},
            {"d", c.width},
            {"blocks", c.blocks},
            {"heads", c.heads},
            {"ff_hidden", c.ff_hidden},
            {"pose_hidden", c.pose_hidden},
            {"patch", {c.patch_f, c.patch_h, c.patch_w}},
            {"cond_tokens", c.cond_tokens},
            {"injection", to_string(c.strategy)},
            {"ptcm_blocks", c.ptcm_blocks}};
}

DitConfig dit_config_from_json(const json& j)
{
    if (!j.is_object()) {
        throw FormatError("model config must be a JSON object");
    }
    DitConfig c;
    try {
        c.latent_channels = j.value("latent_channels", c.latent_channels);
        c.width = j.value("d", c.width);
        c.blocks = j.value("blocks", c.blocks);
        c.heads = j.value("heads", c.heads);
        c.ff_hidden = j.value("ff_hidden", c.ff_hidden);
        c.pose_hidden = j.value("pose_hidden", c.pose_hidden);
        c.cond_tokens = j.value("cond_tokens", c.cond_tokens);
        if (j.contains("patch")) {
            const auto p = j.at("patch").get<std::vector<std::size_t>>();
            if (p.size() != 3) {
                throw FormatError("\"patch\" must list [f, h, w]");
            }
            c.patch_f = p[0];
            c.patch_h = p[1];
            c.patch_w = p[2];
        }
        if (j.contains("injection")) {
            c.strategy = injection_from_string(j.at("injection").get<std::string>());
        }
        if (j.contains("ptcm_blocks") && !j.at("ptcm_blocks").is_string()) {
            c.ptcm_blocks = j.at("ptcm_blocks").get<std::vector<std::size_t>>();
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("model config: ") + e.what());
    }
    c.validate();
    return c;
}

DitWeights init_dit_weights(const DitConfig& cfg, std::uint64_t seed)
{
    cfg.validate();
    CounterRng rng(seed, 0x5EED'D17ull);
    const std::size_t d = cfg.width;
    const std::size_t vol = cfg.patch_f * cfg.patch_h * cfg.patch_w;
    DitWeights w;
    w.patch.patch_f = cfg.patch_f;
    w.patch.patch_h = cfg.patch_h;
    w.patch.patch_w = cfg.patch_w;
    w.patch.projection = scaled_normal({vol * cfg.input_channels(), d}, rng);
    w.pose_mlp = {scaled_normal({cfg.latent_channels, cfg.pose_hidden}, rng), Tensor({1, cfg.pose_hidden}),
                  scaled_normal({cfg.pose_hidden, cfg.latent_channels}, rng), Tensor({1, cfg.latent_channels})};
    for (std::size_t b = 0; b < cfg.blocks; ++b) {
        BlockWeights bw;
        bw.self_attn = init_attention(d, cfg.heads, rng);
        bw.cross_attn = init_attention(d, cfg.heads, rng);
        bw.ptcm = {scaled_normal({d, d}, rng), scaled_normal({d, d}, rng), scaled_normal({d, d}, rng),
                   scaled_normal({d, d}, rng)};
        bw.ff = {scaled_normal({d, cfg.ff_hidden}, rng), Tensor({1, cfg.ff_hidden}),
                 scaled_normal({cfg.ff_hidden, d}, rng), Tensor({1, d})};
        w.blocks.push_back(std::move(bw));
    }
    w.out_proj = scaled_normal({d, vol * cfg.latent_channels}, rng);
    w.cond = Tensor::random_normal({cfg.cond_tokens, d}, rng);
    return w;
}

void zero_residual_outputs(DitWeights& w)
{
    for (auto& b : w.blocks) {
        b.self_attn.wo = Tensor(b.self_attn.wo.shape());
        b.cross_attn.wo = Tensor(b.cross_attn.wo.shape());
        b.ptcm.wo = Tensor(b.ptcm.wo.shape());
        b.ff.w2 = Tensor(b.ff.w2.shape());
        b.ff.b2 = Tensor(b.ff.b2.shape());
    }
}

bool AttentionTrace::wants(std::size_t block, double timestep) const
{
    return (!block_ || *block_ == block) && timestep > min_timestep_;
}

Tensor timestep_embedding(double timestep, std::size_t d)
{
    Tensor e({1, d});
    for (std::size_t i = 0; i < d; ++i) {
        const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(d));
        e.at(0, i) = (i % 2 == 0) ? std::sin(timestep * freq) : std::cos(timestep * freq);
    }
    return e;
}

ToyDit::ToyDit(DitConfig cfg, DitWeights weights) : cfg_(std::move(cfg)), w_(std::move(weights))
{
    cfg_.validate();
    if (w_.blocks.size() != cfg_.blocks) {
        throw DimensionError("toy dit: weight blocks do not match config");
    }
    const std::size_t vol = cfg_.patch_f * cfg_.patch_h * cfg_.patch_w;
    if (w_.patch.projection.rows() != vol * cfg_.input_channels() || w_.patch.projection.cols() != cfg_.width ||
        w_.out_proj.rows() != cfg_.width || w_.out_proj.cols() != vol * cfg_.latent_channels ||
        w_.cond.cols() != cfg_.width) {
        throw DimensionError("toy dit: weight shapes do not match config");
    }
    for (auto& b : w_.blocks) {
        b.self_attn.heads = cfg_.heads;
        b.cross_attn.heads = cfg_.heads;
    }
}

VideoLatent ToyDit::aggregate(const VideoLatent& base, const VideoLatent& pose) const
{
    switch (cfg_.strategy) {
    case InjectionStrategy::channel:
        return inject_channel_concat(base, pose);
    case InjectionStrategy::mlp:
        return inject_mlp_add(base, pose, w_.pose_mlp);
    case InjectionStrategy::width:
        return inject_width_concat(base, pose);
    }
    return base;
}

TokenGrid ToyDit::embed(const VideoLatent& base, const VideoLatent& pose, double timestep) const
{
    TokenGrid grid = patchify(aggregate(base, pose), w_.patch);
    const Tensor e = timestep_embedding(timestep, cfg_.width);
    for (std::size_t r = 0; r < grid.tokens.rows(); ++r) {
        for (std::size_t c = 0; c < grid.tokens.cols(); ++c) {
            grid.tokens.at(r, c) += e.at(0, c);
        }
    }
    return grid;
}

VideoLatent ToyDit::predict(const VideoLatent& noisy, const VideoLatent& reference, const VideoLatent& pose,
                            double timestep, const PtcmVideoInputs* ptcm, AttentionTrace* trace) const
{
    if (noisy.channels() != cfg_.latent_channels || reference.frames() != 1) {
        throw DimensionError("toy dit: expected " + std::to_string(cfg_.latent_channels) +
                             "-channel latents and a single reference frame");
    }
    if (pose.frames() != noisy.frames()) {
        throw DimensionError("toy dit: pose latent needs one frame per generated frame");
    }
    const VideoLatent base = concat_frames(reference, noisy);
    TokenGrid grid = embed(base, align_pose_latent(pose), timestep);
    if (ptcm && ptcm->tokens_per_frame != grid.tokens_per_frame()) {
        throw DimensionError("toy dit: PTCM layout expects " + std::to_string(ptcm->tokens_per_frame) +
                             " tokens per frame, model produces " + std::to_string(grid.tokens_per_frame()));
    }
    Tensor x = std::move(grid.tokens);
    for (std::size_t b = 0; b < cfg_.blocks; ++b) {
        const bool record = trace && trace->wants(b, timestep);
        Tensor attn;
        x = dit_block_forward(x, w_.cond, w_.blocks[b], cfg_.ptcm_in_block(b) ? ptcm : nullptr,
                              record ? &attn : nullptr);
        if (record) {
            trace->add({b, timestep, cfg_.heads, std::move(attn)});
        }
    }
    const std::size_t agg_width = cfg_.strategy == InjectionStrategy::width ? 2 * base.width() : base.width();
    VideoLatent out = fold_patches(matmul(x, w_.out_proj), cfg_.patch_f, cfg_.patch_h, cfg_.patch_w,
                                   cfg_.latent_channels, base.frames(), base.height(), agg_width);
    if (cfg_.strategy == InjectionStrategy::width) {
        out = slice_width(out, 0, base.width());
    }
    return slice_frames(out, 1, out.frames());
}

void save_checkpoint(const fs::path& dir, const DitConfig& cfg, const DitWeights& w)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create checkpoint directory " + dir.string());
    }
    DitWeights copy = w;
    json index = json::object();
    for_each_tensor(copy, [&](const std::string& name, Tensor& t) {
        const std::string file = name + ".patn";
        write_patn(dir / file, t);
        index[name] = file;
    });
    write_file(dir / "index.json", index.dump(2));
    write_file(dir / "config.json", to_json(cfg).dump(2));
}

std::pair<DitConfig, DitWeights> load_checkpoint(const fs::path& dir)
{
    json cfg_doc, index;
    try {
        cfg_doc = json::parse(read_file(dir / "config.json"));
        index = json::parse(read_file(dir / "index.json"));
    } catch (const json::parse_error& e) {
        throw FormatError("checkpoint " + dir.string() + ": " + e.what());
    }
    DitConfig cfg = dit_config_from_json(cfg_doc);
    DitWeights w;
    w.blocks.resize(cfg.blocks);
    w.patch.patch_f = cfg.patch_f;
    w.patch.patch_h = cfg.patch_h;
    w.patch.patch_w = cfg.patch_w;
    for_each_tensor(w, [&](const std::string& name, Tensor& t) {
        if (!index.contains(name) || !index[name].is_string()) {
            throw FormatError("checkpoint index lacks tensor \"" + name + "\"");
        }
        t = read_patn(dir / index[name].get<std::string>());
    });
    for (auto& b : w.blocks) {
        b.self_attn.heads = cfg.heads;
        b.cross_attn.heads = cfg.heads;
    }
    return {cfg, w};
}

}  // namespace posevid
