#pragma once

#include "posevid/io.hpp"
#include "posevid/latent.hpp"
#include "posevid/ptcm.hpp"
#include "posevid/tensor.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace posevid {

struct AttentionWeights {
    Tensor wq, wk, wv, wo;  // d × d
    std::size_t heads = 1;
};

// Multi-head attention with head h using columns [h*d/H, (h+1)*d/H) of the
// projections. When `head_mean` is given it receives the head-averaged weights.
Tensor multi_head_attention(const Tensor& xq, const Tensor& xkv, const AttentionWeights& w,
                            Tensor* head_mean = nullptr);

// Per-row normalisation to zero mean and unit variance, without affine parameters.
Tensor layer_norm_rows(const Tensor& x, double eps = 1e-6);

struct FeedForward {
    Tensor w1, b1;  // d × hidden, 1 × hidden
    Tensor w2, b2;  // hidden × d, 1 × d
};

Tensor feed_forward(const Tensor& x, const FeedForward& ff);

struct BlockWeights {
    AttentionWeights self_attn;
    AttentionWeights cross_attn;
    PtcmWeights ptcm;
    FeedForward ff;
};

// Per-video part layout for the PTCM residual. Token frame 0 is the anchor;
// every later token frame i pairs with it through matches[i].
struct PtcmVideoInputs {
    std::size_t tokens_per_frame = 0;
    PartTokens parts_0;
    std::vector<PartTokens> parts;                 // indexed by token frame
    std::vector<std::vector<PartMatch>> matches;   // indexed by token frame
};

// Pre-norm block: self-attention, cross-attention to the conditioning
// tokens, PTCM (when inputs are given), then the feed-forward network, each
// as a residual. The PTCM branch uses the un-normalised tokens.
Tensor dit_block_forward(const Tensor& x, const Tensor& cond, const BlockWeights& w,
                         const PtcmVideoInputs* ptcm = nullptr, Tensor* self_attention_weights = nullptr);

enum class InjectionStrategy { channel, mlp, width };

const char* to_string(InjectionStrategy s);
InjectionStrategy injection_from_string(const std::string& s);

struct DitConfig {
    std::size_t latent_channels = 4;
    std::size_t width = 16;
    std::size_t blocks = 2;
    std::size_t heads = 2;
    std::size_t ff_hidden = 32;
    std::size_t pose_hidden = 8;
    std::size_t patch_f = 1;
    std::size_t patch_h = 2;
    std::size_t patch_w = 2;
    std::size_t cond_tokens = 1;
    InjectionStrategy strategy = InjectionStrategy::channel;
    // Blocks that run PTCM; empty means every block.
    std::vector<std::size_t> ptcm_blocks;

    void validate() const;
    std::size_t input_channels() const;
    bool ptcm_in_block(std::size_t block) const;
};

json to_json(const DitConfig& c);
DitConfig dit_config_from_json(const json& j);

struct DitWeights {
    PatchifyConfig patch;
    MlpWeights pose_mlp;
    std::vector<BlockWeights> blocks;
    Tensor out_proj;  // d × (patch volume * C)
    Tensor cond;      // cond_tokens × d, stands in for the text encoder output
};

// Gaussian initialisation scaled by 1/sqrt(fan_in).
DitWeights init_dit_weights(const DitConfig& cfg, std::uint64_t seed);

// Sets every residual output projection to zero so each block is the identity.
void zero_residual_outputs(DitWeights& w);

struct AttentionRecord {
    std::size_t block = 0;
    double timestep = 0.0;
    std::size_t heads = 1;
    Tensor weights;  // head-averaged self-attention, n × n
};

// Collects self-attention maps from selected blocks during forward passes.
class AttentionTrace {
public:
    AttentionTrace() = default;
    AttentionTrace(std::optional<std::size_t> block, double min_timestep)
        : block_(block), min_timestep_(min_timestep)
    {
    }

    bool wants(std::size_t block, double timestep) const;
    void add(AttentionRecord rec) { records_.push_back(std::move(rec)); }
    const std::vector<AttentionRecord>& records() const { return records_; }

private:
    std::optional<std::size_t> block_;
    double min_timestep_ = -std::numeric_limits<double>::infinity();
    std::vector<AttentionRecord> records_;
};

// Sinusoidal timestep features of width d.
Tensor timestep_embedding(double timestep, std::size_t d);

class ToyDit {
public:
    ToyDit(DitConfig cfg, DitWeights weights);

    const DitConfig& config() const { return cfg_; }
    const DitWeights& weights() const { return w_; }

    // Aggregated latent for the configured injection strategy.
    VideoLatent aggregate(const VideoLatent& base, const VideoLatent& pose) const;

    // Tokens entering the first block: patchified aggregate plus the timestep embedding.
    TokenGrid embed(const VideoLatent& base, const VideoLatent& pose, double timestep) const;

    // Noise prediction for the generated frames. `noisy` holds the generated
    // frames, `reference` the single encoded reference frame, and `pose` one
    // pose frame per generated frame (zeros for the unconditioned anchor).
    VideoLatent predict(const VideoLatent& noisy, const VideoLatent& reference, const VideoLatent& pose,
                        double timestep, const PtcmVideoInputs* ptcm = nullptr, AttentionTrace* trace = nullptr) const;

private:
    DitConfig cfg_;
    DitWeights w_;
};

// Checkpoint directory: config.json, index.json (tensor name -> file) and one PATN file per tensor.
void save_checkpoint(const fs::path& dir, const DitConfig& cfg, const DitWeights& w);
std::pair<DitConfig, DitWeights> load_checkpoint(const fs::path& dir);

}  // namespace posevid
