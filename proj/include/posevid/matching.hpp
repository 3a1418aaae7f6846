#pragma once

#include "posevid/dit.hpp"
#include "posevid/io.hpp"
#include "posevid/ptcm.hpp"
#include "posevid/tensor.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace posevid {

struct AttentionMap {
    Tensor weights;  // n_q × n_k, rows sum to one
    std::size_t query_frame = 0;
    std::size_t key_frame = 0;
    std::size_t block = 0;
    double timestep = 0.0;
    bool head_averaged = true;
};

// Elementwise mean of per-head weight matrices of equal shape.
Tensor average_heads(std::span<const Tensor> heads);

enum class TimestepReduction { first, mean };

struct MatchPolicy {
    std::size_t block = 27;
    double timestep_threshold = 975.0;  // strictly greater qualifies
    TimestepReduction reduction = TimestepReduction::first;

    // Deepest block and the first 5% of a 1000-step schedule.
    static MatchPolicy for_model(std::size_t depth);
    void validate(std::size_t depth) const;
};

// Head-averaged attention between the tokens of `query_frame` and
// `key_frame`, taken from the recorded block at qualifying timesteps. Rows
// are renormalised after restricting the columns to the key frame.
AttentionMap extract_attention(const AttentionTrace& trace, const MatchPolicy& policy, std::size_t tokens_per_frame,
                               std::size_t query_frame, std::size_t key_frame);

// Row-normalises a raw matrix into an attention map (rows must have positive sums).
AttentionMap attention_map_from_weights(Tensor weights);

double mean_mask_attention(const AttentionMap& attn, std::span<const std::size_t> q_tokens,
                           std::span<const std::size_t> k_tokens);

// For every first-frame part j, the frame-i part with the largest mean
// attention. Ties go to the lowest index; the mapping need not be injective.
std::vector<PartMatch> match_parts(const AttentionMap& attn, const PartTokens& parts0, const PartTokens& parts_i);

struct FrameAssignment {
    std::size_t frame = 0;
    std::vector<PartMatch> matches;
};

struct PartAssignment {
    std::uint64_t seed = 0;
    std::vector<FrameAssignment> frames;
};

json to_json(const PartAssignment& a);
PartAssignment assignment_from_json(const json& doc);

PartTokens part_tokens_from_json(const json& doc);
json part_tokens_to_json(const PartTokens& parts);

}  // namespace posevid
