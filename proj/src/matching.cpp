#include "posevid/matching.hpp"

#include "posevid/error.hpp"

namespace posevid {

Tensor average_heads(std::span<const Tensor> heads)
{
    if (heads.empty()) {
        throw DimensionError("average_heads: no heads");
    }
    Tensor out(heads.front().shape());
    for (const auto& h : heads) {
        if (h.shape() != out.shape()) {
            throw DimensionError("average_heads: head shapes differ");
        }
        for (std::size_t i = 0; i < h.size(); ++i) {
            out[i] += h[i];
        }
    }
    return scale(out, 1.0 / static_cast<double>(heads.size()));
}

MatchPolicy MatchPolicy::for_model(std::size_t depth)
{
    if (depth == 0) {
        throw PolicyError("match policy: model has no blocks");
    }
    MatchPolicy p;
    p.block = depth - 1;
    p.timestep_threshold = 950.0;
    return p;
}

void MatchPolicy::validate(std::size_t depth) const
{
    if (block >= depth) {
        throw PolicyError("match policy: block " + std::to_string(block) + " beyond model depth " +
                          std::to_string(depth));
    }
    if (!(timestep_threshold >= 0.0 && timestep_threshold < 1000.0)) {
        throw PolicyError("match policy: timestep threshold outside [0, 1000)");
    }
}

namespace {

void normalise_rows(Tensor& w)
{
    for (std::size_t r = 0; r < w.rows(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < w.cols(); ++c) {
            if (w.at(r, c) < 0.0) {
                throw DomainError("attention weights must be nonnegative");
            }
            s += w.at(r, c);
        }
        if (!(s > 0.0)) {
            throw DomainError("attention row " + std::to_string(r) + " has no mass");
        }
        for (std::size_t c = 0; c < w.cols(); ++c) {
            w.at(r, c) /= s;
        }
    }
}

}  // namespace

AttentionMap attention_map_from_weights(Tensor weights)
{
    if (weights.rank() != 2) {
        throw DimensionError("attention map must be a matrix, got " + shape_string(weights.shape()));
    }
    require_finite(weights, "attention map");
    normalise_rows(weights);
    AttentionMap m;
    m.weights = std::move(weights);
    return m;
}

AttentionMap extract_attention(const AttentionTrace& trace, const MatchPolicy& policy, std::size_t tokens_per_frame,
                               std::size_t query_frame, std::size_t key_frame)
{
    if (tokens_per_frame == 0) {
        throw DomainError("extract_attention: tokens_per_frame must be >= 1");
    }
    std::vector<const AttentionRecord*> hits;
    for (const auto& rec : trace.records()) {
        if (rec.block == policy.block && rec.timestep > policy.timestep_threshold) {
            hits.push_back(&rec);
            if (policy.reduction == TimestepReduction::first) {
                break;
            }
        }
    }
    if (hits.empty()) {
        throw PolicyError("extract_attention: no recorded pass at block " + std::to_string(policy.block) +
                          " with timestep > " + std::to_string(policy.timestep_threshold));
    }
    const std::size_t n = hits.front()->weights.rows();
    if ((query_frame + 1) * tokens_per_frame > n || (key_frame + 1) * tokens_per_frame > n) {
        throw DimensionError("extract_attention: frame beyond the recorded token sequence");
    }
    Tensor w({tokens_per_frame, tokens_per_frame});
    for (const auto* rec : hits) {
        for (std::size_t r = 0; r < tokens_per_frame; ++r) {
            for (std::size_t c = 0; c < tokens_per_frame; ++c) {
                w.at(r, c) += rec->weights.at(query_frame * tokens_per_frame + r, key_frame * tokens_per_frame + c);
            }
        }
    }
    normalise_rows(w);
    AttentionMap m;
    m.weights = std::move(w);
    m.query_frame = query_frame;
    m.key_frame = key_frame;
    m.block = policy.block;
    m.timestep = hits.front()->timestep;
    return m;
}

double mean_mask_attention(const AttentionMap& attn, std::span<const std::size_t> q_tokens,
                           std::span<const std::size_t> k_tokens)
{
    if (q_tokens.empty() || k_tokens.empty()) {
        throw DomainError("mean_mask_attention: empty token set");
    }
    double s = 0.0;
    for (auto q : q_tokens) {
        if (q >= attn.weights.rows()) {
            throw DomainError("mean_mask_attention: query token " + std::to_string(q) + " out of range");
        }
        for (auto k : k_tokens) {
            if (k >= attn.weights.cols()) {
                throw DomainError("mean_mask_attention: key token " + std::to_string(k) + " out of range");
            }
            s += attn.weights.at(q, k);
        }
    }
    return s / static_cast<double>(q_tokens.size() * k_tokens.size());
}

std::vector<PartMatch> match_parts(const AttentionMap& attn, const PartTokens& parts0, const PartTokens& parts_i)
{
    if (parts0.empty() || parts_i.empty()) {
        throw DomainError("match_parts: empty part list");
    }
    std::vector<PartMatch> out;
    out.reserve(parts0.size());
    for (std::size_t j = 0; j < parts0.size(); ++j) {
        PartMatch best{j, 0, -1.0};
        for (std::size_t t = 0; t < parts_i.size(); ++t) {
            const double v = mean_mask_attention(attn, parts0[j], parts_i[t]);
            if (v > best.confidence) {
                best.j_prime = t;
                best.confidence = v;
            }
        }
        out.push_back(best);
    }
    return out;
}

json to_json(const PartAssignment& a)
{
    json frames = json::array();
    for (const auto& f : a.frames) {
        json matches = json::array();
        for (const auto& m : f.matches) {
            matches.push_back({{"j", m.j}, {"j_prime", m.j_prime}, {"confidence", m.confidence}});
        }
        frames.push_back({{"frame", f.frame}, {"matches", std::move(matches)}});
    }
    return {{"seed", a.seed}, {"frames", std::move(frames)}};
}

PartAssignment assignment_from_json(const json& doc)
{
    PartAssignment a;
    try {
        a.seed = doc.value("seed", std::uint64_t{0});
        for (const auto& f : doc.at("frames")) {
            FrameAssignment fa;
            fa.frame = f.at("frame").get<std::size_t>();
            for (const auto& m : f.at("matches")) {
                fa.matches.push_back(
                    {m.at("j").get<std::size_t>(), m.at("j_prime").get<std::size_t>(), m.at("confidence").get<double>()});
            }
            a.frames.push_back(std::move(fa));
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("assignment: ") + e.what());
    }
    return a;
}

PartTokens part_tokens_from_json(const json& doc)
{
    try {
        return doc.get<PartTokens>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("part token sets must be an array of index arrays: ") + e.what());
    }
}

json part_tokens_to_json(const PartTokens& parts)
{
    return json(parts);
}

}  // namespace posevid
