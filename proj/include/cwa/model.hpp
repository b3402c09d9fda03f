#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cwa/tensor.hpp"

namespace cwa {

struct ModelConfig {
    int layers = 0;
    int heads = 0;
    int d_model = 0;
    int d_ff = 0;
    int vocab_size = 0;
    int max_seq = 0;
    float eps = 1e-5f;

    int d_head() const { return d_model / heads; }

    // Throws DimensionError unless heads divide d_model and all sizes
    // are positive.
    void validate() const;

    bool operator==(const ModelConfig&) const = default;
};

struct LayerWeights {
    Tensor gamma_attn;            // [d_model]
    Tensor w_q, w_k, w_v, w_o;    // [d_model, d_model]
    Tensor gamma_mlp;             // [d_model]
    Tensor w_gate, w_up;          // [d_model, d_ff]
    Tensor w_down;                // [d_ff, d_model]
    Tensor b_down;                // [d_model], zero unless rigged
};

struct Weights {
    Tensor token_embedding;       // [V, d_model]
    Tensor position_embedding;    // [max_seq, d_model]
    std::vector<LayerWeights> layers;
    Tensor gamma_final;           // [d_model]
    Tensor unembedding;           // [d_model, V]
};

// Everything a generation step adds to the residual stream at the
// generating position, plus the frozen final-norm denominator that makes
// the per-component logit decomposition exact.
struct ResidualTrace {
    Tensor embedding;                               // token + position, [d_model]
    std::vector<std::vector<Tensor>> attn_head_out; // [L][H], each [d_model]
    std::vector<Tensor> mlp_out;                    // [L], each [d_model]
    Tensor final_residual;                          // h^(L), [d_model]
    float final_norm_denom = 0.0f;                  // sqrt(mean(h^(L)^2) + eps)
    Tensor logits;                                  // [V]
};

enum class DecodeMode { Greedy, TopP };

struct DecodeParams {
    DecodeMode mode = DecodeMode::Greedy;
    float temperature = 1.0f;
    float top_p = 0.9f;
    std::uint64_t seed = 0;
    int max_new_tokens = 32;
};

DecodeMode parse_decode_mode(const std::string& name); // "greedy" | "top-p"
std::string to_string(DecodeMode mode);

struct GenerationRecord {
    std::vector<int> prompt_ids;
    std::vector<int> emitted_ids;          // EOS-terminated or truncated
    std::vector<ResidualTrace> traces;     // one per emitted token
    DecodeParams decode;
    std::uint64_t seed = 0;

    int step_count() const { return static_cast<int>(emitted_ids.size()); }
};

struct ForwardResult {
    Tensor logits;       // last position, [V]
    ResidualTrace trace; // captured at the last position
};

// Full forward pass over the given ids; causal, pre-norm, deterministic.
// Throws CapacityError when the sequence exceeds max_seq and
// VocabularyError on an out-of-range id.
ForwardResult forward(std::span<const int> ids, const Weights& w, const ModelConfig& cfg);

// Logits at every position, [seq, V]. Used by causality checks and
// debugging tools; generation only needs the last row.
Tensor forward_position_logits(std::span<const int> ids, const Weights& w,
                               const ModelConfig& cfg);

// Per-head attention outputs for one layer. `normed` is the block input
// after its rmsnorm, [seq, d_model]. Each returned tensor is that head's
// additive contribution to the residual stream, [seq, d_model]; their sum
// equals the monolithic attention output.
std::vector<Tensor> attention_block(const Tensor& normed, const LayerWeights& lw,
                                    const ModelConfig& cfg);

// Autoregressive decoding. Stops at EOS (id from the caller's vocabulary,
// passed in eos_id) or after max_new_tokens. One trace per emitted token,
// captured at the position whose logits produced it.
GenerationRecord generate(std::span<const int> prompt_ids, const Weights& w,
                          const ModelConfig& cfg, const DecodeParams& params,
                          int eos_id);

} // namespace cwa
