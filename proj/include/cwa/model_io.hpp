#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cwa/model.hpp"
#include "cwa/tokenizer.hpp"

namespace cwa {

// Model container format, version 1. Little-endian throughout.
//
//   magic   "CWAM" (4 bytes)
//   version u32 = 1
//   L, H, d_model, d_ff, V, max_seq   u32 each
//   eps     f32
//   vocab count u32, then per entry: u16 byte length + bytes (id = order)
//   payload: f32 tensors, row-major, in fixed order:
//     W_E, P, per layer (gamma_attn, W_Q, W_K, W_V, W_O, gamma_mlp,
//     W_gate, W_up, W_down, b_down), gamma_final, W_U
//
// save/load round-trip bit-exactly. Bad magic or version raises
// FormatError; a payload whose byte count disagrees with the header
// raises CorruptionError naming the offset where data ran out.

struct LoadedModel {
    Weights weights;
    ModelConfig config;
    Vocabulary vocab;
};

void save_model(const Weights& w, const ModelConfig& cfg, const Vocabulary& vocab,
                const std::string& path);
LoadedModel load_model(const std::string& path);

// Subword entries used by the reference vocabulary: common English and
// Italian fragments, some of them deliberately partial so that single
// words span several tokens.
const std::vector<std::string>& reference_subwords();

// Byte fallback + BOS/EOS + reference_subwords() (or the given extras).
Vocabulary reference_vocabulary();
Vocabulary reference_vocabulary(const std::vector<std::string>& subwords);

// Deterministic weight initialization: projection and embedding entries
// drawn from an approximate normal(0, 0.02) on a xoshiro256++ stream
// seeded from `seed`, gammas set to one, b_down to zero. Tensors are
// filled in file order, so equal seeds give byte-identical models.
Weights make_reference_weights(std::uint64_t seed, const ModelConfig& cfg);

// Bias recipe for a rigged model: b_down at `layer` becomes
// scale * W_U[:, token] / ||W_U[:, token]||.
struct RigSpec {
    int layer = 0;
    int token = 0;
    float scale = 0.0f;
};

// Copy of `base` with the rig's bias injected; everything else is
// untouched. Throws DomainError on a bad layer index.
Weights make_rigged_model(const Weights& base, const RigSpec& rig);
Weights make_rigged_model(const Weights& base, int layer, const Tensor& bias);

} // namespace cwa
