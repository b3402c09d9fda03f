#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cwa/model.hpp"

namespace cwa {

enum class ComponentKind { Embedding, AttnHead, AttnLayer, Mlp };

struct ComponentId {
    ComponentKind kind = ComponentKind::Embedding;
    int layer = -1;
    int head = -1;

    static ComponentId embedding() { return {ComponentKind::Embedding, -1, -1}; }
    static ComponentId attn_head(int layer, int head) { return {ComponentKind::AttnHead, layer, head}; }
    static ComponentId attn_layer(int layer) { return {ComponentKind::AttnLayer, layer, -1}; }
    static ComponentId mlp(int layer) { return {ComponentKind::Mlp, layer, -1}; }

    bool operator==(const ComponentId&) const = default;
};

std::string to_string(const ComponentId& id);

// ((gamma ⊙ c) / rho) . W_U[:, token]: the contribution a residual-stream
// vector c makes to one logit under a frozen norm denominator. This is
// the single primitive every DLA value reduces to; it is linear in c.
double frozen_logit_projection(const Tensor& c, const Tensor& gamma, float rho,
                               const Tensor& unembedding, int token);

// Per-step direct contributions to the emitted token's logit. A component
// whose residual-stream output is c contributes
// ((gamma_final ⊙ c) / rho) . W_U[:, token], with rho the frozen
// denominator from the trace. Attention layer values are computed from
// the summed head vectors, so head-sum consistency is a real check, not
// an identity of the code.
struct StepDLA {
    int step = 0;
    int token = 0;
    double embedding = 0.0;
    std::vector<std::vector<double>> attn_head; // [L][H]
    std::vector<double> attn_layer;             // [L]
    std::vector<double> mlp;                    // [L]
    double residual_logit = 0.0;                // logit of `token` from the forward pass

    // Whole-vocabulary contribution vectors, populated only on request;
    // entry `token` of each equals the matching scalar above.
    std::vector<double> embedding_logits;
    std::vector<std::vector<double>> attn_layer_logits; // [L][V]
    std::vector<std::vector<double>> mlp_logits;        // [L][V]

    double contribution(const ComponentId& id) const;

    // embedding + sum over layers of (attn_layer + mlp); equals
    // residual_logit up to float error.
    double component_sum() const;
};

// Throws DomainError when the trace's frozen denominator is not positive.
// With keep_logit_vectors the full vocabulary-sized contribution vectors
// are retained for debugging; the default stores scalars only.
StepDLA dla_step(const ResidualTrace& trace, int token, const Weights& w,
                 bool keep_logit_vectors = false);

// Provenance of one generation inside an experiment; carried through to
// reports.
struct RunMeta {
    std::string experiment;   // e.g. "ENG-IT"
    std::string template_set; // "it_style" | "base_style"
    std::string template_id;  // "a".."d"
    std::string language;     // "en" | "it"
    std::string style;        // "instructional" | "prefix"
    bool matched = true;      // template style agrees with the model variant
    int n_target = 0;
    int repetition = 0;
    std::uint64_t seed = 0;
};

// Sign-weighted, step-count-normalized aggregation of per-step DLA
// scalars: CWA_C = (1/K) * sum_i signs[i] * DLA_{C,i}.
struct CwaReport {
    RunMeta meta;
    int k = 0;
    std::vector<int> signs;
    double embedding = 0.0;
    std::vector<std::vector<double>> attn_head;
    std::vector<double> attn_layer;
    std::vector<double> mlp;

    double contribution(const ComponentId& id) const;
};

// Throws ProtocolError unless signs and step_dlas both have K >= 1
// entries matching the record.
CwaReport compute_cwa(const GenerationRecord& record, std::span<const int> signs,
              std::span<const StepDLA> step_dlas);

// One generation step of the rigged-bias validation.
struct RiggedCheckStep {
    std::size_t prompt = 0;
    int step = 0;
    double measured = 0.0;      // Mlp(l*) DLA in the rigged run
    double injected_term = 0.0; // ((gamma_f ⊙ b) / rho) . W_U[:, t]
    double baseline = 0.0;      // unrigged Mlp(l*) output under the same frozen norm
    double abs_diff = 0.0;      // |measured - injected_term - baseline|
};

struct RiggedCheckReport {
    int layer = 0;
    std::vector<RiggedCheckStep> steps;
    double max_abs_diff = 0.0;

    bool passed(double tol) const { return max_abs_diff <= tol; }
};

// Runs the rigged model over the prompts and verifies, step by step, that
// the rigged layer's Mlp DLA exceeds the unrigged one by exactly the
// closed-form bias term. The unrigged MLP output is obtained by
// teacher-forcing the base weights over the rigged model's tokens; both
// sides are projected through the rigged trace's frozen denominator,
// which is the linearization the closed form itself uses.
RiggedCheckReport rigged_component_check(const Weights& rigged, const Weights& base,
                                         int rig_layer,
                                         std::span<const std::vector<int>> prompts,
                                         const ModelConfig& cfg, const DecodeParams& params,
                                         int eos_id);

} // namespace cwa
