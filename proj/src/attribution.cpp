#include "cwa/attribution.hpp"

#include <cmath>

#include "cwa/errors.hpp"

namespace cwa {

double frozen_logit_projection(const Tensor& c, const Tensor& gamma, float rho,
                               const Tensor& unembedding, int token) {
    const std::int64_t d = c.dim(0);
    const std::int64_t v = unembedding.dim(1);
    double acc = 0.0;
    for (std::int64_t j = 0; j < d; ++j) {
        const double normed = static_cast<double>(gamma[j]) * static_cast<double>(c[j]) /
                              static_cast<double>(rho);
        acc += normed * static_cast<double>(unembedding[j * v + token]);
    }
    return acc;
}

std::string to_string(const ComponentId& id) {
    switch (id.kind) {
    case ComponentKind::Embedding:
        return "embedding";
    case ComponentKind::AttnHead:
        return "attn_head(" + std::to_string(id.layer) + "," + std::to_string(id.head) + ")";
    case ComponentKind::AttnLayer:
        return "attn_layer(" + std::to_string(id.layer) + ")";
    case ComponentKind::Mlp:
        return "mlp(" + std::to_string(id.layer) + ")";
    }
    return "?";
}

double StepDLA::contribution(const ComponentId& id) const {
    switch (id.kind) {
    case ComponentKind::Embedding:
        return embedding;
    case ComponentKind::AttnHead:
        return attn_head.at(static_cast<std::size_t>(id.layer)).at(static_cast<std::size_t>(id.head));
    case ComponentKind::AttnLayer:
        return attn_layer.at(static_cast<std::size_t>(id.layer));
    case ComponentKind::Mlp:
        return mlp.at(static_cast<std::size_t>(id.layer));
    }
    throw DomainError("unknown component kind");
}

double StepDLA::component_sum() const {
    double acc = embedding;
    for (std::size_t l = 0; l < attn_layer.size(); ++l) {
        acc += attn_layer[l] + mlp[l];
    }
    return acc;
}

namespace {

// Full-vocabulary analogue of frozen_logit_projection.
std::vector<double> frozen_logit_projection_all(const Tensor& c, const Tensor& gamma, float rho,
                                                const Tensor& unembedding) {
    const std::int64_t d = c.dim(0);
    const std::int64_t v = unembedding.dim(1);
    std::vector<double> out(static_cast<std::size_t>(v), 0.0);
    for (std::int64_t j = 0; j < d; ++j) {
        const double normed = static_cast<double>(gamma[j]) * static_cast<double>(c[j]) /
                              static_cast<double>(rho);
        for (std::int64_t t = 0; t < v; ++t) {
            out[static_cast<std::size_t>(t)] += normed * static_cast<double>(unembedding[j * v + t]);
        }
    }
    return out;
}

} // namespace

StepDLA dla_step(const ResidualTrace& trace, int token, const Weights& w,
                 bool keep_logit_vectors) {
    if (!(trace.final_norm_denom > 0.0f)) {
        throw DomainError("degenerate trace: frozen norm denominator is not positive");
    }
    if (token < 0 || token >= w.unembedding.dim(1)) {
        throw VocabularyError("token id " + std::to_string(token) +
                              " outside the unembedding matrix");
    }
    const std::size_t layers = trace.attn_head_out.size();
    StepDLA out;
    out.token = token;
    out.embedding = frozen_logit_projection(trace.embedding, w.gamma_final, trace.final_norm_denom,
                                      w.unembedding, token);
    out.attn_head.resize(layers);
    out.attn_layer.resize(layers);
    out.mlp.resize(layers);
    if (keep_logit_vectors) {
        out.embedding_logits = frozen_logit_projection_all(trace.embedding, w.gamma_final,
                                                           trace.final_norm_denom, w.unembedding);
        out.attn_layer_logits.resize(layers);
        out.mlp_logits.resize(layers);
    }
    for (std::size_t l = 0; l < layers; ++l) {
        const auto& heads = trace.attn_head_out[l];
        out.attn_head[l].reserve(heads.size());
        Tensor layer_sum({trace.embedding.dim(0)});
        for (const Tensor& head_out : heads) {
            out.attn_head[l].push_back(frozen_logit_projection(head_out, w.gamma_final,
                                                         trace.final_norm_denom, w.unembedding,
                                                         token));
            for (std::int64_t j = 0; j < layer_sum.numel(); ++j) {
                layer_sum[j] += head_out[j];
            }
        }
        out.attn_layer[l] = frozen_logit_projection(layer_sum, w.gamma_final, trace.final_norm_denom,
                                              w.unembedding, token);
        out.mlp[l] = frozen_logit_projection(trace.mlp_out[l], w.gamma_final, trace.final_norm_denom,
                                       w.unembedding, token);
        if (keep_logit_vectors) {
            out.attn_layer_logits[l] = frozen_logit_projection_all(
                layer_sum, w.gamma_final, trace.final_norm_denom, w.unembedding);
            out.mlp_logits[l] = frozen_logit_projection_all(
                trace.mlp_out[l], w.gamma_final, trace.final_norm_denom, w.unembedding);
        }
    }
    out.residual_logit = static_cast<double>(trace.logits[token]);
    return out;
}

double CwaReport::contribution(const ComponentId& id) const {
    switch (id.kind) {
    case ComponentKind::Embedding:
        return embedding;
    case ComponentKind::AttnHead:
        return attn_head.at(static_cast<std::size_t>(id.layer)).at(static_cast<std::size_t>(id.head));
    case ComponentKind::AttnLayer:
        return attn_layer.at(static_cast<std::size_t>(id.layer));
    case ComponentKind::Mlp:
        return mlp.at(static_cast<std::size_t>(id.layer));
    }
    throw DomainError("unknown component kind");
}

CwaReport compute_cwa(const GenerationRecord& record, std::span<const int> signs,
              std::span<const StepDLA> step_dlas) {
    const std::size_t k = record.emitted_ids.size();
    if (k < 1) {
        throw ProtocolError("cwa requires at least one generation step");
    }
    if (signs.size() != k || step_dlas.size() != k) {
        throw ProtocolError("cwa needs one sign and one step attribution per emitted token (" +
                            std::to_string(k) + " steps, " + std::to_string(signs.size()) +
                            " signs, " + std::to_string(step_dlas.size()) + " attributions)");
    }
    for (int s : signs) {
        if (s != 1 && s != -1) {
            throw ProtocolError("signs must be +1 or -1");
        }
    }

    const std::size_t layers = step_dlas[0].attn_layer.size();
    const std::size_t heads = layers ? step_dlas[0].attn_head[0].size() : 0;
    CwaReport rep;
    rep.k = static_cast<int>(k);
    rep.signs.assign(signs.begin(), signs.end());
    rep.attn_head.assign(layers, std::vector<double>(heads, 0.0));
    rep.attn_layer.assign(layers, 0.0);
    rep.mlp.assign(layers, 0.0);

    for (std::size_t i = 0; i < k; ++i) {
        const double sign = static_cast<double>(signs[i]);
        const StepDLA& d = step_dlas[i];
        rep.embedding += sign * d.embedding;
        for (std::size_t l = 0; l < layers; ++l) {
            for (std::size_t h = 0; h < heads; ++h) {
                rep.attn_head[l][h] += sign * d.attn_head[l][h];
            }
            rep.attn_layer[l] += sign * d.attn_layer[l];
            rep.mlp[l] += sign * d.mlp[l];
        }
    }
    const double kd = static_cast<double>(k);
    rep.embedding /= kd;
    for (std::size_t l = 0; l < layers; ++l) {
        for (std::size_t h = 0; h < heads; ++h) {
            rep.attn_head[l][h] /= kd;
        }
        rep.attn_layer[l] /= kd;
        rep.mlp[l] /= kd;
    }
    return rep;
}

RiggedCheckReport rigged_component_check(const Weights& rigged, const Weights& base,
                                         int rig_layer,
                                         std::span<const std::vector<int>> prompts,
                                         const ModelConfig& cfg, const DecodeParams& params,
                                         int eos_id) {
    if (rig_layer < 0 || rig_layer >= static_cast<int>(rigged.layers.size())) {
        throw DomainError("rig layer outside the model");
    }
    const std::size_t l = static_cast<std::size_t>(rig_layer);
    Tensor bias = rigged.layers[l].b_down;
    for (std::int64_t j = 0; j < bias.numel(); ++j) {
        bias[j] -= base.layers[l].b_down[j];
    }

    RiggedCheckReport report;
    report.layer = rig_layer;
    for (std::size_t p = 0; p < prompts.size(); ++p) {
        const GenerationRecord rec = generate(prompts[p], rigged, cfg, params, eos_id);
        std::vector<int> ids = rec.prompt_ids;
        for (int step = 0; step < rec.step_count(); ++step) {
            const ResidualTrace& trace = rec.traces[static_cast<std::size_t>(step)];
            const int token = rec.emitted_ids[static_cast<std::size_t>(step)];
            const StepDLA rigged_dla = dla_step(trace, token, rigged);

            // Same tokens through the unrigged weights. The bias only
            // feeds positions after layer l's MLP, so this MLP sees the
            // identical input and differs from the rigged one by exactly
            // the bias vector.
            const ForwardResult base_fr = forward(ids, base, cfg);
            const double baseline =
                frozen_logit_projection(base_fr.trace.mlp_out[l], rigged.gamma_final,
                                         trace.final_norm_denom, rigged.unembedding, token);
            const double term = frozen_logit_projection(bias, rigged.gamma_final,
                                                         trace.final_norm_denom,
                                                         rigged.unembedding, token);

            RiggedCheckStep chk;
            chk.prompt = p;
            chk.step = step;
            chk.measured = rigged_dla.mlp[l];
            chk.injected_term = term;
            chk.baseline = baseline;
            chk.abs_diff = std::abs(chk.measured - chk.injected_term - chk.baseline);
            report.max_abs_diff = std::max(report.max_abs_diff, chk.abs_diff);
            report.steps.push_back(chk);

            ids.push_back(token);
        }
    }
    return report;
}

} // namespace cwa
