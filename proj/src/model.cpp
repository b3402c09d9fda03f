#include "cwa/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cwa/errors.hpp"
#include "cwa/rng.hpp"

namespace cwa {

void ModelConfig::validate() const {
    if (layers < 1 || heads < 1 || d_model < 1 || d_ff < 1 || vocab_size < 1 || max_seq < 1) {
        throw DimensionError("model config requires positive layer, head and size fields");
    }
    if (d_model % heads != 0) {
        throw DimensionError("heads must divide d_model (" + std::to_string(heads) + " vs " +
                             std::to_string(d_model) + ")");
    }
}

DecodeMode parse_decode_mode(const std::string& name) {
    if (name == "greedy") return DecodeMode::Greedy;
    if (name == "top-p") return DecodeMode::TopP;
    throw DomainError("unknown decode mode: " + name);
}

std::string to_string(DecodeMode mode) {
    return mode == DecodeMode::Greedy ? "greedy" : "top-p";
}

namespace {

// Row-wise rmsnorm of a [s,d] matrix.
Tensor rmsnorm_rows(const Tensor& x, const Tensor& gamma, float eps) {
    Tensor out({x.dim(0), x.dim(1)});
    for (std::int64_t i = 0; i < x.dim(0); ++i) {
        const auto src = x.row(i);
        auto dst = out.row(i);
        const float inv = 1.0f / rms_denom(src, eps);
        for (std::int64_t j = 0; j < x.dim(1); ++j) {
            dst[static_cast<std::size_t>(j)] = gamma[j] * src[static_cast<std::size_t>(j)] * inv;
        }
    }
    return out;
}

void add_rows_inplace(Tensor& acc, const Tensor& delta) {
    for (std::size_t i = 0; i < acc.data().size(); ++i) {
        acc.data()[i] += delta.data()[i];
    }
}

Tensor copy_row(const Tensor& m, std::int64_t r) {
    const auto src = m.row(r);
    return Tensor({m.dim(1)}, std::vector<float>(src.begin(), src.end()));
}

struct ForwardState {
    Tensor residual;     // [s, d_model] final residual stream
    ResidualTrace trace; // last-position capture
};

ForwardState run_forward(std::span<const int> ids, const Weights& w, const ModelConfig& cfg) {
    cfg.validate();
    const std::int64_t s = static_cast<std::int64_t>(ids.size());
    if (s < 1) {
        throw DimensionError("forward requires at least one token");
    }
    if (s > cfg.max_seq) {
        throw CapacityError("sequence of " + std::to_string(s) + " tokens exceeds max_seq " +
                            std::to_string(cfg.max_seq));
    }
    for (int id : ids) {
        if (id < 0 || id >= cfg.vocab_size) {
            throw VocabularyError("token id " + std::to_string(id) +
                                  " outside vocabulary of size " + std::to_string(cfg.vocab_size));
        }
    }

    const std::int64_t d = cfg.d_model;
    Tensor h({s, d});
    for (std::int64_t i = 0; i < s; ++i) {
        const auto emb = w.token_embedding.row(ids[static_cast<std::size_t>(i)]);
        const auto pos = w.position_embedding.row(i);
        auto dst = h.row(i);
        for (std::int64_t j = 0; j < d; ++j) {
            dst[static_cast<std::size_t>(j)] =
                emb[static_cast<std::size_t>(j)] + pos[static_cast<std::size_t>(j)];
        }
    }

    ForwardState st;
    st.trace.embedding = copy_row(h, s - 1);
    st.trace.attn_head_out.resize(static_cast<std::size_t>(cfg.layers));
    st.trace.mlp_out.resize(static_cast<std::size_t>(cfg.layers));

    for (int l = 0; l < cfg.layers; ++l) {
        const LayerWeights& lw = w.layers[static_cast<std::size_t>(l)];

        const Tensor attn_in = rmsnorm_rows(h, lw.gamma_attn, cfg.eps);
        std::vector<Tensor> heads = attention_block(attn_in, lw, cfg);
        auto& head_caps = st.trace.attn_head_out[static_cast<std::size_t>(l)];
        head_caps.reserve(heads.size());
        for (const Tensor& o : heads) {
            add_rows_inplace(h, o);
            head_caps.push_back(copy_row(o, s - 1));
        }

        const Tensor mlp_in = rmsnorm_rows(h, lw.gamma_mlp, cfg.eps);
        const Tensor f = gated_ff(mlp_in, lw.w_gate, lw.w_up, lw.w_down, lw.b_down);
        add_rows_inplace(h, f);
        st.trace.mlp_out[static_cast<std::size_t>(l)] = copy_row(f, s - 1);
    }

    st.trace.final_residual = copy_row(h, s - 1);
    st.trace.final_norm_denom = rms_denom(st.trace.final_residual, cfg.eps);
    const Tensor normed = rmsnorm_frozen(st.trace.final_residual, w.gamma_final,
                                         st.trace.final_norm_denom);
    st.trace.logits = Tensor({cfg.vocab_size});
    const float* wu = w.unembedding.data().data();
    for (std::int64_t v = 0; v < cfg.vocab_size; ++v) {
        float acc = 0.0f;
        for (std::int64_t j = 0; j < d; ++j) {
            acc += normed[j] * wu[j * cfg.vocab_size + v];
        }
        st.trace.logits[v] = acc;
    }
    st.residual = std::move(h);
    return st;
}

int pick_greedy(const Tensor& logits) {
    int best = 0;
    float best_val = logits[0];
    for (std::int64_t v = 1; v < logits.numel(); ++v) {
        if (logits[v] > best_val) {
            best_val = logits[v];
            best = static_cast<int>(v);
        }
    }
    return best;
}

int pick_top_p(const Tensor& logits, const DecodeParams& params, Xoshiro256& rng) {
    if (!(params.temperature > 0.0f)) {
        throw DomainError("top-p decoding requires a positive temperature");
    }
    if (!(params.top_p > 0.0f) || params.top_p > 1.0f) {
        throw DomainError("top_p must lie in (0, 1]");
    }
    const std::int64_t n = logits.numel();
    std::vector<float> probs(static_cast<std::size_t>(n));
    for (std::int64_t v = 0; v < n; ++v) {
        probs[static_cast<std::size_t>(v)] = logits[v] / params.temperature;
    }
    softmax_inplace(probs);

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const float pa = probs[static_cast<std::size_t>(a)];
        const float pb = probs[static_cast<std::size_t>(b)];
        if (pa != pb) return pa > pb;
        return a < b; // stable under equal probabilities
    });

    double kept_mass = 0.0;
    std::size_t kept = 0;
    while (kept < order.size()) {
        kept_mass += probs[static_cast<std::size_t>(order[kept])];
        ++kept;
        if (kept_mass >= params.top_p) break;
    }

    const double r = rng.next_double() * kept_mass;
    double cum = 0.0;
    for (std::size_t i = 0; i < kept; ++i) {
        cum += probs[static_cast<std::size_t>(order[i])];
        if (cum > r) {
            return order[i];
        }
    }
    return order[kept - 1];
}

} // namespace

std::vector<Tensor> attention_block(const Tensor& normed, const LayerWeights& lw,
                                    const ModelConfig& cfg) {
    const std::int64_t s = normed.dim(0);
    const std::int64_t d = cfg.d_model;
    const std::int64_t dh = cfg.d_head();
    if (normed.dim(1) != d) {
        throw DimensionError("attention input width does not match d_model");
    }
    const Tensor q = matmul(normed, lw.w_q);
    const Tensor k = matmul(normed, lw.w_k);
    const Tensor v = matmul(normed, lw.w_v);
    const float scale = 1.0f / std::sqrt(static_cast<float>(dh));

    std::vector<Tensor> outputs;
    outputs.reserve(static_cast<std::size_t>(cfg.heads));
    std::vector<float> weights(static_cast<std::size_t>(s));
    std::vector<float> ctx(static_cast<std::size_t>(dh));

    for (int head = 0; head < cfg.heads; ++head) {
        const std::int64_t off = static_cast<std::int64_t>(head) * dh;
        Tensor out({s, d});
        for (std::int64_t i = 0; i < s; ++i) {
            // Causal scores against positions 0..i only; later positions
            // never enter the computation at all.
            for (std::int64_t j = 0; j <= i; ++j) {
                float dot = 0.0f;
                for (std::int64_t t = 0; t < dh; ++t) {
                    dot += q.at(i, off + t) * k.at(j, off + t);
                }
                weights[static_cast<std::size_t>(j)] = dot * scale;
            }
            softmax_inplace(std::span<float>(weights.data(), static_cast<std::size_t>(i + 1)));

            std::fill(ctx.begin(), ctx.end(), 0.0f);
            for (std::int64_t j = 0; j <= i; ++j) {
                const float wj = weights[static_cast<std::size_t>(j)];
                for (std::int64_t t = 0; t < dh; ++t) {
                    ctx[static_cast<std::size_t>(t)] += wj * v.at(j, off + t);
                }
            }
            // Project through this head's rows of W_O.
            auto dst = out.row(i);
            for (std::int64_t t = 0; t < dh; ++t) {
                const float c = ctx[static_cast<std::size_t>(t)];
                const auto orow = lw.w_o.row(off + t);
                for (std::int64_t j = 0; j < d; ++j) {
                    dst[static_cast<std::size_t>(j)] += c * orow[static_cast<std::size_t>(j)];
                }
            }
        }
        outputs.push_back(std::move(out));
    }
    return outputs;
}

ForwardResult forward(std::span<const int> ids, const Weights& w, const ModelConfig& cfg) {
    ForwardState st = run_forward(ids, w, cfg);
    ForwardResult res;
    res.logits = st.trace.logits;
    res.trace = std::move(st.trace);
    return res;
}

Tensor forward_position_logits(std::span<const int> ids, const Weights& w,
                               const ModelConfig& cfg) {
    ForwardState st = run_forward(ids, w, cfg);
    const std::int64_t s = st.residual.dim(0);
    Tensor logits({s, cfg.vocab_size});
    for (std::int64_t i = 0; i < s; ++i) {
        const Tensor row = copy_row(st.residual, i);
        const Tensor normed = rmsnorm(row, w.gamma_final, cfg.eps);
        auto dst = logits.row(i);
        for (std::int64_t v = 0; v < cfg.vocab_size; ++v) {
            float acc = 0.0f;
            for (std::int64_t j = 0; j < cfg.d_model; ++j) {
                acc += normed[j] * w.unembedding.data()[static_cast<std::size_t>(j * cfg.vocab_size + v)];
            }
            dst[static_cast<std::size_t>(v)] = acc;
        }
    }
    return logits;
}

GenerationRecord generate(std::span<const int> prompt_ids, const Weights& w,
                          const ModelConfig& cfg, const DecodeParams& params, int eos_id) {
    cfg.validate();
    if (params.max_new_tokens < 1) {
        throw DomainError("max_new_tokens must be at least 1");
    }
    if (static_cast<std::int64_t>(prompt_ids.size()) + params.max_new_tokens > cfg.max_seq) {
        throw CapacityError("prompt of " + std::to_string(prompt_ids.size()) + " tokens plus " +
                            std::to_string(params.max_new_tokens) +
                            " new tokens exceeds max_seq " + std::to_string(cfg.max_seq));
    }

    GenerationRecord rec;
    rec.prompt_ids.assign(prompt_ids.begin(), prompt_ids.end());
    rec.decode = params;
    rec.seed = params.seed;

    Xoshiro256 rng(params.seed);
    std::vector<int> ids = rec.prompt_ids;
    for (int step = 0; step < params.max_new_tokens; ++step) {
        ForwardResult fr = forward(ids, w, cfg);
        const int token = params.mode == DecodeMode::Greedy ? pick_greedy(fr.logits)
                                                            : pick_top_p(fr.logits, params, rng);
        rec.emitted_ids.push_back(token);
        rec.traces.push_back(std::move(fr.trace));
        ids.push_back(token);
        if (token == eos_id) {
            break;
        }
    }
    return rec;
}

} // namespace cwa
