#include <doctest.h>

#include <cmath>
#include <vector>

#include "cwa/attribution.hpp"
#include "cwa/errors.hpp"
#include "cwa/judge.hpp"
#include "cwa/model.hpp"
#include "cwa/model_io.hpp"
#include "cwa/rng.hpp"
#include "cwa/tokenizer.hpp"

using namespace cwa;

namespace {

ModelConfig toy_config(int vocab) {
    ModelConfig cfg;
    cfg.layers = 3;
    cfg.heads = 2;
    cfg.d_model = 16;
    cfg.d_ff = 24;
    cfg.vocab_size = vocab;
    cfg.max_seq = 24;
    cfg.eps = 1e-5f;
    return cfg;
}

std::vector<StepDLA> step_dlas_of(const GenerationRecord& rec, const Weights& w) {
    std::vector<StepDLA> steps;
    for (int i = 0; i < rec.step_count(); ++i) {
        StepDLA d = dla_step(rec.traces[static_cast<std::size_t>(i)],
                             rec.emitted_ids[static_cast<std::size_t>(i)], w);
        d.step = i;
        steps.push_back(std::move(d));
    }
    return steps;
}

// A fabricated single-step DLA with the given per-component scalars in
// one layer/one head, used by the arithmetic tests.
StepDLA scalar_step(double head_value, double mlp_value, double emb_value) {
    StepDLA d;
    d.attn_head = {{head_value}};
    d.attn_layer = {head_value};
    d.mlp = {mlp_value};
    d.embedding = emb_value;
    d.residual_logit = emb_value + head_value + mlp_value;
    return d;
}

GenerationRecord synthetic_record(int k) {
    GenerationRecord rec;
    rec.emitted_ids.assign(static_cast<std::size_t>(k), 2);
    return rec;
}

} // namespace

TEST_CASE("dla of a zero component vector is zero") {
    ResidualTrace trace;
    trace.embedding = Tensor({4});
    trace.attn_head_out = {{Tensor({4})}};
    trace.mlp_out = {Tensor({4})};
    trace.final_residual = Tensor::vec({1.0f, 0.0f, 0.0f, 0.0f});
    trace.final_norm_denom = 0.5f;
    trace.logits = Tensor({6});

    Weights w;
    w.gamma_final = Tensor::full({4}, 1.0f);
    w.unembedding = Tensor({4, 6});
    const StepDLA d = dla_step(trace, 2, w);
    CHECK(d.embedding == 0.0);
    CHECK(d.attn_head[0][0] == 0.0);
    CHECK(d.mlp[0] == 0.0);
}

TEST_CASE("dla values on a hand-set one-layer trace") {
    // One layer, one head, d_model = 3, one-hot unembedding columns. The
    // contribution of a component c to token t's logit must come out as
    // gamma[t] * c[t] / rho.
    ResidualTrace trace;
    trace.embedding = Tensor::vec({0.3f, -0.2f, 0.5f});
    trace.attn_head_out = {{Tensor::vec({1.0f, 2.0f, -1.0f})}};
    trace.mlp_out = {Tensor::vec({-0.5f, 0.25f, 2.0f})};
    trace.final_residual = add(add(trace.embedding, trace.attn_head_out[0][0]), trace.mlp_out[0]);
    trace.final_norm_denom = 2.0f;
    trace.logits = Tensor({3});

    Weights w;
    w.gamma_final = Tensor::vec({1.0f, 0.5f, 2.0f});
    w.unembedding = Tensor({3, 3});
    for (int t = 0; t < 3; ++t) {
        w.unembedding.at(t, t) = 1.0f; // one-hot columns
    }

    for (int t = 0; t < 3; ++t) {
        const StepDLA d = dla_step(trace, t, w);
        const double rho = 2.0;
        CHECK(d.embedding ==
              doctest::Approx(w.gamma_final[t] * trace.embedding[t] / rho).epsilon(1e-12));
        CHECK(d.attn_head[0][0] ==
              doctest::Approx(w.gamma_final[t] * trace.attn_head_out[0][0][t] / rho).epsilon(1e-12));
        CHECK(d.mlp[0] ==
              doctest::Approx(w.gamma_final[t] * trace.mlp_out[0][t] / rho).epsilon(1e-12));
    }
}

TEST_CASE("the debug flag retains full vocabulary vectors") {
    const ModelConfig cfg = toy_config(24);
    const Weights w = make_reference_weights(57, cfg);
    DecodeParams params;
    params.max_new_tokens = 3;
    const GenerationRecord rec = generate(std::vector<int>{5, 9}, w, cfg, params, 1);
    REQUIRE(rec.step_count() >= 1);

    const ResidualTrace& trace = rec.traces[0];
    const int token = rec.emitted_ids[0];
    const StepDLA lean = dla_step(trace, token, w);
    CHECK(lean.embedding_logits.empty());
    CHECK(lean.mlp_logits.empty());

    const StepDLA full = dla_step(trace, token, w, true);
    REQUIRE(full.embedding_logits.size() == static_cast<std::size_t>(cfg.vocab_size));
    REQUIRE(full.attn_layer_logits.size() == static_cast<std::size_t>(cfg.layers));
    REQUIRE(full.mlp_logits.size() == static_cast<std::size_t>(cfg.layers));

    // Entry `token` of every vector is the scalar stored next to it, and
    // any other entry matches a direct projection onto that column.
    CHECK(full.embedding_logits[static_cast<std::size_t>(token)] == full.embedding);
    for (int l = 0; l < cfg.layers; ++l) {
        CHECK(full.attn_layer_logits[static_cast<std::size_t>(l)][static_cast<std::size_t>(token)] ==
              full.attn_layer[static_cast<std::size_t>(l)]);
        CHECK(full.mlp_logits[static_cast<std::size_t>(l)][static_cast<std::size_t>(token)] ==
              full.mlp[static_cast<std::size_t>(l)]);
    }
    const int other = (token + 1) % cfg.vocab_size;
    CHECK(full.mlp_logits[0][static_cast<std::size_t>(other)] ==
          doctest::Approx(frozen_logit_projection(trace.mlp_out[0], w.gamma_final,
                                                  trace.final_norm_denom, w.unembedding, other))
              .epsilon(1e-12));
}

TEST_CASE("a degenerate trace denominator is rejected") {
    ResidualTrace trace;
    trace.final_norm_denom = 0.0f;
    Weights w;
    w.gamma_final = Tensor({2});
    w.unembedding = Tensor({2, 2});
    CHECK_THROWS_AS(dla_step(trace, 0, w), DomainError);
}

TEST_CASE("component DLAs add up to the emitted token's logit") {
    const ModelConfig cfg = toy_config(24);
    const Weights w = make_reference_weights(51, cfg);
    DecodeParams params;
    params.max_new_tokens = 10;
    for (int prompt_token : {2, 9, 17}) {
        const GenerationRecord rec = generate(std::vector<int>{prompt_token}, w, cfg, params, 1);
        for (const StepDLA& d : step_dlas_of(rec, w)) {
            CHECK(std::abs(d.component_sum() - d.residual_logit) <=
                  1e-4 * (1.0 + std::abs(d.residual_logit)));
        }
    }
}

TEST_CASE("attention layer DLA equals the sum of its head DLAs") {
    const ModelConfig cfg = toy_config(24);
    const Weights w = make_reference_weights(53, cfg);
    DecodeParams params;
    params.max_new_tokens = 8;
    const GenerationRecord rec = generate(std::vector<int>{4, 6}, w, cfg, params, 1);
    for (const StepDLA& d : step_dlas_of(rec, w)) {
        for (std::size_t l = 0; l < d.attn_layer.size(); ++l) {
            double head_sum = 0.0;
            for (double h : d.attn_head[l]) {
                head_sum += h;
            }
            CHECK(std::abs(head_sum - d.attn_layer[l]) <= 1e-5);
        }
    }
}

TEST_CASE("cwa of constant +1-signed steps is the constant") {
    const std::vector<StepDLA> steps(4, scalar_step(0.7, -0.3, 0.1));
    const std::vector<int> signs(4, 1);
    const CwaReport rep = compute_cwa(synthetic_record(4), signs, steps);
    CHECK(rep.k == 4);
    CHECK(rep.attn_layer[0] == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(rep.mlp[0] == doctest::Approx(-0.3).epsilon(1e-12));
    CHECK(rep.embedding == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("flipping every sign negates every cwa value exactly") {
    Xoshiro256 rng(71);
    for (int trial = 0; trial < 100; ++trial) {
        const int k = 1 + static_cast<int>(rng.next_below(6));
        std::vector<StepDLA> steps;
        std::vector<int> signs, flipped;
        for (int i = 0; i < k; ++i) {
            steps.push_back(scalar_step(rng.next_double() - 0.5, rng.next_double() - 0.5,
                                        rng.next_double() - 0.5));
            const int s = rng.next_below(2) ? 1 : -1;
            signs.push_back(s);
            flipped.push_back(-s);
        }
        const GenerationRecord rec = synthetic_record(k);
        const CwaReport a = compute_cwa(rec, signs, steps);
        const CwaReport b = compute_cwa(rec, flipped, steps);
        CHECK(b.attn_layer[0] == -a.attn_layer[0]);
        CHECK(b.mlp[0] == -a.mlp[0]);
        CHECK(b.embedding == -a.embedding);
        CHECK(b.attn_head[0][0] == -a.attn_head[0][0]);
    }
}

TEST_CASE("the hand fixture (0.2, -0.1, 0.4) with signs (+,+,-) averages to -0.1") {
    const std::vector<StepDLA> steps = {scalar_step(0.2, 0, 0), scalar_step(-0.1, 0, 0),
                                        scalar_step(0.4, 0, 0)};
    const std::vector<int> signs = {1, 1, -1};
    const CwaReport rep = compute_cwa(synthetic_record(3), signs, steps);
    // Same arithmetic as the definition, evaluated independently.
    const double expected = (1.0 * 0.2 + 1.0 * (-0.1) + (-1.0) * 0.4) / 3.0;
    CHECK(rep.attn_layer[0] == expected);
    CHECK(rep.attn_layer[0] == doctest::Approx(-0.1).epsilon(1e-12));
}

TEST_CASE("cwa magnitude never exceeds the largest step magnitude") {
    Xoshiro256 rng(73);
    for (int trial = 0; trial < 200; ++trial) {
        const int k = 1 + static_cast<int>(rng.next_below(8));
        std::vector<StepDLA> steps;
        std::vector<int> signs;
        double max_abs = 0.0;
        for (int i = 0; i < k; ++i) {
            const double v = (rng.next_double() - 0.5) * 4.0;
            steps.push_back(scalar_step(v, 0, 0));
            signs.push_back(rng.next_below(2) ? 1 : -1);
            max_abs = std::max(max_abs, std::abs(v));
        }
        const CwaReport rep = compute_cwa(synthetic_record(k), signs, steps);
        CHECK(std::abs(rep.attn_layer[0]) <= max_abs + 1e-12);
    }
}

TEST_CASE("cwa is linear in the per-step scalars") {
    Xoshiro256 rng(79);
    for (int trial = 0; trial < 100; ++trial) {
        const int k = 1 + static_cast<int>(rng.next_below(6));
        std::vector<StepDLA> a, b, sum;
        std::vector<int> signs;
        for (int i = 0; i < k; ++i) {
            const double av = rng.next_double() - 0.5;
            const double bv = rng.next_double() - 0.5;
            a.push_back(scalar_step(av, 0, 0));
            b.push_back(scalar_step(bv, 0, 0));
            sum.push_back(scalar_step(av + bv, 0, 0));
            signs.push_back(rng.next_below(2) ? 1 : -1);
        }
        const GenerationRecord rec = synthetic_record(k);
        const double lhs = compute_cwa(rec, signs, sum).attn_layer[0];
        const double rhs = compute_cwa(rec, signs, a).attn_layer[0] + compute_cwa(rec, signs, b).attn_layer[0];
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
}

TEST_CASE("cwa rejects mismatched lengths and bad signs") {
    const std::vector<StepDLA> steps = {scalar_step(1, 0, 0)};
    const GenerationRecord rec = synthetic_record(1);
    CHECK_THROWS_AS(compute_cwa(rec, std::vector<int>{1, 1}, steps), ProtocolError);
    CHECK_THROWS_AS(compute_cwa(rec, std::vector<int>{0}, steps), ProtocolError);
    CHECK_THROWS_AS(compute_cwa(synthetic_record(0), std::vector<int>{}, {}), ProtocolError);
}

TEST_CASE("rigged bias shifts the rigged layer's DLA by the closed-form term") {
    const ModelConfig cfg = toy_config(40);
    const Weights base = make_reference_weights(83, cfg);
    DecodeParams params;
    params.max_new_tokens = 6;
    const std::vector<std::vector<int>> prompts = {{2, 5}, {11}, {7, 3, 9}};

    for (int layer : {cfg.layers - 1, 1, 0}) {
        RigSpec rig;
        rig.layer = layer;
        rig.token = Vocabulary::kEosId;
        rig.scale = 0.8f;
        const Weights rigged = make_rigged_model(base, rig);
        const RiggedCheckReport report =
            rigged_component_check(rigged, base, layer, prompts, cfg, params, Vocabulary::kEosId);
        CHECK(!report.steps.empty());
        CHECK(report.passed(1e-4));
    }
}

TEST_CASE("a zero rig bias leaves the check trivially at the baseline") {
    const ModelConfig cfg = toy_config(40);
    const Weights base = make_reference_weights(89, cfg);
    const std::vector<std::vector<int>> prompts = {{2, 5}};
    DecodeParams params;
    params.max_new_tokens = 4;
    const RiggedCheckReport report =
        rigged_component_check(base, base, 1, prompts, cfg, params, Vocabulary::kEosId);
    for (const RiggedCheckStep& s : report.steps) {
        CHECK(s.injected_term == 0.0);
        CHECK(std::abs(s.measured - s.baseline) <= 1e-9);
    }
}

TEST_CASE("doubling the rig bias doubles the injected term") {
    const ModelConfig cfg = toy_config(40);
    const Weights base = make_reference_weights(97, cfg);
    DecodeParams params;
    params.max_new_tokens = 5;

    RigSpec rig;
    rig.layer = cfg.layers - 1;
    rig.token = 6;
    rig.scale = 0.5f;
    const Weights rigged = make_rigged_model(base, rig);
    Tensor bias = rigged.layers[static_cast<std::size_t>(rig.layer)].b_down;
    Tensor doubled = bias;
    for (std::int64_t j = 0; j < doubled.numel(); ++j) {
        doubled[j] *= 2.0f;
    }

    // The term is a frozen-norm projection, so it must scale exactly with
    // the bias under any trace the rigged run produced.
    const GenerationRecord rec = generate(std::vector<int>{4, 8}, rigged, cfg, params,
                                          Vocabulary::kEosId);
    REQUIRE(rec.step_count() >= 1);
    for (int i = 0; i < rec.step_count(); ++i) {
        const ResidualTrace& trace = rec.traces[static_cast<std::size_t>(i)];
        const int token = rec.emitted_ids[static_cast<std::size_t>(i)];
        const double term = frozen_logit_projection(bias, rigged.gamma_final,
                                                    trace.final_norm_denom,
                                                    rigged.unembedding, token);
        const double term2 = frozen_logit_projection(doubled, rigged.gamma_final,
                                                     trace.final_norm_denom,
                                                     rigged.unembedding, token);
        CHECK(std::abs(term2 - 2.0 * term) <= 1e-4 * (1.0 + std::abs(term2)));
    }
}

TEST_CASE("an EOS-aligned rig term pushes CWA down on premature EOS steps") {
    const ModelConfig cfg = toy_config(40);
    const Weights base = make_reference_weights(101, cfg);
    RigSpec rig;
    rig.layer = cfg.layers - 1;
    rig.token = Vocabulary::kEosId;
    rig.scale = 100.0f; // forces EOS at the first step
    const Weights rigged = make_rigged_model(base, rig);

    DecodeParams params;
    params.max_new_tokens = 6;
    const std::vector<std::vector<int>> prompts = {{Vocabulary::kBosId}};
    const RiggedCheckReport report = rigged_component_check(rigged, base, rig.layer, prompts, cfg,
                                                            params, Vocabulary::kEosId);
    REQUIRE(report.steps.size() == 1); // immediate EOS
    const RiggedCheckStep& s = report.steps[0];
    CHECK(s.injected_term > 0.0);

    // Zero words before EOS with any positive target makes the step a
    // failure step, so the term enters CWA with a negative sign.
    const int sign = step_sign(0, true, 3);
    REQUIRE(sign == -1);
    CHECK(static_cast<double>(sign) * s.injected_term < 0.0);
}
