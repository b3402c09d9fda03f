#include "cwa/selftest.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "cwa/attribution.hpp"
#include "cwa/harness.hpp"
#include "cwa/judge.hpp"
#include "cwa/model.hpp"
#include "cwa/model_io.hpp"
#include "cwa/rng.hpp"
#include "cwa/tensor.hpp"
#include "cwa/tokenizer.hpp"
#include "cwa/wordcount.hpp"

namespace cwa {

namespace {

struct Runner {
    std::ostream& out;
    int failures = 0;

    void check(const std::string& name, bool ok) {
        out << (ok ? "[ok]   " : "[FAIL] ") << name << "\n";
        if (!ok) {
            ++failures;
        }
    }
};

} // namespace

int run_selftest(std::ostream& out) {
    Runner r{out};

    {
        const Vocabulary vocab = reference_vocabulary();
        Xoshiro256 rng(1);
        bool ok = true;
        for (int trial = 0; trial < 200 && ok; ++trial) {
            std::string text;
            const std::size_t len = rng.next_below(30);
            for (std::size_t i = 0; i < len; ++i) {
                text.push_back(static_cast<char>(rng.next_below(256)));
            }
            ok = decode(encode(text, vocab).ids, vocab) == text;
        }
        r.check("tokenizer round-trip on random byte strings", ok);
    }

    {
        Xoshiro256 rng(2);
        bool ok = true;
        for (int trial = 0; trial < 200 && ok; ++trial) {
            std::string text;
            const std::size_t len = rng.next_below(24);
            const std::string alphabet = "ab c.\xc3\xa8-";
            for (std::size_t i = 0; i < len; ++i) {
                text += alphabet[rng.next_below(alphabet.size())];
            }
            WordCounter counter;
            std::size_t pos = 0;
            while (pos < text.size()) {
                const std::size_t n = std::min<std::size_t>(1 + rng.next_below(4),
                                                            text.size() - pos);
                counter.feed(std::string_view(text).substr(pos, n));
                pos += n;
            }
            ok = counter.count() == count_words(text);
        }
        r.check("incremental word count equals batch count", ok);
    }

    {
        Xoshiro256 rng(3);
        bool ok = true;
        for (int trial = 0; trial < 100 && ok; ++trial) {
            Tensor v({6});
            for (float& x : v.data()) {
                x = rng.next_float() * 20.0f - 10.0f;
            }
            const Tensor s = softmax(v);
            double sum = 0.0;
            for (std::int64_t i = 0; i < s.numel(); ++i) {
                sum += s[i];
            }
            ok = std::abs(sum - 1.0) <= 1e-6;
        }
        r.check("softmax normalizes", ok);
    }

    {
        Xoshiro256 rng(4);
        bool ok = true;
        for (int trial = 0; trial < 100 && ok; ++trial) {
            Tensor a({8}), b({8}), gamma({8});
            for (std::int64_t i = 0; i < 8; ++i) {
                a[i] = rng.next_float() - 0.5f;
                b[i] = rng.next_float() - 0.5f;
                gamma[i] = rng.next_float() + 0.5f;
            }
            const float rho = rng.next_float() + 0.25f;
            const Tensor lhs = rmsnorm_frozen(add(a, b), gamma, rho);
            const Tensor ra = rmsnorm_frozen(a, gamma, rho);
            const Tensor rb = rmsnorm_frozen(b, gamma, rho);
            for (std::int64_t i = 0; i < 8 && ok; ++i) {
                ok = std::abs(lhs[i] - (ra[i] + rb[i])) <= 1e-5f * (1.0f + std::abs(lhs[i]));
            }
        }
        r.check("frozen-denominator norm is linear", ok);
    }

    {
        ModelConfig cfg;
        cfg.layers = 2;
        cfg.heads = 2;
        cfg.d_model = 16;
        cfg.d_ff = 24;
        cfg.max_seq = 24;
        cfg.eps = 1e-5f;
        const Vocabulary vocab = reference_vocabulary();
        cfg.vocab_size = vocab.size();
        const Weights w = make_reference_weights(7, cfg);
        DecodeParams params;
        params.max_new_tokens = 6;
        const GenerationRecord rec =
            generate(std::vector<int>{Vocabulary::kBosId}, w, cfg, params, Vocabulary::kEosId);

        bool additive = rec.step_count() >= 1;
        bool complete = additive;
        bool head_sum = additive;
        for (int i = 0; i < rec.step_count(); ++i) {
            const ResidualTrace& trace = rec.traces[static_cast<std::size_t>(i)];
            for (std::int64_t j = 0; j < cfg.d_model && additive; ++j) {
                double acc = trace.embedding[j];
                for (int l = 0; l < cfg.layers; ++l) {
                    for (int h = 0; h < cfg.heads; ++h) {
                        acc += trace.attn_head_out[static_cast<std::size_t>(l)]
                                                  [static_cast<std::size_t>(h)][j];
                    }
                    acc += trace.mlp_out[static_cast<std::size_t>(l)][j];
                }
                additive = std::abs(acc - trace.final_residual[j]) <=
                           1e-4 * (1.0 + std::abs(trace.final_residual[j]));
            }
            const StepDLA d =
                dla_step(trace, rec.emitted_ids[static_cast<std::size_t>(i)], w);
            complete = complete && std::abs(d.component_sum() - d.residual_logit) <=
                                       1e-4 * (1.0 + std::abs(d.residual_logit));
            for (std::size_t l = 0; l < d.attn_layer.size() && head_sum; ++l) {
                double hs = 0.0;
                for (double h : d.attn_head[l]) {
                    hs += h;
                }
                head_sum = std::abs(hs - d.attn_layer[l]) <= 1e-5;
            }
        }
        r.check("residual trace additivity", additive);
        r.check("DLA completeness against the emitted logit", complete);
        r.check("attention layer DLA equals head sum", head_sum);
    }

    {
        StepDLA fixture;
        fixture.attn_layer = {0.0};
        fixture.attn_head = {{0.0}};
        fixture.mlp = {0.0};
        std::vector<StepDLA> steps(3, fixture);
        steps[0].attn_layer[0] = 0.2;
        steps[1].attn_layer[0] = -0.1;
        steps[2].attn_layer[0] = 0.4;
        GenerationRecord rec;
        rec.emitted_ids = {2, 2, 2};
        const CwaReport rep = compute_cwa(rec, std::vector<int>{1, 1, -1}, steps);
        r.check("CWA hand fixture equals -0.1",
                rep.attn_layer[0] == (1.0 * 0.2 + 1.0 * (-0.1) + (-1.0) * 0.4) / 3.0);
    }

    {
        ExperimentConfig config;
        config.experiment = "ENG-IT";
        config.sets = {TemplateSet::ItStyle, TemplateSet::BaseStyle};
        r.check("prompt bank yields 80 prompts over both sets",
                build_prompts(config).size() == 80);
    }

    {
        const std::vector<int> sample = {1, 2, 3, 4};
        const ErrorStats s = descriptive_stats(sample);
        r.check("interpolated median of 1,2,3,4 is 2.5", s.q50 == 2.5);
    }

    out << (r.failures == 0 ? "all checks passed\n"
                            : std::to_string(r.failures) + " check(s) failed\n");
    return r.failures;
}

} // namespace cwa
