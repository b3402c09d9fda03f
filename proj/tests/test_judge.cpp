#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "cwa/errors.hpp"
#include "cwa/judge.hpp"
#include "cwa/rng.hpp"
#include "cwa/tokenizer.hpp"
#include "cwa/wordcount.hpp"

using namespace cwa;

namespace {

Vocabulary fixture_vocab() {
    return Vocabulary::with_byte_fallback({"The", " dog", " runs", " fast", " cat"});
}

GenerationRecord record_for(const std::string& text, bool with_eos, const Vocabulary& vocab) {
    GenerationRecord rec;
    rec.emitted_ids = encode(text, vocab).ids;
    if (with_eos) {
        rec.emitted_ids.push_back(Vocabulary::kEosId);
    }
    return rec;
}

} // namespace

TEST_CASE("step_sign handles word and EOS steps") {
    CHECK(step_sign(3, false, 3) == 1);  // exactly on target, word step
    CHECK(step_sign(4, false, 3) == -1); // overshoot word
    CHECK(step_sign(2, true, 3) == -1);  // premature EOS
    CHECK(step_sign(3, true, 3) == 1);   // on-time EOS
    CHECK(step_sign(3, false, 3) == 1);  // punctuation after the 3rd word
    CHECK(step_sign(4, true, 3) == -1);  // late EOS
    CHECK(step_sign(0, false, 0) == 1);
    CHECK(step_sign(0, true, 0) == 1);
}

TEST_CASE("the count-only rule treats EOS like any other token") {
    CHECK(step_sign(2, true, 3, EosSignRule::CountOnly) == 1);
    CHECK(step_sign(3, true, 3, EosSignRule::CountOnly) == 1);
    CHECK(step_sign(4, true, 3, EosSignRule::CountOnly) == -1);
}

TEST_CASE("a success generation has all positive signs") {
    const Vocabulary vocab = fixture_vocab();
    const GenerationRecord rec = record_for("The dog runs", true, vocab);
    const Judgement j = judge_generation(rec, 3, vocab);
    CHECK(j.outcome == OutcomeClass::Success);
    CHECK(j.final_words == 3);
    for (const StepVerdict& v : j.verdicts) {
        CHECK(v.sign == 1);
    }
    CHECK(j.verdicts.back().is_eos);
}

TEST_CASE("an early EOS is a failure step and the record is too short") {
    const Vocabulary vocab = fixture_vocab();
    const GenerationRecord rec = record_for("The dog .", true, vocab);
    const Judgement j = judge_generation(rec, 3, vocab);
    CHECK(j.outcome == OutcomeClass::TooShort);
    CHECK(j.final_words == 2);
    for (std::size_t i = 0; i + 1 < j.verdicts.size(); ++i) {
        CHECK(j.verdicts[i].sign == 1); // word and punctuation steps stay within target
    }
    CHECK(j.verdicts.back().is_eos);
    CHECK(j.verdicts.back().sign == -1);
}

TEST_CASE("overshoot steps and the late EOS are failure steps") {
    const Vocabulary vocab = fixture_vocab();
    const GenerationRecord rec = record_for("The dog runs fast .", true, vocab);
    const Judgement j = judge_generation(rec, 3, vocab);
    CHECK(j.outcome == OutcomeClass::TooLong);
    CHECK(j.final_words == 4);

    for (const StepVerdict& v : j.verdicts) {
        if (v.words <= 3 && !v.is_eos) {
            CHECK(v.sign == 1);
        } else {
            CHECK(v.sign == -1); // " fast", the trailing punctuation, and EOS
        }
    }
}

TEST_CASE("a record without EOS is truncated") {
    const Vocabulary vocab = fixture_vocab();
    const GenerationRecord rec = record_for("The dog runs", false, vocab);
    const Judgement j = judge_generation(rec, 3, vocab);
    CHECK(j.outcome == OutcomeClass::Truncated);
}

TEST_CASE("judging an empty record is a protocol error") {
    const Vocabulary vocab = fixture_vocab();
    GenerationRecord rec;
    CHECK_THROWS_AS(judge_generation(rec, 3, vocab), ProtocolError);
}

TEST_CASE("absurd targets are rejected by the sanity bound") {
    const Vocabulary vocab = fixture_vocab();
    const GenerationRecord rec = record_for("The dog runs", true, vocab);
    CHECK_THROWS_AS(judge_generation(rec, 1000001, vocab), DomainError);
    CHECK_NOTHROW(judge_generation(rec, 1000000, vocab));
}

TEST_CASE("non-EOS signs never recover once the count exceeds the target") {
    const Vocabulary vocab = fixture_vocab();
    Xoshiro256 rng(313);
    for (int trial = 0; trial < 200; ++trial) {
        GenerationRecord rec;
        const std::size_t len = 1 + rng.next_below(20);
        for (std::size_t i = 0; i < len; ++i) {
            rec.emitted_ids.push_back(
                static_cast<int>(Vocabulary::kByteBase + rng.next_below(256)));
        }
        const std::size_t n = rng.next_below(4);
        const Judgement j = judge_generation(rec, n, vocab);
        bool exceeded = false;
        for (const StepVerdict& v : j.verdicts) {
            if (v.words > n) {
                exceeded = true;
            }
            if (exceeded && !v.is_eos) {
                CHECK(v.sign == -1);
            }
        }
    }
}

TEST_CASE("signs match a full-prefix recount oracle on random records") {
    const Vocabulary vocab = fixture_vocab();
    Xoshiro256 rng(317);
    for (int trial = 0; trial < 1000; ++trial) {
        GenerationRecord rec;
        const std::size_t len = 1 + rng.next_below(12);
        for (std::size_t i = 0; i < len; ++i) {
            // Mix subwords, spaces, letters and punctuation bytes.
            const std::uint64_t pick = rng.next_below(6);
            int id;
            if (pick == 0) {
                id = Vocabulary::kFirstSubwordId +
                     static_cast<int>(rng.next_below(
                         static_cast<std::uint64_t>(vocab.size() - Vocabulary::kFirstSubwordId)));
            } else if (pick == 1) {
                id = Vocabulary::kByteBase + ' ';
            } else if (pick == 2) {
                id = Vocabulary::kByteBase + '.';
            } else {
                id = Vocabulary::kByteBase + 'a' + static_cast<int>(rng.next_below(26));
            }
            rec.emitted_ids.push_back(id);
        }
        const bool with_eos = rng.next_below(4) != 0;
        if (with_eos) {
            rec.emitted_ids.push_back(Vocabulary::kEosId);
        }
        const std::size_t n = rng.next_below(10);
        const Judgement j = judge_generation(rec, n, vocab);
        REQUIRE(j.verdicts.size() == rec.emitted_ids.size());

        std::vector<int> prefix;
        for (std::size_t i = 0; i < rec.emitted_ids.size(); ++i) {
            prefix.push_back(rec.emitted_ids[i]);
            const std::size_t m = count_words(decode(prefix, vocab));
            const bool is_eos = rec.emitted_ids[i] == Vocabulary::kEosId;
            CHECK(j.verdicts[i].words == m);
            CHECK(j.verdicts[i].sign == step_sign(m, is_eos, n));
        }

        // Outcome classification against the oracle's final count.
        const std::size_t final_m = count_words(decode(rec.emitted_ids, vocab));
        if (!with_eos) {
            CHECK(j.outcome == OutcomeClass::Truncated);
        } else if (final_m == n) {
            CHECK(j.outcome == OutcomeClass::Success);
        } else if (final_m < n) {
            CHECK(j.outcome == OutcomeClass::TooShort);
        } else {
            CHECK(j.outcome == OutcomeClass::TooLong);
        }

        // All signs positive for an EOS-terminated record means success.
        if (with_eos) {
            bool all_positive = true;
            for (const StepVerdict& v : j.verdicts) {
                all_positive = all_positive && v.sign == 1;
            }
            if (all_positive) {
                CHECK(j.outcome == OutcomeClass::Success);
            }
            if (j.outcome == OutcomeClass::Success) {
                CHECK(all_positive);
            }
        }
    }
}

TEST_CASE("mae on small fixtures") {
    CHECK(mae(std::vector<int>{0, 0, 0}) == 0.0);
    CHECK(mae(std::vector<int>{-1, 1, 0, 2}) == 1.0);
    CHECK_THROWS_AS(mae(std::vector<int>{}), DomainError);
    CHECK(mae(std::vector<double>{0.5, -0.5}) == 0.5);
}

TEST_CASE("mae is zero exactly when every error is zero") {
    Xoshiro256 rng(331);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<int> errors;
        const std::size_t len = 1 + rng.next_below(10);
        bool any_nonzero = false;
        for (std::size_t i = 0; i < len; ++i) {
            const int e = static_cast<int>(rng.next_below(7)) - 3;
            errors.push_back(e);
            any_nonzero = any_nonzero || e != 0;
        }
        CHECK((mae(errors) == 0.0) == !any_nonzero);
    }
}

TEST_CASE("descriptive stats on degenerate and tiny lists") {
    const ErrorStats single = descriptive_stats(std::vector<int>{5});
    CHECK(single.avg == 5.0);
    CHECK(single.stddev == 0.0);
    CHECK(single.min == 5.0);
    CHECK(single.q25 == 5.0);
    CHECK(single.q50 == 5.0);
    CHECK(single.q75 == 5.0);
    CHECK(single.max == 5.0);

    const ErrorStats four = descriptive_stats(std::vector<int>{1, 2, 3, 4});
    CHECK(four.q50 == 2.5);
    CHECK(four.q25 == 1.75);
    CHECK(four.q75 == 3.25);

    CHECK_THROWS_AS(descriptive_stats(std::vector<int>{}), DomainError);
}

TEST_CASE("a synthetic error set reproduces its designed mean exactly") {
    // Eight -1s, ninety-one 0s and one +1: mean -7/100, extremes -1 and 1,
    // all quartiles 0.
    std::vector<int> errors(8, -1);
    errors.insert(errors.end(), 91, 0);
    errors.push_back(1);
    const ErrorStats s = descriptive_stats(errors);
    CHECK(s.avg == -0.07);
    CHECK(s.min == -1.0);
    CHECK(s.max == 1.0);
    CHECK(s.q25 == 0.0);
    CHECK(s.q50 == 0.0);
    CHECK(s.q75 == 0.0);
    CHECK(mae(errors) == 0.09);
}

TEST_CASE("quantiles match a brute-force sort-and-interpolate oracle") {
    Xoshiro256 rng(337);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> values;
        const std::size_t len = 1 + rng.next_below(40);
        for (std::size_t i = 0; i < len; ++i) {
            values.push_back((rng.next_double() - 0.5) * 20.0);
        }
        const ErrorStats s = descriptive_stats(values);

        // Insertion sort plus direct interpolation, written separately.
        std::vector<double> sorted;
        for (double v : values) {
            std::size_t pos = 0;
            while (pos < sorted.size() && sorted[pos] < v) {
                ++pos;
            }
            sorted.insert(sorted.begin() + static_cast<std::ptrdiff_t>(pos), v);
        }
        const auto quantile = [&](double p) {
            const double rank = p * static_cast<double>(sorted.size() - 1);
            const std::size_t lo = static_cast<std::size_t>(rank);
            if (lo + 1 >= sorted.size()) {
                return sorted.back();
            }
            return sorted[lo] + (rank - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
        };
        CHECK(s.q25 == doctest::Approx(quantile(0.25)).epsilon(1e-12));
        CHECK(s.q50 == doctest::Approx(quantile(0.50)).epsilon(1e-12));
        CHECK(s.q75 == doctest::Approx(quantile(0.75)).epsilon(1e-12));
        CHECK(s.min == sorted.front());
        CHECK(s.max == sorted.back());
    }
}
