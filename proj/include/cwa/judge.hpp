#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cwa/model.hpp"
#include "cwa/tokenizer.hpp"

namespace cwa {

enum class OutcomeClass { Success, TooShort, TooLong, Truncated };

std::string to_string(OutcomeClass outcome);

// How the per-step sign treats an EOS token. The default gives a
// mistimed EOS the failure sign. CountOnly applies the plain word-count
// rule (+1 whenever m <= N) to every token, EOS included.
enum class EosSignRule { Timed, CountOnly };

struct StepVerdict {
    int step = 0;
    std::size_t words = 0; // running word count after this token
    bool is_eos = false;
    int sign = 0;
};

// +1 when the step keeps the generation on track for exactly `target`
// words, -1 otherwise. For word tokens that means m <= target; for EOS
// under the Timed rule it means m == target.
int step_sign(std::size_t words, bool is_eos, std::size_t target,
              EosSignRule rule = EosSignRule::Timed);

struct Judgement {
    std::vector<StepVerdict> verdicts;
    OutcomeClass outcome = OutcomeClass::Truncated;
    std::size_t final_words = 0;

    std::vector<int> signs() const;
};

// Decodes the emitted tokens one at a time, tracks the running word
// count, and labels every step. Success / TooShort / TooLong compare the
// final count against the target once EOS arrived; a record without EOS
// is Truncated.
Judgement judge_generation(const GenerationRecord& record, std::size_t n_target,
                           const Vocabulary& vocab, EosSignRule rule = EosSignRule::Timed);

// Mean absolute error over a nonempty list (DomainError otherwise).
double mae(std::span<const double> errors);
double mae(std::span<const int> errors);

// Descriptive statistics in the shape of the error tables: mean,
// population standard deviation, extremes, and quartiles by linear
// interpolation between closest ranks.
struct ErrorStats {
    double avg = 0.0;
    double stddev = 0.0;
    double min = 0.0;
    double q25 = 0.0;
    double q50 = 0.0;
    double q75 = 0.0;
    double max = 0.0;
};

ErrorStats descriptive_stats(std::span<const double> values);
ErrorStats descriptive_stats(std::span<const int> values);

// Quantile by linear interpolation between closest ranks over sorted
// data; p in [0, 1]. Exposed for the aggregation code.
double interpolated_quantile(std::span<const double> sorted_values, double p);

} // namespace cwa
