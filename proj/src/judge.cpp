#include "cwa/judge.hpp"

#include <algorithm>
#include <cmath>

#include "cwa/errors.hpp"
#include "cwa/wordcount.hpp"

namespace cwa {

std::string to_string(OutcomeClass outcome) {
    switch (outcome) {
    case OutcomeClass::Success: return "success";
    case OutcomeClass::TooShort: return "too_short";
    case OutcomeClass::TooLong: return "too_long";
    case OutcomeClass::Truncated: return "truncated";
    }
    return "?";
}

int step_sign(std::size_t words, bool is_eos, std::size_t target, EosSignRule rule) {
    if (is_eos && rule == EosSignRule::Timed) {
        return words == target ? 1 : -1;
    }
    return words <= target ? 1 : -1;
}

std::vector<int> Judgement::signs() const {
    std::vector<int> out;
    out.reserve(verdicts.size());
    for (const StepVerdict& v : verdicts) {
        out.push_back(v.sign);
    }
    return out;
}

Judgement judge_generation(const GenerationRecord& record, std::size_t n_target,
                           const Vocabulary& vocab, EosSignRule rule) {
    if (record.emitted_ids.empty()) {
        throw ProtocolError("cannot judge a record with no emitted tokens");
    }
    if (n_target > 1000000) {
        throw DomainError("target word count " + std::to_string(n_target) +
                          " exceeds the sanity bound of 1000000");
    }
    Judgement j;
    WordCounter counter;
    bool saw_eos = false;
    for (std::size_t i = 0; i < record.emitted_ids.size(); ++i) {
        const int id = record.emitted_ids[i];
        const bool is_eos = id == Vocabulary::kEosId;
        const std::size_t words = counter.feed(vocab.bytes_of(id));
        StepVerdict v;
        v.step = static_cast<int>(i);
        v.words = words;
        v.is_eos = is_eos;
        v.sign = step_sign(words, is_eos, n_target, rule);
        j.verdicts.push_back(v);
        if (is_eos) {
            saw_eos = true;
        }
    }
    j.final_words = counter.count();
    if (!saw_eos) {
        j.outcome = OutcomeClass::Truncated;
    } else if (j.final_words == n_target) {
        j.outcome = OutcomeClass::Success;
    } else if (j.final_words < n_target) {
        j.outcome = OutcomeClass::TooShort;
    } else {
        j.outcome = OutcomeClass::TooLong;
    }
    return j;
}

double mae(std::span<const double> errors) {
    if (errors.empty()) {
        throw DomainError("mae over an empty list");
    }
    double acc = 0.0;
    for (double e : errors) {
        acc += std::abs(e);
    }
    return acc / static_cast<double>(errors.size());
}

double mae(std::span<const int> errors) {
    std::vector<double> widened(errors.begin(), errors.end());
    return mae(std::span<const double>(widened));
}

double interpolated_quantile(std::span<const double> sorted_values, double p) {
    if (sorted_values.empty()) {
        throw DomainError("quantile of an empty list");
    }
    const std::size_t n = sorted_values.size();
    if (n == 1) {
        return sorted_values[0];
    }
    const double pos = p * static_cast<double>(n - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, n - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted_values[lo] + frac * (sorted_values[hi] - sorted_values[lo]);
}

ErrorStats descriptive_stats(std::span<const double> values) {
    if (values.empty()) {
        throw DomainError("descriptive statistics over an empty list");
    }
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());

    double mean = 0.0;
    for (double v : sorted) {
        mean += v;
    }
    mean /= static_cast<double>(sorted.size());

    double var = 0.0;
    for (double v : sorted) {
        var += (v - mean) * (v - mean);
    }
    var /= static_cast<double>(sorted.size()); // population variance

    ErrorStats s;
    s.avg = mean;
    s.stddev = std::sqrt(var);
    s.min = sorted.front();
    s.max = sorted.back();
    s.q25 = interpolated_quantile(sorted, 0.25);
    s.q50 = interpolated_quantile(sorted, 0.50);
    s.q75 = interpolated_quantile(sorted, 0.75);
    return s;
}

ErrorStats descriptive_stats(std::span<const int> values) {
    std::vector<double> widened(values.begin(), values.end());
    return descriptive_stats(std::span<const double>(widened));
}

} // namespace cwa
