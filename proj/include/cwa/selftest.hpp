#pragma once

#include <ostream>

namespace cwa {

// Quick invariant battery over every module: tokenizer round-trips,
// word-count equivalence, kernel laws, trace additivity, DLA
// completeness, CWA arithmetic and the prompt-bank law. Prints one line
// per check and returns the number of failures.
int run_selftest(std::ostream& out);

} // namespace cwa
