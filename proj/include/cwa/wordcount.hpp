#pragma once

#include <cstdint>
#include <string_view>

namespace cwa {

// Word segmentation rule, centralized so it can be swapped in one place:
// a word is a maximal run of alphanumeric code points; every other code
// point (space, punctuation, apostrophe, hyphen) and every malformed
// byte separates words. "l'amico" and "well-known" both count as two.
//
// Alphanumeric here means: ASCII digits and letters, Latin-1 letters
// (U+00C0..U+00FF except the multiplication and division signs), and
// Latin Extended-A/B (U+0100..U+024F). That covers English and Italian
// text including accented vowels.
bool is_word_codepoint(std::uint32_t cp);

// Number of words in a byte string interpreted as UTF-8. Invalid bytes
// never crash; they act as separators.
std::size_t count_words(std::string_view text);

// Streaming word counter. Feeding fragments f1..fi yields the same count
// as count_words(f1 + ... + fi); the state carries whether the text so
// far ends inside a word plus at most one incomplete UTF-8 sequence.
class WordCounter {
public:
    // Consume a fragment; returns the running word count.
    std::size_t feed(std::string_view fragment);

    std::size_t count() const { return count_; }
    bool in_word() const { return in_word_; }

private:
    std::size_t count_ = 0;
    bool in_word_ = false;
    char pending_[4] = {};
    int pending_len_ = 0;
};

} // namespace cwa
