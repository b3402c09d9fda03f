#include "cwa/wordcount.hpp"

#include <string>

namespace cwa {

namespace {

enum class DecodeStatus { Ok, Invalid, Incomplete };

struct DecodeResult {
    DecodeStatus status;
    std::uint32_t codepoint; // valid when status == Ok
    int length;              // bytes consumed when status == Ok
};

// Strict UTF-8: rejects overlong forms, surrogates and values past
// U+10FFFF. Incomplete means every byte seen so far is a valid prefix
// but the sequence is cut off by the end of the buffer.
DecodeResult decode_one(std::string_view s) {
    const auto byte = [&](std::size_t i) { return static_cast<unsigned char>(s[i]); };
    const unsigned char b0 = byte(0);
    if (b0 < 0x80) {
        return {DecodeStatus::Ok, b0, 1};
    }
    int need;
    std::uint32_t cp;
    unsigned char lo = 0x80, hi = 0xbf;
    if (b0 >= 0xc2 && b0 <= 0xdf) {
        need = 1;
        cp = b0 & 0x1fu;
    } else if (b0 >= 0xe0 && b0 <= 0xef) {
        need = 2;
        cp = b0 & 0x0fu;
        if (b0 == 0xe0) lo = 0xa0;
        if (b0 == 0xed) hi = 0x9f; // exclude surrogates
    } else if (b0 >= 0xf0 && b0 <= 0xf4) {
        need = 3;
        cp = b0 & 0x07u;
        if (b0 == 0xf0) lo = 0x90;
        if (b0 == 0xf4) hi = 0x8f; // cap at U+10FFFF
    } else {
        return {DecodeStatus::Invalid, 0, 0};
    }
    for (int i = 1; i <= need; ++i) {
        if (static_cast<std::size_t>(i) >= s.size()) {
            return {DecodeStatus::Incomplete, 0, 0};
        }
        const unsigned char b = byte(static_cast<std::size_t>(i));
        const unsigned char l = (i == 1) ? lo : 0x80;
        const unsigned char h = (i == 1) ? hi : 0xbf;
        if (b < l || b > h) {
            return {DecodeStatus::Invalid, 0, 0};
        }
        cp = (cp << 6) | (b & 0x3fu);
    }
    return {DecodeStatus::Ok, cp, need + 1};
}

} // namespace

bool is_word_codepoint(std::uint32_t cp) {
    if ((cp >= '0' && cp <= '9') || (cp >= 'A' && cp <= 'Z') || (cp >= 'a' && cp <= 'z')) {
        return true;
    }
    if (cp >= 0x00c0 && cp <= 0x00ff) {
        return cp != 0x00d7 && cp != 0x00f7;
    }
    return cp >= 0x0100 && cp <= 0x024f;
}

std::size_t count_words(std::string_view text) {
    std::size_t count = 0;
    bool in_word = false;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const DecodeResult r = decode_one(text.substr(pos));
        bool word_char = false;
        if (r.status == DecodeStatus::Ok) {
            word_char = is_word_codepoint(r.codepoint);
            pos += static_cast<std::size_t>(r.length);
        } else {
            // Invalid or cut off at end of input: one junk byte, resync.
            pos += 1;
        }
        if (word_char) {
            if (!in_word) {
                ++count;
            }
            in_word = true;
        } else {
            in_word = false;
        }
    }
    return count;
}

std::size_t WordCounter::feed(std::string_view fragment) {
    // Splice the carried bytes in front of the new fragment. At most
    // three bytes are ever pending, so the copy is trivial.
    std::string buf;
    buf.reserve(static_cast<std::size_t>(pending_len_) + fragment.size());
    buf.append(pending_, static_cast<std::size_t>(pending_len_));
    buf.append(fragment);
    pending_len_ = 0;

    std::size_t pos = 0;
    while (pos < buf.size()) {
        const DecodeResult r = decode_one(std::string_view(buf).substr(pos));
        if (r.status == DecodeStatus::Incomplete) {
            // Valid prefix cut off by the fragment boundary: carry it
            // over. It contributes nothing to the count until resolved.
            const std::size_t rest = buf.size() - pos;
            for (std::size_t i = 0; i < rest; ++i) {
                pending_[i] = buf[pos + i];
            }
            pending_len_ = static_cast<int>(rest);
            break;
        }
        bool word_char = false;
        if (r.status == DecodeStatus::Ok) {
            word_char = is_word_codepoint(r.codepoint);
            pos += static_cast<std::size_t>(r.length);
        } else {
            pos += 1;
        }
        if (word_char) {
            if (!in_word_) {
                ++count_;
            }
            in_word_ = true;
        } else {
            in_word_ = false;
        }
    }
    return count_;
}

} // namespace cwa
