#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cwa {

// Subword vocabulary with guaranteed byte-level fallback. Ids are dense:
//   0            BOS (empty byte string)
//   1            EOS (empty byte string)
//   2 .. 257     the 256 single-byte tokens, id = 2 + byte value
//   258 ..       optional multi-byte subword entries
// Because every byte value has an entry, encoding never fails.
class Vocabulary {
public:
    // An empty placeholder; every usable instance comes from a factory.
    Vocabulary() = default;

    static constexpr int kBosId = 0;
    static constexpr int kEosId = 1;
    static constexpr int kByteBase = 2;
    static constexpr int kFirstSubwordId = 258;

    // Byte tokens plus BOS/EOS plus the given subword entries, in order.
    static Vocabulary with_byte_fallback(const std::vector<std::string>& subwords);

    // Full entry table, id = index. Validates the layout above.
    static Vocabulary from_entries(std::vector<std::string> entries);

    // One token per line, hex-escaped bytes, line number = id. The
    // inverse of save_text_file.
    static Vocabulary load_text_file(const std::string& path);
    void save_text_file(const std::string& path) const;

    int size() const { return static_cast<int>(entries_.size()); }
    bool contains(int id) const { return id >= 0 && id < size(); }

    // Byte string for an id. Throws VocabularyError on an unknown id.
    const std::string& bytes_of(int id) const;

    const std::vector<std::string>& entries() const { return entries_; }

    // Id of an exact byte string, or -1. Reserved ids are not findable.
    int find(std::string_view bytes) const;

    // Longest entry matching a prefix of text. Always succeeds thanks to
    // the byte fallback. Returns the id; match length = entry length.
    int longest_match(std::string_view text) const;

private:
    void build_index();

    std::vector<std::string> entries_;
    // Subword ids bucketed by first byte, longest first.
    std::vector<std::vector<int>> by_first_byte_;
};

enum class Provenance { Prompt, Generated };

struct TokenSequence {
    std::vector<int> ids;
    Provenance provenance = Provenance::Prompt;
};

// Greedy longest-match encoding over the vocabulary byte strings.
// Total: decode(encode(x)) == x for every byte string x.
TokenSequence encode(std::string_view text, const Vocabulary& vocab);

// Concatenates the byte strings of the ids; BOS/EOS contribute nothing.
// Throws VocabularyError on an unknown id.
std::string decode(std::span<const int> ids, const Vocabulary& vocab);

} // namespace cwa
