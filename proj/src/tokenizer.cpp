#include "cwa/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_set>

#include "cwa/errors.hpp"

namespace cwa {

namespace {

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

constexpr char kHexDigits[] = "0123456789abcdef";

} // namespace

Vocabulary Vocabulary::with_byte_fallback(const std::vector<std::string>& subwords) {
    std::vector<std::string> entries;
    entries.reserve(kFirstSubwordId + subwords.size());
    entries.emplace_back(); // BOS
    entries.emplace_back(); // EOS
    for (int b = 0; b < 256; ++b) {
        entries.emplace_back(1, static_cast<char>(b));
    }
    entries.insert(entries.end(), subwords.begin(), subwords.end());
    return from_entries(std::move(entries));
}

Vocabulary Vocabulary::from_entries(std::vector<std::string> entries) {
    if (entries.size() < static_cast<std::size_t>(kFirstSubwordId)) {
        throw VocabularyError("vocabulary must contain BOS, EOS and all 256 byte tokens");
    }
    if (!entries[kBosId].empty() || !entries[kEosId].empty()) {
        throw VocabularyError("reserved ids 0 and 1 must map to empty byte strings");
    }
    for (int b = 0; b < 256; ++b) {
        const std::string& e = entries[kByteBase + b];
        if (e.size() != 1 || static_cast<unsigned char>(e[0]) != b) {
            throw VocabularyError("byte token " + std::to_string(b) + " missing or misplaced");
        }
    }
    std::unordered_set<std::string> seen;
    for (std::size_t id = kByteBase; id < entries.size(); ++id) {
        if (entries[id].empty()) {
            throw VocabularyError("empty byte string at non-reserved id " + std::to_string(id));
        }
        if (!seen.insert(entries[id]).second) {
            throw VocabularyError("duplicate vocabulary entry at id " + std::to_string(id));
        }
    }
    Vocabulary v;
    v.entries_ = std::move(entries);
    v.build_index();
    return v;
}

void Vocabulary::build_index() {
    by_first_byte_.assign(256, {});
    for (int id = kFirstSubwordId; id < size(); ++id) {
        by_first_byte_[static_cast<unsigned char>(entries_[id][0])].push_back(id);
    }
    for (auto& bucket : by_first_byte_) {
        std::sort(bucket.begin(), bucket.end(), [this](int a, int b) {
            return entries_[a].size() > entries_[b].size();
        });
    }
}

Vocabulary Vocabulary::load_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open vocabulary file: " + path);
    }
    std::vector<std::string> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.size() % 2 != 0) {
            throw FormatError("vocabulary line " + std::to_string(line_no) +
                              ": odd number of hex digits");
        }
        std::string bytes;
        bytes.reserve(line.size() / 2);
        for (std::size_t i = 0; i < line.size(); i += 2) {
            const int hi = hex_value(line[i]);
            const int lo = hex_value(line[i + 1]);
            if (hi < 0 || lo < 0) {
                throw FormatError("vocabulary line " + std::to_string(line_no) +
                                  ": invalid hex digit");
            }
            bytes.push_back(static_cast<char>((hi << 4) | lo));
        }
        entries.push_back(std::move(bytes));
    }
    return from_entries(std::move(entries));
}

void Vocabulary::save_text_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write vocabulary file: " + path);
    }
    for (const std::string& entry : entries_) {
        std::string line;
        line.reserve(entry.size() * 2 + 1);
        for (unsigned char c : entry) {
            line.push_back(kHexDigits[c >> 4]);
            line.push_back(kHexDigits[c & 0xf]);
        }
        line.push_back('\n');
        out << line;
    }
}

const std::string& Vocabulary::bytes_of(int id) const {
    if (!contains(id)) {
        throw VocabularyError("unknown token id " + std::to_string(id));
    }
    return entries_[static_cast<std::size_t>(id)];
}

int Vocabulary::find(std::string_view bytes) const {
    if (bytes.empty()) {
        return -1;
    }
    if (bytes.size() == 1) {
        return kByteBase + static_cast<unsigned char>(bytes[0]);
    }
    for (int id : by_first_byte_[static_cast<unsigned char>(bytes[0])]) {
        if (entries_[static_cast<std::size_t>(id)] == bytes) {
            return id;
        }
    }
    return -1;
}

int Vocabulary::longest_match(std::string_view text) const {
    for (int id : by_first_byte_[static_cast<unsigned char>(text[0])]) {
        const std::string& entry = entries_[static_cast<std::size_t>(id)];
        if (entry.size() <= text.size() && text.compare(0, entry.size(), entry) == 0) {
            return id;
        }
    }
    return kByteBase + static_cast<unsigned char>(text[0]);
}

TokenSequence encode(std::string_view text, const Vocabulary& vocab) {
    TokenSequence seq;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const int id = vocab.longest_match(text.substr(pos));
        seq.ids.push_back(id);
        pos += vocab.bytes_of(id).size();
    }
    return seq;
}

std::string decode(std::span<const int> ids, const Vocabulary& vocab) {
    std::string out;
    for (int id : ids) {
        out += vocab.bytes_of(id);
    }
    return out;
}

} // namespace cwa
