#include <doctest.h>

#include <string>
#include <vector>

#include "cwa/rng.hpp"
#include "cwa/wordcount.hpp"

using namespace cwa;

TEST_CASE("count_words on the worked examples") {
    CHECK(count_words("The dog runs") == 3);
    CHECK(count_words("The dog .") == 2);
    CHECK(count_words("The dog runs fast .") == 4);
    CHECK(count_words("") == 0);
}

TEST_CASE("apostrophes and hyphens separate words") {
    CHECK(count_words("l'amico") == 2);
    CHECK(count_words("well-known") == 2);
    CHECK(count_words("dall'inizio alla fine") == 4);
}

TEST_CASE("accented Italian letters are word characters") {
    CHECK(count_words("Questa \xc3\xa8 una frase") == 4); // "Questa è una frase"
    CHECK(count_words("perch\xc3\xa9") == 1);             // "perché"
    CHECK(count_words("caff\xc3\xa8 caldo") == 2);        // "caffè caldo"
}

TEST_CASE("digits count as word characters") {
    CHECK(count_words("3 words here") == 3);
    CHECK(count_words("x2") == 1);
}

TEST_CASE("count is invariant to extra separators") {
    const std::size_t base = count_words("uno due tre");
    CHECK(count_words("  uno due tre") == base);
    CHECK(count_words("uno due tre   ") == base);
    CHECK(count_words("uno,, due...tre") == base);
    CHECK(count_words("\tuno\n due\r\n tre!") == base);
}

TEST_CASE("invalid UTF-8 bytes act as separators") {
    CHECK(count_words("ab\xffzz") == 2);
    CHECK(count_words("\xc3") == 0);        // lone lead byte
    CHECK(count_words("a\xc3") == 1);       // incomplete tail never counts
    CHECK(count_words("\x80\x80") == 0);    // stray continuations
    CHECK(count_words("a\xe0\xa0z") == 2);  // truncated 3-byte sequence splits
}

TEST_CASE("incremental counting matches batch counting on chosen splits") {
    WordCounter counter;
    counter.feed("The do");
    CHECK(counter.feed("g runs") == 3);

    // An empty fragment changes nothing.
    CHECK(counter.feed("") == 3);

    // Splitting at every byte.
    WordCounter byte_by_byte;
    const std::string text = "The dog .";
    for (char c : text) {
        byte_by_byte.feed(std::string_view(&c, 1));
    }
    CHECK(byte_by_byte.count() == count_words(text));
    CHECK(byte_by_byte.count() == 2);
}

TEST_CASE("a multi-byte character split across fragments still counts once") {
    WordCounter counter;
    counter.feed("caff\xc3");
    CHECK(counter.feed("\xa8 caldo") == 2);
}

TEST_CASE("incremental equals batch on random strings and fragmentations") {
    Xoshiro256 rng(211);
    const std::string alphabet = "ab c.'-\xc3\xa8\xc3\xa9\xe2\x82\xac\xff\x80 12";
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t len = rng.next_below(32);
        std::string text;
        for (std::size_t i = 0; i < len; ++i) {
            text += alphabet[rng.next_below(alphabet.size())];
        }
        const std::size_t expected = count_words(text);

        WordCounter counter;
        std::size_t pos = 0, last = 0;
        while (pos < text.size()) {
            const std::size_t take = 1 + rng.next_below(5);
            const std::size_t n = std::min(take, text.size() - pos);
            last = counter.feed(std::string_view(text).substr(pos, n));

            // Every intermediate count must equal the batch count of the
            // prefix fed so far.
            CHECK(last == count_words(std::string_view(text).substr(0, pos + n)));
            pos += n;
        }
        CHECK(counter.count() == expected);
    }
}
