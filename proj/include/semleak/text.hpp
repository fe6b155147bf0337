#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

// Small UTF-8 and hashing helpers shared across modules.
namespace semleak::text {

std::string_view trim(std::string_view s);
std::string_view trim_left(std::string_view s);
std::string_view trim_right(std::string_view s);

bool is_space(char c);

// ASCII-only case folding; multi-byte sequences pass through untouched.
std::string ascii_lower(std::string_view s);

// Decodes the code point starting at `pos`. Invalid bytes decode as U+FFFD
// with length 1.
char32_t decode_at(std::string_view s, std::size_t pos, std::size_t* length = nullptr);

// Decodes the code point that ends right before `pos`.
char32_t decode_before(std::string_view s, std::size_t pos);

// True for letters and digits of space-delimited scripts. Ideographic and
// syllabic scripts written without spaces (CJK, kana, hangul) are not word
// characters, so terms in those scripts match as plain substrings.
bool is_word_codepoint(char32_t cp);

// Splits on whitespace and strips leading/trailing ASCII punctuation from
// each piece; drops pieces that become empty.
std::vector<std::string> simple_tokens(std::string_view s);

// Stable 64-bit hash (FNV-1a followed by a splitmix64 finalizer).
std::uint64_t stable_hash(std::string_view s, std::uint64_t seed = 0);

// Maps a hash to [0, 1).
double unit_interval(std::uint64_t h);

// Lower-case hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

// Shortest decimal text that round-trips the double ("0", "0.5", "1.5").
std::string format_number(double value);

// UTC timestamp, ISO-8601 with seconds precision.
std::string utc_timestamp_now();

}  // namespace semleak::text
