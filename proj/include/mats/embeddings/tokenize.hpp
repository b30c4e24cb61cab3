#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mats {

using Tokens = std::vector<std::string>;

// Lowercases ASCII letters, deletes ASCII punctuation and splits on
// whitespace. Bytes >= 0x80 pass through untouched.
Tokens tokenize(std::string_view text);

std::string join(const Tokens& tokens, std::string_view sep = " ");

// 64-bit FNV-1a: offset basis 0xcbf29ce484222325, prime 0x100000001b3,
// applied bytewise.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace mats
