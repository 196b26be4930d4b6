#pragma once

#include <span>
#include <string>
#include <string_view>

namespace cascadeqa {

// Lowercase, drop ASCII punctuation, drop the articles a/an/the, collapse
// whitespace. Idempotent.
std::string normalize_answer(std::string_view s);

// 1 iff the normalized prediction equals some normalized alias.
int exact_match(std::string_view prediction, std::span<const std::string> aliases);

// Token-multiset F1 of normalized strings, maximized over aliases; 0 when no
// token overlaps.
double token_f1(std::string_view prediction, std::span<const std::string> aliases);
double token_f1_single(std::string_view prediction, std::string_view alias);

}  // namespace cascadeqa
