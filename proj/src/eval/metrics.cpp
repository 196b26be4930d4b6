#include "cascadeqa/eval/metrics.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <vector>

#include "cascadeqa/util/error.hpp"

namespace cascadeqa {
namespace {

bool is_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return (u >= 33 && u <= 47) || (u >= 58 && u <= 64) || (u >= 91 && u <= 96) || (u >= 123 && u <= 126);
}

std::vector<std::string> split(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && s[i] == ' ') ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ') ++i;
    if (i > start) out.emplace_back(s.substr(start, i - start));
  }
  return out;
}

}  // namespace

std::string normalize_answer(std::string_view s) {
  std::string cleaned;
  cleaned.reserve(s.size());
  for (char c : s) {
    if (is_punct(c)) continue;
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    if (c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') c = ' ';
    cleaned += c;
  }
  std::string out;
  for (const auto& w : split(cleaned)) {
    if (w == "a" || w == "an" || w == "the") continue;
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

int exact_match(std::string_view prediction, std::span<const std::string> aliases) {
  if (aliases.empty()) throw ContractError("exact_match needs at least one alias");
  const std::string p = normalize_answer(prediction);
  for (const auto& a : aliases) {
    if (normalize_answer(a) == p) return 1;
  }
  return 0;
}

double token_f1_single(std::string_view prediction, std::string_view alias) {
  const auto pred = split(normalize_answer(prediction));
  const auto gold = split(normalize_answer(alias));
  if (pred.empty() || gold.empty()) return pred.empty() && gold.empty() ? 1.0 : 0.0;
  std::map<std::string, int> counts;
  for (const auto& t : gold) ++counts[t];
  int common = 0;
  for (const auto& t : pred) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return 0.0;
  const double precision = static_cast<double>(common) / static_cast<double>(pred.size());
  const double recall = static_cast<double>(common) / static_cast<double>(gold.size());
  return 2.0 * precision * recall / (precision + recall);
}

double token_f1(std::string_view prediction, std::span<const std::string> aliases) {
  if (aliases.empty()) throw ContractError("token_f1 needs at least one alias");
  double best = 0.0;
  for (const auto& a : aliases) best = std::max(best, token_f1_single(prediction, a));
  return best;
}

}  // namespace cascadeqa
