#pragma once

#include <span>
#include <vector>

#include "digirl/core/types.hpp"

// Instruction vocabulary. Instruction token ids are disjoint from typing
// token ids; query words map one-to-one between the two.
namespace digirl::core::vocab {

inline constexpr TokenId kGoTo = 1;
inline constexpr TokenId kSearchFor = 2;
inline constexpr TokenId kSelectFirst = 3;
inline constexpr TokenId kSiteBase = 10;
inline constexpr TokenId kWordBase = 20;

constexpr TokenId site_token(int site) { return kSiteBase + site; }
constexpr bool is_site(TokenId t) { return t >= kSiteBase && t < kWordBase; }
constexpr TokenId word_token(TokenId typed) { return kWordBase + typed; }
constexpr bool is_word(TokenId t) { return t > kWordBase; }
constexpr TokenId typed_of(TokenId instr) { return instr - kWordBase; }

/// Query words of an instruction, already mapped to typing tokens.
inline std::vector<TokenId> query_of(std::span<const TokenId> instruction) {
  std::vector<TokenId> out;
  for (auto t : instruction) {
    if (is_word(t)) out.push_back(typed_of(t));
  }
  return out;
}

}  // namespace digirl::core::vocab
