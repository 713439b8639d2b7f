#include "pieceid/ranking.hpp"

#include <algorithm>
#include <unordered_set>

#include "pieceid/error.hpp"

namespace pieceid {

std::string_view to_string(Direction d) { return d == Direction::a2s ? "a2s" : "s2a"; }

Direction parse_direction(std::string_view s) {
  if (s == "a2s") return Direction::a2s;
  if (s == "s2a") return Direction::s2a;
  throw Error(ErrorCode::InvalidConfig, "unknown direction '" + std::string(s) + "' (expected a2s or s2a)");
}

void complete_ranking(RankedList& rl, const std::vector<std::string>& corpus_ids) {
  std::unordered_set<std::string_view> scored;
  for (const auto& it : rl.items) scored.insert(it.piece_id);
  rl.unscored.clear();
  for (const auto& id : corpus_ids) {
    if (!scored.contains(id)) rl.unscored.push_back(id);
  }
  std::sort(rl.unscored.begin(), rl.unscored.end());
}

}  // namespace pieceid
