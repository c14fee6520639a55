#include "spotbot/markov.hpp"

#include <random>
#include <sstream>

#include "spotbot/types.hpp"

namespace spotbot {

MarkovUnit parse_markov_unit(std::string_view text) {
  if (text == "word") return MarkovUnit::word;
  if (text == "char" || text == "character") return MarkovUnit::character;
  throw ValidationError("unknown markov unit '" + std::string(text) + "' (want word|char)");
}

MarkovGenerator::MarkovGenerator(std::size_t order, MarkovUnit unit) : order_(order), unit_(unit) {
  if (order < 1) throw ValidationError("markov: order must be >= 1");
}

namespace {

bool is_space_unit(const std::string& u) {
  return u.size() == 1 && (u[0] == ' ' || u[0] == '\t' || u[0] == '\n' || u[0] == '\r');
}

std::string join_context(const std::vector<std::string>& units, std::size_t begin, std::size_t count) {
  std::string key;
  for (std::size_t i = 0; i < count; ++i) {
    if (i) key += '\x1f';
    key += units[begin + i];
  }
  return key;
}

}  // namespace

std::vector<std::string> MarkovGenerator::units_of(std::string_view text) const {
  std::vector<std::string> units;
  if (unit_ == MarkovUnit::word) {
    std::istringstream in{std::string(text)};
    std::string w;
    while (in >> w) units.push_back(w);
    return units;
  }
  // Code points; whitespace runs collapse to one space.
  for (std::size_t i = 0; i < text.size();) {
    const auto lead = static_cast<unsigned char>(text[i]);
    std::size_t len = lead < 0x80 ? 1 : lead < 0xE0 ? 2 : lead < 0xF0 ? 3 : 4;
    len = std::min(len, text.size() - i);
    std::string unit(text.substr(i, len));
    i += len;
    if (is_space_unit(unit)) {
      if (units.empty() || units.back() == " ") continue;
      unit = " ";
    }
    units.push_back(std::move(unit));
  }
  while (!units.empty() && units.back() == " ") units.pop_back();
  return units;
}

void MarkovGenerator::train(std::string_view text) {
  const auto units = units_of(text);
  if (units.size() <= order_) return;
  starts_.emplace_back(units.begin(), units.begin() + static_cast<std::ptrdiff_t>(order_));
  for (std::size_t i = 0; i + order_ < units.size(); ++i)
    transitions_[join_context(units, i, order_)].push_back(units[i + order_]);
}

std::string MarkovGenerator::generate(std::size_t words, std::uint64_t seed) const {
  if (words == 0) return {};
  if (starts_.empty()) throw ValidationError("markov: generator has no training text longer than the order");
  std::mt19937_64 rng(seed);
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };

  std::vector<std::string> out;
  std::size_t started = 0;  // words begun so far
  bool in_space = true;
  auto push = [&](const std::string& u) {
    const bool space = unit_ == MarkovUnit::character && is_space_unit(u);
    if (unit_ == MarkovUnit::word || (!space && in_space)) ++started;
    in_space = unit_ == MarkovUnit::word || space;
    out.push_back(u);
  };
  auto restart = [&] {
    if (unit_ == MarkovUnit::character && !out.empty()) push(" ");
    for (const auto& u : starts_[pick(starts_.size())]) push(u);
  };

  // A word is complete once the next one has begun (or, for words, at once).
  const std::size_t target = unit_ == MarkovUnit::word ? words : words + 1;
  const std::size_t limit = 1000 * (words + order_) + 1000;
  restart();
  for (std::size_t steps = 0; started < target; ++steps) {
    if (steps > limit) break;
    const std::vector<std::string> context(out.end() - static_cast<std::ptrdiff_t>(order_), out.end());
    const auto it = transitions_.find(join_context(context, 0, order_));
    if (it == transitions_.end()) {
      restart();
      continue;
    }
    push(it->second[pick(it->second.size())]);
  }

  std::string joined;
  for (const auto& u : out) {
    if (unit_ == MarkovUnit::word && !joined.empty()) joined += ' ';
    joined += u;
  }
  std::istringstream in(joined);
  std::string result, w;
  std::size_t count = 0;
  while (count < words && in >> w) {
    if (count++) result += ' ';
    result += w;
  }
  if (count < words) throw Error("markov: generation stalled before reaching the requested length");
  return result;
}

}  // namespace spotbot
