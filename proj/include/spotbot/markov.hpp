#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace spotbot {

enum class MarkovUnit { word, character };
MarkovUnit parse_markov_unit(std::string_view text);

/// Order-k Markov sampler over words or characters (UTF-8 code points).
/// Training texts are concatenated with a separator so contexts never span
/// two texts. Sampling restarts from a random training context on dead ends.
class MarkovGenerator {
 public:
  MarkovGenerator(std::size_t order, MarkovUnit unit);

  void train(std::string_view text);
  /// Output has exactly `words` whitespace-separated words.
  std::string generate(std::size_t words, std::uint64_t seed) const;

  std::size_t order() const noexcept { return order_; }
  std::size_t context_count() const noexcept { return transitions_.size(); }

 private:
  std::vector<std::string> units_of(std::string_view text) const;

  std::size_t order_;
  MarkovUnit unit_;
  // Contexts are joined with '\x1f'; successors keep insertion multiplicity.
  std::map<std::string, std::vector<std::string>> transitions_;
  std::vector<std::vector<std::string>> starts_;
};

}  // namespace spotbot
