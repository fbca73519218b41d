#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace sguide {

enum class Relation { Left, Right, Above, Below, Near };

// "left", "right", "above", "below", "near"
std::string_view relation_name(Relation r);
Relation relation_from_name(std::string_view name);

// Phrase used in the prompt grammar, e.g. "to the left of".
std::string_view relation_phrase(Relation r);

inline constexpr Relation kDirectionalRelations[] = {Relation::Left, Relation::Right,
                                                     Relation::Above, Relation::Below};

struct VocabularyEntry {
  std::string id;
  std::string display_name;
  int template_side = 0;
  double template_sigma = 0.0;
};

class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<VocabularyEntry> entries);

  // 16 blob-world objects with spread-out template sizes.
  static Vocabulary default_vocabulary();

  std::size_t size() const { return entries_.size(); }
  const std::vector<VocabularyEntry>& entries() const { return entries_; }
  const VocabularyEntry& at(std::size_t index) const { return entries_.at(index); }

  std::optional<std::size_t> find_id(std::string_view id) const;
  std::size_t index_of(std::string_view id) const;  // throws UnknownObject

 private:
  std::vector<VocabularyEntry> entries_;
};

struct PromptTriplet {
  std::string object_a;
  Relation relation = Relation::Left;
  std::string object_b;
  std::string raw_text;

  friend bool operator==(const PromptTriplet&, const PromptTriplet&) = default;
};

class UnknownObject : public std::invalid_argument {
 public:
  UnknownObject(const std::string& token, std::size_t begin, std::size_t end);
  const std::string& token() const { return token_; }
  std::size_t begin() const { return begin_; }
  std::size_t end() const { return end_; }

 private:
  std::string token_;
  std::size_t begin_;
  std::size_t end_;
};

class MalformedPrompt : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Both sides name the same object.
class InvalidTriplet : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Parses "a(n) <A> {to the left of|to the right of|above|below|near} a(n) <B>",
// case-insensitively. Object names are matched longest-first against the
// vocabulary display names.
PromptTriplet parse_prompt(std::string_view text, const Vocabulary& vocab);

// Canonical text for a triplet; parse_prompt(render_prompt(t)) == t.
std::string render_prompt(std::string_view object_a, Relation relation,
                          std::string_view object_b, const Vocabulary& vocab);
PromptTriplet make_triplet(std::string_view object_a, Relation relation,
                           std::string_view object_b, const Vocabulary& vocab);

// pair_count distinct unordered object pairs, each emitted under Left, Right,
// Above, Below (pair-major). Deterministic in rng_seed.
std::vector<PromptTriplet> generate_benchmark(const Vocabulary& vocab, int pair_count,
                                              std::uint64_t rng_seed);

nlohmann::json triplet_to_json(const PromptTriplet& t);
PromptTriplet triplet_from_json(const nlohmann::json& j, const Vocabulary& vocab);

nlohmann::json vocabulary_to_json(const Vocabulary& vocab);
Vocabulary vocabulary_from_json(const nlohmann::json& j);

}  // namespace sguide
