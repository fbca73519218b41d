#include "sguide/prompt.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <set>
#include <utility>

namespace sguide {

namespace {

struct Token {
  std::string text;  // lower-cased
  std::size_t begin = 0;
  std::size_t end = 0;
};

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i >= text.size()) break;
    Token tok;
    tok.begin = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) {
      tok.text.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[i]))));
      ++i;
    }
    tok.end = i;
    tokens.push_back(std::move(tok));
  }
  return tokens;
}

std::vector<std::string> split_words(std::string_view phrase) {
  std::vector<std::string> words;
  for (auto& t : tokenize(phrase)) words.push_back(std::move(t.text));
  return words;
}

bool is_article(const Token& t) { return t.text == "a" || t.text == "an"; }

bool matches_at(const std::vector<Token>& tokens, std::size_t pos,
                const std::vector<std::string>& words) {
  if (pos + words.size() > tokens.size()) return false;
  for (std::size_t k = 0; k < words.size(); ++k)
    if (tokens[pos + k].text != words[k]) return false;
  return true;
}

struct RelationMatch {
  Relation relation;
  std::size_t length;
};

std::optional<RelationMatch> relation_at(const std::vector<Token>& tokens, std::size_t pos) {
  constexpr Relation all[] = {Relation::Left, Relation::Right, Relation::Above, Relation::Below,
                              Relation::Near};
  for (Relation r : all) {
    const auto words = split_words(relation_phrase(r));
    if (matches_at(tokens, pos, words)) return RelationMatch{r, words.size()};
  }
  return std::nullopt;
}

// Vocabulary display names split into words, longest first.
std::vector<std::pair<std::size_t, std::vector<std::string>>> names_longest_first(
    const Vocabulary& vocab) {
  std::vector<std::pair<std::size_t, std::vector<std::string>>> names;
  for (std::size_t i = 0; i < vocab.size(); ++i)
    names.emplace_back(i, split_words(vocab.at(i).display_name));
  std::stable_sort(names.begin(), names.end(), [](const auto& a, const auto& b) {
    return a.second.size() > b.second.size();
  });
  return names;
}

std::string span_text(std::string_view text, const std::vector<Token>& tokens, std::size_t first,
                      std::size_t last) {
  if (first >= last) return {};
  return std::string(text.substr(tokens[first].begin, tokens[last - 1].end - tokens[first].begin));
}

bool starts_with_vowel(std::string_view s) {
  if (s.empty()) return false;
  const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(s.front())));
  return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
}

}  // namespace

std::string_view relation_name(Relation r) {
  switch (r) {
    case Relation::Left: return "left";
    case Relation::Right: return "right";
    case Relation::Above: return "above";
    case Relation::Below: return "below";
    case Relation::Near: return "near";
  }
  return "left";
}

Relation relation_from_name(std::string_view name) {
  if (name == "left") return Relation::Left;
  if (name == "right") return Relation::Right;
  if (name == "above") return Relation::Above;
  if (name == "below") return Relation::Below;
  if (name == "near") return Relation::Near;
  throw std::invalid_argument("unknown relation '" + std::string(name) + "'");
}

std::string_view relation_phrase(Relation r) {
  switch (r) {
    case Relation::Left: return "to the left of";
    case Relation::Right: return "to the right of";
    case Relation::Above: return "above";
    case Relation::Below: return "below";
    case Relation::Near: return "near";
  }
  return "to the left of";
}

Vocabulary::Vocabulary(std::vector<VocabularyEntry> entries) : entries_(std::move(entries)) {
  std::set<std::string> ids;
  for (const auto& e : entries_) {
    if (e.id.empty()) throw std::invalid_argument("vocabulary: empty identifier");
    if (!ids.insert(e.id).second) {
      throw std::invalid_argument("vocabulary: duplicate identifier '" + e.id + "'");
    }
    if (e.template_side <= 0 || e.template_side % 2 == 0) {
      throw std::invalid_argument("vocabulary: template side of '" + e.id + "' must be odd");
    }
    if (!(e.template_sigma > 0.0)) {
      throw std::invalid_argument("vocabulary: template sigma of '" + e.id + "' must be > 0");
    }
    if (split_words(e.display_name).empty()) {
      throw std::invalid_argument("vocabulary: empty display name for '" + e.id + "'");
    }
  }
}

Vocabulary Vocabulary::default_vocabulary() {
  // Sizes grow geometrically so that any two objects differ in scale by at
  // least ~11%; side covers +-2.5 sigma.
  const std::pair<const char*, const char*> names[] = {
      {"apple", "apple"},       {"cup", "cup"},
      {"bird", "bird"},         {"clock", "clock"},
      {"bottle", "bottle"},     {"cat", "cat"},
      {"laptop", "laptop"},     {"potted_plant", "potted plant"},
      {"dog", "dog"},           {"chair", "chair"},
      {"teddy_bear", "teddy bear"}, {"bicycle", "bicycle"},
      {"umbrella", "umbrella"}, {"horse", "horse"},
      {"car", "car"},           {"traffic_light", "traffic light"},
  };
  std::vector<VocabularyEntry> entries;
  double sigma = 0.75;
  for (const auto& [id, display] : names) {
    const double rounded = std::round(sigma * 100.0) / 100.0;
    const int side = 2 * static_cast<int>(std::ceil(2.5 * rounded)) + 1;
    entries.push_back({id, display, side, rounded});
    sigma *= 1.115;
  }
  return Vocabulary(std::move(entries));
}

std::optional<std::size_t> Vocabulary::find_id(std::string_view id) const {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].id == id) return i;
  return std::nullopt;
}

std::size_t Vocabulary::index_of(std::string_view id) const {
  if (auto i = find_id(id)) return *i;
  throw UnknownObject(std::string(id), 0, id.size());
}

UnknownObject::UnknownObject(const std::string& token, std::size_t begin, std::size_t end)
    : std::invalid_argument("unknown object '" + token + "' at [" + std::to_string(begin) + ", " +
                            std::to_string(end) + ")"),
      token_(token),
      begin_(begin),
      end_(end) {}

PromptTriplet parse_prompt(std::string_view text, const Vocabulary& vocab) {
  const auto tokens = tokenize(text);
  if (tokens.empty() || !is_article(tokens.front())) {
    throw MalformedPrompt("prompt must start with 'a' or 'an': '" + std::string(text) + "'");
  }
  // The relation phrase is the first one that follows at least one object word.
  std::optional<RelationMatch> rel;
  std::size_t rel_pos = 0;
  for (std::size_t p = 2; p < tokens.size() && !rel; ++p) {
    if (auto m = relation_at(tokens, p)) {
      rel = m;
      rel_pos = p;
    }
  }
  if (!rel) {
    throw MalformedPrompt("no spatial relation phrase in '" + std::string(text) + "'");
  }

  const auto names = names_longest_first(vocab);
  auto match_object = [&](std::size_t first, std::size_t last) -> std::size_t {
    for (const auto& [index, words] : names) {
      if (first + words.size() == last && matches_at(tokens, first, words)) return index;
    }
    if (first >= last) {
      throw MalformedPrompt("missing object name in '" + std::string(text) + "'");
    }
    throw UnknownObject(span_text(text, tokens, first, last), tokens[first].begin,
                        tokens[last - 1].end);
  };

  const std::size_t a_index = match_object(1, rel_pos);
  const std::size_t b_article = rel_pos + rel->length;
  if (b_article >= tokens.size() || !is_article(tokens[b_article])) {
    throw MalformedPrompt("expected 'a' or 'an' after the relation in '" + std::string(text) +
                          "'");
  }
  const std::size_t b_index = match_object(b_article + 1, tokens.size());
  if (a_index == b_index) {
    throw InvalidTriplet("both objects are '" + vocab.at(a_index).id + "'");
  }
  return PromptTriplet{vocab.at(a_index).id, rel->relation, vocab.at(b_index).id,
                       std::string(text)};
}

std::string render_prompt(std::string_view object_a, Relation relation, std::string_view object_b,
                          const Vocabulary& vocab) {
  const auto& a = vocab.at(vocab.index_of(object_a)).display_name;
  const auto& b = vocab.at(vocab.index_of(object_b)).display_name;
  std::string text = starts_with_vowel(a) ? "an " : "a ";
  text += a;
  text += ' ';
  text += relation_phrase(relation);
  text += starts_with_vowel(b) ? " an " : " a ";
  text += b;
  return text;
}

PromptTriplet make_triplet(std::string_view object_a, Relation relation, std::string_view object_b,
                           const Vocabulary& vocab) {
  if (object_a == object_b) {
    throw InvalidTriplet("both objects are '" + std::string(object_a) + "'");
  }
  return PromptTriplet{std::string(object_a), relation, std::string(object_b),
                       render_prompt(object_a, relation, object_b, vocab)};
}

std::vector<PromptTriplet> generate_benchmark(const Vocabulary& vocab, int pair_count,
                                              std::uint64_t rng_seed) {
  const std::size_t k = vocab.size();
  if (k < 2) throw std::invalid_argument("generate_benchmark: vocabulary needs >= 2 objects");
  const std::size_t available = k * (k - 1) / 2;
  if (pair_count <= 0 || static_cast<std::size_t>(pair_count) > available) {
    throw std::invalid_argument("generate_benchmark: pair_count " + std::to_string(pair_count) +
                                " outside [1, " + std::to_string(available) + "]");
  }
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(available);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) pairs.emplace_back(i, j);

  std::mt19937_64 rng(rng_seed);
  for (std::size_t i = pairs.size() - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(pairs[i], pairs[pick(rng)]);
  }

  std::vector<PromptTriplet> out;
  out.reserve(static_cast<std::size_t>(pair_count) * 4);
  for (int p = 0; p < pair_count; ++p) {
    auto [i, j] = pairs[static_cast<std::size_t>(p)];
    // Which object is named first is itself sampled.
    if (rng() & 1U) std::swap(i, j);
    for (Relation r : kDirectionalRelations)
      out.push_back(make_triplet(vocab.at(i).id, r, vocab.at(j).id, vocab));
  }
  return out;
}

nlohmann::json triplet_to_json(const PromptTriplet& t) {
  nlohmann::json j;
  j["a"] = t.object_a;
  j["r"] = std::string(relation_name(t.relation));
  j["b"] = t.object_b;
  j["text"] = t.raw_text;
  return j;
}

PromptTriplet triplet_from_json(const nlohmann::json& j, const Vocabulary& vocab) {
  PromptTriplet t;
  t.object_a = j.at("a").get<std::string>();
  t.relation = relation_from_name(j.at("r").get<std::string>());
  t.object_b = j.at("b").get<std::string>();
  vocab.index_of(t.object_a);
  vocab.index_of(t.object_b);
  if (t.object_a == t.object_b) throw InvalidTriplet("both objects are '" + t.object_a + "'");
  t.raw_text = j.contains("text") ? j.at("text").get<std::string>()
                                  : render_prompt(t.object_a, t.relation, t.object_b, vocab);
  return t;
}

nlohmann::json vocabulary_to_json(const Vocabulary& vocab) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : vocab.entries()) {
    arr.push_back({{"id", e.id},
                   {"name", e.display_name},
                   {"side", e.template_side},
                   {"sigma", e.template_sigma}});
  }
  return arr;
}

Vocabulary vocabulary_from_json(const nlohmann::json& j) {
  std::vector<VocabularyEntry> entries;
  for (const auto& e : j) {
    entries.push_back({e.at("id").get<std::string>(), e.at("name").get<std::string>(),
                       e.at("side").get<int>(), e.at("sigma").get<double>()});
  }
  return Vocabulary(std::move(entries));
}

}  // namespace sguide
