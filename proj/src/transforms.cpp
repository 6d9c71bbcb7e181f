#include "morphtest/transforms.hpp"

#include <algorithm>
#include <array>
#include <random>
#include <vector>

#include "morphtest/text.hpp"

namespace morphtest::transforms {
namespace {

using Rng = std::mt19937_64;

// Distributions in <random> are implementation-defined; these helpers keep
// results identical across standard libraries.
std::size_t pick(Rng& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

bool coin(Rng& rng, double p) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53 < p;
}

constexpr double kSpaceProbability = 0.15;

constexpr std::array<std::string_view, 16> kSentencePool = {
    "The weather was mild for most of the week.",
    "A train passed by in the distance.",
    "Several birds were sitting on the fence.",
    "The library opens at nine in the morning.",
    "Coffee was served in small white cups.",
    "The road to the village is lined with oak trees.",
    "Someone left a bicycle near the entrance.",
    "The museum added a new wing last year.",
    "Rain is expected later in the evening.",
    "The meeting room has a large round table.",
    "A cat slept on the windowsill all afternoon.",
    "The bakery on the corner sells fresh bread.",
    "Most of the lights in the building were off.",
    "The river was calm after the storm.",
    "A new bus line connects the two districts.",
    "The garden has a small pond with goldfish.",
};

constexpr std::array<std::pair<std::string_view, std::string_view>, 40> kThesaurus = {{
    {"good", "fine"},        {"great", "excellent"},  {"bad", "poor"},
    {"big", "large"},        {"small", "little"},     {"happy", "glad"},
    {"sad", "unhappy"},      {"fast", "quick"},       {"slow", "sluggish"},
    {"movie", "film"},       {"film", "movie"},       {"begin", "start"},
    {"start", "begin"},      {"buy", "purchase"},     {"help", "assist"},
    {"show", "display"},     {"smart", "clever"},     {"easy", "simple"},
    {"hard", "difficult"},   {"difficult", "hard"},   {"angry", "annoyed"},
    {"beautiful", "lovely"}, {"old", "aged"},         {"house", "home"},
    {"car", "automobile"},   {"child", "kid"},        {"man", "gentleman"},
    {"woman", "lady"},       {"quickly", "rapidly"},  {"large", "big"},
    {"tiny", "minute"},      {"funny", "amusing"},    {"boring", "dull"},
    {"terrible", "awful"},   {"awful", "terrible"},   {"wonderful", "marvelous"},
    {"friend", "companion"}, {"famous", "renowned"},  {"rich", "wealthy"},
    {"story", "tale"},
}};

constexpr std::array<std::string_view, 3> kTrailingPunctuation = {"!", "!!", "..."};

bool sentence_final(char c) { return c == '.' || c == '!' || c == '?'; }

}  // namespace

std::string insert_random_spaces(std::string_view text, std::uint64_t seed) {
  if (text.empty()) return {};
  std::vector<std::size_t> gaps;
  for (std::size_t i = 1; i < text.size(); ++i) {
    if (!text::is_space(text[i - 1]) && !text::is_space(text[i]) &&
        !text::is_utf8_continuation(text[i])) {
      gaps.push_back(i);
    }
  }
  if (gaps.empty()) return std::string(text) + ' ';

  Rng rng(seed);
  std::vector<std::size_t> chosen;
  for (auto g : gaps) {
    if (coin(rng, kSpaceProbability)) chosen.push_back(g);
  }
  if (chosen.empty()) chosen.push_back(gaps[pick(rng, gaps.size())]);

  std::string out;
  out.reserve(text.size() + chosen.size());
  std::size_t prev = 0;
  for (auto pos : chosen) {
    out.append(text.substr(prev, pos - prev));
    out.push_back(' ');
    prev = pos;
  }
  out.append(text.substr(prev));
  return out;
}

std::span<const std::string_view> sentence_pool() { return kSentencePool; }

std::string concat_random_sentence(std::string_view text, std::uint64_t seed) {
  Rng rng(seed);
  const std::string_view sentence = kSentencePool[pick(rng, kSentencePool.size())];
  const std::string_view head = text::rtrim(text);
  if (head.empty()) return std::string(sentence);
  std::string out(head);
  if (!sentence_final(out.back())) out.push_back('.');
  out.push_back(' ');
  out.append(sentence);
  return out;
}

std::string to_uppercase(std::string_view text, std::uint64_t /*seed*/) {
  return text::to_upper_ascii(text);
}

std::span<const std::pair<std::string_view, std::string_view>> thesaurus() {
  return kThesaurus;
}

std::string substitute_synonym(std::string_view text, std::uint64_t seed) {
  struct Hit {
    std::size_t pos;
    std::size_t len;
    std::string_view synonym;
  };
  std::vector<Hit> hits;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!text::is_ascii_alpha(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && text::is_ascii_alpha(text[j])) ++j;
    const auto word = text::to_lower_ascii(text.substr(i, j - i));
    for (const auto& [from, to] : kThesaurus) {
      if (from == word) {
        hits.push_back({i, j - i, to});
        break;
      }
    }
    i = j;
  }
  if (hits.empty()) return std::string(text);

  Rng rng(seed);
  const Hit& h = hits[pick(rng, hits.size())];
  std::string replacement(h.synonym);
  if (text[h.pos] >= 'A' && text[h.pos] <= 'Z') {
    replacement[0] = static_cast<char>(replacement[0] - 'a' + 'A');
  }
  std::string out(text.substr(0, h.pos));
  out += replacement;
  out.append(text.substr(h.pos + h.len));
  return out;
}

std::string swap_adjacent_characters(std::string_view text, std::uint64_t seed) {
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i + 1 < text.size(); ++i) {
    if (text::is_ascii_alpha(text[i]) && text::is_ascii_alpha(text[i + 1]) &&
        text[i] != text[i + 1]) {
      candidates.push_back(i);
    }
  }
  std::string out(text);
  if (candidates.empty()) return out;
  Rng rng(seed);
  const auto at = candidates[pick(rng, candidates.size())];
  std::swap(out[at], out[at + 1]);
  return out;
}

std::string append_punctuation(std::string_view text, std::uint64_t seed) {
  const auto head = text::rtrim(text);
  if (head.empty()) return std::string(text);
  Rng rng(seed);
  std::string out(head);
  out.append(kTrailingPunctuation[pick(rng, kTrailingPunctuation.size())]);
  return out;
}

std::string shuffle_sentences(std::string_view text, std::uint64_t seed) {
  auto sentences = text::split_sentences(text);
  // An unterminated tail would fuse with whatever follows it, so it stays last.
  std::string tail;
  if (!sentences.empty()) {
    const char last = sentences.back().back();
    if (last != '.' && last != '!' && last != '?') {
      tail = std::move(sentences.back());
      sentences.pop_back();
    }
  }
  if (sentences.size() < 2) return std::string(text);
  const auto original = sentences;
  Rng rng(seed);
  for (std::size_t i = sentences.size() - 1; i > 0; --i) {
    std::swap(sentences[i], sentences[pick(rng, i + 1)]);
  }
  if (sentences == original) {
    std::rotate(sentences.begin(), sentences.begin() + 1, sentences.end());
  }
  std::string out;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out += sentences[i];
  }
  if (!tail.empty()) out += ' ' + tail;
  return out;
}

}  // namespace morphtest::transforms
