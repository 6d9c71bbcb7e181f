#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>

// Function-based input transformations. Each is a pure function of
// (text, seed); the same pair always yields the same string.
namespace morphtest::transforms {

/// Inserts ASCII spaces between adjacent non-space characters (never inside
/// a UTF-8 sequence). Removing all whitespace from the result gives the
/// input with its whitespace removed. Non-empty input always gets at least
/// one space; text without an interior gap gets a trailing one.
std::string insert_random_spaces(std::string_view text, std::uint64_t seed);

/// Appends a seed-selected sentence from sentence_pool(). The source is
/// right-trimmed and gets a period if it lacks sentence-final punctuation;
/// the separator is one space. Empty source yields the sentence alone.
std::string concat_random_sentence(std::string_view text, std::uint64_t seed);

std::span<const std::string_view> sentence_pool();

/// ASCII upper-casing; the seed is unused.
std::string to_uppercase(std::string_view text, std::uint64_t seed);

/// Replaces one seed-selected word that has an entry in thesaurus() with one
/// of its synonyms, keeping a leading capital. Unchanged when no word has
/// an entry.
std::string substitute_synonym(std::string_view text, std::uint64_t seed);

std::span<const std::pair<std::string_view, std::string_view>> thesaurus();

/// Swaps one seed-selected pair of adjacent, distinct ASCII letters inside a
/// word. Unchanged when no such pair exists.
std::string swap_adjacent_characters(std::string_view text, std::uint64_t seed);

/// Appends "!", "!!" or "..." to the right-trimmed text. Empty stays empty.
std::string append_punctuation(std::string_view text, std::uint64_t seed);

/// Permutes the sentences of a multi-sentence text, guaranteeing a different
/// order whenever the sentences are not all identical. Sentences are
/// rejoined with single spaces. A trailing fragment without terminal
/// punctuation keeps its place at the end. Text with fewer than two
/// terminated sentences is returned unchanged.
std::string shuffle_sentences(std::string_view text, std::uint64_t seed);

}  // namespace morphtest::transforms
