#pragma once

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "core.hpp"

/**
 * @file zero_shot.hpp
 *
 * @brief Text layer of the caption + chat-model pipeline: caption conditioning prompts,
 * the adjudication prompt and parsing of free-text answers.
 */

namespace trapdex::zero_shot {

struct CaptionPrompt {
  std::string id;
  std::string text;
};

/// Conditional caption prefixes, in ablation-table order. "none" is unconditioned captioning.
inline std::vector<CaptionPrompt> caption_prompt_catalog() {
  return {
      {"none", ""},
      {"cute_picture", "The picture shows a cute "},
      {"see_cute", "I see cute "},
      {"species", "The species of the animal is "},
      {"animal_in_picture", "The animal in the picture is "},
      {"running", "A running "},
      {"peeking", "A peeking "},
      {"called", "This animal is called "},
      {"name", "The name of the animal "},
  };
}

inline std::optional<CaptionPrompt> find_caption_prompt(std::string_view id) {
  for (auto& p : caption_prompt_catalog())
    if (p.id == id) return p;
  return std::nullopt;
}

inline std::string build_adjudication_prompt(std::span<const std::string> categories, std::string_view caption) {
  if (categories.empty()) throw Error("adjudication prompt needs at least one category");
  std::string list;
  for (std::size_t i = 0; i < categories.size(); ++i) {
    const auto& c = categories[i];
    if (c.empty()) throw Error("category names must be non-empty");
    std::string lower(c);
    for (auto& ch : lower) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (lower == kEmptyName) throw Error("the 'empty' category must not be offered to the language model");
    if (c.find(',') != std::string::npos) throw Error("category '" + c + "' contains a comma");
    if (i) list += ", ";
    list += c;
  }
  std::string out = "Write a one-word answer to this question: \"Which of the following animals is in the picture: ";
  out += list;
  out += "?\" Consider this image description in the answer: ";
  out += caption;
  out += '.';
  return out;
}

namespace detail {

inline std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline bool contains_phrase(const std::vector<std::string>& haystack, const std::vector<std::string>& phrase) {
  if (phrase.empty() || phrase.size() > haystack.size()) return false;
  for (std::size_t i = 0; i + phrase.size() <= haystack.size(); ++i) {
    std::size_t j = 0;
    while (j < phrase.size() && haystack[i + j] == phrase[j]) ++j;
    if (j == phrase.size()) return true;
  }
  return false;
}

}  // namespace detail

/**
 * Maps a free-text answer to a category: case-insensitive whole-word (or whole-phrase) matching.
 * Exactly one distinct category matched gives that category; none or several give nullopt (empty).
 */
inline std::optional<std::string> parse_answer(std::string_view answer, std::span<const std::string> categories) {
  const auto tokens = detail::words(answer);
  std::set<std::vector<std::string>> matched;
  std::optional<std::string> hit;
  for (const auto& c : categories) {
    auto phrase = detail::words(c);
    if (phrase.empty() || !detail::contains_phrase(tokens, phrase)) continue;
    if (matched.insert(std::move(phrase)).second) hit = c;
  }
  if (matched.size() != 1) return std::nullopt;
  return hit;
}

/// FNV-1a 64-bit over the prompt bytes, as 16 lowercase hex digits. Keys replay files.
inline std::string prompt_hash(std::string_view prompt) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : prompt) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Text-in/text-out model client.
class TextClient {
 public:
  virtual ~TextClient() = default;
  virtual std::string complete(std::string_view prompt) = 0;
};

/// Serves canned responses from JSON lines `{"prompt_hash", "response"}`.
class ReplayClient final : public TextClient {
 public:
  ReplayClient() = default;

  static ReplayClient from_jsonl(std::string_view text, std::string_view source = "<replay>") {
    ReplayClient c;
    std::size_t start = 0, line_no = 0;
    while (start < text.size()) {
      auto end = text.find('\n', start);
      if (end == std::string_view::npos) end = text.size();
      ++line_no;
      const auto line = text.substr(start, end - start);
      start = end + 1;
      if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        c.add_hashed(j.at("prompt_hash").get<std::string>(), j.at("response").get<std::string>());
      } catch (const nlohmann::json::exception& e) {
        throw Error(std::string(source) + " line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    return c;
  }

  static ReplayClient from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return from_jsonl(text, path);
  }

  void add(std::string_view prompt, std::string response) { add_hashed(prompt_hash(prompt), std::move(response)); }

  void add_hashed(std::string hash, std::string response) { responses_[std::move(hash)] = std::move(response); }

  bool has(std::string_view prompt) const { return responses_.count(prompt_hash(prompt)) > 0; }

  std::string complete(std::string_view prompt) override {
    auto it = responses_.find(prompt_hash(prompt));
    if (it == responses_.end()) throw Error("no recorded response for prompt hash " + prompt_hash(prompt));
    return it->second;
  }

 private:
  std::unordered_map<std::string, std::string> responses_;
};

}  // namespace trapdex::zero_shot
