#include "guidecqr/text.hpp"

namespace guidecqr {

namespace {

bool is_token_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
         (c >= 'A' && c <= 'Z') || c >= 0x80;
}

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

bool is_terminator(char c) { return c == '.' || c == '?' || c == '!'; }

char lower_ascii(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    if (is_token_byte(static_cast<unsigned char>(c))) {
      current.push_back(lower_ascii(c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::string_view trim(std::string_view s) {
  std::size_t begin = 0;
  while (begin < s.size() && is_space(static_cast<unsigned char>(s[begin])))
    ++begin;
  std::size_t end = s.size();
  while (end > begin && is_space(static_cast<unsigned char>(s[end - 1]))) --end;
  return s.substr(begin, end - begin);
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = lower_ascii(c);
  return out;
}

std::string normalize_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : trim(s)) {
    if (is_space(static_cast<unsigned char>(c))) {
      pending_space = true;
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::vector<SentenceSpan> split_sentences(std::string_view text) {
  std::vector<SentenceSpan> spans;
  auto emit = [&](std::size_t begin, std::size_t end) {
    std::string_view raw = text.substr(begin, end - begin);
    std::string_view t = trim(raw);
    if (t.empty()) return;
    spans.push_back({begin + static_cast<std::size_t>(t.data() - raw.data()), t});
  };

  std::size_t start = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_terminator(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && is_terminator(text[j])) ++j;
    if (j == text.size() || is_space(static_cast<unsigned char>(text[j]))) {
      emit(start, j);
      start = j;
    }
    i = j;
  }
  emit(start, text.size());
  return spans;
}

std::string_view truncate_tokens(std::string_view text, std::size_t max_tokens) {
  std::size_t seen = 0;
  bool in_token = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    bool tok = is_token_byte(static_cast<unsigned char>(text[i]));
    if (!tok && in_token && seen == max_tokens) return text.substr(0, i);
    if (tok && !in_token) ++seen;
    in_token = tok;
  }
  return text;
}

}  // namespace guidecqr
