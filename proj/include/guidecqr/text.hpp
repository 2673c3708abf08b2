#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace guidecqr {

/// The one tokenizer shared by indexing, keyword mining and keyword precision.
///
/// ASCII letters are lowercased; any run of bytes that are not ASCII
/// alphanumerics separates tokens. Bytes >= 0x80 are kept as token characters
/// so multi-byte UTF-8 words survive intact.
std::vector<std::string> tokenize(std::string_view text);

/// A sentence located inside a larger text; `text` views the source buffer.
struct SentenceSpan {
  std::size_t offset = 0;
  std::string_view text;
};

/// Splits on runs of '.', '?' or '!' that are followed by whitespace or the
/// end of the text. Spans are trimmed and never empty. A text without any
/// boundary yields a single span covering the trimmed text.
std::vector<SentenceSpan> split_sentences(std::string_view text);

/// Prefix of `text` ending right after its `max_tokens`-th token.
std::string_view truncate_tokens(std::string_view text, std::size_t max_tokens);

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);

/// Collapses every whitespace run to one space and trims.
std::string normalize_whitespace(std::string_view s);

}  // namespace guidecqr
