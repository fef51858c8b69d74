#include <array>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "trialmatch/corpus.hpp"
#include "util/strings.hpp"

namespace trialmatch::corpus {

namespace {

constexpr std::string_view kBullet = "\xE2\x80\xA2";  // U+2022

bool starts_with_bullet(std::string_view line, std::size_t* width) {
  std::size_t w = 0;
  if (line.starts_with(kBullet)) {
    w = kBullet.size();
  } else if (!line.empty() && (line[0] == '-' || line[0] == '*')) {
    w = 1;
  } else {
    return false;
  }
  // "-1" and "*2" are values, not bullets.
  if (line.size() > w && std::isdigit(static_cast<unsigned char>(line[w]))) return false;
  *width = w;
  return true;
}

// "12. text" or "3) text"; the enumerator must be followed by whitespace or
// end of line so that "1.5 mg" survives.
bool starts_with_enumerator(std::string_view line, std::size_t* width) {
  std::size_t i = 0;
  while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
  if (i == 0 || i > 3 || i >= line.size()) return false;
  if (line[i] != '.' && line[i] != ')') return false;
  ++i;
  if (i < line.size() && !util::is_space(line[i])) return false;
  *width = i;
  return true;
}

std::string_view strip_markers(std::string_view line) {
  line = util::trim(line);
  for (;;) {
    std::size_t width = 0;
    if (starts_with_bullet(line, &width) || starts_with_enumerator(line, &width)) {
      line = util::trim(line.substr(width));
    } else {
      return line;
    }
  }
}

bool is_header(std::string_view line) {
  std::string lowered = util::to_lower(line);
  std::string_view view = lowered;
  while (!view.empty() && (view.back() == ':' || util::is_space(view.back()))) {
    view.remove_suffix(1);
  }
  return view == "inclusion criteria" || view == "exclusion criteria";
}

constexpr std::array<std::string_view, 24> kAbbreviations = {
    "dr.",  "mr.",  "mrs.",  "ms.",   "prof.",  "sr.",     "jr.",    "st.",
    "a.m.", "p.m.", "vs.",   "v.",    "e.g.",   "i.e.",    "approx.", "no.",
    "fig.", "dept.", "b.i.d.", "t.i.d.", "q.i.d.", "p.r.n.", "p.o.",   "i.v."};

bool is_abbreviation(std::string_view text, std::size_t period_pos) {
  std::size_t begin = period_pos;
  while (begin > 0 && !util::is_space(text[begin - 1])) --begin;
  std::string token = util::to_lower(text.substr(begin, period_pos - begin + 1));
  while (!token.empty() && (token.front() == '(' || token.front() == '"')) token.erase(0, 1);
  for (auto abbr : kAbbreviations) {
    if (token == abbr) return true;
  }
  return false;
}

bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }

}  // namespace

std::vector<std::string> segment_criteria(std::string_view raw_block) {
  std::vector<std::string> out;
  for (auto line : util::split_lines(raw_block)) {
    auto text = strip_markers(line);
    if (text.size() < 2 || is_header(text)) continue;
    out.emplace_back(text);
  }
  return out;
}

std::vector<std::string> segment_sentences(std::string_view raw_text) {
  std::vector<std::string> out;
  const std::size_t n = raw_text.size();
  std::size_t start = 0;
  for (std::size_t i = 0; i < n; ++i) {
    char c = raw_text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    std::size_t end = i + 1;
    while (end < n && is_closer(raw_text[end])) ++end;
    if (end >= n || !util::is_space(raw_text[end])) continue;
    std::size_t next = end;
    while (next < n && util::is_space(raw_text[next])) ++next;
    if (next >= n) continue;
    auto lead = static_cast<unsigned char>(raw_text[next]);
    if (!std::isupper(lead) && !std::isdigit(lead)) continue;
    if (c == '.' && is_abbreviation(raw_text, i)) continue;

    auto sentence = util::trim(raw_text.substr(start, end - start));
    if (!sentence.empty()) out.emplace_back(sentence);
    start = next;
    i = next - 1;
  }
  if (start < n) {
    auto tail = util::trim(raw_text.substr(start));
    if (!tail.empty()) out.emplace_back(tail);
  }
  return out;
}

}  // namespace trialmatch::corpus
