#include "transloop/textcheck.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace transloop::textcheck {

namespace {

// Decode one UTF-8 codepoint at `i`; malformed bytes are treated as single
// one-byte codepoints so tokenization never fails.
std::pair<std::uint32_t, std::size_t> next_codepoint(std::string_view s, std::size_t i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) return {b0, 1};
  auto cont = [&](std::size_t k) {
    return i + k < s.size() && (static_cast<unsigned char>(s[i + k]) & 0xc0) == 0x80;
  };
  if ((b0 & 0xe0) == 0xc0 && cont(1)) {
    return {static_cast<std::uint32_t>((b0 & 0x1f) << 6 | (s[i + 1] & 0x3f)), 2};
  }
  if ((b0 & 0xf0) == 0xe0 && cont(1) && cont(2)) {
    return {static_cast<std::uint32_t>((b0 & 0x0f) << 12 | (s[i + 1] & 0x3f) << 6 | (s[i + 2] & 0x3f)), 3};
  }
  if ((b0 & 0xf8) == 0xf0 && cont(1) && cont(2) && cont(3)) {
    return {static_cast<std::uint32_t>((b0 & 0x07) << 18 | (s[i + 1] & 0x3f) << 12 |
                                       (s[i + 2] & 0x3f) << 6 | (s[i + 3] & 0x3f)),
            4};
  }
  return {b0, 1};
}

bool is_space_cp(std::uint32_t cp) {
  switch (cp) {
    case 0x09: case 0x0a: case 0x0b: case 0x0c: case 0x0d: case 0x20:
    case 0x85: case 0xa0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202f: case 0x205f: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200a;
  }
}

std::string_view trim(std::string_view s) {
  std::size_t b = 0;
  while (b < s.size()) {
    auto [cp, len] = next_codepoint(s, b);
    if (!is_space_cp(cp)) break;
    b += len;
  }
  std::size_t e = s.size();
  while (e > b) {
    // Walk back to the previous codepoint boundary.
    std::size_t p = e - 1;
    while (p > b && (static_cast<unsigned char>(s[p]) & 0xc0) == 0x80) --p;
    auto [cp, len] = next_codepoint(s, p);
    if (p + len != e || !is_space_cp(cp)) break;
    e = p;
  }
  return s.substr(b, e - b);
}

// Tokens -> dense integer ids ordered like the token strings, so suffix
// comparisons over ids match lexicographic token order.
std::vector<int> token_ids(const TokenSequence& seq) {
  std::vector<std::string> uniq(seq.tokens);
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  std::unordered_map<std::string_view, int> id;
  id.reserve(uniq.size());
  for (std::size_t i = 0; i < uniq.size(); ++i) id[uniq[i]] = static_cast<int>(i);
  std::vector<int> ids(seq.tokens.size());
  for (std::size_t i = 0; i < seq.tokens.size(); ++i) ids[i] = id[seq.tokens[i]];
  return ids;
}

std::string join_tokens(std::span<const std::string> toks) {
  std::string out;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i) out += ' ';
    out += toks[i];
  }
  return out;
}

bool is_permutation_of_iota(std::span<const int> sa, std::size_t n) {
  if (sa.size() != n) return false;
  std::vector<char> seen(n, 0);
  for (int v : sa) {
    if (v < 0 || static_cast<std::size_t>(v) >= n || seen[v]) return false;
    seen[v] = 1;
  }
  return true;
}

char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

std::size_t find_ci(std::string_view hay, std::string_view needle, std::size_t from) {
  if (needle.empty() || hay.size() < needle.size()) return std::string_view::npos;
  for (std::size_t i = from; i + needle.size() <= hay.size(); ++i) {
    bool ok = true;
    for (std::size_t j = 0; j < needle.size(); ++j) {
      if (ascii_lower(hay[i + j]) != ascii_lower(needle[j])) {
        ok = false;
        break;
      }
    }
    if (ok) return i;
  }
  return std::string_view::npos;
}

}  // namespace

TokenSequence tokenize(std::string_view text) {
  TokenSequence seq;
  seq.source_text.assign(text);
  std::string cur;
  std::size_t i = 0;
  while (i < text.size()) {
    auto [cp, len] = next_codepoint(text, i);
    if (is_space_cp(cp)) {
      if (!cur.empty()) {
        seq.tokens.push_back(std::move(cur));
        cur.clear();
      }
    } else {
      cur.append(text.substr(i, len));
    }
    i += len;
  }
  if (!cur.empty()) seq.tokens.push_back(std::move(cur));
  return seq;
}

void RepetitionConfig::validate() const {
  if (ngram_n < 1 || ngram_count_threshold < 1 || line_min_tokens < 1 || line_count_threshold < 1) {
    throw std::invalid_argument("RepetitionConfig: all fields must be >= 1");
  }
}

std::vector<int> build_suffix_array(const TokenSequence& tokens) {
  const int n = static_cast<int>(tokens.size());
  std::vector<int> sa(n);
  std::iota(sa.begin(), sa.end(), 0);
  if (n <= 1) return sa;

  std::vector<int> rank = token_ids(tokens);
  std::vector<int> next_rank(n);
  for (int k = 1;; k <<= 1) {
    auto key = [&](int i) {
      return std::pair<int, int>(rank[i], i + k < n ? rank[i + k] : -1);
    };
    std::sort(sa.begin(), sa.end(), [&](int a, int b) { return key(a) < key(b); });
    next_rank[sa[0]] = 0;
    for (int i = 1; i < n; ++i) {
      next_rank[sa[i]] = next_rank[sa[i - 1]] + (key(sa[i - 1]) < key(sa[i]) ? 1 : 0);
    }
    rank = next_rank;
    if (rank[sa[n - 1]] == n - 1) break;
  }
  return sa;
}

std::vector<int> lcp_array(const TokenSequence& tokens, std::span<const int> sa) {
  const std::size_t n = tokens.size();
  if (!is_permutation_of_iota(sa, n)) {
    throw std::invalid_argument("lcp_array: sa is not a permutation of 0..n-1");
  }
  std::vector<int> lcp(n, 0);
  if (n == 0) return lcp;

  const std::vector<int> ids = token_ids(tokens);
  std::vector<int> pos(n);
  for (std::size_t i = 0; i < n; ++i) pos[sa[i]] = static_cast<int>(i);

  int h = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (pos[i] > 0) {
      const int j = sa[pos[i] - 1];
      while (i + h < n && static_cast<std::size_t>(j) + h < n && ids[i + h] == ids[j + h]) ++h;
      lcp[pos[i]] = h;
      if (h > 0) --h;
    } else {
      h = 0;
    }
  }
  return lcp;
}

std::pair<bool, std::optional<RepetitionEvidence>> detect_ngram_repetition(
    const TokenSequence& tokens, const RepetitionConfig& cfg) {
  cfg.validate();
  const int n = cfg.ngram_n;
  if (static_cast<int>(tokens.size()) < n) return {false, std::nullopt};

  const std::vector<int> sa = build_suffix_array(tokens);
  const std::vector<int> lcp = lcp_array(tokens, sa);

  int best_count = 0;
  int best_pos = -1;
  int run = 0;
  for (std::size_t i = 1; i <= lcp.size(); ++i) {
    if (i < lcp.size() && lcp[i] >= n) {
      ++run;
      continue;
    }
    if (run > 0) {
      const int count = run + 1;  // suffixes sharing the same first n tokens
      if (count > best_count) {
        best_count = count;
        best_pos = sa[i - 1];
      }
      run = 0;
    }
  }
  if (best_count >= cfg.ngram_count_threshold) {
    RepetitionEvidence ev;
    ev.count = best_count;
    ev.excerpt = join_tokens(std::span<const std::string>(tokens.tokens).subspan(best_pos, n));
    return {true, std::move(ev)};
  }
  return {false, std::nullopt};
}

std::pair<bool, std::optional<RepetitionEvidence>> detect_line_repetition(
    std::string_view text, const RepetitionConfig& cfg) {
  cfg.validate();
  std::vector<std::string> order;
  std::unordered_map<std::string, int> counts;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = trim(text.substr(start, nl - start));
    if (!line.empty()) {
      auto [it, inserted] = counts.emplace(std::string(line), 0);
      if (inserted) order.push_back(it->first);
      ++it->second;
    }
    start = nl + 1;
  }
  for (const std::string& line : order) {
    const int count = counts[line];
    if (count < cfg.line_count_threshold) continue;
    if (static_cast<int>(tokenize(line).size()) < cfg.line_min_tokens) continue;
    return {true, RepetitionEvidence{line, count}};
  }
  return {false, std::nullopt};
}

RepetitionVerdict detect_repetition(std::string_view text, const RepetitionConfig& cfg) {
  const TokenSequence toks = tokenize(text);
  auto [ngram_hit, ngram_ev] = detect_ngram_repetition(toks, cfg);
  auto [line_hit, line_ev] = detect_line_repetition(text, cfg);

  RepetitionVerdict v;
  v.is_repetitive = ngram_hit || line_hit;
  if (ngram_hit && line_hit) {
    v.triggered = RepetitionCriterion::both;
    v.evidence = std::move(ngram_ev);
  } else if (ngram_hit) {
    v.triggered = RepetitionCriterion::ngram;
    v.evidence = std::move(ngram_ev);
  } else if (line_hit) {
    v.triggered = RepetitionCriterion::line;
    v.evidence = std::move(line_ev);
  }
  return v;
}

LanguageGuess identify_language(std::string_view text, std::span<const LanguageProfile> profiles) {
  if (profiles.empty()) throw std::invalid_argument("identify_language: no profiles");

  // Alphabet route: count characters per profile; the denominator is every
  // character claimed by at least one alphabet.
  std::vector<long long> hits(profiles.size(), 0);
  long long classifiable = 0;
  for (char c : text) {
    bool claimed = false;
    for (std::size_t p = 0; p < profiles.size(); ++p) {
      if (!profiles[p].alphabet) continue;
      if (profiles[p].alphabet->count(c)) {
        ++hits[p];
        claimed = true;
      }
    }
    if (claimed) ++classifiable;
  }
  if (classifiable > 0) {
    std::size_t win = 0;
    for (std::size_t p = 1; p < profiles.size(); ++p) {
      if (hits[p] > hits[win]) win = p;
    }
    return {profiles[win].code, static_cast<double>(hits[win]) / static_cast<double>(classifiable)};
  }

  // N-gram route (out-of-place measure over the text's top-ranked n-grams).
  constexpr std::size_t kTop = 40;
  double best_conf = -1.0;
  std::size_t best = profiles.size();
  for (std::size_t p = 0; p < profiles.size(); ++p) {
    const auto& ranks = profiles[p].char_ngram_ranks;
    if (!ranks || ranks->empty()) continue;
    const std::size_t n = ranks->front().size();
    if (n == 0 || text.size() < n) continue;

    std::map<std::string, int> freq;
    for (std::size_t i = 0; i + n <= text.size(); ++i) {
      ++freq[std::string(text.substr(i, n))];
    }
    std::vector<std::pair<std::string, int>> ordered(freq.begin(), freq.end());
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    if (ordered.size() > kTop) ordered.resize(kTop);

    const std::size_t penalty = ranks->size();
    long long dist = 0;
    for (std::size_t i = 0; i < ordered.size(); ++i) {
      auto it = std::find(ranks->begin(), ranks->end(), ordered[i].first);
      if (it == ranks->end()) {
        dist += static_cast<long long>(penalty);
      } else {
        const long long r = it - ranks->begin();
        dist += std::abs(r - static_cast<long long>(i));
      }
    }
    const double max_dist = static_cast<double>(ordered.size()) * static_cast<double>(penalty);
    const double conf = max_dist > 0 ? std::max(0.0, 1.0 - static_cast<double>(dist) / max_dist) : 0.0;
    if (conf > best_conf) {
      best_conf = conf;
      best = p;
    }
  }
  if (best < profiles.size() && best_conf > 0.0) return {profiles[best].code, best_conf};
  return {"unknown", 0.0};
}

FormatVerdict check_format(std::string_view text) {
  constexpr std::string_view kOpen = "<think>";
  constexpr std::string_view kClose = "</think>";

  auto count_all = [&](std::string_view needle, std::size_t& first) {
    int count = 0;
    first = std::string_view::npos;
    for (std::size_t at = text.find(needle); at != std::string_view::npos;
         at = text.find(needle, at + 1)) {
      if (count == 0) first = at;
      ++count;
    }
    return count;
  };

  std::size_t open_at = 0, close_at = 0;
  const int opens = count_all(kOpen, open_at);
  const int closes = count_all(kClose, close_at);
  if (opens != 1 || closes != 1 || open_at >= close_at) return {};

  const std::size_t content_begin = open_at + kOpen.size();
  if (content_begin > close_at) return {};
  std::string_view post = text.substr(close_at + kClose.size());
  if (trim(post).empty()) return {};

  FormatVerdict v;
  v.has_think_block = true;
  v.think_content = std::string(text.substr(content_begin, close_at - content_begin));
  v.post_think_content = std::string(post);
  return v;
}

std::optional<std::string> extract_translation(std::string_view text) {
  constexpr std::string_view kOpen = "<translation>";
  constexpr std::string_view kClose = "</translation>";
  const std::size_t open_at = find_ci(text, kOpen, 0);
  if (open_at == std::string_view::npos) return std::nullopt;
  const std::size_t content_begin = open_at + kOpen.size();
  const std::size_t close_at = find_ci(text, kClose, content_begin);
  if (close_at == std::string_view::npos) return std::nullopt;
  return std::string(text.substr(content_begin, close_at - content_begin));
}

}  // namespace transloop::textcheck
