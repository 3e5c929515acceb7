#include "transloop/synthworld.hpp"

#include <algorithm>
#include <stdexcept>

#include "transloop/rng.hpp"

namespace transloop::synth {

namespace {

constexpr std::string_view kLetterPool = "ABCDEFGHIJKLMNOPQRSTUVWXYZ";
constexpr int kLettersPerLanguage = 8;

FaithfulnessFn& faithfulness_hook() {
  static FaithfulnessFn fn;
  return fn;
}

GroundTruthFactoryFn& ground_truth_hook() {
  static GroundTruthFactoryFn fn;
  return fn;
}

std::vector<std::string> value_tokens(long long value, const SynthLanguage& lang) {
  const int base = lang.digit_base();
  std::vector<int> digits;
  long long v = value;
  do {
    digits.push_back(static_cast<int>(v % base));
    v /= base;
  } while (v > 0);
  std::vector<std::string> out;
  out.reserve(digits.size());
  for (auto it = digits.rbegin(); it != digits.rend(); ++it) out.push_back(lang.alphabet[*it]);
  return out;
}

std::optional<int> decode_value(std::span<const int> digit_ids, int base) {
  if (digit_ids.empty()) return std::nullopt;
  if (digit_ids.size() > 1 && digit_ids.front() == 0) return std::nullopt;  // non-canonical
  long long v = 0;
  for (int d : digit_ids) {
    v = v * base + d;
    if (v > 1'000'000) return std::nullopt;
  }
  return static_cast<int>(v);
}

}  // namespace

std::string_view op_name(Op op) {
  switch (op) {
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::mul: return "mul";
  }
  return "add";
}

std::optional<Op> op_from_name(std::string_view name) {
  if (name == "add") return Op::add;
  if (name == "sub") return Op::sub;
  if (name == "mul") return Op::mul;
  return std::nullopt;
}

long long apply_op(int a, Op op, int b) {
  switch (op) {
    case Op::add: return static_cast<long long>(a) + b;
    case Op::sub: return static_cast<long long>(a) - b;
    case Op::mul: return static_cast<long long>(a) * b;
  }
  return 0;
}

int SynthLanguage::token_index(std::string_view token) const {
  for (std::size_t i = 0; i < alphabet.size(); ++i) {
    if (alphabet[i] == token) return static_cast<int>(i);
  }
  return -1;
}

void WorldConfig::validate() const {
  if (vocab_size < 5) throw std::invalid_argument("world: vocab_size must be >= 5");
  if (vocab_size > 64) throw std::invalid_argument("world: vocab_size must be <= 64");
  if (question_count < 1) throw std::invalid_argument("world: question_count must be >= 1");
  if (value_min < 0 || value_min > value_max) {
    throw std::invalid_argument("world: need 0 <= value_min <= value_max");
  }
  if (language_codes.size() < 2) throw std::invalid_argument("world: need at least two languages");
  if (language_codes.size() * kLettersPerLanguage > kLetterPool.size()) {
    throw std::invalid_argument("world: letter pool supports at most 3 languages");
  }
  for (double p : op_solve_probs) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("world: op_solve_probs in [0,1]");
  }
  if (hard_question_percent < 0 || hard_question_percent > 100) {
    throw std::invalid_argument("world: hard_question_percent in [0,100]");
  }
  if (hard_solve_prob < 0.0 || hard_solve_prob > 1.0) {
    throw std::invalid_argument("world: hard_solve_prob in [0,1]");
  }
  repetition.validate();
}

std::vector<SynthLanguage> make_languages(std::span<const std::string> codes, int vocab_size) {
  if (codes.size() * kLettersPerLanguage > kLetterPool.size()) {
    throw std::invalid_argument("make_languages: too many languages for the letter pool");
  }
  if (vocab_size > kLettersPerLanguage * kLettersPerLanguage) {
    throw std::invalid_argument("make_languages: vocab_size exceeds 64");
  }
  std::vector<SynthLanguage> langs;
  langs.reserve(codes.size());
  for (std::size_t li = 0; li < codes.size(); ++li) {
    const std::string_view pool = kLetterPool.substr(li * kLettersPerLanguage, kLettersPerLanguage);
    SynthLanguage lang;
    lang.code = codes[li];
    lang.alphabet.reserve(vocab_size);
    for (int j = 0; j < vocab_size; ++j) {
      lang.alphabet.push_back(std::string{pool[j / kLettersPerLanguage],
                                          pool[j % kLettersPerLanguage]});
    }
    langs.push_back(std::move(lang));
  }
  return langs;
}

std::vector<SynthQuestion> generate_questions(int count, int value_min, int value_max,
                                              std::uint64_t seed, const SynthLanguage& source) {
  if (count < 1) throw std::invalid_argument("generate_questions: count must be >= 1");
  if (value_min > value_max) throw std::invalid_argument("generate_questions: empty value range");
  if (value_min < 0) throw std::invalid_argument("generate_questions: negative operands unsupported");

  Rng rng(mix_seed({seed, 0x71e57104u}));
  std::vector<SynthQuestion> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    SynthQuestion q;
    q.id = i;
    q.a = static_cast<int>(rng.uniform_int(value_min, value_max));
    q.b = static_cast<int>(rng.uniform_int(value_min, value_max));
    q.op = static_cast<Op>(rng.uniform_int(0, 2));
    q.gold_answer = apply_op(q.a, q.op, q.b);
    q.source_tokens = render_question(q, source);
    out.push_back(std::move(q));
  }
  return out;
}

std::vector<std::string> render_question(const SynthQuestion& q, const SynthLanguage& lang) {
  if (lang.digit_base() < 2) throw std::invalid_argument("render_question: alphabet too small");
  std::vector<std::string> out = value_tokens(q.a, lang);
  out.push_back(lang.alphabet[lang.op_token_index(q.op)]);
  const std::vector<std::string> rhs = value_tokens(q.b, lang);
  out.insert(out.end(), rhs.begin(), rhs.end());
  return out;
}

std::optional<std::tuple<int, Op, int>> decode_question(std::span<const std::string> tokens,
                                                        const SynthLanguage& lang) {
  if (tokens.size() < 3) return std::nullopt;
  const int base = lang.digit_base();
  std::vector<int> ids(tokens.size());
  int op_pos = -1;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const int id = lang.token_index(tokens[i]);
    if (id < 0) return std::nullopt;
    ids[i] = id;
    if (id >= base) {
      if (op_pos >= 0) return std::nullopt;  // more than one operator
      op_pos = static_cast<int>(i);
    }
  }
  if (op_pos < 0) return std::nullopt;
  const auto lhs = decode_value(std::span<const int>(ids).first(op_pos), base);
  const auto rhs = decode_value(std::span<const int>(ids).subspan(op_pos + 1), base);
  if (!lhs || !rhs) return std::nullopt;
  const Op op = static_cast<Op>(ids[op_pos] - base);
  return std::tuple<int, Op, int>(*lhs, op, *rhs);
}

World World::build(const WorldConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  World w;
  w.cfg = cfg;
  w.languages = make_languages(cfg.language_codes, cfg.vocab_size);
  w.questions = generate_questions(cfg.question_count, cfg.value_min, cfg.value_max, seed,
                                   w.languages.front());
  const long long lo = cfg.value_min, hi = cfg.value_max;
  w.answer_min = std::min({lo + lo, lo - hi, lo * lo});
  w.answer_max = std::max({hi + hi, hi - lo, hi * hi});
  return w;
}

int World::language_index(std::string_view code) const {
  for (std::size_t i = 0; i < languages.size(); ++i) {
    if (languages[i].code == code) return static_cast<int>(i);
  }
  return -1;
}

double World::solve_success_prob(int a, Op op, int b) const {
  const std::uint64_t h = mix_seed({static_cast<std::uint64_t>(a), static_cast<std::uint64_t>(b),
                                    static_cast<std::uint64_t>(static_cast<int>(op)), 0x9a4d57u});
  if (static_cast<int>(h % 100) < cfg.hard_question_percent) return cfg.hard_solve_prob;
  return cfg.op_solve_probs[static_cast<int>(op)];
}

std::string GroundTruthMap::map_token(std::string_view token) const {
  const int id = src->token_index(token);
  if (id < 0) throw std::invalid_argument("GroundTruthMap: token not in source alphabet");
  return tgt->alphabet[id];
}

std::vector<std::string> GroundTruthMap::map_tokens(std::span<const std::string> tokens) const {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(map_token(t));
  return out;
}

GroundTruthMap GroundTruthMap::between(const World& world, int src_index, int tgt_index) {
  if (ground_truth_hook()) return ground_truth_hook()(world, src_index, tgt_index);
  if (src_index < 0 || tgt_index < 0 ||
      static_cast<std::size_t>(src_index) >= world.languages.size() ||
      static_cast<std::size_t>(tgt_index) >= world.languages.size()) {
    throw std::invalid_argument("GroundTruthMap: bad language index");
  }
  return {&world.languages[src_index], &world.languages[tgt_index]};
}

bool translation_is_faithful(std::span<const std::string> candidate, const SynthQuestion& q,
                             const SynthLanguage& tgt) {
  if (faithfulness_hook()) return faithfulness_hook()(candidate, q, tgt);
  const auto decoded = decode_question(candidate, tgt);
  if (!decoded) return false;
  const auto [a, op, b] = *decoded;
  return a == q.a && op == q.op && b == q.b;
}

void set_faithfulness_hook(FaithfulnessFn fn) { faithfulness_hook() = std::move(fn); }

void set_ground_truth_hook(GroundTruthFactoryFn fn) { ground_truth_hook() = std::move(fn); }

std::vector<textcheck::LanguageProfile> make_language_profiles(const World& world) {
  std::vector<textcheck::LanguageProfile> profiles;
  profiles.reserve(world.languages.size());
  for (const auto& lang : world.languages) {
    textcheck::LanguageProfile p;
    p.code = lang.code;
    std::unordered_set<char> chars;
    for (const auto& tok : lang.alphabet) {
      for (char c : tok) chars.insert(c);
    }
    p.alphabet = std::move(chars);
    profiles.push_back(std::move(p));
  }
  return profiles;
}

}  // namespace transloop::synth
