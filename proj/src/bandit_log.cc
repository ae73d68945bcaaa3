#include "abpo/bandit_log.h"

#include <cerrno>
#include <charconv>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string_view>
#include <unordered_set>

#include "abpo/error.h"

namespace abpo {

namespace {
constexpr std::uint64_t kLogStream = 0x106;
constexpr const char* kHeaderTag = "# abpo-bandit-log";
}  // namespace

CandidateSet SampleCandidates(const UserSequence& seq, ItemId positive,
                              int candidate_size, int num_items, Rng& rng) {
  if (candidate_size < 1) throw ConfigError("candidate set size must be >= 1");
  const ItemId held_out = seq.held_out();

  std::unordered_set<ItemId> seen(seq.items.begin(), seq.items.end());
  std::vector<ItemId> pool;
  pool.reserve(num_items);
  for (int a = 0; a < num_items; ++a) {
    const auto item = static_cast<ItemId>(a);
    if (!seen.count(item) && item != held_out) pool.push_back(item);
  }
  const int need = candidate_size - 1;
  if (static_cast<int>(pool.size()) < need) {
    throw ConfigError("distractor pool of " + std::to_string(pool.size()) +
                      " items cannot fill a candidate set of size " +
                      std::to_string(candidate_size));
  }
  // Partial Fisher-Yates: the first `need` slots become a uniform sample
  // without replacement.
  for (int i = 0; i < need; ++i) {
    const auto j = i + UniformIndex(rng, pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  CandidateSet cands;
  cands.items.reserve(candidate_size);
  cands.items.push_back(positive);
  cands.items.insert(cands.items.end(), pool.begin(), pool.begin() + need);
  Shuffle(cands.items, rng);
  cands.positive_index = *cands.IndexOf(positive);
  return cands;
}

CandidateSet BuildCandidateSet(const UserSequence& seq, int t_prime,
                               int candidate_size, int num_items, Rng& rng) {
  const int t = seq.prefix_len, n = seq.horizon;
  if (t_prime < t || t_prime > t + n - 2) {
    throw ConfigError("t_prime " + std::to_string(t_prime) +
                      " outside [T, T+N-2] = [" + std::to_string(t) + ", " +
                      std::to_string(t + n - 2) + "]");
  }
  return SampleCandidates(seq, seq.x(t_prime + 1), candidate_size, num_items,
                          rng);
}

int AssignFeedback(ItemId a_log, ItemId next_item) {
  return a_log == next_item ? 1 : 0;
}

BanditLog MakeBanditLog(const PolicyParams& policy,
                        const std::vector<UserSequence>& seqs,
                        const LogConfig& config) {
  BanditLog log;
  log.meta.seed = config.seed;
  log.meta.candidate_size = config.candidate_size;
  log.meta.temperature = config.temperature;
  log.meta.num_items = policy.num_items();
  log.meta.feature_dim = policy.feature_dim();
  log.meta.policy_fingerprint = policy.Fingerprint();

  const FeatureMap features(policy.feature_dim());
  for (const UserSequence& seq : seqs) {
    ValidateSequence(seq, policy.num_items());
    Rng rng = DeriveStream(
        config.seed, {kLogStream, static_cast<std::uint64_t>(config.round),
                      static_cast<std::uint64_t>(seq.user_id)});
    for (int tp = seq.prefix_len; tp <= seq.prefix_len + seq.horizon - 2;
         ++tp) {
      LoggedExample ex;
      ex.context = MakeContext(
          seq.user_id,
          std::vector<ItemId>(seq.items.begin(), seq.items.begin() + tp),
          features);
      ex.t_prime = tp;
      ex.candidates = BuildCandidateSet(seq, tp, config.candidate_size,
                                        policy.num_items(), rng);
      const ItemDistribution dist =
          Distribution(policy, ex.context, ex.candidates, config.temperature);
      const Draw draw = SampleItem(dist, rng);
      ex.a_log = draw.item;
      ex.e0 = draw.propensity;
      ex.y = AssignFeedback(draw.item, seq.x(tp + 1));
      ex.round = config.round;
      log.examples.push_back(std::move(ex));
    }
  }
  return log;
}

void ValidateExample(const LoggedExample& ex, int num_items) {
  ValidateCandidateSet(ex.candidates, num_items);
  const auto idx = ex.candidates.IndexOf(ex.a_log);
  if (!idx) throw ValidationError("a_log is not in the candidate set");
  if (ex.y != 0 && ex.y != 1) throw ValidationError("feedback must be 0 or 1");
  if (!(ex.e0 > 0.0 && ex.e0 <= 1.0)) {
    throw ValidationError("propensity e0 outside (0,1]");
  }
  if (ex.candidates.positive_index) {
    const bool at_positive = *idx == *ex.candidates.positive_index;
    if (at_positive != (ex.y == 1)) {
      throw ValidationError("y must be 1 exactly when a_log is the positive");
    }
  }
  if (ex.context.history.empty()) throw ValidationError("empty history");
}

// ---- serialization ---------------------------------------------------------

namespace {

std::string FormatDouble(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void AppendIds(std::string& out, const std::vector<ItemId>& ids) {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(ids[i]);
  }
}

std::vector<std::string_view> SplitSpaces(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= line.size()) {
    const std::size_t end = line.find(' ', start);
    if (end == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

template <typename Int>
Int ParseInt(std::string_view s, std::size_t line, std::string_view field) {
  Int v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ParseError(line, "bad integer for '" + std::string(field) + "': '" +
                               std::string(s) + "'");
  }
  return v;
}

std::uint64_t ParseHex(std::string_view s, std::size_t line) {
  std::uint64_t v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, 16);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ParseError(line, "bad hex value '" + std::string(s) + "'");
  }
  return v;
}

double ParseDouble(std::string_view s, std::size_t line,
                   std::string_view field) {
  const std::string str(s);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(str.c_str(), &end);
  if (str.empty() || end != str.c_str() + str.size() || errno == ERANGE) {
    throw ParseError(
        line, "bad number for '" + std::string(field) + "': '" + str + "'");
  }
  return v;
}

std::vector<ItemId> ParseIds(std::string_view s, std::size_t line,
                             std::string_view field) {
  std::vector<ItemId> out;
  if (s.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const std::size_t end = s.find(',', start);
    out.push_back(ParseInt<ItemId>(
        s.substr(start, end == std::string_view::npos ? end : end - start),
        line, field));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

// Splits "key=value" tokens and checks that keys appear in `keys` order.
std::vector<std::string_view> ExpectFields(
    std::string_view line, std::initializer_list<std::string_view> keys,
    std::size_t line_no) {
  const auto tokens = SplitSpaces(line);
  if (tokens.size() != keys.size()) {
    throw ParseError(line_no, "expected " + std::to_string(keys.size()) +
                                  " fields, found " +
                                  std::to_string(tokens.size()));
  }
  std::vector<std::string_view> values;
  auto key = keys.begin();
  for (std::string_view tok : tokens) {
    const std::size_t eq = tok.find('=');
    if (eq == std::string_view::npos || tok.substr(0, eq) != *key) {
      throw ParseError(line_no, "expected field '" + std::string(*key) +
                                    "', found '" + std::string(tok) + "'");
    }
    values.push_back(tok.substr(eq + 1));
    ++key;
  }
  return values;
}

}  // namespace

void WriteLog(const BanditLog& log, std::ostream& out) {
  const LogMetadata& m = log.meta;
  char fp[24];
  std::snprintf(fp, sizeof(fp), "%016" PRIx64, m.policy_fingerprint);
  out << kHeaderTag << " version=" << m.version << " seed=" << m.seed
      << " M=" << m.candidate_size << " tau=" << FormatDouble(m.temperature)
      << " V=" << m.num_items << " d=" << m.feature_dim << " policy=" << fp
      << '\n';
  std::string line;
  for (const LoggedExample& ex : log.examples) {
    line.clear();
    line += "user_id=" + std::to_string(ex.context.user_id);
    line += " t_prime=" + std::to_string(ex.t_prime);
    line += " history=";
    AppendIds(line, ex.context.history);
    line += " candidates=";
    AppendIds(line, ex.candidates.items);
    line += " positive_index=";
    line += ex.candidates.positive_index
                ? std::to_string(*ex.candidates.positive_index)
                : std::string("-");
    line += " a_log=" + std::to_string(ex.a_log);
    line += " y=" + std::to_string(ex.y);
    line += " e0=" + FormatDouble(ex.e0);
    line += " round=" + std::to_string(ex.round);
    line += '\n';
    out << line;
  }
}

void WriteLog(const BanditLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  WriteLog(log, out);
  if (!out) throw ConfigError("write to '" + path + "' failed");
}

BanditLog ReadLog(std::istream& in) {
  BanditLog log;
  std::string line;
  std::size_t line_no = 0;

  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (in.eof()) {
      // getline hit EOF before a '\n': the writer always terminates records.
      throw ParseError(line_no, "truncated record (missing newline)");
    }
    return true;
  };

  if (!next_line()) throw ParseError(1, "missing metadata header");
  const std::string_view tag(kHeaderTag);
  if (line.rfind(tag, 0) != 0 || line.size() <= tag.size()) {
    throw ParseError(line_no, "missing metadata header");
  }
  {
    const auto v = ExpectFields(
        std::string_view(line).substr(tag.size() + 1),
        {"version", "seed", "M", "tau", "V", "d", "policy"}, line_no);
    LogMetadata& m = log.meta;
    m.version = ParseInt<int>(v[0], line_no, "version");
    if (m.version != 1) {
      throw ParseError(line_no, "unsupported log version " + std::string(v[0]));
    }
    m.seed = ParseInt<std::uint64_t>(v[1], line_no, "seed");
    m.candidate_size = ParseInt<int>(v[2], line_no, "M");
    m.temperature = ParseDouble(v[3], line_no, "tau");
    m.num_items = ParseInt<int>(v[4], line_no, "V");
    m.feature_dim = ParseInt<int>(v[5], line_no, "d");
    m.policy_fingerprint = ParseHex(v[6], line_no);
  }
  const FeatureMap features(log.meta.feature_dim);

  while (next_line()) {
    const auto v = ExpectFields(line,
                                {"user_id", "t_prime", "history", "candidates",
                                 "positive_index", "a_log", "y", "e0", "round"},
                                line_no);
    LoggedExample ex;
    const int user_id = ParseInt<int>(v[0], line_no, "user_id");
    ex.t_prime = ParseInt<int>(v[1], line_no, "t_prime");
    auto history = ParseIds(v[2], line_no, "history");
    if (history.empty()) throw ParseError(line_no, "empty history");
    ex.context = MakeContext(user_id, std::move(history), features);
    ex.candidates.items = ParseIds(v[3], line_no, "candidates");
    if (v[4] != "-") {
      ex.candidates.positive_index =
          ParseInt<int>(v[4], line_no, "positive_index");
    }
    ex.a_log = ParseInt<ItemId>(v[5], line_no, "a_log");
    ex.y = ParseInt<int>(v[6], line_no, "y");
    ex.e0 = ParseDouble(v[7], line_no, "e0");
    ex.round = ParseInt<int>(v[8], line_no, "round");
    try {
      ValidateExample(ex, log.meta.num_items);
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " +
                            e.what());
    }
    log.examples.push_back(std::move(ex));
  }
  return log;
}

BanditLog ReadLog(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "' for reading");
  return ReadLog(in);
}

}  // namespace abpo
