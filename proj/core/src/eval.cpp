#include "t2t/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "t2t/error.hpp"

namespace t2t {

namespace {

struct EntityRef {
  const Grid* grid = nullptr;
  std::size_t row = 0;
};

struct Mention {
  std::size_t last = 0;  // index of the mention's final token
  std::string entity;
};

bool is_number(const std::string& tok) {
  std::size_t i = tok.size() > 1 && tok[0] == '-' ? 1 : 0;
  bool digits = false, dot = false;
  for (; i < tok.size(); ++i) {
    const unsigned char c = static_cast<unsigned char>(tok[i]);
    if (std::isdigit(c)) {
      digits = true;
    } else if (c == '.' && !dot) {
      dot = true;
    } else {
      return false;
    }
  }
  return digits;
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<std::string> split_words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

std::map<std::string, EntityRef> entity_index(const TableSet& tables) {
  std::map<std::string, EntityRef> index;
  for (const Grid& g : tables.tables)
    for (std::size_t i = 0; i < g.rows(); ++i) index.emplace(g.entities[i], EntityRef{&g, i});
  return index;
}

std::vector<Mention> find_mentions(std::span<const std::string> text,
                                   const std::map<std::string, EntityRef>& index) {
  std::vector<std::pair<std::vector<std::string>, std::string>> names;
  for (const auto& [name, ref] : index) names.emplace_back(split_words(name), name);
  std::stable_sort(names.begin(), names.end(),
                   [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });

  std::vector<Mention> mentions;
  for (std::size_t i = 0; i < text.size();) {
    std::size_t matched = 0;
    for (const auto& [words, name] : names) {
      if (words.empty() || i + words.size() > text.size()) continue;
      if (std::equal(words.begin(), words.end(), text.begin() + static_cast<std::ptrdiff_t>(i))) {
        mentions.push_back({i + words.size() - 1, name});
        matched = words.size();
        break;
      }
    }
    i += matched ? matched : 1;
  }
  return mentions;
}

// Column named by the words around the number, or cols() if none.
std::size_t keyword_column(std::span<const std::string> text, std::size_t pos, const Grid& grid,
                           const ExtractorConfig& config) {
  if (pos + 1 < text.size()) {
    const std::string& next = text[pos + 1];
    auto it = config.type_after.find(lower(next));
    if (it != config.type_after.end()) return grid.column_index(it->second);
    const std::size_t j = grid.column_index(next);
    if (j < grid.cols()) return j;
  }
  if (pos > 0) {
    auto it = config.type_before.find(lower(text[pos - 1]));
    if (it != config.type_before.end()) return grid.column_index(it->second);
  }
  return grid.cols();
}

using FactKey = std::pair<std::string, std::string>;

std::set<std::tuple<std::string, std::string, std::string>> fact_set(
    const std::vector<ExtractedFact>& facts) {
  std::set<std::tuple<std::string, std::string, std::string>> s;
  for (const auto& f : facts) s.emplace(f.entity, f.rtype, f.value);
  return s;
}

std::vector<FactKey> fact_order(const std::vector<ExtractedFact>& facts) {
  std::vector<FactKey> keys;
  for (const auto& f : facts) keys.emplace_back(f.entity, f.rtype);
  return keys;
}

double ratio_percent(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

double harmonic(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

}  // namespace

std::vector<ExtractedFact> extract_records(std::span<const std::string> text,
                                           const TableSet& tables,
                                           const ExtractorConfig& config) {
  const auto index = entity_index(tables);
  const auto mentions = find_mentions(text, index);

  std::vector<ExtractedFact> facts;
  std::set<FactKey> seen;
  std::size_t next_mention = 0;
  const Mention* current = nullptr;
  for (std::size_t p = 0; p < text.size(); ++p) {
    while (next_mention < mentions.size() && mentions[next_mention].last < p)
      current = &mentions[next_mention++];
    if (!current || p - current->last > config.span || !is_number(text[p])) continue;

    const EntityRef& ref = index.at(current->entity);
    const Grid& g = *ref.grid;
    std::size_t j = keyword_column(text, p, g, config);
    if (j >= g.cols()) {
      for (j = 0; j < g.cols(); ++j)
        if (g.at(ref.row, j).value == text[p]) break;
      if (j == g.cols()) continue;
    }
    if (!seen.emplace(current->entity, g.columns[j]).second) continue;
    facts.push_back({current->entity, g.columns[j], text[p], p});
  }
  return facts;
}

bool fact_supported(const ExtractedFact& fact, const TableSet& tables) {
  for (const Grid& g : tables.tables) {
    auto row = std::find(g.entities.begin(), g.entities.end(), fact.entity);
    if (row == g.entities.end()) continue;
    const std::size_t j = g.column_index(fact.rtype);
    if (j == g.cols()) return false;
    return g.at(static_cast<std::size_t>(row - g.entities.begin()), j).value == fact.value;
  }
  return false;
}

RgScore rg(std::span<const std::string> generated, const TableSet& tables,
           const ExtractorConfig& config) {
  RgScore s;
  for (const auto& f : extract_records(generated, tables, config)) {
    ++s.count;
    if (fact_supported(f, tables)) ++s.correct;
  }
  s.precision = ratio_percent(s.correct, s.count);
  return s;
}

CsScore cs(std::span<const std::string> generated, std::span<const std::string> reference,
           const TableSet& tables, const ExtractorConfig& config) {
  const auto a = fact_set(extract_records(generated, tables, config));
  const auto b = fact_set(extract_records(reference, tables, config));
  std::size_t both = 0;
  for (const auto& f : a) both += b.count(f);
  CsScore s;
  s.precision = ratio_percent(both, a.size());
  s.recall = ratio_percent(both, b.size());
  s.f1 = harmonic(s.precision, s.recall);
  return s;
}

double co(std::span<const std::string> generated, std::span<const std::string> reference,
          const TableSet& tables, const ExtractorConfig& config) {
  const auto a = fact_order(extract_records(generated, tables, config));
  const auto b = fact_order(extract_records(reference, tables, config));
  const std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 100.0;
  const auto d = damerau_levenshtein<FactKey>(a, b);
  return (1.0 - static_cast<double>(d) / static_cast<double>(longest)) * 100.0;
}

std::size_t damerau_levenshtein(const std::string& a, const std::string& b) {
  return damerau_levenshtein<char>(std::span<const char>(a.data(), a.size()),
                                   std::span<const char>(b.data(), b.size()));
}

double bleu(std::span<const std::vector<std::string>> candidates,
            std::span<const std::vector<std::string>> references) {
  if (candidates.size() != references.size())
    throw ContractError("bleu: " + std::to_string(candidates.size()) + " candidates for " +
                        std::to_string(references.size()) + " references");
  constexpr std::size_t kMaxOrder = 4;
  std::array<std::size_t, kMaxOrder> matches{}, totals{};
  std::size_t cand_len = 0, ref_len = 0;
  using Gram = std::vector<std::string>;
  for (std::size_t s = 0; s < candidates.size(); ++s) {
    const auto& c = candidates[s];
    const auto& r = references[s];
    cand_len += c.size();
    ref_len += r.size();
    for (std::size_t n = 1; n <= kMaxOrder; ++n) {
      std::map<Gram, std::size_t> cc, rc;
      for (std::size_t i = 0; i + n <= c.size(); ++i) ++cc[Gram(c.begin() + i, c.begin() + i + n)];
      for (std::size_t i = 0; i + n <= r.size(); ++i) ++rc[Gram(r.begin() + i, r.begin() + i + n)];
      for (const auto& [g, k] : cc) {
        auto it = rc.find(g);
        if (it != rc.end()) matches[n - 1] += std::min(k, it->second);
        totals[n - 1] += k;
      }
    }
  }
  double log_sum = 0.0;
  for (std::size_t n = 0; n < kMaxOrder; ++n) {
    if (matches[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(matches[n]) / static_cast<double>(totals[n]));
  }
  const double bp = cand_len >= ref_len ? 1.0
                                        : std::exp(1.0 - static_cast<double>(ref_len) /
                                                             static_cast<double>(cand_len));
  return 100.0 * bp * std::exp(log_sum / static_cast<double>(kMaxOrder));
}

MetricsReport evaluate(std::span<const std::vector<std::string>> generated,
                       std::span<const TableSet> games, const ExtractorConfig& config) {
  if (generated.size() != games.size())
    throw ContractError("evaluate: " + std::to_string(generated.size()) + " summaries for " +
                        std::to_string(games.size()) + " games");
  MetricsReport m;
  if (games.empty()) return m;
  std::size_t facts = 0, correct = 0;
  double p = 0.0, r = 0.0, order = 0.0;
  std::vector<std::vector<std::string>> refs;
  for (std::size_t i = 0; i < games.size(); ++i) {
    const auto& ref = games[i].summary;
    const RgScore g = rg(generated[i], games[i], config);
    facts += g.count;
    correct += g.correct;
    const CsScore c = cs(generated[i], ref, games[i], config);
    p += c.precision;
    r += c.recall;
    order += co(generated[i], ref, games[i], config);
    refs.push_back(ref);
  }
  const double n = static_cast<double>(games.size());
  m.rg_p = ratio_percent(correct, facts);
  m.rg_count = static_cast<double>(facts) / n;
  m.cs_p = p / n;
  m.cs_r = r / n;
  m.cs_f1 = harmonic(m.cs_p, m.cs_r);
  m.co_dld = order / n;
  m.bleu = bleu(generated, refs);
  return m;
}

std::string report_to_json(const MetricsReport& m) {
  nlohmann::ordered_json j;
  j["RG-P%"] = m.rg_p;
  j["RG-#"] = m.rg_count;
  j["CS-P%"] = m.cs_p;
  j["CS-R%"] = m.cs_r;
  j["CS-F1%"] = m.cs_f1;
  j["CO-DLD%"] = m.co_dld;
  j["BLEU"] = m.bleu;
  return j.dump(2);
}

}  // namespace t2t
