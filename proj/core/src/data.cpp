#include "t2t/data.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "t2t/error.hpp"

namespace t2t {

using ojson = nlohmann::ordered_json;

namespace {

constexpr std::array<const char*, kNumTables> kTableKeys = {"home_players", "vis_players",
                                                             "teams"};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string cell_string(const ojson& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  return v.dump();
}

Grid parse_grid(const ojson& obj, TableId table, int date, const std::string& game_id) {
  const char* key = kTableKeys[static_cast<std::size_t>(table)];
  if (!obj.is_object())
    throw SchemaError("game " + game_id + ": '" + key + "' must be an object");
  Grid grid;
  for (const auto& [entity, row] : obj.items()) {
    if (entity.empty()) throw SchemaError("game " + game_id + ": empty entity in " + key);
    if (!row.is_object() || row.empty())
      throw SchemaError("game " + game_id + ": row '" + entity + "' in " + key +
                        " must be a non-empty object");
    if (grid.entities.empty()) {
      for (const auto& [rtype, _] : row.items()) grid.columns.push_back(rtype);
    } else if (row.size() != grid.columns.size()) {
      throw SchemaError("game " + game_id + ": row '" + entity + "' in " + key +
                        " has a different column count");
    }
    const std::size_t i = grid.entities.size();
    grid.entities.push_back(entity);
    for (std::size_t j = 0; j < grid.columns.size(); ++j) {
      auto it = row.find(grid.columns[j]);
      if (it == row.end())
        throw SchemaError("game " + game_id + ": row '" + entity + "' in " + key +
                          " lacks column " + grid.columns[j]);
      Record r;
      r.entity = entity;
      r.rtype = grid.columns[j];
      r.value = cell_string(*it);
      if (r.value.empty())
        throw SchemaError("game " + game_id + ": empty value at " + entity + "/" + r.rtype);
      if (table == TableId::Teams)
        r.feature = i == 0 ? Feature::Home : Feature::Visiting;
      else
        r.feature = table == TableId::HomePlayers ? Feature::Home : Feature::Visiting;
      r.date = date;
      r.table = table;
      r.row = i;
      r.col = j;
      r.game_id = game_id;
      grid.cells.push_back(std::move(r));
    }
  }
  return grid;
}

TableSet parse_game(const ojson& g, std::size_t index) {
  if (!g.is_object()) throw SchemaError("example " + std::to_string(index) + " is not an object");
  auto id_it = g.find("game_id");
  if (id_it == g.end() || !id_it->is_string())
    throw SchemaError("example " + std::to_string(index) + " has no game_id");
  TableSet ts;
  ts.game_id = id_it->get<std::string>();
  auto date_it = g.find("date");
  if (date_it == g.end() || !date_it->is_string())
    throw SchemaError("game " + ts.game_id + ": missing date");
  try {
    ts.date = parse_iso_date(date_it->get<std::string>());
  } catch (const SchemaError& e) {
    throw SchemaError("game " + ts.game_id + ": " + e.what());
  }
  for (std::size_t t = 0; t < kNumTables; ++t) {
    auto it = g.find(kTableKeys[t]);
    if (it == g.end())
      throw SchemaError("game " + ts.game_id + ": missing table '" + kTableKeys[t] + "'");
    ts.tables[t] = parse_grid(*it, static_cast<TableId>(t), ts.date, ts.game_id);
  }
  auto sum_it = g.find("summary");
  if (sum_it == g.end() || !sum_it->is_array())
    throw SchemaError("game " + ts.game_id + ": missing summary token list");
  for (const auto& tok : *sum_it) {
    if (!tok.is_string()) throw SchemaError("game " + ts.game_id + ": non-string summary token");
    ts.summary.push_back(tok.get<std::string>());
  }
  return ts;
}

ojson grid_to_json(const Grid& grid) {
  ojson obj = ojson::object();
  for (std::size_t i = 0; i < grid.rows(); ++i) {
    ojson row = ojson::object();
    for (std::size_t j = 0; j < grid.cols(); ++j) row[grid.columns[j]] = grid.at(i, j).value;
    obj[grid.entities[i]] = std::move(row);
  }
  return obj;
}

}  // namespace

std::size_t Grid::column_index(const std::string& rtype) const {
  return static_cast<std::size_t>(std::find(columns.begin(), columns.end(), rtype) -
                                  columns.begin());
}

std::size_t TableSet::num_records() const {
  std::size_t n = 0;
  for (const auto& t : tables) n += t.cells.size();
  return n;
}

Vocabulary::Vocabulary() {
  for (const char* t : {"<pad>", "<unk>", "<s>", "</s>"}) add(t);
}

std::size_t Vocabulary::add(const std::string& token) {
  auto [it, inserted] = index_.emplace(token, tokens_.size());
  if (inserted) tokens_.push_back(token);
  return it->second;
}

std::size_t Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "dev") return Split::Dev;
  if (name == "test") return Split::Test;
  throw SchemaError("unknown split '" + name + "' (expected train, dev or test)");
}

const std::vector<TableSet>& split_of(const Dataset& d, Split s) {
  switch (s) {
    case Split::Train: return d.train;
    case Split::Dev: return d.dev;
    case Split::Test: return d.test;
  }
  return d.train;
}

int parse_iso_date(const std::string& iso) {
  int y = 0;
  unsigned m = 0, d = 0;
  char tail = 0;
  if (iso.size() != 10 || std::sscanf(iso.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3)
    throw SchemaError("malformed date '" + iso + "' (expected yyyy-mm-dd)");
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                        std::chrono::day{d}};
  if (!ymd.ok()) throw SchemaError("invalid calendar date '" + iso + "'");
  return static_cast<int>(std::chrono::sys_days{ymd}.time_since_epoch().count());
}

std::string format_iso_date(int days) {
  const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{days}}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::vector<TableSet> parse_games(const std::string& json_text) {
  ojson doc;
  try {
    doc = ojson::parse(json_text);
  } catch (const ojson::parse_error& e) {
    throw SchemaError(std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw SchemaError("a split file must hold a JSON list of games");
  std::vector<TableSet> games;
  games.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) games.push_back(parse_game(doc[i], i));
  return games;
}

std::string games_to_json(std::span<const TableSet> games) {
  ojson doc = ojson::array();
  for (const auto& g : games) {
    ojson obj = ojson::object();
    obj["game_id"] = g.game_id;
    obj["date"] = format_iso_date(g.date);
    for (std::size_t t = 0; t < kNumTables; ++t) obj[kTableKeys[t]] = grid_to_json(g.tables[t]);
    obj["summary"] = g.summary;
    doc.push_back(std::move(obj));
  }
  return doc.dump(1) + "\n";
}

Vocabulary build_vocabulary(std::span<const TableSet> train) {
  Vocabulary v;
  for (const auto& g : train) {
    for (const auto& t : g.tables)
      for (const auto& r : t.cells) {
        v.add(r.entity);
        v.add(r.rtype);
        v.add(r.value);
      }
    for (const auto& tok : g.summary) v.add(tok);
  }
  return v;
}

Dataset load_corpus(const std::filesystem::path& dir, const CorpusSchema& schema) {
  if (!std::filesystem::is_directory(dir)) throw IoError("corpus directory not found: " + dir.string());
  Dataset d;
  d.train = parse_games(read_file(dir / schema.train_file));
  d.dev = parse_games(read_file(dir / schema.dev_file));
  d.test = parse_games(read_file(dir / schema.test_file));

  std::set<std::string> seen;
  for (const auto* split : {&d.train, &d.dev, &d.test})
    for (const auto& g : *split)
      if (!seen.insert(g.game_id).second)
        throw SchemaError("game " + g.game_id + " appears more than once in the corpus");

  d.vocab = build_vocabulary(d.train);
  return d;
}

void save_corpus(const Dataset& dataset, const std::filesystem::path& dir,
                 const CorpusSchema& schema) {
  std::filesystem::create_directories(dir);
  write_file(dir / schema.train_file, games_to_json(dataset.train));
  write_file(dir / schema.dev_file, games_to_json(dataset.dev));
  write_file(dir / schema.test_file, games_to_json(dataset.test));
}

// --- timelines --------------------------------------------------------------

TimelineStore::TimelineStore(std::map<Key, std::vector<Record>> index) : index_(std::move(index)) {
  std::set<std::string> entities, types;
  for (const auto& [key, _] : index_) {
    entities.insert(key.first);
    types.insert(key.second);
  }
  num_entities_ = entities.size();
  num_types_ = types.size();
}

const std::vector<Record>* TimelineStore::find(const std::string& entity,
                                               const std::string& rtype) const {
  auto it = index_.find({entity, rtype});
  return it == index_.end() ? nullptr : &it->second;
}

TimelineStore build_timelines(std::span<const TableSet> games) {
  std::map<TimelineStore::Key, std::vector<Record>> index;
  for (const auto& g : games)
    for (const auto& t : g.tables)
      for (const auto& r : t.cells) index[{r.entity, r.rtype}].push_back(r);
  for (auto& [_, seq] : index) {
    std::sort(seq.begin(), seq.end(), [](const Record& a, const Record& b) {
      return std::tie(a.date, a.game_id, a.table, a.row, a.col) <
             std::tie(b.date, b.game_id, b.table, b.row, b.col);
    });
  }
  return TimelineStore(std::move(index));
}

TimelineStore build_timelines(const Dataset& dataset) {
  std::vector<TableSet> all;
  all.reserve(dataset.train.size() + dataset.dev.size() + dataset.test.size());
  for (const auto* split : {&dataset.train, &dataset.dev, &dataset.test})
    all.insert(all.end(), split->begin(), split->end());
  return build_timelines(std::span<const TableSet>(all));
}

std::vector<Record> history_window(const Record& record, const TimelineStore& store,
                                   std::size_t window) {
  if (window == 0) throw ContractError("history_window: window must be at least 1");
  const auto* seq = store.find(record.entity, record.rtype);
  if (!seq) return {};
  auto end = std::lower_bound(seq->begin(), seq->end(), record.date,
                              [](const Record& r, int date) { return r.date < date; });
  const auto available = static_cast<std::size_t>(end - seq->begin());
  auto begin = end - static_cast<std::ptrdiff_t>(std::min(window, available));
  return {begin, end};
}

}  // namespace t2t
