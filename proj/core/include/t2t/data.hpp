#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace t2t {

enum class Feature : std::uint8_t { Home = 0, Visiting = 1 };
enum class TableId : std::uint8_t { HomePlayers = 0, VisitingPlayers = 1, Teams = 2 };

inline constexpr std::size_t kNumTables = 3;

/// One table cell.
struct Record {
  std::string entity;
  std::string rtype;
  std::string value;
  Feature feature = Feature::Home;
  int date = 0;  // days since 1970-01-01
  TableId table = TableId::HomePlayers;
  std::size_t row = 0;
  std::size_t col = 0;
  std::string game_id;

  bool operator==(const Record&) const = default;
};

/// A rectangular table: one row per entity, one column per record type.
struct Grid {
  std::vector<std::string> entities;  // row labels
  std::vector<std::string> columns;   // column types
  std::vector<Record> cells;          // row-major

  std::size_t rows() const { return entities.size(); }
  std::size_t cols() const { return columns.size(); }
  bool empty() const { return cells.empty(); }
  const Record& at(std::size_t i, std::size_t j) const { return cells[i * cols() + j]; }
  /// Column index of `rtype`, or cols() when absent.
  std::size_t column_index(const std::string& rtype) const;

  bool operator==(const Grid&) const = default;
};

/// The three tables of one game plus its reference summary.
struct TableSet {
  std::string game_id;
  int date = 0;
  std::array<Grid, kNumTables> tables;
  std::vector<std::string> summary;

  std::size_t num_records() const;
  const Grid& table(TableId id) const { return tables[static_cast<std::size_t>(id)]; }

  bool operator==(const TableSet&) const = default;
};

/// Dense token <-> id map with reserved ids for padding, unknown, start and end.
class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::size_t kBos = 2;
  static constexpr std::size_t kEos = 3;
  static constexpr std::size_t kNumReserved = 4;

  Vocabulary();

  std::size_t add(const std::string& token);
  /// Id of `token`, or kUnk when it was never added.
  std::size_t id(const std::string& token) const;
  bool contains(const std::string& token) const { return index_.count(token) != 0; }
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct Dataset {
  std::vector<TableSet> train;
  std::vector<TableSet> dev;
  std::vector<TableSet> test;
  Vocabulary vocab;

  bool operator==(const Dataset&) const = default;
};

enum class Split { Train, Dev, Test };
Split parse_split(const std::string& name);
const std::vector<TableSet>& split_of(const Dataset& d, Split s);

/// File layout of a corpus directory: one JSON list per split.
struct CorpusSchema {
  std::string train_file = "train.json";
  std::string dev_file = "dev.json";
  std::string test_file = "test.json";
};

/// Loads every split and builds the vocabulary from the training split.
/// Throws IoError for unreadable files and SchemaError for malformed games.
Dataset load_corpus(const std::filesystem::path& dir, const CorpusSchema& schema = {});
void save_corpus(const Dataset& dataset, const std::filesystem::path& dir,
                 const CorpusSchema& schema = {});

std::vector<TableSet> parse_games(const std::string& json_text);
std::string games_to_json(std::span<const TableSet> games);

/// Vocabulary over training summaries and every entity, type and value in
/// the training tables, in first-appearance order.
Vocabulary build_vocabulary(std::span<const TableSet> train);

int parse_iso_date(const std::string& iso);
std::string format_iso_date(int days);

/// Date-sorted record sequences keyed by (entity, type).
class TimelineStore {
 public:
  using Key = std::pair<std::string, std::string>;

  TimelineStore() = default;
  explicit TimelineStore(std::map<Key, std::vector<Record>> index);

  /// nullptr when the pair never occurs.
  const std::vector<Record>* find(const std::string& entity, const std::string& rtype) const;
  const std::map<Key, std::vector<Record>>& index() const { return index_; }
  std::size_t num_entities() const { return num_entities_; }
  std::size_t num_types() const { return num_types_; }

  bool operator==(const TimelineStore& o) const { return index_ == o.index_; }

 private:
  std::map<Key, std::vector<Record>> index_;
  std::size_t num_entities_ = 0;
  std::size_t num_types_ = 0;
};

/// Timelines over every split. Records are sorted by date, then game id.
TimelineStore build_timelines(const Dataset& dataset);
TimelineStore build_timelines(std::span<const TableSet> games);

/// The at most `window` most recent records of the same (entity, type)
/// dated strictly before `record.date`, oldest first.
std::vector<Record> history_window(const Record& record, const TimelineStore& store,
                                   std::size_t window);

}  // namespace t2t
