#include "valmon/data_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>

#include "valmon/csv.hpp"
#include "valmon/stats.hpp"

namespace valmon {

const char *to_string(ColumnKind kind) {
  return kind == ColumnKind::numeric ? "numeric" : "categorical";
}

const char *to_string(ColumnRole role) {
  switch (role) {
    case ColumnRole::feature: return "feature";
    case ColumnRole::target: return "target";
    case ColumnRole::prediction: return "prediction";
    case ColumnRole::prediction_lower: return "prediction_lower";
    case ColumnRole::prediction_upper: return "prediction_upper";
    case ColumnRole::timestamp: return "timestamp";
    case ColumnRole::split_tag: return "split_tag";
  }
  return "feature";
}

ColumnKind parse_column_kind(std::string_view text) {
  if (text == "numeric") return ColumnKind::numeric;
  if (text == "categorical") return ColumnKind::categorical;
  throw SchemaError("unknown column kind '" + std::string(text) + "'");
}

ColumnRole parse_column_role(std::string_view text) {
  for (auto role : {ColumnRole::feature, ColumnRole::target, ColumnRole::prediction,
                    ColumnRole::prediction_lower, ColumnRole::prediction_upper, ColumnRole::timestamp,
                    ColumnRole::split_tag}) {
    if (text == to_string(role)) return role;
  }
  throw SchemaError("unknown column role '" + std::string(text) + "'");
}

Schema::Schema(std::vector<ColumnSpec> columns) : columns_(std::move(columns)) {
  std::set<std::string> names;
  std::map<ColumnRole, int> role_counts;
  for (const auto &c : columns_) {
    if (c.name.empty()) throw SchemaError("column name must not be empty");
    if (!names.insert(c.name).second) throw SchemaError("duplicate column name '" + c.name + "'");
    if (c.role != ColumnRole::feature && ++role_counts[c.role] > 1)
      throw SchemaError(std::string("more than one column with role ") + to_string(c.role));
    if (c.valid_range && c.kind != ColumnKind::numeric)
      throw SchemaError("valid_range on non-numeric column '" + c.name + "'");
    if (c.valid_range && c.valid_range->first > c.valid_range->second)
      throw SchemaError("valid_range min > max on column '" + c.name + "'");
    if (c.valid_categories && c.kind != ColumnKind::categorical)
      throw SchemaError("valid_categories on non-categorical column '" + c.name + "'");
    const bool numeric_role = c.role == ColumnRole::target || c.role == ColumnRole::prediction ||
                              c.role == ColumnRole::prediction_lower ||
                              c.role == ColumnRole::prediction_upper;
    if (numeric_role && c.kind != ColumnKind::numeric)
      throw SchemaError("column '" + c.name + "' with role " + to_string(c.role) + " must be numeric");
  }
  const bool has_lower = role_counts.count(ColumnRole::prediction_lower) > 0;
  const bool has_upper = role_counts.count(ColumnRole::prediction_upper) > 0;
  if (has_lower != has_upper)
    throw SchemaError("prediction_lower and prediction_upper must be declared together");
}

const ColumnSpec *Schema::find(std::string_view name) const {
  for (const auto &c : columns_)
    if (c.name == name) return &c;
  return nullptr;
}

const ColumnSpec *Schema::with_role(ColumnRole role) const {
  for (const auto &c : columns_)
    if (c.role == role) return &c;
  return nullptr;
}

std::vector<const ColumnSpec *> Schema::features() const {
  std::vector<const ColumnSpec *> out;
  for (const auto &c : columns_)
    if (c.role == ColumnRole::feature) out.push_back(&c);
  return out;
}

std::vector<double> NumericColumn::observed() const {
  std::vector<double> out;
  out.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    if (!missing[i]) out.push_back(values[i]);
  return out;
}

std::size_t CategoricalColumn::observed_count() const {
  return static_cast<std::size_t>(std::count(missing.begin(), missing.end(), false));
}

CategoricalColumn CategoricalColumn::from_labels(std::string name,
                                                 const std::vector<std::optional<std::string>> &cells) {
  CategoricalColumn col;
  col.name = std::move(name);
  col.codes.reserve(cells.size());
  col.missing.reserve(cells.size());
  std::unordered_map<std::string, int> index;
  for (const auto &cell : cells) {
    if (!cell) {
      col.codes.push_back(-1);
      col.missing.push_back(true);
      continue;
    }
    auto [it, inserted] = index.try_emplace(*cell, static_cast<int>(col.labels.size()));
    if (inserted) col.labels.push_back(*cell);
    col.codes.push_back(it->second);
    col.missing.push_back(false);
  }
  return col;
}

const std::string &column_name(const Column &column) {
  return std::visit([](const auto &c) -> const std::string & { return c.name; }, column);
}

std::size_t column_size(const Column &column) {
  return std::visit([](const auto &c) { return c.size(); }, column);
}

bool column_missing(const Column &column, std::size_t row) {
  return std::visit([row](const auto &c) { return c.is_missing(row); }, column);
}

NumericColumn make_numeric(std::string name, std::vector<double> values) {
  NumericColumn col{std::move(name), std::move(values), {}};
  col.missing.assign(col.values.size(), false);
  return col;
}

FeatureFrame::FeatureFrame(std::vector<Column> columns) : columns_(std::move(columns)) {
  std::set<std::string> seen;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    const auto &col = columns_[i];
    const auto &name = column_name(col);
    if (!seen.insert(name).second) throw DuplicateHeader("duplicate column '" + name + "'");
    const std::size_t n = column_size(col);
    const std::size_t n_mask =
        std::visit([](const auto &c) { return c.missing.size(); }, col);
    if (n_mask != n) throw InvalidArgument("missing mask length differs for column '" + name + "'");
    if (i == 0) n_rows_ = n;
    else if (n != n_rows_) throw InvalidArgument("column '" + name + "' has a different row count");
  }
}

const Column *FeatureFrame::find(std::string_view name) const {
  for (const auto &c : columns_)
    if (column_name(c) == name) return &c;
  return nullptr;
}

const Column &FeatureFrame::column(std::string_view name) const {
  if (const auto *c = find(name)) return *c;
  throw UnknownFeature("unknown feature '" + std::string(name) + "'");
}

const NumericColumn &FeatureFrame::numeric(std::string_view name) const {
  const auto &c = column(name);
  if (const auto *num = std::get_if<NumericColumn>(&c)) return *num;
  throw InvalidArgument("feature '" + std::string(name) + "' is not numeric");
}

std::vector<std::string> FeatureFrame::names() const {
  std::vector<std::string> out;
  for (const auto &c : columns_) out.push_back(column_name(c));
  return out;
}

std::vector<std::string> FeatureFrame::numeric_names() const {
  std::vector<std::string> out;
  for (const auto &c : columns_)
    if (std::holds_alternative<NumericColumn>(c)) out.push_back(column_name(c));
  return out;
}

bool FeatureFrame::has_missing() const {
  for (const auto &c : columns_) {
    const auto &mask = std::visit([](const auto &col) -> const std::vector<bool> & { return col.missing; }, c);
    if (std::find(mask.begin(), mask.end(), true) != mask.end()) return true;
  }
  return false;
}

namespace {

template <typename T>
std::vector<T> pick(const std::vector<T> &src, std::span<const std::size_t> rows) {
  std::vector<T> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(src.at(r));
  return out;
}

}  // namespace

FeatureFrame FeatureFrame::select_rows(std::span<const std::size_t> rows) const {
  std::vector<Column> cols;
  cols.reserve(columns_.size());
  for (const auto &c : columns_) {
    if (const auto *num = std::get_if<NumericColumn>(&c)) {
      cols.emplace_back(NumericColumn{num->name, pick(num->values, rows), pick(num->missing, rows)});
    } else {
      const auto &cat = std::get<CategoricalColumn>(c);
      cols.emplace_back(CategoricalColumn{cat.name, pick(cat.codes, rows), cat.labels, pick(cat.missing, rows)});
    }
  }
  FeatureFrame out(std::move(cols));
  if (columns_.empty()) out.n_rows_ = rows.size();
  return out;
}

FeatureFrame FeatureFrame::with_column(Column replacement) const {
  std::vector<Column> cols = columns_;
  const auto &name = column_name(replacement);
  bool replaced = false;
  for (auto &c : cols) {
    if (column_name(c) == name) {
      c = std::move(replacement);
      replaced = true;
      break;
    }
  }
  if (!replaced) throw UnknownFeature("unknown feature '" + name + "'");
  return FeatureFrame(std::move(cols));
}

Eigen::MatrixXd numeric_matrix(const FeatureFrame &frame, std::span<const std::string> names) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(frame.n_rows()), static_cast<Eigen::Index>(names.size()));
  for (std::size_t j = 0; j < names.size(); ++j) {
    const auto &col = frame.numeric(names[j]);
    for (std::size_t i = 0; i < col.size(); ++i) {
      if (col.missing[i])
        throw MissingValues("missing value in column '" + col.name + "' row " + std::to_string(i));
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col.values[i];
    }
  }
  return m;
}

Eigen::MatrixXd numeric_matrix(const FeatureFrame &frame) {
  const auto names = frame.numeric_names();
  return numeric_matrix(frame, names);
}

ScoredDataset::ScoredDataset(FeatureFrame frame, Outcomes outcomes)
    : frame_(std::move(frame)), outcomes_(std::move(outcomes)) {
  const std::size_t n = frame_.n_rows();
  auto check = [n](std::size_t len, const char *what) {
    if (len != n)
      throw LengthMismatch(std::string(what) + " has " + std::to_string(len) + " rows, frame has " +
                           std::to_string(n));
  };
  check(outcomes_.y_true.size(), "y_true");
  check(outcomes_.y_pred.size(), "y_pred");
  if (outcomes_.y_pred_lower.has_value() != outcomes_.y_pred_upper.has_value())
    throw InvalidArgument("y_pred_lower and y_pred_upper must be present together");
  if (outcomes_.y_pred_lower) {
    check(outcomes_.y_pred_lower->size(), "y_pred_lower");
    check(outcomes_.y_pred_upper->size(), "y_pred_upper");
    for (std::size_t i = 0; i < n; ++i)
      if ((*outcomes_.y_pred_lower)[i] > (*outcomes_.y_pred_upper)[i])
        throw InvalidArgument("y_pred_lower > y_pred_upper at row " + std::to_string(i));
  }
  if (outcomes_.timestamps) check(outcomes_.timestamps->size(), "timestamps");
  if (outcomes_.split_tag) check(outcomes_.split_tag->size(), "split_tag");
}

ScoredDataset ScoredDataset::select_rows(std::span<const std::size_t> rows) const {
  Outcomes o;
  o.y_true = pick(outcomes_.y_true, rows);
  o.y_pred = pick(outcomes_.y_pred, rows);
  if (outcomes_.y_pred_lower) o.y_pred_lower = pick(*outcomes_.y_pred_lower, rows);
  if (outcomes_.y_pred_upper) o.y_pred_upper = pick(*outcomes_.y_pred_upper, rows);
  if (outcomes_.timestamps) o.timestamps = pick(*outcomes_.timestamps, rows);
  if (outcomes_.split_tag) o.split_tag = pick(*outcomes_.split_tag, rows);
  return ScoredDataset(frame_.select_rows(rows), std::move(o));
}

Residuals residuals(const ScoredDataset &ds) {
  Residuals r;
  r.values.resize(ds.n_rows());
  for (std::size_t i = 0; i < ds.n_rows(); ++i) r.values[i] = ds.y_true()[i] - ds.y_pred()[i];
  return r;
}

namespace {

std::optional<double> parse_double(std::string_view token) {
  // Leading/trailing blanks are tolerated; anything else must be consumed.
  while (!token.empty() && (token.front() == ' ' || token.front() == '\t')) token.remove_prefix(1);
  while (!token.empty() && (token.back() == ' ' || token.back() == '\t')) token.remove_suffix(1);
  if (token.empty()) return std::nullopt;
  if (token.front() == '+') token.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) return std::nullopt;
  return value;
}

struct ParsedTable {
  std::vector<std::string> header;
  std::vector<csv::Row> rows;
  std::unordered_map<std::string, std::size_t> index;
};

ParsedTable parse_table(std::string_view text, const Schema &schema,
                        const std::vector<const ColumnSpec *> &required) {
  auto records = csv::parse(text);
  if (records.empty()) throw EmptyDataset("CSV input has no header row");
  ParsedTable t;
  t.header = std::move(records.front());
  for (std::size_t j = 0; j < t.header.size(); ++j) {
    if (!t.index.emplace(t.header[j], j).second)
      throw DuplicateHeader("duplicate header '" + t.header[j] + "'");
  }
  for (const auto *spec : required)
    if (!t.index.count(spec->name)) throw MissingColumn(spec->name);
  (void)schema;
  t.rows.assign(std::make_move_iterator(records.begin() + 1), std::make_move_iterator(records.end()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (t.rows[r].size() != t.header.size())
      throw InvalidArgument("row " + std::to_string(r) + " has " + std::to_string(t.rows[r].size()) +
                            " fields, header has " + std::to_string(t.header.size()));
  }
  return t;
}

Column build_column(const ParsedTable &t, const ColumnSpec &spec, const std::set<std::string> &missing_tokens) {
  const std::size_t j = t.index.at(spec.name);
  if (spec.kind == ColumnKind::numeric) {
    NumericColumn col;
    col.name = spec.name;
    col.values.reserve(t.rows.size());
    col.missing.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const auto &cell = t.rows[r][j];
      if (missing_tokens.count(cell)) {
        col.values.push_back(0.0);
        col.missing.push_back(true);
        continue;
      }
      auto v = parse_double(cell);
      if (!v) throw TypeParseError(r, spec.name, cell);
      col.values.push_back(*v);
      col.missing.push_back(false);
    }
    return col;
  }
  std::vector<std::optional<std::string>> cells;
  cells.reserve(t.rows.size());
  for (const auto &row : t.rows) {
    if (missing_tokens.count(row[j])) cells.emplace_back(std::nullopt);
    else cells.emplace_back(row[j]);
  }
  return CategoricalColumn::from_labels(spec.name, cells);
}

std::vector<double> required_numbers(const ParsedTable &t, const ColumnSpec &spec,
                                     const std::set<std::string> &missing_tokens) {
  const std::size_t j = t.index.at(spec.name);
  std::vector<double> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto &cell = t.rows[r][j];
    auto v = missing_tokens.count(cell) ? std::nullopt : parse_double(cell);
    if (!v) throw TypeParseError(r, spec.name, cell);
    out.push_back(*v);
  }
  return out;
}

std::vector<std::string> raw_strings(const ParsedTable &t, const ColumnSpec &spec) {
  const std::size_t j = t.index.at(spec.name);
  std::vector<std::string> out;
  out.reserve(t.rows.size());
  for (const auto &row : t.rows) out.push_back(row[j]);
  return out;
}

FeatureFrame frame_from_table(const ParsedTable &t, const Schema &schema,
                              const std::set<std::string> &missing_tokens) {
  std::vector<Column> cols;
  for (const auto *spec : schema.features()) cols.push_back(build_column(t, *spec, missing_tokens));
  FeatureFrame frame(std::move(cols));
  if (frame.n_cols() == 0 && !t.rows.empty()) {
    std::vector<std::size_t> all(t.rows.size());
    std::iota(all.begin(), all.end(), 0);
    return frame.select_rows(all);
  }
  return frame;
}

}  // namespace

FeatureFrame parse_frame_csv(std::string_view text, const Schema &schema,
                             const std::set<std::string> &missing_tokens) {
  const auto table = parse_table(text, schema, schema.features());
  return frame_from_table(table, schema, missing_tokens);
}

FeatureFrame load_frame_csv(const std::string &path, const Schema &schema,
                            const std::set<std::string> &missing_tokens) {
  return parse_frame_csv(csv::read_file(path), schema, missing_tokens);
}

ScoredDataset parse_scored_csv(std::string_view text, const Schema &schema,
                               const std::set<std::string> &missing_tokens) {
  const auto *target = schema.with_role(ColumnRole::target);
  const auto *prediction = schema.with_role(ColumnRole::prediction);
  if (!target) throw SchemaError("schema has no target column");
  if (!prediction) throw SchemaError("schema has no prediction column");

  std::vector<const ColumnSpec *> required;
  for (const auto &c : schema.columns()) required.push_back(&c);
  const auto table = parse_table(text, schema, required);

  ScoredDataset::Outcomes o;
  o.y_true = required_numbers(table, *target, missing_tokens);
  o.y_pred = required_numbers(table, *prediction, missing_tokens);
  if (const auto *lo = schema.with_role(ColumnRole::prediction_lower)) {
    o.y_pred_lower = required_numbers(table, *lo, missing_tokens);
    o.y_pred_upper = required_numbers(table, *schema.with_role(ColumnRole::prediction_upper), missing_tokens);
  }
  if (const auto *ts = schema.with_role(ColumnRole::timestamp)) o.timestamps = raw_strings(table, *ts);
  if (const auto *tag = schema.with_role(ColumnRole::split_tag)) o.split_tag = raw_strings(table, *tag);
  return ScoredDataset(frame_from_table(table, schema, missing_tokens), std::move(o));
}

ScoredDataset load_scored_csv(const std::string &path, const Schema &schema,
                              const std::set<std::string> &missing_tokens) {
  return parse_scored_csv(csv::read_file(path), schema, missing_tokens);
}

std::string format_number(double value) {
  if (std::isnan(value)) return "NaN";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

namespace {

std::string cell_text(const Column &c, std::size_t row) {
  if (column_missing(c, row)) return "";
  if (const auto *num = std::get_if<NumericColumn>(&c)) return format_number(num->values[row]);
  return std::get<CategoricalColumn>(c).label_at(row);
}

}  // namespace

std::string to_csv(const FeatureFrame &frame) {
  std::string out;
  csv::append_row(out, frame.names());
  csv::Row row(frame.n_cols());
  for (std::size_t i = 0; i < frame.n_rows(); ++i) {
    for (std::size_t j = 0; j < frame.n_cols(); ++j) row[j] = cell_text(frame.columns()[j], i);
    csv::append_row(out, row);
  }
  return out;
}

std::string to_csv(const ScoredDataset &ds, const Schema &schema) {
  auto role_name = [&](ColumnRole role, const char *fallback) {
    const auto *spec = schema.with_role(role);
    return spec ? spec->name : std::string(fallback);
  };
  csv::Row header = ds.frame().names();
  header.push_back(role_name(ColumnRole::target, "y_true"));
  header.push_back(role_name(ColumnRole::prediction, "y_pred"));
  if (ds.y_pred_lower()) {
    header.push_back(role_name(ColumnRole::prediction_lower, "y_pred_lower"));
    header.push_back(role_name(ColumnRole::prediction_upper, "y_pred_upper"));
  }
  if (ds.timestamps()) header.push_back(role_name(ColumnRole::timestamp, "timestamp"));
  if (ds.split_tag()) header.push_back(role_name(ColumnRole::split_tag, "split_tag"));

  std::string out;
  csv::append_row(out, header);
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    csv::Row row;
    row.reserve(header.size());
    for (const auto &c : ds.frame().columns()) row.push_back(cell_text(c, i));
    row.push_back(format_number(ds.y_true()[i]));
    row.push_back(format_number(ds.y_pred()[i]));
    if (ds.y_pred_lower()) {
      row.push_back(format_number((*ds.y_pred_lower())[i]));
      row.push_back(format_number((*ds.y_pred_upper())[i]));
    }
    if (ds.timestamps()) row.push_back((*ds.timestamps())[i]);
    if (ds.split_tag()) row.push_back((*ds.split_tag())[i]);
    csv::append_row(out, row);
  }
  return out;
}

std::vector<LabeledSplit> split_dataset(const ScoredDataset &ds,
                                        const std::vector<std::pair<std::string, double>> &fractions,
                                        std::uint64_t seed) {
  const std::size_t n = ds.n_rows();
  if (n == 0) throw EmptyDataset("cannot split an empty dataset");
  if (fractions.empty()) throw InvalidArgument("no split fractions given");
  double total = 0.0;
  for (const auto &[label, w] : fractions) {
    if (!(w > 0.0)) throw InvalidArgument("split weight for '" + label + "' must be positive");
    total += w;
  }

  std::vector<std::size_t> sizes;
  std::size_t assigned = 0;
  for (const auto &[label, w] : fractions) {
    const auto size = static_cast<std::size_t>(std::floor(w / total * static_cast<double>(n) + 1e-9));
    sizes.push_back(std::min(size, n - assigned));
    assigned += sizes.back();
  }
  for (std::size_t i = 0; assigned < n; i = (i + 1) % sizes.size(), ++assigned) ++sizes[i];

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  shuffle(order, rng);

  std::vector<LabeledSplit> out;
  std::size_t offset = 0;
  for (std::size_t p = 0; p < fractions.size(); ++p) {
    std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(offset),
                                  order.begin() + static_cast<std::ptrdiff_t>(offset + sizes[p]));
    std::sort(rows.begin(), rows.end());
    offset += sizes[p];
    auto data = ds.select_rows(rows);
    out.push_back({fractions[p].first, std::move(rows), std::move(data)});
  }
  return out;
}

std::optional<std::vector<double>> numeric_timestamps(const std::vector<std::string> &timestamps) {
  std::vector<double> out;
  out.reserve(timestamps.size());
  for (const auto &t : timestamps) {
    auto v = parse_double(t);
    if (!v) return std::nullopt;
    out.push_back(*v);
  }
  return out;
}

std::vector<std::size_t> timestamp_order(const std::vector<std::string> &timestamps) {
  std::vector<std::size_t> order(timestamps.size());
  std::iota(order.begin(), order.end(), 0);
  if (auto numeric = numeric_timestamps(timestamps)) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return (*numeric)[a] < (*numeric)[b]; });
  } else {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return timestamps[a] < timestamps[b]; });
  }
  return order;
}

}  // namespace valmon
