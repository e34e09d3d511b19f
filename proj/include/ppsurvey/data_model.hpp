#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <variant>
#include <vector>

#include "csv.hpp"
#include "error.hpp"
#include "random.hpp"

namespace ppsurvey {

/// Deterministic map from a raw response token to a real number.
class ScalarMap {
 public:
  enum class Kind { NumericPassthrough, OrdinalTable };

  ScalarMap() = default;

  static ScalarMap passthrough() { return ScalarMap(); }

  static ScalarMap ordinal(std::vector<std::pair<std::string, double>> entries) {
    ScalarMap m;
    m.kind_ = Kind::OrdinalTable;
    for (auto& [token, value] : entries) {
      if (!std::isfinite(value))
        throw Error(ErrorCode::InvalidConfig, "data-model", "ordinal value for '" + token + "' is not finite");
      if (!m.table_.emplace(token, value).second)
        throw Error(ErrorCode::InvalidConfig, "data-model", "duplicate ordinal token '" + token + "'");
      m.order_.push_back(token);
    }
    if (m.table_.empty()) throw Error(ErrorCode::InvalidConfig, "data-model", "ordinal map has no entries");
    return m;
  }

  /// A->1, B->2, ... for the first `options` letters.
  static ScalarMap letters(int options) {
    std::vector<std::pair<std::string, double>> e;
    for (int i = 0; i < options; ++i) e.emplace_back(std::string(1, static_cast<char>('A' + i)), i + 1.0);
    return ordinal(std::move(e));
  }

  Kind kind() const noexcept { return kind_; }
  const std::map<std::string, double>& table() const noexcept { return table_; }

  double apply(std::string_view raw) const {
    if (kind_ == Kind::NumericPassthrough) {
      auto v = csv::parse_number(raw);
      if (!v || !std::isfinite(*v))
        throw Error(ErrorCode::ParseFailure, "data-model", "'" + std::string(raw) + "' is not a finite number");
      return *v;
    }
    auto it = table_.find(std::string(raw));
    if (it == table_.end())
      throw Error(ErrorCode::UnknownToken, "data-model", "token '" + std::string(raw) + "' not in ordinal map");
    return it->second;
  }

  /// Text form: one `token = value` per line, `#` starts a comment.
  std::string to_text() const {
    std::ostringstream os;
    for (const auto& t : order_) os << t << " = " << csv::format_number(table_.at(t)) << '\n';
    return os.str();
  }

  static ScalarMap parse_text(std::istream& in) {
    std::vector<std::pair<std::string, double>> entries;
    std::string line;
    std::size_t lineno = 0;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw Error(ErrorCode::InvalidConfig, "data-model", "ordinal map line " + std::to_string(lineno) + " lacks '='");
      std::string token = trim(line.substr(0, eq));
      auto value = csv::parse_number(trim(line.substr(eq + 1)));
      if (token.empty() || !value)
        throw Error(ErrorCode::InvalidConfig, "data-model", "ordinal map line " + std::to_string(lineno) + " is malformed");
      entries.emplace_back(std::move(token), *value);
    }
    return ordinal(std::move(entries));
  }

  static ScalarMap load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "data-model", "cannot open ordinal map '" + path + "'");
    return parse_text(in);
  }

 private:
  Kind kind_ = Kind::NumericPassthrough;
  std::map<std::string, double> table_;
  std::vector<std::string> order_;
};

inline double apply_scalar_map(const ScalarMap& map, std::string_view raw) { return map.apply(raw); }

/// One respondent before labeling: covariates, optional raw response and
/// subgroup labels.
struct SurveyRecord {
  std::string respondent_id;
  std::vector<std::string> covariates;
  std::optional<std::string> response;
  std::vector<std::string> group_keys;
};

namespace detail {

// Shared columnar storage for labeled and unlabeled frames.
class FrameCore {
 public:
  bool operator==(const FrameCore&) const = default;

  std::size_t size() const noexcept { return ids_.size(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const std::string& id(std::size_t i) const { return ids_[i]; }
  std::span<const double> yhat() const noexcept { return yhat_; }

  const std::vector<std::string>& covariate_names() const noexcept { return covariate_names_; }
  const std::vector<std::string>& group_names() const noexcept { return group_names_; }
  const std::vector<std::string>& covariates(std::size_t i) const { return covariates_[i]; }
  const std::vector<std::string>& groups(std::size_t i) const { return groups_[i]; }

  std::optional<std::size_t> covariate_index(std::string_view name) const { return find(covariate_names_, name); }
  std::optional<std::size_t> group_index(std::string_view name) const { return find(group_names_, name); }

  /// Numeric view of one covariate column.
  std::vector<double> numeric_covariate(std::string_view name) const {
    auto c = covariate_index(name);
    if (!c) throw Error(ErrorCode::MissingColumn, "data-model", "no covariate '" + std::string(name) + "'");
    std::vector<double> out(size());
    for (std::size_t i = 0; i < size(); ++i) {
      auto v = csv::parse_number(covariates_[i][*c]);
      if (!v || !std::isfinite(*v))
        throw Error(ErrorCode::ParseFailure, "data-model",
                    "covariate '" + std::string(name) + "' row " + std::to_string(i) + " is not numeric");
      out[i] = *v;
    }
    return out;
  }

 protected:
  static std::optional<std::size_t> find(const std::vector<std::string>& names, std::string_view name) {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return i;
    return std::nullopt;
  }

  void check_shape(const char* what) const {
    std::unordered_set<std::string_view> seen;
    seen.reserve(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      if (!seen.insert(ids_[i]).second)
        throw Error(ErrorCode::MalformedRow, "data-model",
                    std::string(what) + " row " + std::to_string(i) + " repeats respondent id '" + ids_[i] + "'");
      if (covariates_[i].size() != covariate_names_.size() || groups_[i].size() != group_names_.size())
        throw Error(ErrorCode::MalformedRow, "data-model",
                    std::string(what) + " row " + std::to_string(i) + " has inconsistent covariates");
      if (!std::isfinite(yhat_[i]))
        throw Error(ErrorCode::MalformedRow, "data-model",
                    std::string(what) + " row " + std::to_string(i) + " has a non-finite prediction");
    }
  }

  std::vector<std::string> ids_;
  std::vector<std::vector<std::string>> covariates_;
  std::vector<std::vector<std::string>> groups_;
  std::vector<double> yhat_;
  std::vector<std::string> covariate_names_;
  std::vector<std::string> group_names_;
};

inline std::vector<std::string> synthesized_ids(std::string_view prefix, std::size_t n) {
  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = std::string(prefix) + "#" + std::to_string(i);
  return ids;
}

}  // namespace detail

/// Human-labeled sample H: responses y paired with model predictions yhat.
class LabeledSet : public detail::FrameCore {
 public:
  struct Record {
    std::string respondent_id;
    std::vector<std::string> covariates;
    double y = 0.0;
    double yhat = 0.0;
    std::vector<std::string> group_keys;
  };

  LabeledSet() = default;

  LabeledSet(std::vector<std::string> covariate_names, std::vector<std::string> group_names,
             std::vector<Record> records) {
    covariate_names_ = std::move(covariate_names);
    group_names_ = std::move(group_names);
    for (auto& r : records) {
      ids_.push_back(std::move(r.respondent_id));
      covariates_.push_back(std::move(r.covariates));
      groups_.push_back(std::move(r.group_keys));
      y_.push_back(r.y);
      yhat_.push_back(r.yhat);
    }
    validate();
  }

  static LabeledSet from_values(std::span<const double> y, std::span<const double> yhat) {
    if (y.size() != yhat.size())
      throw Error(ErrorCode::InvalidArgument, "data-model", "y and yhat lengths differ");
    LabeledSet s;
    s.ids_ = detail::synthesized_ids("h", y.size());
    s.covariates_.assign(y.size(), {});
    s.groups_.assign(y.size(), {});
    s.y_.assign(y.begin(), y.end());
    s.yhat_.assign(yhat.begin(), yhat.end());
    s.validate();
    return s;
  }

  std::span<const double> y() const noexcept { return y_; }

  Record record(std::size_t i) const { return {ids_[i], covariates_[i], y_[i], yhat_[i], groups_[i]}; }

  bool operator==(const LabeledSet&) const = default;

 private:
  void validate() const {
    if (size() < 2)
      throw Error(ErrorCode::EmptyFrame, "data-model", "labeled set needs at least 2 records, got " + std::to_string(size()));
    check_shape("labeled");
    for (std::size_t i = 0; i < y_.size(); ++i)
      if (!std::isfinite(y_[i]))
        throw Error(ErrorCode::MalformedRow, "data-model", "labeled row " + std::to_string(i) + " has a non-finite response");
  }

  std::vector<double> y_;
};

/// Unlabeled frame U: covariates and predictions only.
class UnlabeledFrame : public detail::FrameCore {
 public:
  struct Record {
    std::string respondent_id;
    std::vector<std::string> covariates;
    double yhat = 0.0;
    std::vector<std::string> group_keys;
  };

  UnlabeledFrame() = default;

  UnlabeledFrame(std::vector<std::string> covariate_names, std::vector<std::string> group_names,
                 std::vector<Record> records) {
    covariate_names_ = std::move(covariate_names);
    group_names_ = std::move(group_names);
    for (auto& r : records) {
      ids_.push_back(std::move(r.respondent_id));
      covariates_.push_back(std::move(r.covariates));
      groups_.push_back(std::move(r.group_keys));
      yhat_.push_back(r.yhat);
    }
    validate();
  }

  static UnlabeledFrame from_values(std::span<const double> yhat) {
    UnlabeledFrame f;
    f.ids_ = detail::synthesized_ids("u", yhat.size());
    f.covariates_.assign(yhat.size(), {});
    f.groups_.assign(yhat.size(), {});
    f.yhat_.assign(yhat.begin(), yhat.end());
    f.validate();
    return f;
  }

  Record record(std::size_t i) const { return {ids_[i], covariates_[i], yhat_[i], groups_[i]}; }

  bool operator==(const UnlabeledFrame&) const = default;

 private:
  void validate() const {
    if (size() < 1) throw Error(ErrorCode::EmptyFrame, "data-model", "unlabeled frame is empty");
    check_shape("unlabeled");
  }
};

/// Throws OverlapError when H and U share a respondent id.
inline void require_disjoint(const LabeledSet& h, const UnlabeledFrame& u, const char* component) {
  std::unordered_set<std::string_view> ids(h.ids().begin(), h.ids().end());
  for (const auto& id : u.ids())
    if (ids.contains(id))
      throw Error(ErrorCode::OverlapError, component, "respondent '" + id + "' is in both the labeled and unlabeled sets");
}

/// Column layout of a frame file.
struct FrameSchema {
  std::optional<std::string> id_column;
  std::vector<std::string> covariate_columns;
  std::vector<std::string> group_columns;
  std::optional<std::string> response_column;
  std::string prediction_column = "yhat";
};

using Frame = std::variant<LabeledSet, UnlabeledFrame>;

inline Frame parse_frame(const csv::Table& table, const FrameSchema& schema, const ScalarMap& map,
                         std::string_view source) {
  const std::size_t pred = table.require_column(schema.prediction_column);
  std::optional<std::size_t> idc;
  if (schema.id_column) idc = table.require_column(*schema.id_column);
  std::vector<std::size_t> cov, grp;
  for (const auto& c : schema.covariate_columns) cov.push_back(table.require_column(c));
  for (const auto& g : schema.group_columns) grp.push_back(table.require_column(g));
  std::optional<std::size_t> resp;
  if (schema.response_column) resp = table.column(*schema.response_column);

  if (table.rows.empty()) throw Error(ErrorCode::EmptyFrame, "data-model", std::string(source) + " has no data rows");

  auto row_error = [&](ErrorCode code, std::size_t row, const std::string& what) {
    return Error(code, "data-model", std::string(source) + " row " + std::to_string(row) + ": " + what);
  };
  auto collect = [](const std::vector<std::string>& row, const std::vector<std::size_t>& cols) {
    std::vector<std::string> out;
    out.reserve(cols.size());
    for (auto c : cols) out.push_back(row[c]);
    return out;
  };

  std::vector<LabeledSet::Record> labeled;
  std::vector<UnlabeledFrame::Record> unlabeled;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    std::string id = idc ? row[*idc] : std::string(source) + "#" + std::to_string(r);
    if (id.empty()) throw row_error(ErrorCode::MalformedRow, r, "empty respondent id");
    auto yhat = csv::parse_number(row[pred]);
    if (!yhat || !std::isfinite(*yhat)) throw row_error(ErrorCode::ParseFailure, r, "prediction '" + row[pred] + "' is not a finite number");
    if (resp) {
      const auto& token = row[*resp];
      if (token.empty()) throw row_error(ErrorCode::MalformedRow, r, "missing response");
      double y = 0.0;
      try {
        y = map.apply(token);
      } catch (const Error& e) {
        throw row_error(e.code(), r, e.detail());
      }
      labeled.push_back({std::move(id), collect(row, cov), y, *yhat, collect(row, grp)});
    } else {
      unlabeled.push_back({std::move(id), collect(row, cov), *yhat, collect(row, grp)});
    }
  }
  if (resp) return LabeledSet(schema.covariate_columns, schema.group_columns, std::move(labeled));
  return UnlabeledFrame(schema.covariate_columns, schema.group_columns, std::move(unlabeled));
}

/// Loads a CSV frame. The result is a LabeledSet when the schema's response
/// column is present in the file, otherwise an UnlabeledFrame.
inline Frame load_frame(const std::string& path, const FrameSchema& schema, const ScalarMap& map) {
  return parse_frame(csv::read(path), schema, map, path);
}

inline LabeledSet load_labeled(const std::string& path, const FrameSchema& schema, const ScalarMap& map) {
  if (!schema.response_column) throw Error(ErrorCode::InvalidArgument, "data-model", "labeled frame needs a response column");
  auto table = csv::read(path);
  table.require_column(*schema.response_column);
  return std::get<LabeledSet>(parse_frame(table, schema, map, path));
}

inline UnlabeledFrame load_unlabeled(const std::string& path, FrameSchema schema) {
  schema.response_column.reset();
  return std::get<UnlabeledFrame>(parse_frame(csv::read(path), schema, ScalarMap::passthrough(), path));
}

/// CSV serialization; reloading with the same schema and a passthrough map
/// reproduces the frame exactly.
inline csv::Table frame_table(const Frame& frame, const FrameSchema& schema) {
  csv::Table t;
  const auto& core = std::visit([](const auto& f) -> const detail::FrameCore& { return f; }, frame);
  const auto* labeled = std::get_if<LabeledSet>(&frame);
  t.header.push_back(schema.id_column.value_or("respondent_id"));
  for (const auto& c : core.covariate_names()) t.header.push_back(c);
  for (const auto& g : core.group_names()) t.header.push_back(g);
  if (labeled) t.header.push_back(schema.response_column.value_or("y"));
  t.header.push_back(schema.prediction_column);
  for (std::size_t i = 0; i < core.size(); ++i) {
    std::vector<std::string> row{core.id(i)};
    for (const auto& v : core.covariates(i)) row.push_back(v);
    for (const auto& v : core.groups(i)) row.push_back(v);
    if (labeled) row.push_back(csv::format_number(labeled->y()[i]));
    row.push_back(csv::format_number(core.yhat()[i]));
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline void save_frame(const std::string& path, const Frame& frame, const FrameSchema& schema) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "data-model", "cannot write '" + path + "'");
  csv::write(out, frame_table(frame, schema));
}

/// A fully observed frame (evaluation mode): every record has y and yhat.
struct FullFrame {
  struct Record {
    std::string respondent_id;
    std::vector<std::string> covariates;
    double y = 0.0;
    double yhat = 0.0;
    std::vector<std::string> group_keys;
  };
  std::vector<std::string> covariate_names;
  std::vector<std::string> group_names;
  std::vector<Record> records;
};

/// Uniform sample of n_human distinct indices out of `size`, returned as
/// (labeled indices, unlabeled indices), both ascending.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t size, std::size_t n_human,
                                                                                    Rng& rng) {
  if (n_human >= size)
    throw Error(ErrorCode::BudgetExceedsFrame, "data-model",
                "n_human=" + std::to_string(n_human) + " must be below frame size " + std::to_string(size));
  if (n_human < 2) throw Error(ErrorCode::InvalidArgument, "data-model", "n_human must be at least 2");
  std::vector<std::size_t> perm(size);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = 0; i < n_human; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_index(rng, size - i));
    std::swap(perm[i], perm[j]);
  }
  std::vector<std::size_t> h(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_human));
  std::vector<char> in_h(size, 0);
  for (auto i : h) in_h[i] = 1;
  std::vector<std::size_t> u;
  u.reserve(size - n_human);
  for (std::size_t i = 0; i < size; ++i)
    if (!in_h[i]) u.push_back(i);
  std::sort(h.begin(), h.end());
  return {std::move(h), std::move(u)};
}

inline std::pair<LabeledSet, UnlabeledFrame> split_frame(const FullFrame& full, std::size_t n_human, std::uint64_t seed) {
  auto rng = make_rng(seed, "split");
  auto [hi, ui] = split_indices(full.records.size(), n_human, rng);
  std::vector<LabeledSet::Record> h;
  std::vector<UnlabeledFrame::Record> u;
  for (auto i : hi) {
    const auto& r = full.records[i];
    h.push_back({r.respondent_id, r.covariates, r.y, r.yhat, r.group_keys});
  }
  for (auto i : ui) {
    const auto& r = full.records[i];
    u.push_back({r.respondent_id, r.covariates, r.yhat, r.group_keys});
  }
  return {LabeledSet(full.covariate_names, full.group_names, std::move(h)),
          UnlabeledFrame(full.covariate_names, full.group_names, std::move(u))};
}

}  // namespace ppsurvey
