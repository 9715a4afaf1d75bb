// CSV serialization of datasets and manifolds.
//
// Dataset schema: a header row naming every column. Numeric features are
// prefixed `x_`, categorical features `t_` (optionally `t_name[L]` to declare
// L levels; otherwise the count is max index + 1). `y` is required; `truth`
// (0 normal, 1 anomalous) and `source_id` are optional. Reals are written with
// 17 significant digits, which round-trips IEEE doubles exactly.

#ifndef MANIFOLD_AD_CSV_HPP
#define MANIFOLD_AD_CSV_HPP

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <unistd.h>

#include "manifold_ad/dataset.hpp"
#include "manifold_ad/errors.hpp"
#include "manifold_ad/manifold.hpp"

namespace manifold_ad {

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Writes `content` to `path` through a sibling temporary file and rename(2),
/// so readers never observe a partially written file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw InputError("write to " + tmp.string() + " failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw InputError("cannot rename into " + path.string() + ": " + ec.message());
  }
}

namespace detail {

inline std::vector<std::string_view> split_row(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    auto cell = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) cell.remove_suffix(1);
    cells.push_back(cell);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return cells;
}

inline std::string where(std::size_t line, std::string_view column) {
  return "line " + std::to_string(line) + ", column '" + std::string(column) + "'";
}

inline double parse_real(std::string_view s, std::size_t line, std::string_view column) {
  double v = 0.0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw InputError("non-numeric value '" + std::string(s) + "' at " + where(line, column));
  return v;
}

inline long parse_int(std::string_view s, std::size_t line, std::string_view column) {
  long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw InputError("non-integer value '" + std::string(s) + "' at " + where(line, column));
  return v;
}

inline std::vector<std::string> read_lines(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

inline bool blank(std::string_view s) { return s.find_first_not_of(" \t\r") == std::string_view::npos; }

}  // namespace detail

inline Dataset parse_dataset_csv(std::istream& in) {
  const auto lines = detail::read_lines(in);
  if (lines.empty() || detail::blank(lines[0])) throw InputError("empty file: missing header row");

  enum class Kind { x, t, y, truth, source };
  struct Column {
    Kind kind;
    std::string name;
    int declared_levels = -1;
  };
  std::vector<Column> cols;
  for (auto cell : detail::split_row(lines[0])) {
    std::string name(cell);
    if (name.rfind("x_", 0) == 0) {
      cols.push_back({Kind::x, name.substr(2)});
    } else if (name.rfind("t_", 0) == 0) {
      Column c{Kind::t, name.substr(2)};
      const auto lb = c.name.find('[');
      if (lb != std::string::npos) {
        if (c.name.back() != ']') throw InputError("malformed categorical header '" + name + "'");
        c.declared_levels = static_cast<int>(
            detail::parse_int(std::string_view(c.name).substr(lb + 1, c.name.size() - lb - 2), 1, name));
        if (c.declared_levels < 1) throw InputError("categorical column '" + name + "' declares no levels");
        c.name = c.name.substr(0, lb);
      }
      cols.push_back(c);
    } else if (name == "y") {
      cols.push_back({Kind::y, name});
    } else if (name == "truth") {
      cols.push_back({Kind::truth, name});
    } else if (name == "source_id") {
      cols.push_back({Kind::source, name});
    } else {
      throw InputError("unrecognized column '" + name + "' in header");
    }
  }
  auto count = [&](Kind k) { return std::count_if(cols.begin(), cols.end(), [k](const Column& c) { return c.kind == k; }); };
  if (count(Kind::y) != 1) throw InputError("header must contain exactly one response column 'y'");
  if (count(Kind::truth) > 1 || count(Kind::source) > 1) throw InputError("duplicate truth/source_id column");

  std::vector<std::size_t> data_lines;
  for (std::size_t i = 1; i < lines.size(); ++i)
    if (!detail::blank(lines[i])) data_lines.push_back(i);
  if (data_lines.empty()) throw InputError("no data rows");

  const auto n = static_cast<Eigen::Index>(data_lines.size());
  const auto dx = count(Kind::x), dt = count(Kind::t);
  Dataset d;
  d.x.resize(n, dx);
  d.t.resize(n, dt);
  d.y.resize(n);
  if (count(Kind::truth)) d.truth = std::vector<Label>(n);
  if (count(Kind::source)) d.source_id = std::vector<int>(n);
  for (const auto& c : cols) {
    if (c.kind == Kind::x) d.x_names.push_back(c.name);
    if (c.kind == Kind::t) d.t_names.push_back(c.name);
  }

  for (Eigen::Index r = 0; r < n; ++r) {
    const std::size_t line_no = data_lines[r] + 1;
    const auto cells = detail::split_row(lines[data_lines[r]]);
    if (cells.size() != cols.size())
      throw InputError("line " + std::to_string(line_no) + ": expected " + std::to_string(cols.size()) +
                       " cells, found " + std::to_string(cells.size()));
    Eigen::Index xi = 0, ti = 0;
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const auto& col = cols[c];
      switch (col.kind) {
        case Kind::x:
          d.x(r, xi++) = detail::parse_real(cells[c], line_no, col.name);
          break;
        case Kind::t: {
          const long v = detail::parse_int(cells[c], line_no, col.name);
          if (v < 0 || (col.declared_levels > 0 && v >= col.declared_levels))
            throw InputError("categorical level " + std::to_string(v) + " out of declared range at " +
                             detail::where(line_no, col.name));
          d.t(r, ti++) = static_cast<int>(v);
          break;
        }
        case Kind::y:
          d.y(r) = detail::parse_real(cells[c], line_no, col.name);
          break;
        case Kind::truth: {
          const long v = detail::parse_int(cells[c], line_no, col.name);
          if (v != 0 && v != 1) throw InputError("truth must be 0 or 1 at " + detail::where(line_no, col.name));
          (*d.truth)[r] = v ? Label::anomalous : Label::normal;
          break;
        }
        case Kind::source:
          (*d.source_id)[r] = static_cast<int>(detail::parse_int(cells[c], line_no, col.name));
          break;
      }
    }
  }
  Eigen::Index ti = 0;
  for (const auto& c : cols) {
    if (c.kind != Kind::t) continue;
    d.level_counts.push_back(c.declared_levels > 0 ? c.declared_levels : (n ? d.t.col(ti).maxCoeff() + 1 : 0));
    ++ti;
  }
  validate(d);
  return d;
}

inline Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return parse_dataset_csv(in);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

inline std::string dataset_to_csv(const Dataset& d) {
  validate(d);
  std::ostringstream out;
  bool first = true;
  auto sep = [&] {
    if (!first) out << ',';
    first = false;
  };
  for (Eigen::Index j = 0; j < d.dx(); ++j) {
    sep();
    out << "x_" << (d.x_names.empty() ? std::to_string(j + 1) : d.x_names[j]);
  }
  for (Eigen::Index j = 0; j < d.dt(); ++j) {
    sep();
    out << "t_" << (d.t_names.empty() ? std::to_string(j + 1) : d.t_names[j]) << '[' << d.level_counts[j] << ']';
  }
  sep();
  out << 'y';
  if (d.truth) out << ",truth";
  if (d.source_id) out << ",source_id";
  out << '\n';
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    first = true;
    for (Eigen::Index j = 0; j < d.dx(); ++j) {
      sep();
      out << format_real(d.x(i, j));
    }
    for (Eigen::Index j = 0; j < d.dt(); ++j) {
      sep();
      out << d.t(i, j);
    }
    sep();
    out << format_real(d.y(i));
    if (d.truth) out << ',' << static_cast<int>((*d.truth)[i]);
    if (d.source_id) out << ',' << (*d.source_id)[i];
    out << '\n';
  }
  return out.str();
}

inline void save_csv(const Dataset& d, const std::filesystem::path& path) { write_file_atomic(path, dataset_to_csv(d)); }

/// Manifold table: sample_id, h1, h2, then truth and predicted when given.
inline std::string manifold_to_csv(const Manifold& m, const std::optional<std::vector<Label>>& truth,
                                   const std::optional<std::vector<Label>>& predicted) {
  std::ostringstream out;
  out << "sample_id,h1,h2";
  if (truth) out << ",truth";
  if (predicted) out << ",predicted";
  out << '\n';
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    out << (m.sample_ids.empty() ? static_cast<int>(i) : m.sample_ids[i]) << ',' << format_real(m.points(i, 0)) << ','
        << format_real(m.points(i, 1));
    if (truth) out << ',' << static_cast<int>((*truth)[i]);
    if (predicted) out << ',' << static_cast<int>((*predicted)[i]);
    out << '\n';
  }
  return out.str();
}

struct ManifoldTable {
  Manifold manifold;
  std::optional<std::vector<Label>> truth;
  std::optional<std::vector<Label>> predicted;
};

inline ManifoldTable load_manifold_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  const auto lines = detail::read_lines(in);
  if (lines.empty()) throw InputError(path.string() + ": missing header row");
  const auto header = detail::split_row(lines[0]);
  int c_id = -1, c_h1 = -1, c_h2 = -1, c_truth = -1, c_pred = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto& h = header[c];
    if (h == "sample_id") c_id = static_cast<int>(c);
    else if (h == "h1") c_h1 = static_cast<int>(c);
    else if (h == "h2") c_h2 = static_cast<int>(c);
    else if (h == "truth") c_truth = static_cast<int>(c);
    else if (h == "predicted") c_pred = static_cast<int>(c);
  }
  if (c_id < 0 || c_h1 < 0 || c_h2 < 0) throw InputError(path.string() + ": manifold CSV needs sample_id,h1,h2");

  ManifoldTable tab;
  std::vector<std::array<double, 2>> pts;
  std::vector<Label> truth, pred;
  auto label = [&](std::string_view s, std::size_t line, std::string_view col) {
    const long v = detail::parse_int(s, line, col);
    if (v != 0 && v != 1) throw InputError("label must be 0 or 1 at " + detail::where(line, col));
    return v ? Label::anomalous : Label::normal;
  };
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (detail::blank(lines[i])) continue;
    const auto cells = detail::split_row(lines[i]);
    if (cells.size() != header.size())
      throw InputError(path.string() + ": line " + std::to_string(i + 1) + " has the wrong number of cells");
    tab.manifold.sample_ids.push_back(static_cast<int>(detail::parse_int(cells[c_id], i + 1, "sample_id")));
    pts.push_back({detail::parse_real(cells[c_h1], i + 1, "h1"), detail::parse_real(cells[c_h2], i + 1, "h2")});
    if (c_truth >= 0) truth.push_back(label(cells[c_truth], i + 1, "truth"));
    if (c_pred >= 0) pred.push_back(label(cells[c_pred], i + 1, "predicted"));
  }
  if (pts.empty()) throw InputError(path.string() + ": no data rows");
  tab.manifold.points.resize(static_cast<Eigen::Index>(pts.size()), 2);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    tab.manifold.points(i, 0) = pts[i][0];
    tab.manifold.points(i, 1) = pts[i][1];
  }
  if (c_truth >= 0) tab.truth = std::move(truth);
  if (c_pred >= 0) tab.predicted = std::move(pred);
  return tab;
}

}  // namespace manifold_ad

#endif  // MANIFOLD_AD_CSV_HPP
