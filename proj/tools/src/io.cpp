#include "causal_pvar_cli/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "json.hpp"

#include "causal_pvar/error.hpp"

namespace causal_pvar::cli {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = line.find(',');
    out.push_back(trim(line.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    line.remove_prefix(comma + 1);
  }
  return out;
}

[[noreturn]] void parse_error(const std::string& path, std::size_t line_no, const std::string& msg) {
  throw Error(ErrorCode::ParseError, path + ":" + std::to_string(line_no) + ": " + msg);
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size() && !text.empty();
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  return in;
}

std::string csv_field(const Cell& cell) {
  if (const auto* s = std::get_if<std::string>(&cell)) {
    if (s->find_first_of(",\"\n") == std::string::npos) return *s;
    std::string quoted = "\"";
    for (char c : *s) {
      if (c == '"') quoted += '"';
      quoted += c;
    }
    return quoted + "\"";
  }
  if (const auto* i = std::get_if<long long>(&cell)) return std::to_string(*i);
  return format_double(std::get<double>(cell));
}

std::string json_field(const Cell& cell) {
  if (const auto* s = std::get_if<std::string>(&cell)) return nlohmann::json(*s).dump();
  if (const auto* i = std::get_if<long long>(&cell)) return std::to_string(*i);
  const double v = std::get<double>(cell);
  return std::isfinite(v) ? format_double(v) : "null";
}

}  // namespace

Format parse_format(const std::string& text) {
  if (text == "csv") return Format::Csv;
  if (text == "jsonl" || text == "json-lines") return Format::JsonLines;
  throw Error(ErrorCode::InvalidSpec, "unknown format '" + text + "' (csv or jsonl)");
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

PanelDataset load_panel_csv(const std::string& path, std::optional<std::size_t> policies) {
  std::ifstream in = open_input(path);
  std::optional<std::size_t> annotated;
  std::vector<std::string> names;
  std::vector<PanelRecord> records;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty()) continue;
    if (view.front() == '#') {
      std::string_view body = trim(view.substr(1));
      if (body.rfind("policies=", 0) == 0) {
        std::size_t k = 0;
        if (!parse_number(trim(body.substr(9)), k)) parse_error(path, line_no, "invalid policies annotation");
        annotated = k;
      }
      continue;
    }
    const auto fields = split(view);
    if (!have_header) {
      if (fields.size() < 4 || fields[0] != "unit" || fields[1] != "time") {
        parse_error(path, line_no, "header must be unit,time,<var1>,...,<varm> with m >= 2");
      }
      for (std::size_t k = 2; k < fields.size(); ++k) names.emplace_back(fields[k]);
      have_header = true;
      continue;
    }
    if (fields.size() != names.size() + 2) {
      parse_error(path, line_no, "expected " + std::to_string(names.size() + 2) + " fields, found " +
                                     std::to_string(fields.size()));
    }
    PanelRecord rec;
    if (!parse_number(fields[0], rec.unit)) parse_error(path, line_no, "unit must be an integer");
    if (!parse_number(fields[1], rec.time)) parse_error(path, line_no, "time must be an integer");
    rec.values.resize(names.size());
    for (std::size_t k = 0; k < names.size(); ++k) {
      if (!parse_number(fields[k + 2], rec.values[k])) {
        parse_error(path, line_no, "invalid value in column '" + names[k] + "'");
      }
    }
    records.push_back(std::move(rec));
  }
  if (!have_header) parse_error(path, line_no, "missing header");
  const std::optional<std::size_t> k = policies ? policies : annotated;
  if (!k) {
    throw Error(ErrorCode::ParseError, path + ": number of policies unknown; add '# policies=K' or pass --policies");
  }
  return assemble_panel(std::move(records), std::move(names), *k);
}

void write_panel_csv(const PanelDataset& panel, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  out << "# policies=" << panel.n_policies << '\n' << "unit,time";
  for (const auto& name : panel.variable_names) out << ',' << name;
  out << '\n';
  for (std::size_t i = 0; i < panel.n_units; ++i) {
    for (std::size_t t = 0; t < panel.n_times; ++t) {
      out << panel.unit_ids[i] << ',' << panel.time_ids[t];
      for (std::size_t v = 0; v < panel.n_vars(); ++v) out << ',' << format_double(panel.at(i, t, v));
      out << '\n';
    }
  }
  if (!out) throw Error(ErrorCode::IoError, "failed writing '" + path + "'");
}

Eigen::MatrixXd load_edge_list(const std::string& path, const std::vector<long>& unit_ids) {
  std::map<long, Eigen::Index> index;
  for (std::size_t i = 0; i < unit_ids.size(); ++i) index[unit_ids[i]] = static_cast<Eigen::Index>(i);
  const auto n = static_cast<Eigen::Index>(unit_ids.size());
  Eigen::MatrixXd adjacency = Eigen::MatrixXd::Zero(n, n);
  std::ifstream in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    const auto fields = split(view);
    long a = 0;
    long b = 0;
    if (fields.size() != 2 || !parse_number(fields[0], a) || !parse_number(fields[1], b)) {
      if (line_no == 1 && fields.size() == 2) continue;  // header line
      parse_error(path, line_no, "expected unit_a,unit_b");
    }
    const auto ia = index.find(a);
    const auto ib = index.find(b);
    if (ia == index.end() || ib == index.end()) parse_error(path, line_no, "unit not present in the panel");
    adjacency(ia->second, ib->second) = 1.0;
    adjacency(ib->second, ia->second) = 1.0;
  }
  return adjacency;
}

Eigen::MatrixXd load_cell_indicator(const std::string& path, const PanelDataset& panel,
                                    const std::string& column) {
  std::map<long, Eigen::Index> unit_index;
  std::map<long, Eigen::Index> time_index;
  for (std::size_t i = 0; i < panel.unit_ids.size(); ++i) unit_index[panel.unit_ids[i]] = static_cast<Eigen::Index>(i);
  for (std::size_t t = 0; t < panel.time_ids.size(); ++t) time_index[panel.time_ids[t]] = static_cast<Eigen::Index>(t);
  const auto n = static_cast<Eigen::Index>(panel.n_units);
  const auto t_count = static_cast<Eigen::Index>(panel.n_times);
  Eigen::MatrixXd values = Eigen::MatrixXd::Constant(n, t_count, std::numeric_limits<double>::quiet_NaN());
  std::ifstream in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  std::size_t value_col = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    const auto fields = split(view);
    if (value_col == 0) {
      if (fields.size() < 3 || trim(fields[0]) != "unit" || trim(fields[1]) != "time") {
        parse_error(path, line_no, "expected header unit,time,...");
      }
      for (std::size_t c = 2; c < fields.size(); ++c) {
        if (trim(fields[c]) == column) value_col = c;
      }
      if (value_col == 0) parse_error(path, line_no, "no column named '" + column + "'");
      continue;
    }
    long unit = 0;
    long time = 0;
    double value = 0.0;
    if (fields.size() <= value_col || !parse_number(fields[0], unit) || !parse_number(fields[1], time) ||
        !parse_number(fields[value_col], value)) {
      parse_error(path, line_no, "malformed row");
    }
    const auto iu = unit_index.find(unit);
    const auto it = time_index.find(time);
    if (iu == unit_index.end() || it == time_index.end()) parse_error(path, line_no, "cell not present in the panel");
    values(iu->second, it->second) = value != 0.0 ? 1.0 : 0.0;
  }
  if (value_col == 0) parse_error(path, line_no, "empty file");
  if (values.hasNaN()) parse_error(path, line_no, "not every panel cell is covered");
  return values;
}

void write_results(const ResultTable& table, const std::string& path, Format format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  if (format == Format::Csv) {
    for (std::size_t c = 0; c < table.columns.size(); ++c) out << (c ? "," : "") << table.columns[c];
    out << '\n';
    for (const auto& row : table.rows) {
      for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << csv_field(row[c]);
      out << '\n';
    }
  } else {
    for (const auto& row : table.rows) {
      out << '{';
      for (std::size_t c = 0; c < row.size(); ++c) {
        out << (c ? "," : "") << nlohmann::json(table.columns[c]).dump() << ':' << json_field(row[c]);
      }
      out << "}\n";
    }
  }
  if (!out) throw Error(ErrorCode::IoError, "failed writing '" + path + "'");
}

}  // namespace causal_pvar::cli
