#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "causal_pvar/panel.hpp"

namespace causal_pvar::cli {

/// A column value in a result table.
using Cell = std::variant<std::string, long long, double>;

struct ResultTable {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

enum class Format { Csv, JsonLines };

Format parse_format(const std::string& text);

/// Reads the panel CSV contract: optional `# policies=K` line, header
/// `unit,time,<var1>,...`, integer unit/time, decimal values. Rows may come
/// in any order. `policies` overrides the annotation.
PanelDataset load_panel_csv(const std::string& path, std::optional<std::size_t> policies = std::nullopt);

void write_panel_csv(const PanelDataset& panel, const std::string& path);

/// Lines `unit_a,unit_b` naming external unit ids; returns a symmetric
/// 0/1 matrix over the panel's units.
Eigen::MatrixXd load_edge_list(const std::string& path, const std::vector<long>& unit_ids);

/// Cell indicator table with header `unit,time,...`; the value is read from
/// the column named `column`. Returns an N x T 0/1 matrix (nonzero -> 1).
/// Every panel cell must appear.
Eigen::MatrixXd load_cell_indicator(const std::string& path, const PanelDataset& panel,
                                    const std::string& column = "assignment");

/// CSV (header then rows) or JSON lines (one object per row). Floats use 17
/// significant digits; NaN is written as `nan` in CSV and null in JSON.
void write_results(const ResultTable& table, const std::string& path, Format format);

std::string format_double(double value);

}  // namespace causal_pvar::cli
