#include "actg175.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "survtransport/error.hpp"

namespace survtransport::testing {

namespace {

constexpr double kDaysPerMonth = 365.25 / 12.0;

double number_at(const cli::CsvTable& raw, std::size_t row, std::size_t col, const std::string& name) {
  const std::string& cell = raw.rows[row][col];
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used == cell.size()) return v;
  } catch (const std::exception&) {
  }
  throw ValidationError("ACTG 175 export row " + std::to_string(row + 1) + ": column '" + name + "' value '" + cell +
                        "' is not a number");
}

}  // namespace

cli::CsvTable convert_actg175(const cli::CsvTable& raw) {
  const std::array<std::string, 9> needed{"days", "cens", "arms", "gender", "age", "cd40", "race", "drugs", "wtkg"};
  std::array<std::size_t, 9> col{};
  for (std::size_t k = 0; k < needed.size(); ++k) {
    const auto it = std::find(raw.header.begin(), raw.header.end(), needed[k]);
    if (it == raw.header.end()) throw ValidationError("ACTG 175 export: missing column '" + needed[k] + "'");
    col[k] = static_cast<std::size_t>(it - raw.header.begin());
  }
  const std::array<std::string, 4> arm_labels{"ZDV", "ZDV+ddI", "ZDV+Zal", "ddI"};
  cli::CsvTable out;
  out.header = {"time", "event", "arm", "male", "age", "cd4", "cd4cat", "white", "drug", "weight"};
  for (std::size_t i = 0; i < raw.rows.size(); ++i) {
    double v[9];
    for (std::size_t k = 0; k < needed.size(); ++k) v[k] = number_at(raw, i, col[k], needed[k]);
    const auto arm = static_cast<int>(v[2]);
    if (arm < 0 || arm > 3 || v[2] != arm)
      throw ValidationError("ACTG 175 export row " + std::to_string(i + 1) + ": unknown arms code");
    const double cd4 = v[5];
    const std::string cd4cat = cd4 <= 200.0 ? "low" : (cd4 <= 500.0 ? "mid" : "high");
    out.rows.push_back({cli::format_number(v[0] / kDaysPerMonth), cli::format_number(v[1]),
                        arm_labels[static_cast<std::size_t>(arm)], cli::format_number(v[3]), cli::format_number(v[4]),
                        cli::format_number(cd4), cd4cat, cli::format_number(1.0 - v[6]), cli::format_number(v[7]),
                        cli::format_number(v[8])});
  }
  return out;
}

}  // namespace survtransport::testing
