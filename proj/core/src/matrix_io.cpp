#include "xover/matrix_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "xover/errors.hpp"

namespace xover {

namespace {

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

}  // namespace

std::string matrix_to_csv(const Eigen::MatrixXd& M) {
  std::string out;
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      if (j) out += ',';
      out += format_double(M(i, j));
    }
    out += '\n';
  }
  return out;
}

std::string matrix_to_json(const Eigen::MatrixXd& M) {
  nlohmann::json doc;
  doc["rows"] = M.rows();
  doc["cols"] = M.cols();
  nlohmann::json data = nlohmann::json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) data.push_back(M(i, j));
  }
  doc["data"] = std::move(data);
  return doc.dump();
}

Eigen::MatrixXd matrix_from_csv(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    std::vector<double> row;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        raise(errc::io_error, "matrix CSV cell '" + cell + "' is not a number");
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) raise(errc::io_error, "matrix CSV has no rows");
  const std::size_t cols = rows.front().size();
  for (const auto& row : rows) {
    if (row.size() != cols) raise(errc::io_error, "matrix CSV rows have unequal lengths");
  }
  Eigen::MatrixXd M(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols; ++j) M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return M;
}

Eigen::MatrixXd matrix_from_csv_file(const std::filesystem::path& path) {
  return matrix_from_csv(read_text_file(path));
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(errc::io_error, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) raise(errc::io_error, "cannot write " + path.string());
  out << text;
}

}  // namespace xover
