#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>

namespace xover {

/// Row-major CSV, 17 significant digits (round-trip exact for doubles).
std::string matrix_to_csv(const Eigen::MatrixXd& M);

/// {"rows": r, "cols": c, "data": [row-major...]}.
std::string matrix_to_json(const Eigen::MatrixXd& M);

Eigen::MatrixXd matrix_from_csv(const std::string& text);
Eigen::MatrixXd matrix_from_csv_file(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace xover
