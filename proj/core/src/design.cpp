#include "xover/design.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "xover/errors.hpp"

namespace xover {

const char* errc_name(errc code) noexcept {
  switch (code) {
    case errc::empty_grid: return "EmptyGrid";
    case errc::ragged_rows: return "RaggedRows";
    case errc::unknown_label: return "UnknownLabel";
    case errc::bad_parameter: return "BadParameter";
    case errc::not_positive_definite: return "NotPositiveDefinite";
    case errc::dimension_mismatch: return "DimensionMismatch";
    case errc::not_prime: return "NotPrime";
    case errc::not_an_oa: return "NotAnOA";
    case errc::bad_grid: return "BadGrid";
    case errc::io_error: return "IOError";
    case errc::singular_v: return "SingularV";
    case errc::degenerate_reference: return "DegenerateReference";
    case errc::zero_trace: return "ZeroTrace";
    case errc::zero_e22: return "ZeroE22";
    case errc::cap_exceeded: return "CapExceeded";
  }
  return "UnknownError";
}

int exit_code(errc code) noexcept {
  switch (code) {
    case errc::singular_v:
    case errc::degenerate_reference:
    case errc::zero_trace:
    case errc::zero_e22:
      return 2;
    case errc::cap_exceeded:
      return 3;
    default:
      return 1;
  }
}

bool CrossoverDesign::binary() const {
  std::vector<char> seen(static_cast<std::size_t>(t) + 1);
  for (int j = 0; j < n; ++j) {
    std::fill(seen.begin(), seen.end(), 0);
    for (int i = 0; i < p; ++i) {
      int a = treatment(i, j);
      if (seen[a]) return false;
      seen[a] = 1;
    }
  }
  return true;
}

std::vector<std::string> numeric_labels(int t) {
  std::vector<std::string> labels;
  labels.reserve(t);
  for (int s = 1; s <= t; ++s) labels.push_back(std::to_string(s));
  return labels;
}

CrossoverDesign validate_design(
    const std::vector<std::vector<std::string>>& raw, int t,
    const std::optional<std::vector<std::string>>& alphabet) {
  if (t < 2) raise(errc::bad_parameter, "treatment count t must be >= 2, got " + std::to_string(t));
  if (raw.empty() || raw.front().empty()) raise(errc::empty_grid, "design grid has no cells");
  const int p = static_cast<int>(raw.size());
  const int n = static_cast<int>(raw.front().size());
  for (int i = 0; i < p; ++i) {
    if (static_cast<int>(raw[i].size()) != n) {
      raise(errc::ragged_rows, "row " + std::to_string(i + 1) + " has " +
                                   std::to_string(raw[i].size()) + " entries, expected " +
                                   std::to_string(n));
    }
  }
  if (p < 2) raise(errc::bad_parameter, "period count p must be >= 2, got " + std::to_string(p));

  std::unordered_map<std::string, int> index;  // label -> 1..t
  std::vector<std::string> labels;
  const bool fixed_alphabet = alphabet.has_value();
  if (fixed_alphabet) {
    if (static_cast<int>(alphabet->size()) > t) {
      raise(errc::bad_parameter, "alphabet has " + std::to_string(alphabet->size()) +
                                     " labels but t = " + std::to_string(t));
    }
    for (const auto& label : *alphabet) {
      if (!index.emplace(label, static_cast<int>(index.size()) + 1).second) {
        raise(errc::bad_parameter, "alphabet repeats label '" + label + "'");
      }
    }
    labels = *alphabet;
  }

  CrossoverDesign d;
  d.t = t;
  d.n = n;
  d.p = p;
  d.assignment.resize(static_cast<std::size_t>(p) * n);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < n; ++j) {
      const std::string& cell = raw[i][j];
      auto it = index.find(cell);
      if (it == index.end()) {
        if (fixed_alphabet || static_cast<int>(index.size()) >= t) {
          raise(errc::unknown_label, "label '" + cell + "' at period " + std::to_string(i + 1) +
                                         ", subject " + std::to_string(j + 1) +
                                         " is outside the declared alphabet");
        }
        it = index.emplace(cell, static_cast<int>(index.size()) + 1).first;
        labels.push_back(cell);
      }
      d.treatment(i, j) = it->second;
    }
  }
  while (static_cast<int>(labels.size()) < t) {
    labels.push_back(std::to_string(labels.size() + 1));
  }
  d.labels = std::move(labels);
  return d;
}

void check_design(const CrossoverDesign& d) {
  if (d.t < 2 || d.p < 2 || d.n < 1) {
    raise(errc::bad_parameter, "design dimensions out of range (t=" + std::to_string(d.t) +
                                   ", n=" + std::to_string(d.n) + ", p=" + std::to_string(d.p) + ")");
  }
  if (d.assignment.size() != static_cast<std::size_t>(d.p) * d.n) {
    raise(errc::dimension_mismatch, "assignment grid size does not match p*n");
  }
  for (int value : d.assignment) {
    if (value < 1 || value > d.t) {
      raise(errc::unknown_label, "treatment code " + std::to_string(value) + " outside 1.." +
                                     std::to_string(d.t));
    }
  }
}

Eigen::MatrixXd shift_matrix(int p) {
  Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(p, p);
  for (int i = 0; i + 1 < p; ++i) psi(i + 1, i) = 1.0;
  return psi;
}

Eigen::MatrixXd subject_incidence(const CrossoverDesign& d, int subject) {
  Eigen::MatrixXd block = Eigen::MatrixXd::Zero(d.p, d.t);
  for (int i = 0; i < d.p; ++i) block(i, d.treatment(i, subject) - 1) = 1.0;
  return block;
}

DesignMatrices design_matrices(const CrossoverDesign& d) {
  check_design(d);
  const int rows = d.n * d.p;
  DesignMatrices m;
  m.treatment = Eigen::MatrixXd::Zero(rows, d.t);
  m.carryover = Eigen::MatrixXd::Zero(rows, d.t);
  m.shift = shift_matrix(d.p);
  for (int j = 0; j < d.n; ++j) {
    for (int i = 0; i < d.p; ++i) {
      const int row = j * d.p + i;
      m.treatment(row, d.treatment(i, j) - 1) = 1.0;
      if (i > 0) m.carryover(row, d.treatment(i - 1, j) - 1) = 1.0;
    }
  }
  return m;
}

ModelLayout model_layout(const CrossoverDesign& d) {
  check_design(d);
  return ModelLayout{1, d.p, d.n, d.t, d.t};
}

std::uint64_t factorial(int t) {
  if (t < 0 || t > 20) raise(errc::bad_parameter, "factorial argument out of range: " + std::to_string(t));
  std::uint64_t f = 1;
  for (int k = 2; k <= t; ++k) f *= static_cast<std::uint64_t>(k);
  return f;
}

std::vector<int> unrank_permutation(int t, std::uint64_t rank) {
  std::vector<int> pool(t);
  std::iota(pool.begin(), pool.end(), 1);
  std::vector<int> perm;
  perm.reserve(t);
  std::uint64_t radix = factorial(t);
  for (int k = t; k >= 1; --k) {
    radix /= static_cast<std::uint64_t>(k);
    const auto idx = static_cast<std::size_t>(rank / radix);
    rank %= radix;
    perm.push_back(pool[idx]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(idx));
  }
  return perm;
}

std::uint64_t rank_permutation(const std::vector<int>& perm) {
  const int t = static_cast<int>(perm.size());
  std::vector<int> pool(t);
  std::iota(pool.begin(), pool.end(), 1);
  std::uint64_t rank = 0;
  for (int i = 0; i < t; ++i) {
    auto it = std::find(pool.begin(), pool.end(), perm[i]);
    if (it == pool.end()) raise(errc::bad_parameter, "not a permutation of 1..t");
    rank = rank * static_cast<std::uint64_t>(t - i) +
           static_cast<std::uint64_t>(it - pool.begin());
    pool.erase(it);
  }
  return rank;
}

std::uint64_t binary_design_count(int t, int n, std::uint64_t cap) {
  if (t < 2 || n < 1) raise(errc::bad_parameter, "enumeration needs t >= 2 and n >= 1");
  const std::uint64_t base = factorial(t);
  std::uint64_t count = 1;
  for (int j = 0; j < n; ++j) {
    if (count > cap / base) {
      raise(errc::cap_exceeded, "binary design class has (" + std::to_string(base) + ")^" +
                                    std::to_string(n) + " designs, above the cap of " +
                                    std::to_string(cap));
    }
    count *= base;
  }
  if (count > cap) {
    raise(errc::cap_exceeded, "binary design class has " + std::to_string(count) +
                                  " designs, above the cap of " + std::to_string(cap));
  }
  return count;
}

BinaryDesignEnumerator::BinaryDesignEnumerator(int t, int n, std::uint64_t first,
                                               std::uint64_t last)
    : t_(t), n_(n), position_(first), last_(last), digits_(n, 0) {
  current_.t = t;
  current_.n = n;
  current_.p = t;
  current_.assignment.assign(static_cast<std::size_t>(t) * n, 0);
  current_.labels = numeric_labels(t);
  // decompose `first` into per-subject permutation ranks, subject 0 most
  // significant
  const std::uint64_t base = factorial(t);
  std::uint64_t rest = first;
  for (int j = n - 1; j >= 0; --j) {
    digits_[j] = rest % base;
    rest /= base;
  }
  for (int j = 0; j < n_; ++j) materialize_column(j);
}

void BinaryDesignEnumerator::materialize_column(int subject) {
  const std::vector<int> perm = unrank_permutation(t_, digits_[subject]);
  for (int i = 0; i < t_; ++i) current_.treatment(i, subject) = perm[i];
}

const CrossoverDesign* BinaryDesignEnumerator::next() {
  if (position_ >= last_) return nullptr;
  if (fresh_) {
    fresh_ = false;
    return &current_;
  }
  ++position_;
  if (position_ >= last_) return nullptr;
  const std::uint64_t base = factorial(t_);
  int j = n_ - 1;
  while (j >= 0) {
    if (++digits_[j] < base) break;
    digits_[j] = 0;
    materialize_column(j);
    --j;
  }
  // position_ < last_ <= base^n guarantees the odometer did not wrap
  if (j >= 0) materialize_column(j);
  return &current_;
}

void enumerate_binary_designs(int t, int n,
                              const std::function<void(const CrossoverDesign&)>& sink,
                              std::uint64_t cap) {
  const std::uint64_t total = binary_design_count(t, n, cap);
  BinaryDesignEnumerator en(t, n, 0, total);
  while (const CrossoverDesign* d = en.next()) sink(*d);
}

CrossoverDesign replicate_subjects(const CrossoverDesign& d, int copies) {
  check_design(d);
  if (copies < 1) raise(errc::bad_parameter, "copies must be >= 1");
  CrossoverDesign out;
  out.t = d.t;
  out.p = d.p;
  out.n = d.n * copies;
  out.labels = d.labels;
  out.assignment.resize(static_cast<std::size_t>(out.p) * out.n);
  for (int i = 0; i < d.p; ++i) {
    for (int c = 0; c < copies; ++c) {
      for (int j = 0; j < d.n; ++j) {
        out.treatment(i, c * d.n + j) = d.treatment(i, j);
      }
    }
  }
  return out;
}

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::vector<std::string>> parse_csv_grid(const std::string& text) {
  std::vector<std::vector<std::string>> grid;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> row;
    std::string cell;
    std::istringstream cells(line);
    while (std::getline(cells, cell, ',')) row.push_back(trim(cell));
    grid.push_back(std::move(row));
  }
  return grid;
}

std::string json_cell_to_label(const nlohmann::json& cell) {
  if (cell.is_string()) return cell.get<std::string>();
  if (cell.is_number_integer()) return std::to_string(cell.get<long long>());
  raise(errc::io_error, "design grid entries must be strings or integers");
}

}  // namespace

CrossoverDesign design_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    raise(errc::io_error, std::string("design JSON parse failure: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("t") || !doc.contains("periods")) {
    raise(errc::io_error, "design JSON must be an object with 't' and 'periods'");
  }
  const int t = doc.at("t").get<int>();
  std::optional<std::vector<std::string>> alphabet;
  if (doc.contains("labels")) {
    alphabet = std::vector<std::string>{};
    for (const auto& label : doc.at("labels")) alphabet->push_back(json_cell_to_label(label));
  }
  std::vector<std::vector<std::string>> grid;
  for (const auto& row : doc.at("periods")) {
    std::vector<std::string> cells;
    for (const auto& cell : row) cells.push_back(json_cell_to_label(cell));
    grid.push_back(std::move(cells));
  }
  return validate_design(grid, t, alphabet);
}

CrossoverDesign design_from_csv(const std::string& text, std::optional<int> t) {
  const auto grid = parse_csv_grid(text);
  if (grid.empty()) raise(errc::empty_grid, "CSV design has no rows");
  int count = t.value_or(0);
  if (!t.has_value()) {
    std::vector<std::string> seen;
    for (const auto& row : grid) {
      for (const auto& cell : row) {
        if (std::find(seen.begin(), seen.end(), cell) == seen.end()) seen.push_back(cell);
      }
    }
    count = static_cast<int>(seen.size());
  }
  return validate_design(grid, count);
}

std::string design_to_json(const CrossoverDesign& d) {
  check_design(d);
  nlohmann::json doc;
  doc["t"] = d.t;
  doc["labels"] = d.labels;
  nlohmann::json periods = nlohmann::json::array();
  for (int i = 0; i < d.p; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < d.n; ++j) row.push_back(d.labels[d.treatment(i, j) - 1]);
    periods.push_back(std::move(row));
  }
  doc["periods"] = std::move(periods);
  return doc.dump(2) + "\n";
}

std::string design_to_csv(const CrossoverDesign& d) {
  check_design(d);
  std::string out;
  for (int i = 0; i < d.p; ++i) {
    for (int j = 0; j < d.n; ++j) {
      if (j) out += ',';
      out += d.labels[d.treatment(i, j) - 1];
    }
    out += '\n';
  }
  return out;
}

CrossoverDesign load_design(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(errc::io_error, "cannot open design file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) raise(errc::empty_grid, "design file is empty: " + path.string());
  if (text[first] == '{') return design_from_json(text);
  return design_from_csv(text);
}

void save_design(const CrossoverDesign& d, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) raise(errc::io_error, "cannot write design file " + path.string());
  if (path.extension() == ".csv") {
    out << design_to_csv(d);
  } else {
    out << design_to_json(d);
  }
}

}  // namespace xover
