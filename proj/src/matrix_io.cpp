#include "kblab/matrix_io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace kblab {
namespace matlib {

namespace {

[[noreturn]] void fail(const std::string& source, int line, const std::string& what) {
  std::ostringstream os;
  os << source << ":" << line << ": " << what;
  throw ConfigError(os.str());
}

}  // namespace

Matrix read_matrix(std::istream& in, const std::string& source_name) {
  std::string line;
  int lineno = 0;
  // header: "rows cols", blank lines and #-comments allowed before it
  long rows = -1, cols = -1;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first) || first[0] == '#') continue;
    std::istringstream hs(line);
    if (!(hs >> rows >> cols) || rows < 1 || cols < 1)
      fail(source_name, lineno, "expected header \"rows cols\"");
    break;
  }
  if (rows < 0) fail(source_name, lineno, "missing matrix header");

  Matrix m(rows, cols);
  long r = 0;
  while (r < rows && std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string probe;
    {
      std::istringstream ps(line);
      if (!(ps >> probe) || probe[0] == '#') continue;
    }
    for (long c = 0; c < cols; ++c) {
      double v;
      if (!(ls >> v))
        fail(source_name, lineno, "row has fewer than " + std::to_string(cols) + " values");
      m(r, c) = v;
    }
    double extra;
    if (ls >> extra)
      fail(source_name, lineno, "row has more than " + std::to_string(cols) + " values");
    ++r;
  }
  if (r < rows)
    fail(source_name, lineno, "expected " + std::to_string(rows) + " rows, got " + std::to_string(r));
  if (!m.allFinite()) fail(source_name, lineno, "matrix has non-finite entries");
  return m;
}

Matrix read_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open matrix file");
  return read_matrix(in, path);
}

void write_matrix(std::ostream& out, const Matrix& m) {
  out << m.rows() << " " << m.cols() << "\n";
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << " ";
      out << m(i, j);
    }
    out << "\n";
  }
}

void write_matrix_file(const std::string& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw ConfigError(path + ": cannot open for writing");
  write_matrix(out, m);
}

}  // namespace matlib
}  // namespace kblab
