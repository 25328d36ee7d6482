#ifndef KBLAB_MATRIX_IO_HPP
#define KBLAB_MATRIX_IO_HPP

#include <iosfwd>
#include <string>

#include "kblab/matlib.hpp"

namespace kblab {
namespace matlib {

// Matrix text format shared by all modules: first line "rows cols", then one
// whitespace-separated row of decimal values per line. Values are written
// with 17 significant digits so that read(write(M)) == M bit-for-bit.

Matrix read_matrix(std::istream& in, const std::string& source_name = "<stream>");
Matrix read_matrix_file(const std::string& path);

void write_matrix(std::ostream& out, const Matrix& m);
void write_matrix_file(const std::string& path, const Matrix& m);

}  // namespace matlib
}  // namespace kblab

#endif  // KBLAB_MATRIX_IO_HPP
