#ifndef SBTK_IO_HPP_
#define SBTK_IO_HPP_

#include <stdexcept>
#include <string>

#include "sbtk/cpd.hpp"

namespace sbtk {

// Parse failure with file position; the CLI maps it to the parse exit status.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& path, int line, int column, const std::string& what);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_, column_;
};

// Tensor text format:
//   line 1:  dims J1 J2 ... JP
//   then:    i1 i2 ... iP value     (0-based indices; unlisted entries missing)
PartialTensor read_tensor(const std::string& path);
void write_tensor(const PartialTensor& tensor, const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace sbtk

#endif  // SBTK_IO_HPP_
