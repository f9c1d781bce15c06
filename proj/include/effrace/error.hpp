#pragma once

#include <stdexcept>
#include <string>

namespace effrace {

/// Syntax error in an input text, with a 1-based position.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line, int column = 0);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

}  // namespace effrace
