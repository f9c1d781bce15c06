#pragma once

#include <iosfwd>
#include <string>

#include "effrace/error.hpp"
#include "effrace/lts.hpp"

namespace effrace {

enum class AutMode {
  Abstract,   // internal actions written as "i"
  Annotated,  // internal actions written as "i(t3.E2)"
};

/// Label text for one action in the given mode.
std::string aut_label(const Action& a, AutMode mode);

/// Inverse of aut_label. "i" and "tau" are internal with an empty tag;
/// unrecognised text becomes an opaque visible action.
Action parse_aut_label(const std::string& text);

void write_aut(const Lts& lts, std::ostream& out, AutMode mode);
std::string to_aut(const Lts& lts, AutMode mode);

/// Throws ParseError with the offending line number.
Lts read_aut(std::istream& in);
Lts from_aut(const std::string& text);

}  // namespace effrace
