#include "effrace/aut_io.hpp"

#include <fmt/format.h>
#include <istream>
#include <ostream>
#include <regex>
#include <sstream>

namespace effrace {

ParseError::ParseError(const std::string& what, int line, int column)
    : std::runtime_error(column > 0 ? fmt::format("line {}, column {}: {}", line, column, what)
                                    : fmt::format("line {}: {}", line, what)),
      line_(line),
      column_(column) {}

std::string aut_label(const Action& a, AutMode mode) {
  if (a.internal()) {
    if (mode == AutMode::Abstract) return "i";
    if (a.tag.empty() && a.thread == 0) return "i";
    return fmt::format("i({})", a.str());
  }
  return a.str();
}

Action parse_aut_label(const std::string& text) {
  static const std::regex call_re(R"(t(\d+) call ([A-Za-z_][\w]*)\((.*)\))");
  static const std::regex ret_val_re(R"(t(\d+) ret\((.*)\) ([A-Za-z_][\w]*))");
  static const std::regex ret_re(R"(t(\d+) ret ([A-Za-z_][\w]*))");
  static const std::regex tau_re(R"(i\(t(\d+)\.(.*)\))");
  std::smatch m;
  if (text == "i" || text == "tau") return Action::tau(0, "");
  if (std::regex_match(text, m, tau_re)) {
    auto tag = m[2].str();
    return Action::tau(std::stoi(m[1]), tag == "tau" ? "" : tag);
  }
  if (std::regex_match(text, m, call_re)) return Action::call(std::stoi(m[1]), m[2], m[3]);
  if (std::regex_match(text, m, ret_val_re)) return Action::ret(std::stoi(m[1]), m[3], m[2]);
  if (std::regex_match(text, m, ret_re)) return Action::ret(std::stoi(m[1]), m[2], "");
  return Action::other(text);
}

void write_aut(const Lts& lts, std::ostream& out, AutMode mode) {
  out << fmt::format("des ({}, {}, {})\n", lts.initial(), lts.num_transitions(), lts.num_states());
  std::vector<std::string> text;
  text.reserve(lts.labels().size());
  for (const auto& a : lts.labels()) text.push_back(aut_label(a, mode));
  for (const auto& t : lts.transitions()) out << fmt::format("({}, \"{}\", {})\n", t.src, text[t.label], t.dst);
}

std::string to_aut(const Lts& lts, AutMode mode) {
  std::ostringstream os;
  write_aut(lts, os, mode);
  return os.str();
}

Lts read_aut(std::istream& in) {
  static const std::regex header_re(R"(\s*des\s*\(\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+)\s*\)\s*)");
  static const std::regex line_re(R"re(\s*\(\s*(\d+)\s*,\s*"((?:[^"\\]|\\.)*)"\s*,\s*(\d+)\s*\)\s*)re");
  static const std::regex bare_re(R"re(\s*\(\s*(\d+)\s*,\s*([^,"]+?)\s*,\s*(\d+)\s*\)\s*)re");
  std::string line;
  int lineno = 0;
  std::smatch m;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") != std::string::npos) break;
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (!std::regex_match(line, m, header_re)) throw ParseError("expected header 'des (initial, transitions, states)'", lineno);
  auto initial = static_cast<StateId>(std::stoul(m[1]));
  auto num_trans = std::stoul(m[2]);
  auto num_states = std::stoul(m[3]);
  if (num_states == 0) throw ParseError("state count must be positive", lineno);
  if (initial >= num_states) throw ParseError("initial state out of range", lineno);
  LtsBuilder b(num_states);
  std::size_t count = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (!std::regex_match(line, m, line_re) && !std::regex_match(line, m, bare_re))
      throw ParseError(fmt::format("malformed transition '{}'", line), lineno);
    auto src = std::stoul(m[1]);
    auto dst = std::stoul(m[3]);
    if (src >= num_states || dst >= num_states) throw ParseError("transition endpoint out of range", lineno);
    b.add(static_cast<StateId>(src), parse_aut_label(m[2]), static_cast<StateId>(dst));
    ++count;
  }
  if (count != num_trans)
    throw ParseError(fmt::format("header declares {} transitions, found {}", num_trans, count), lineno);
  return std::move(b).build(initial);
}

Lts from_aut(const std::string& text) {
  std::istringstream is(text);
  return read_aut(is);
}

}  // namespace effrace
