#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "effrace/error.hpp"

namespace effrace {

/// Runtime fault while executing a model (null dereference, bad index...).
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Value {
  enum class Kind : std::uint8_t { Null, Int, Bool, Atom, Ref };
  Kind kind = Kind::Null;
  std::int64_t v = 0;

  static Value null() { return {}; }
  static Value integer(std::int64_t x) { return {Kind::Int, x}; }
  static Value boolean(bool b) { return {Kind::Bool, b ? 1 : 0}; }
  static Value atom(std::int64_t id) { return {Kind::Atom, id}; }
  static Value ref(std::int64_t node) { return {Kind::Ref, node}; }
  bool is_ref() const { return kind == Kind::Ref; }
  friend bool operator==(const Value&, const Value&) = default;
};

namespace dsl {

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  enum class Op : std::uint8_t {
    Const,
    Local,      // slot
    Shared,     // slot
    SharedAt,   // slot = array base, size = length, kids[0] = index
    Field,      // field id, kids[0] = object
    Tid,
    Not,
    Neg,
    IsRef,
    Binary,     // binop
    Cas,        // kids: location (as lvalue expr), expected, new
    CasVal,
    New,        // fields[i] := kids[i]
  };
  enum class BinOp : std::uint8_t { Add, Sub, Mul, Div, Mod, Eq, Ne, Lt, Le, Gt, Ge, And, Or };
  Op op = Op::Const;
  BinOp binop = BinOp::Add;
  Value constant;
  int slot = 0;
  int size = 0;
  int field = 0;
  std::vector<int> fields;
  std::vector<ExprPtr> kids;
  bool reads_shared = false;  // touches shared variables or the heap
};

struct Instr {
  enum class Kind : std::uint8_t { Exec, Branch, Jump, Return, Clear };
  Kind kind = Kind::Exec;
  std::string tag;                  // non-empty: one atomic internal step
  std::vector<ExprPtr> targets;     // Exec: lvalues (may be empty for a bare cas)
  std::vector<ExprPtr> values;      // Exec: right-hand sides
  ExprPtr cond;                     // Branch: falls through when true
  std::size_t target = 0;           // Branch (when false) / Jump
  ExprPtr annotation;               // variant predicate evaluated after the step
  ExprPtr ret;                      // Return value, may be null
  std::vector<int> clear;           // Clear: local slots reset to null
  int line = 0;
};

struct Routine {
  std::string name;
  std::vector<std::string> params;
  int num_slots = 0;
  std::vector<std::string> slot_names;
  std::vector<Instr> code;
};

struct SharedVar {
  std::string name;
  int slot = 0;
  int size = 0;           // 0: scalar
  ExprPtr size_expr;      // arrays: evaluated against the client config
  ExprPtr init;           // constant initialiser
};

}  // namespace dsl

/// Declared sequential specification kind and its parameters.
struct SpecDecl {
  std::string kind;
  std::map<std::string, std::string> params;
};

/// Parsed concurrent object.
struct ObjectModel {
  std::string name;
  std::vector<dsl::SharedVar> shared;
  std::vector<dsl::Routine> methods;
  std::vector<std::string> procedures;  // inlined at every call site
  dsl::Routine init;
  std::vector<std::string> fields;
  std::vector<std::string> atoms;
  std::vector<std::string> tags;       // instruction tags in source order
  SpecDecl spec;
  std::string client;                  // default client description, if given
  std::vector<std::string> critical;   // expected critical instructions, if given

  const dsl::Routine* method(const std::string& name) const;
  int atom_id(const std::string& name) const;  // -1 if unknown
};

/// Parses a model. Throws ParseError with line and column.
ObjectModel parse_model(const std::string& text, const std::string& name = "model");

}  // namespace effrace
