// Lexer, parser and compiler for the object modeling language. The parser
// builds a small AST; the compiler resolves names, inlines procedures and
// flattens control flow into one instruction list per method.
#include <algorithm>
#include <cctype>
#include <fmt/format.h>
#include <functional>
#include <optional>
#include <set>
#include <sstream>

#include "effrace/model.hpp"

namespace effrace {

const dsl::Routine* ObjectModel::method(const std::string& n) const {
  for (const auto& m : methods)
    if (m.name == n) return &m;
  return nullptr;
}

int ObjectModel::atom_id(const std::string& n) const {
  auto it = std::find(atoms.begin(), atoms.end(), n);
  return it == atoms.end() ? -1 : static_cast<int>(it - atoms.begin());
}

namespace {

// ---------------------------------------------------------------- lexer

enum class Tok : std::uint8_t { Ident, Number, Word, Atom, Punct, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  int line = 0;
  int col = 0;
  std::size_t offset = 0;
};

std::vector<Token> lex(const std::string& src) {
  std::vector<Token> out;
  int line = 1, col = 1;
  std::size_t i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n && i < src.size(); ++k, ++i) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  auto ident_char = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
  while (i < src.size()) {
    char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    if (c == '#' || (c == '/' && i + 1 < src.size() && src[i + 1] == '/')) {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    Token t;
    t.line = line;
    t.col = col;
    t.offset = i;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() && ident_char(src[j])) ++j;
      t.kind = Tok::Ident;
      t.text = src.substr(i, j - i);
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      std::size_t k = j;
      while (k < src.size() && ident_char(src[k])) ++k;
      t.kind = k == j ? Tok::Number : Tok::Word;
      t.text = src.substr(i, k - i);
    } else if (c == ':' && i + 1 < src.size() && (std::isalpha(static_cast<unsigned char>(src[i + 1])) || src[i + 1] == '_')) {
      std::size_t j = i + 1;
      while (j < src.size() && ident_char(src[j])) ++j;
      t.kind = Tok::Atom;
      t.text = src.substr(i + 1, j - i - 1);
    } else {
      static const char* two[] = {":=", "==", "!=", "<=", ">=", "&&", "||"};
      t.kind = Tok::Punct;
      for (const char* p : two)
        if (src.compare(i, 2, p) == 0) t.text = p;
      if (t.text.empty()) {
        if (std::string("(){}[],;:.+-*/%<>!=&").find(c) == std::string::npos)
          throw ParseError(fmt::format("unexpected character '{}'", c), line, col);
        t.text = std::string(1, c);
      }
    }
    advance(t.kind == Tok::Atom ? t.text.size() + 1 : t.text.size());
    out.push_back(std::move(t));
  }
  Token end;
  end.line = line;
  end.col = col;
  end.offset = src.size();
  out.push_back(end);
  return out;
}

// ---------------------------------------------------------------- AST

struct AExpr;
using AExprPtr = std::shared_ptr<AExpr>;

struct AExpr {
  enum class K { Num, Bool, Null, Atom, Name, Field, Index, Unary, Binary, Call } k = K::Num;
  std::string text;  // name, atom, operator, field, callee
  std::int64_t num = 0;
  std::vector<AExprPtr> kids;
  std::vector<std::string> field_names;  // new(f: e, ...)
  int line = 0, col = 0;
};

struct AStmt;
using ABlock = std::vector<std::shared_ptr<AStmt>>;

struct AStmt {
  enum class K { Local, Assign, Multi, ExprStmt, If, While, Return, Call, Skip } k = K::Skip;
  std::string label;
  AExprPtr annotation;
  std::vector<std::string> names;  // Local
  std::vector<AExprPtr> lhs, rhs;  // Assign / Multi
  AExprPtr expr;                   // ExprStmt, If/While cond, Return value
  ABlock body, orelse;
  std::string callee;              // Call
  std::vector<AExprPtr> args;
  int line = 0, col = 0;
};

struct ARoutine {
  std::string name;
  std::vector<std::string> params;
  ABlock body;
  bool is_proc = false;
  int line = 0, col = 0;
};

struct AShared {
  std::string name;
  AExprPtr size;  // null for scalars
  AExprPtr init;
  int line = 0, col = 0;
};

struct AFile {
  std::vector<AShared> shared;
  std::vector<ARoutine> routines;
  ABlock init;
  SpecDecl spec;
  std::string client;
  std::vector<std::string> critical;
};

// ---------------------------------------------------------------- parser

class Parser {
 public:
  Parser(const std::string& src) : src_(src), toks_(lex(src)) {}

  AFile parse_file() {
    AFile f;
    if (peek().kind == Tok::End) throw error("empty model", peek());
    while (peek().kind != Tok::End) {
      const auto& t = peek();
      if (is_kw("spec")) {
        auto words = split_words(rest_of_line());
        if (words.empty()) throw error("spec needs a kind", t);
        f.spec.kind = words[0];
        for (std::size_t i = 1; i < words.size(); ++i) {
          auto eq = words[i].find('=');
          if (eq == std::string::npos) throw error(fmt::format("expected key=value, found '{}'", words[i]), t);
          f.spec.params[words[i].substr(0, eq)] = words[i].substr(eq + 1);
        }
      } else if (is_kw("client")) {
        f.client = trim(rest_of_line());
      } else if (is_kw("critical")) {
        for (auto& w : split_words(rest_of_line(), true)) f.critical.push_back(w);
      } else if (is_kw("shared")) {
        next();
        do {
          AShared s;
          auto& name = expect_ident();
          s.name = name.text;
          s.line = name.line;
          s.col = name.col;
          if (accept("[")) {
            s.size = parse_expr();
            expect("]");
          }
          if (accept("=")) s.init = parse_expr();
          f.shared.push_back(std::move(s));
        } while (accept(","));
      } else if (is_kw("init")) {
        next();
        auto b = parse_block();
        f.init.insert(f.init.end(), b.begin(), b.end());
      } else if (is_kw("method") || is_kw("proc")) {
        ARoutine r;
        r.is_proc = next().text == "proc";
        auto& name = expect_ident();
        r.name = name.text;
        r.line = name.line;
        r.col = name.col;
        expect("(");
        if (!accept(")")) {
          do r.params.push_back(expect_ident().text);
          while (accept(","));
          expect(")");
        }
        r.body = parse_block();
        f.routines.push_back(std::move(r));
      } else {
        throw error(fmt::format("expected 'spec', 'client', 'critical', 'shared', 'init', 'method' or 'proc', found '{}'",
                                t.text),
                    t);
      }
    }
    return f;
  }

 private:
  const Token& peek(std::size_t ahead = 0) const { return toks_[std::min(pos_ + ahead, toks_.size() - 1)]; }
  const Token& next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
  bool is_kw(const char* kw) const { return peek().kind == Tok::Ident && peek().text == kw; }
  bool is_punct(const char* p, std::size_t ahead = 0) const {
    return peek(ahead).kind == Tok::Punct && peek(ahead).text == p;
  }
  bool accept(const char* p) {
    if (is_punct(p)) {
      next();
      return true;
    }
    return false;
  }
  ParseError error(const std::string& msg, const Token& t) const { return ParseError(msg, t.line, t.col); }
  void expect(const char* p) {
    if (!accept(p)) throw error(fmt::format("expected '{}', found '{}'", p, describe(peek())), peek());
  }
  const Token& expect_ident() {
    if (peek().kind != Tok::Ident) throw error(fmt::format("expected a name, found '{}'", describe(peek())), peek());
    return next();
  }
  static std::string describe(const Token& t) { return t.kind == Tok::End ? "end of input" : t.text; }
  static std::string trim(const std::string& s) {
    auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }
  // Raw text after the current keyword up to the end of its line; skips the
  // tokens on that line.
  std::string rest_of_line() {
    const auto& kw = next();
    auto start = kw.offset + kw.text.size();
    auto end = src_.find('\n', start);
    if (end == std::string::npos) end = src_.size();
    auto text = src_.substr(start, end - start);
    auto hash = text.find('#');
    if (hash != std::string::npos) text = text.substr(0, hash);
    while (peek().kind != Tok::End && peek().line == kw.line) next();
    return text;
  }
  static std::vector<std::string> split_words(const std::string& s, bool commas = false) {
    std::string t = s;
    if (commas) std::replace(t.begin(), t.end(), ',', ' ');
    std::istringstream is(t);
    std::vector<std::string> out;
    for (std::string w; is >> w;) out.push_back(w);
    return out;
  }

  ABlock parse_block() {
    expect("{");
    ABlock b;
    while (!accept("}")) {
      if (peek().kind == Tok::End) throw error("unterminated block", peek());
      if (accept(";")) continue;
      b.push_back(parse_stmt());
    }
    return b;
  }

  bool label_token(std::size_t ahead) const {
    auto k = peek(ahead).kind;
    return k == Tok::Ident || k == Tok::Number || k == Tok::Word;
  }

  std::shared_ptr<AStmt> parse_stmt() {
    auto st = std::make_shared<AStmt>();
    const auto& first = peek();
    st->line = first.line;
    st->col = first.col;
    // Optional instruction tag, optionally with a variant predicate.
    if (label_token(0) && is_punct(":", 1)) {
      st->label = next().text;
      next();
    } else if (label_token(0) && is_punct("[", 1)) {
      auto save = pos_;
      auto label = next().text;
      next();
      auto ann = parse_expr();
      if (accept("]") && accept(":")) {
        st->label = label;
        st->annotation = ann;
      } else {
        pos_ = save;
      }
    }
    if (peek().kind == Tok::Word) throw error(fmt::format("'{}' is only valid as an instruction tag", peek().text), peek());
    const auto& t = peek();
    auto no_label = [&](const char* what) {
      if (!st->label.empty()) throw error(fmt::format("{} cannot carry an instruction tag", what), t);
    };
    if (is_kw("local")) {
      no_label("a declaration");
      next();
      st->k = AStmt::K::Local;
      do st->names.push_back(expect_ident().text);
      while (accept(","));
    } else if (is_kw("if")) {
      next();
      st->k = AStmt::K::If;
      st->expr = parse_expr();
      st->body = parse_block();
      if (is_kw("else")) {
        next();
        if (is_kw("if")) {
          st->orelse.push_back(parse_stmt());
        } else {
          st->orelse = parse_block();
        }
      }
    } else if (is_kw("while")) {
      next();
      st->k = AStmt::K::While;
      st->expr = parse_expr();
      st->body = parse_block();
    } else if (is_kw("return")) {
      next();
      st->k = AStmt::K::Return;
      if (peek().line == t.line && !is_punct("}") && !is_punct(";") && peek().kind != Tok::End)
        st->expr = parse_expr();
    } else if (is_kw("skip")) {
      next();
      st->k = AStmt::K::Skip;
    } else if (is_kw("call")) {
      no_label("a procedure call");
      next();
      st->k = AStmt::K::Call;
      st->callee = expect_ident().text;
      st->args = parse_args();
    } else if (is_punct("(")) {
      next();
      st->k = AStmt::K::Multi;
      do st->lhs.push_back(parse_postfix());
      while (accept(","));
      expect(")");
      expect(":=");
      expect("(");
      do st->rhs.push_back(parse_expr());
      while (accept(","));
      expect(")");
      if (st->lhs.size() != st->rhs.size())
        throw error(fmt::format("{} targets but {} values", st->lhs.size(), st->rhs.size()), t);
    } else if (peek().kind == Tok::Ident && (t.text == "cas" || t.text == "cas_val") && is_punct("(", 1)) {
      st->k = AStmt::K::ExprStmt;
      st->expr = parse_expr();
    } else if (peek().kind == Tok::Ident && is_punct("(", 1)) {
      no_label("a procedure call");
      st->k = AStmt::K::Call;
      st->callee = next().text;
      st->args = parse_args();
    } else {
      st->k = AStmt::K::Assign;
      st->lhs.push_back(parse_postfix());
      expect(":=");
      st->rhs.push_back(parse_expr());
    }
    return st;
  }

  std::vector<AExprPtr> parse_args() {
    expect("(");
    std::vector<AExprPtr> args;
    if (accept(")")) return args;
    do args.push_back(parse_expr());
    while (accept(","));
    expect(")");
    return args;
  }

  AExprPtr node(AExpr::K k, const Token& at) {
    auto e = std::make_shared<AExpr>();
    e->k = k;
    e->line = at.line;
    e->col = at.col;
    return e;
  }

  AExprPtr parse_expr() { return parse_binary(0); }

  static int precedence(const std::string& op) {
    if (op == "||") return 1;
    if (op == "&&") return 2;
    if (op == "==" || op == "!=" || op == "=") return 3;
    if (op == "<" || op == "<=" || op == ">" || op == ">=") return 4;
    if (op == "+" || op == "-") return 5;
    if (op == "*" || op == "/" || op == "%") return 6;
    return 0;
  }

  AExprPtr parse_binary(int min_prec) {
    auto lhs = parse_unary();
    for (;;) {
      const auto& t = peek();
      if (t.kind != Tok::Punct) break;
      int p = precedence(t.text);
      if (p == 0 || p <= min_prec) break;
      next();
      auto e = node(AExpr::K::Binary, t);
      e->text = t.text == "=" ? "==" : t.text;
      e->kids = {lhs, parse_binary(p)};
      lhs = e;
    }
    return lhs;
  }

  AExprPtr parse_unary() {
    const auto& t = peek();
    if (is_punct("!") || is_punct("-")) {
      next();
      auto e = node(AExpr::K::Unary, t);
      e->text = t.text;
      e->kids = {parse_unary()};
      return e;
    }
    return parse_postfix();
  }

  AExprPtr parse_postfix() {
    auto e = parse_primary();
    for (;;) {
      const auto& t = peek();
      if (accept(".")) {
        auto f = node(AExpr::K::Field, t);
        f->text = expect_ident().text;
        f->kids = {e};
        e = f;
      } else if (is_punct("[")) {
        if (e->k != AExpr::K::Name) throw error("only shared arrays can be indexed", t);
        next();
        auto ix = node(AExpr::K::Index, t);
        ix->text = e->text;
        ix->kids = {parse_expr()};
        expect("]");
        e = ix;
      } else {
        return e;
      }
    }
  }

  AExprPtr parse_primary() {
    const auto& t = peek();
    if (accept("&")) return parse_postfix();
    if (accept("(")) {
      auto e = parse_expr();
      expect(")");
      return e;
    }
    switch (t.kind) {
      case Tok::Number: {
        next();
        auto e = node(AExpr::K::Num, t);
        e->num = std::stoll(t.text);
        return e;
      }
      case Tok::Atom: {
        next();
        auto e = node(AExpr::K::Atom, t);
        e->text = t.text;
        return e;
      }
      case Tok::Ident: {
        next();
        if (t.text == "true" || t.text == "false") {
          auto e = node(AExpr::K::Bool, t);
          e->num = t.text == "true";
          return e;
        }
        if (t.text == "null") return node(AExpr::K::Null, t);
        if (is_punct("(")) {
          auto e = node(AExpr::K::Call, t);
          e->text = t.text;
          next();
          if (!accept(")")) {
            do {
              if (t.text == "new") {
                e->field_names.push_back(expect_ident().text);
                expect(":");
              }
              e->kids.push_back(parse_expr());
            } while (accept(","));
            expect(")");
          }
          return e;
        }
        auto e = node(AExpr::K::Name, t);
        e->text = t.text;
        return e;
      }
      default:
        throw error(fmt::format("expected an expression, found '{}'", describe(t)), t);
    }
  }

  const std::string& src_;
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------- compiler

using dsl::Expr;
using dsl::ExprPtr;
using dsl::Instr;

class Compiler {
 public:
  Compiler(const AFile& file, ObjectModel& model) : file_(file), m_(model) {}

  void run() {
    m_.spec = file_.spec;
    m_.client = file_.client;
    m_.critical = file_.critical;
    int slot = 0;
    for (const auto& s : file_.shared) {
      if (shared_index(s.name) >= 0) throw ParseError(fmt::format("duplicate shared variable '{}'", s.name), s.line, s.col);
      dsl::SharedVar v;
      v.name = s.name;
      v.slot = slot;
      if (s.size) {
        v.size_expr = compile_size(*s.size);
        v.size = -1;  // resolved per client
      }
      if (s.init) {
        v.init = compile_const(*s.init);
      }
      ++slot;  // arrays are laid out when the client is known; see explore
      m_.shared.push_back(std::move(v));
    }
    for (const auto& r : file_.routines) {
      if (routine(r.name)) {
        // routine() finds the first; a second with the same name is an error
        int count = 0;
        for (const auto& q : file_.routines) count += q.name == r.name;
        if (count > 1) throw ParseError(fmt::format("duplicate routine '{}'", r.name), r.line, r.col);
      }
    }
    // init block as a routine run by a pseudo-thread
    {
      ARoutine init;
      init.name = "init";
      init.body = file_.init;
      m_.init = compile_routine(init, true);
    }
    for (const auto& r : file_.routines) {
      if (r.is_proc) {
        m_.procedures.push_back(r.name);
        continue;
      }
      m_.methods.push_back(compile_routine(r, false));
    }
    if (m_.methods.empty()) throw ParseError("model declares no method", 1, 1);
  }

 private:
  const ARoutine* routine(const std::string& name) const {
    for (const auto& r : file_.routines)
      if (r.name == name) return &r;
    return nullptr;
  }
  int shared_index(const std::string& name) const {
    for (std::size_t i = 0; i < m_.shared.size(); ++i)
      if (m_.shared[i].name == name) return static_cast<int>(i);
    return -1;
  }
  int field_id(const std::string& name) {
    auto it = std::find(m_.fields.begin(), m_.fields.end(), name);
    if (it != m_.fields.end()) return static_cast<int>(it - m_.fields.begin());
    m_.fields.push_back(name);
    return static_cast<int>(m_.fields.size() - 1);
  }
  int atom_id(const std::string& name) {
    auto id = m_.atom_id(name);
    if (id >= 0) return id;
    m_.atoms.push_back(name);
    return static_cast<int>(m_.atoms.size() - 1);
  }
  static ParseError err(const std::string& msg, const AExpr& e) { return ParseError(msg, e.line, e.col); }
  static ParseError err(const std::string& msg, const AStmt& s) { return ParseError(msg, s.line, s.col); }

  ExprPtr compile_size(const AExpr& e) {
    // Array sizes may use the client parameters `ops` and `threads`.
    Frame f;
    f.names = {{"ops", 0}, {"threads", 1}};
    frames_.push_back(f);
    auto out = compile_expr(e, false);
    frames_.pop_back();
    if (out->reads_shared) throw err("array size must be constant", e);
    return out;
  }

  ExprPtr compile_const(const AExpr& e) {
    auto out = compile_expr(e, false);
    if (out->op != Expr::Op::Const) throw err("shared initialiser must be a constant", e);
    return out;
  }

  struct Frame {
    std::map<std::string, int> names;
  };

  std::optional<int> lookup_local(const std::string& name) const {
    if (frames_.empty()) return std::nullopt;
    const auto& f = frames_.back();
    auto it = f.names.find(name);
    if (it == f.names.end()) return std::nullopt;
    return it->second;
  }

  ExprPtr compile_expr(const AExpr& e, bool allow_effects) {
    auto out = std::make_shared<Expr>();
    auto kid = [&](const AExpr& k) {
      auto c = compile_expr(k, false);
      out->reads_shared = out->reads_shared || c->reads_shared;
      out->kids.push_back(c);
    };
    switch (e.k) {
      case AExpr::K::Num:
        out->constant = Value::integer(e.num);
        break;
      case AExpr::K::Bool:
        out->constant = Value::boolean(e.num != 0);
        break;
      case AExpr::K::Null:
        break;
      case AExpr::K::Atom:
        out->constant = Value::atom(atom_id(e.text));
        break;
      case AExpr::K::Name: {
        if (auto slot = lookup_local(e.text)) {
          out->op = Expr::Op::Local;
          out->slot = *slot;
        } else if (e.text == "tid") {
          out->op = Expr::Op::Tid;
        } else if (auto s = shared_index(e.text); s >= 0) {
          if (m_.shared[s].size_expr) throw err(fmt::format("array '{}' needs an index", e.text), e);
          out->op = Expr::Op::Shared;
          out->slot = s;
          out->reads_shared = true;
        } else {
          throw err(fmt::format("undeclared variable '{}'", e.text), e);
        }
        break;
      }
      case AExpr::K::Field:
        out->op = Expr::Op::Field;
        out->field = field_id(e.text);
        kid(*e.kids[0]);
        out->reads_shared = true;
        break;
      case AExpr::K::Index: {
        auto s = shared_index(e.text);
        if (s < 0 || !m_.shared[s].size_expr) throw err(fmt::format("'{}' is not a shared array", e.text), e);
        out->op = Expr::Op::SharedAt;
        out->slot = s;
        kid(*e.kids[0]);
        out->reads_shared = true;
        break;
      }
      case AExpr::K::Unary:
        out->op = e.text == "!" ? Expr::Op::Not : Expr::Op::Neg;
        kid(*e.kids[0]);
        break;
      case AExpr::K::Binary: {
        static const std::map<std::string, Expr::BinOp> ops = {
            {"+", Expr::BinOp::Add}, {"-", Expr::BinOp::Sub}, {"*", Expr::BinOp::Mul}, {"/", Expr::BinOp::Div},
            {"%", Expr::BinOp::Mod}, {"==", Expr::BinOp::Eq}, {"!=", Expr::BinOp::Ne}, {"<", Expr::BinOp::Lt},
            {"<=", Expr::BinOp::Le}, {">", Expr::BinOp::Gt}, {">=", Expr::BinOp::Ge}, {"&&", Expr::BinOp::And},
            {"||", Expr::BinOp::Or}};
        out->op = Expr::Op::Binary;
        out->binop = ops.at(e.text);
        kid(*e.kids[0]);
        kid(*e.kids[1]);
        break;
      }
      case AExpr::K::Call: {
        if (e.text == "isref") {
          if (e.kids.size() != 1) throw err("isref takes one argument", e);
          out->op = Expr::Op::IsRef;
          kid(*e.kids[0]);
        } else if (e.text == "cas" || e.text == "cas_val") {
          if (!allow_effects) throw err(fmt::format("{} must be a whole statement or right-hand side", e.text), e);
          if (e.kids.size() != 3) throw err(fmt::format("{} takes three arguments", e.text), e);
          out->op = e.text == "cas" ? Expr::Op::Cas : Expr::Op::CasVal;
          auto loc = compile_expr(*e.kids[0], false);
          if (!is_lvalue(*loc)) throw err("first argument of cas must be a location", *e.kids[0]);
          out->kids.push_back(loc);
          kid(*e.kids[1]);
          kid(*e.kids[2]);
          out->reads_shared = true;
        } else if (e.text == "new") {
          if (!allow_effects) throw err("new must be a whole right-hand side", e);
          out->op = Expr::Op::New;
          for (std::size_t i = 0; i < e.kids.size(); ++i) {
            out->fields.push_back(field_id(e.field_names[i]));
            kid(*e.kids[i]);
          }
        } else {
          throw err(fmt::format("unknown function '{}'", e.text), e);
        }
        break;
      }
    }
    return out;
  }

  static bool is_lvalue(const Expr& e) {
    return e.op == Expr::Op::Local || e.op == Expr::Op::Shared || e.op == Expr::Op::SharedAt ||
           e.op == Expr::Op::Field;
  }

  // ---- routines

  struct Ctx {
    dsl::Routine* r;
    std::vector<std::string> inline_stack;
    std::vector<std::vector<std::size_t>> proc_exits;  // jumps to patch at procedure end
    bool in_init = false;
  };

  dsl::Routine compile_routine(const ARoutine& a, bool is_init) {
    dsl::Routine r;
    r.name = a.name;
    r.params = a.params;
    frames_.clear();
    frames_.push_back({});
    for (const auto& p : a.params) declare(r, p, a.line, a.col);
    Ctx ctx{&r, {a.name}, {}, is_init};
    compile_block(ctx, a.body);
    Instr ret;
    ret.kind = Instr::Kind::Return;
    ret.line = a.line;
    r.code.push_back(ret);
    frames_.clear();
    return r;
  }

  int declare(dsl::Routine& r, const std::string& name, int line, int col) {
    auto& f = frames_.back();
    if (f.names.count(name)) throw ParseError(fmt::format("'{}' declared twice", name), line, col);
    if (shared_index(name) >= 0) throw ParseError(fmt::format("local '{}' shadows a shared variable", name), line, col);
    int slot = r.num_slots++;
    r.slot_names.push_back(frames_.size() > 1 ? fmt::format("{}.{}", inline_names_.back(), name) : name);
    f.names[name] = slot;
    return slot;
  }

  void register_tag(const AStmt& s) {
    if (s.label.empty()) return;
    // Inlined procedures repeat their tags; only distinct source statements count.
    auto key = std::make_pair(s.line, s.col);
    auto it = tag_sites_.find(s.label);
    if (it != tag_sites_.end()) {
      if (it->second != key) throw err(fmt::format("duplicate instruction tag '{}'", s.label), s);
      return;
    }
    tag_sites_[s.label] = key;
    m_.tags.push_back(s.label);
  }

  void require_local(const Expr& e, const AStmt& s, const char* what) {
    if (e.reads_shared)
      throw err(fmt::format("{} reads or writes shared state; give it an instruction tag", what), s);
  }

  Instr make(const AStmt& s, Instr::Kind k) {
    Instr in;
    in.kind = k;
    in.tag = s.label;
    in.line = s.line;
    return in;
  }

  void compile_block(Ctx& ctx, const ABlock& b) {
    for (const auto& s : b) compile_stmt(ctx, *s);
  }

  void compile_stmt(Ctx& ctx, const AStmt& s) {
    auto& code = ctx.r->code;
    register_tag(s);
    const bool tagged = !s.label.empty() || ctx.in_init;
    switch (s.k) {
      case AStmt::K::Local:
        for (const auto& n : s.names) declare(*ctx.r, n, s.line, s.col);
        return;
      case AStmt::K::Skip: {
        if (s.label.empty()) return;
        code.push_back(make(s, Instr::Kind::Exec));
        break;
      }
      case AStmt::K::Assign:
      case AStmt::K::Multi: {
        auto in = make(s, Instr::Kind::Exec);
        bool effects = false;
        for (std::size_t i = 0; i < s.lhs.size(); ++i) {
          auto target = compile_expr(*s.lhs[i], false);
          if (!is_lvalue(*target)) throw err("left-hand side is not assignable", *s.lhs[i]);
          auto value = compile_expr(*s.rhs[i], s.lhs.size() == 1);
          effects = effects || value->op == Expr::Op::Cas || value->op == Expr::Op::CasVal;
          if (!tagged) {
            require_local(*target, s, "an untagged statement");
            require_local(*value, s, "an untagged statement");
          }
          in.targets.push_back(target);
          in.values.push_back(value);
        }
        (void)effects;
        code.push_back(std::move(in));
        break;
      }
      case AStmt::K::ExprStmt: {
        auto in = make(s, Instr::Kind::Exec);
        in.values.push_back(compile_expr(*s.expr, true));
        if (!tagged) require_local(*in.values[0], s, "an untagged statement");
        code.push_back(std::move(in));
        break;
      }
      case AStmt::K::If: {
        auto in = make(s, Instr::Kind::Branch);
        in.cond = compile_expr(*s.expr, false);
        if (!tagged) require_local(*in.cond, s, "an untagged condition");
        auto at = code.size();
        code.push_back(std::move(in));
        compile_block(ctx, s.body);
        if (!s.orelse.empty()) {
          auto jump_at = code.size();
          Instr j;
          j.kind = Instr::Kind::Jump;
          j.line = s.line;
          code.push_back(j);
          code[at].target = code.size();
          compile_block(ctx, s.orelse);
          code[jump_at].target = code.size();
        } else {
          code[at].target = code.size();
        }
        break;
      }
      case AStmt::K::While: {
        auto head = code.size();
        auto in = make(s, Instr::Kind::Branch);
        in.cond = compile_expr(*s.expr, false);
        if (!tagged) require_local(*in.cond, s, "an untagged loop condition");
        code.push_back(std::move(in));
        compile_block(ctx, s.body);
        Instr j;
        j.kind = Instr::Kind::Jump;
        j.target = head;
        j.line = s.line;
        code.push_back(j);
        code[head].target = code.size();
        break;
      }
      case AStmt::K::Return: {
        if (ctx.in_init) throw err("return is not allowed in init", s);
        if (!s.label.empty()) throw err("return cannot carry an instruction tag; the return itself is visible", s);
        if (!ctx.proc_exits.empty()) {
          if (s.expr) throw err("procedures cannot return a value", s);
          Instr j;
          j.kind = Instr::Kind::Jump;
          j.line = s.line;
          ctx.proc_exits.back().push_back(code.size());
          code.push_back(j);
          break;
        }
        auto in = make(s, Instr::Kind::Return);
        if (s.expr) {
          in.ret = compile_expr(*s.expr, false);
          require_local(*in.ret, s, "a return value");
        }
        code.push_back(std::move(in));
        break;
      }
      case AStmt::K::Call: {
        const auto* p = routine(s.callee);
        if (!p || !p->is_proc) throw err(fmt::format("unknown procedure '{}'", s.callee), s);
        if (std::find(ctx.inline_stack.begin(), ctx.inline_stack.end(), p->name) != ctx.inline_stack.end())
          throw err(fmt::format("recursive call to '{}'", p->name), s);
        if (p->params.size() != s.args.size())
          throw err(fmt::format("'{}' expects {} arguments, got {}", p->name, p->params.size(), s.args.size()), s);
        // Arguments are evaluated in the caller's frame.
        std::vector<ExprPtr> args;
        for (const auto& a : s.args) {
          auto e = compile_expr(*a, false);
          require_local(*e, s, "a procedure argument");
          args.push_back(e);
        }
        inline_names_.push_back(p->name);
        frames_.push_back({});
        std::vector<int> slots;
        Instr bind;
        bind.kind = Instr::Kind::Exec;
        bind.line = s.line;
        for (std::size_t i = 0; i < p->params.size(); ++i) {
          int slot = declare(*ctx.r, p->params[i], p->line, p->col);
          slots.push_back(slot);
          auto target = std::make_shared<Expr>();
          target->op = Expr::Op::Local;
          target->slot = slot;
          bind.targets.push_back(target);
          bind.values.push_back(args[i]);
        }
        if (!bind.targets.empty()) code.push_back(bind);
        ctx.inline_stack.push_back(p->name);
        ctx.proc_exits.emplace_back();
        compile_block(ctx, p->body);
        for (auto at : ctx.proc_exits.back()) code[at].target = code.size();
        ctx.proc_exits.pop_back();
        ctx.inline_stack.pop_back();
        for (const auto& [name, slot] : frames_.back().names)
          if (std::find(slots.begin(), slots.end(), slot) == slots.end()) slots.push_back(slot);
        std::sort(slots.begin(), slots.end());
        Instr clear;
        clear.kind = Instr::Kind::Clear;
        clear.clear = slots;
        clear.line = s.line;
        code.push_back(clear);
        frames_.pop_back();
        inline_names_.pop_back();
        break;
      }
    }
    if (s.annotation) {
      if (s.k == AStmt::K::If || s.k == AStmt::K::While)
        throw err("a variant predicate cannot be attached to a conditional", s);
      code.back().annotation = compile_expr(*s.annotation, false);
    }
  }

  const AFile& file_;
  ObjectModel& m_;
  std::vector<Frame> frames_;
  std::vector<std::string> inline_names_;
  std::map<std::string, std::pair<int, int>> tag_sites_;
};

}  // namespace

ObjectModel parse_model(const std::string& text, const std::string& name) {
  Parser p(text);
  auto file = p.parse_file();
  ObjectModel m;
  m.name = name;
  Compiler c(file, m);
  c.run();
  return m;
}

}  // namespace effrace
