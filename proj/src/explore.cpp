#include "effrace/explore.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <fmt/format.h>
#include <sstream>
#include <map>
#include <unordered_map>

namespace effrace {

using dsl::Expr;
using dsl::Instr;

std::string OpChoice::str() const {
  std::string a;
  for (const auto& x : args) a += (a.empty() ? "" : ",") + x;
  return args.empty() ? method : fmt::format("{}({})", method, a);
}

std::size_t ClientConfig::total_ops() const {
  std::size_t n = 0;
  for (const auto& t : threads) n += static_cast<std::size_t>(t.budget);
  return n;
}

std::string ClientConfig::str() const {
  std::string out;
  bool uniform = true;
  for (const auto& t : threads) uniform = uniform && t.budget == threads.front().budget;
  for (std::size_t i = 0; i < threads.size(); ++i)
    for (const auto& op : threads[i].allowed) out += fmt::format("{}t{}:{}", out.empty() ? "" : ",", i + 1, op.str());
  if (uniform && !threads.empty() && threads.front().budget != 1) out += fmt::format(",budget={}", threads.front().budget);
  if (!uniform)
    for (std::size_t i = 0; i < threads.size(); ++i) out += fmt::format(",budget{}={}", i + 1, threads[i].budget);
  return out;
}

ClientConfig ClientConfig::with_extra_budget(int extra) const {
  auto c = *this;
  for (auto& t : c.threads) t.budget += extra;
  return c;
}

namespace {

std::vector<std::string> split_top(const std::string& s) {
  std::vector<std::string> out;
  int depth = 0;
  std::string cur;
  for (char c : s) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == ',' && depth == 0) {
      out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

int parse_int(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    int v = std::stoi(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw std::invalid_argument(fmt::format("{} must be an integer, got '{}'", what, s));
}

OpChoice parse_op(const std::string& text, const ObjectModel& model) {
  OpChoice op;
  auto open = text.find('(');
  op.method = text.substr(0, open);
  if (open != std::string::npos) {
    if (text.back() != ')') throw std::invalid_argument(fmt::format("malformed operation '{}'", text));
    auto inner = text.substr(open + 1, text.size() - open - 2);
    std::string cur;
    std::istringstream is(inner);
    while (std::getline(is, cur, ','))
      if (!cur.empty()) op.args.push_back(cur);
  }
  const auto* m = model.method(op.method);
  if (!m) throw std::invalid_argument(fmt::format("model has no method '{}'", op.method));
  if (m->params.size() != op.args.size())
    throw std::invalid_argument(
        fmt::format("{} takes {} arguments, got {}", op.method, m->params.size(), op.args.size()));
  return op;
}

void all_tuples(const std::vector<std::string>& domain, std::size_t arity, std::vector<std::string>& cur,
                std::vector<std::vector<std::string>>& out) {
  if (cur.size() == arity) {
    out.push_back(cur);
    return;
  }
  for (const auto& d : domain) {
    cur.push_back(d);
    all_tuples(domain, arity, cur, out);
    cur.pop_back();
  }
}

}  // namespace

ClientConfig most_general_client(const ObjectModel& model, int threads, int budget,
                                 const std::vector<std::string>& domain) {
  if (threads < 1) throw std::invalid_argument("thread count must be at least 1");
  if (budget < 1) throw std::invalid_argument("budget must be at least 1");
  ThreadClient tc;
  tc.budget = budget;
  for (const auto& m : model.methods) {
    if (!m.params.empty() && domain.empty())
      throw std::invalid_argument(fmt::format("method {} needs an argument domain", m.name));
    std::vector<std::vector<std::string>> tuples;
    std::vector<std::string> cur;
    all_tuples(domain, m.params.size(), cur, tuples);
    for (auto& t : tuples) tc.allowed.push_back({m.name, std::move(t)});
  }
  ClientConfig c;
  c.threads.assign(static_cast<std::size_t>(threads), tc);
  return c;
}

ClientConfig parse_client(const std::string& spec, const ObjectModel& model, std::optional<int> threads) {
  auto items = split_top(spec);
  if (items.empty()) throw std::invalid_argument("empty operation spec");
  std::optional<int> budget;
  std::optional<int> mgc;
  std::vector<std::string> domain;
  std::map<int, int> per_thread_budget;
  std::map<int, std::vector<OpChoice>> per_thread;
  bool in_domain = false;
  for (const auto& item : items) {
    auto eq = item.find('=');
    auto colon = item.find(':');
    if (item.rfind("mgc:", 0) == 0) {
      mgc = parse_int(item.substr(4), "mgc budget");
      in_domain = false;
    } else if (eq != std::string::npos && item.find('(') == std::string::npos) {
      auto key = item.substr(0, eq), val = item.substr(eq + 1);
      in_domain = false;
      if (key == "domain") {
        if (!val.empty()) domain.push_back(val);
        in_domain = true;
      } else if (key == "budget") {
        budget = parse_int(val, "budget");
      } else if (key.rfind("budget", 0) == 0) {
        per_thread_budget[parse_int(key.substr(6), "thread")] = parse_int(val, "budget");
      } else if (key == "threads") {
        int k = parse_int(val, "threads");
        if (threads && *threads != k)
          throw std::invalid_argument(fmt::format("operation spec says {} threads, --threads says {}", k, *threads));
        threads = k;
      } else {
        throw std::invalid_argument(fmt::format("unknown option '{}'", key));
      }
    } else if (item.size() > 1 && item[0] == 't' && colon != std::string::npos) {
      in_domain = false;
      int t = parse_int(item.substr(1, colon - 1), "thread");
      if (t < 1) throw std::invalid_argument("threads are numbered from 1");
      per_thread[t].push_back(parse_op(item.substr(colon + 1), model));
    } else if (in_domain) {
      domain.push_back(item);
    } else {
      throw std::invalid_argument(fmt::format("cannot read '{}' in operation spec", item));
    }
  }
  if (mgc && !per_thread.empty()) throw std::invalid_argument("mgc cannot be combined with per-thread operations");
  ClientConfig c;
  if (mgc) {
    c = most_general_client(model, threads.value_or(2), *mgc, domain);
    if (budget) throw std::invalid_argument("mgc already fixes the budget");
  } else {
    if (per_thread.empty()) throw std::invalid_argument("operation spec names no operations");
    int k = std::max(threads.value_or(0), per_thread.rbegin()->first);
    if (threads && per_thread.rbegin()->first > *threads)
      throw std::invalid_argument(
          fmt::format("operation spec uses thread t{} but only {} threads", per_thread.rbegin()->first, *threads));
    c.threads.resize(static_cast<std::size_t>(k));
    for (int t = 1; t <= k; ++t) {
      auto& tc = c.threads[static_cast<std::size_t>(t - 1)];
      tc.allowed = per_thread[t];
      tc.budget = tc.allowed.empty() ? 0 : budget.value_or(1);
    }
  }
  for (auto [t, b] : per_thread_budget) {
    if (t < 1 || static_cast<std::size_t>(t) > c.threads.size())
      throw std::invalid_argument(fmt::format("budget for unknown thread t{}", t));
    c.threads[static_cast<std::size_t>(t - 1)].budget = b;
  }
  for (const auto& t : c.threads)
    if (t.budget < 0) throw std::invalid_argument("budget must be non-negative");
  return c;
}

namespace {

struct ThreadState {
  int method = -1;  // -1: idle
  std::uint32_t pc = 0;
  std::uint32_t done = 0;
  std::vector<Value> locals;
};

struct GlobalState {
  std::vector<Value> shared;
  std::vector<std::vector<Value>> heap;
  std::vector<ThreadState> threads;
};

// ---- byte encoding

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
std::uint32_t get_u32(const std::string& in, std::size_t& at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  at += 4;
  return v;
}
void put_value(std::string& out, const Value& v) {
  out.push_back(static_cast<char>(v.kind));
  put_u32(out, static_cast<std::uint32_t>(static_cast<std::int32_t>(v.v)));
}
Value get_value(const std::string& in, std::size_t& at) {
  Value v;
  v.kind = static_cast<Value::Kind>(in[at++]);
  v.v = static_cast<std::int32_t>(get_u32(in, at));
  return v;
}

class Machine {
 public:
  Machine(const ObjectModel& model, const ClientConfig& client, const ExploreOptions& opts)
      : m_(model), client_(client), opts_(opts), atoms_(model.atoms) {
    // Shared layout.
    std::vector<Value> size_env{Value::integer(static_cast<std::int64_t>(client.total_ops())),
                                Value::integer(static_cast<std::int64_t>(client.num_threads()))};
    int offset = 0;
    for (const auto& s : m_.shared) {
      offset_.push_back(offset);
      int size = 0;
      if (s.size_expr) {
        GlobalState dummy;
        ThreadState t;
        t.locals = size_env;
        auto v = eval(*s.size_expr, dummy, 0, t);
        if (v.kind != Value::Kind::Int || v.v < 1 || v.v > 100000)
          throw ModelError(fmt::format("array {} has invalid size", s.name));
        size = static_cast<int>(v.v);
      }
      size_.push_back(size);
      offset += size == 0 ? 1 : size;
    }
    total_shared_ = offset;
    // Resolve operation arguments.
    for (const auto& t : client_.threads) {
      std::vector<std::pair<int, std::vector<Value>>> ops;
      for (const auto& op : t.allowed) {
        int idx = -1;
        for (std::size_t i = 0; i < m_.methods.size(); ++i)
          if (m_.methods[i].name == op.method) idx = static_cast<int>(i);
        if (idx < 0) throw std::invalid_argument(fmt::format("model has no method '{}'", op.method));
        std::vector<Value> args;
        for (const auto& a : op.args) args.push_back(parse_value(a));
        ops.emplace_back(idx, std::move(args));
      }
      ops_.push_back(std::move(ops));
    }
  }

  GlobalState initial() {
    GlobalState st;
    st.shared.assign(static_cast<std::size_t>(total_shared_), Value::null());
    for (std::size_t i = 0; i < m_.shared.size(); ++i) {
      Value v = m_.shared[i].init ? m_.shared[i].init->constant : Value::null();
      int n = size_[i] == 0 ? 1 : size_[i];
      for (int k = 0; k < n; ++k) st.shared[static_cast<std::size_t>(offset_[i] + k)] = v;
    }
    st.threads.resize(client_.num_threads());
    ThreadState init;
    init.locals.assign(static_cast<std::size_t>(m_.init.num_slots), Value::null());
    std::size_t steps = 0;
    while (m_.init.code[init.pc].kind != Instr::Kind::Return) {
      exec(m_.init, st, 0, init);
      if (++steps > kFoldLimit) throw ModelError("init block does not terminate");
    }
    return st;
  }

  std::string encode(GlobalState& st) const {
    canonicalize(st);
    std::string out;
    out.reserve(st.shared.size() * 5 + st.threads.size() * 32 + st.heap.size() * 16);
    for (const auto& v : st.shared) put_value(out, v);
    for (const auto& t : st.threads) {
      put_u32(out, static_cast<std::uint32_t>(t.method));
      put_u32(out, t.pc);
      put_u32(out, t.done);
      put_u32(out, static_cast<std::uint32_t>(t.locals.size()));
      for (const auto& v : t.locals) put_value(out, v);
    }
    put_u32(out, static_cast<std::uint32_t>(st.heap.size()));
    for (const auto& n : st.heap)
      for (const auto& v : n) put_value(out, v);
    return out;
  }

  GlobalState decode(const std::string& in) const {
    GlobalState st;
    std::size_t at = 0;
    st.shared.resize(static_cast<std::size_t>(total_shared_));
    for (auto& v : st.shared) v = get_value(in, at);
    st.threads.resize(client_.num_threads());
    for (auto& t : st.threads) {
      t.method = static_cast<int>(get_u32(in, at));
      t.pc = get_u32(in, at);
      t.done = get_u32(in, at);
      t.locals.resize(get_u32(in, at));
      for (auto& v : t.locals) v = get_value(in, at);
    }
    st.heap.resize(get_u32(in, at));
    for (auto& n : st.heap) {
      n.resize(m_.fields.size());
      for (auto& v : n) v = get_value(in, at);
    }
    return st;
  }

  // Successors of `st` in canonical order.
  template <class Emit>
  void successors(const GlobalState& st, Emit&& emit) {
    for (std::size_t t = 0; t < st.threads.size(); ++t) {
      const auto& th = st.threads[t];
      const int tid = static_cast<int>(t + 1);
      if (th.method < 0) {
        if (th.done >= static_cast<std::uint32_t>(client_.threads[t].budget)) continue;
        for (std::size_t k = 0; k < ops_[t].size(); ++k) {
          const auto& [midx, args] = ops_[t][k];
          const auto& r = m_.methods[static_cast<std::size_t>(midx)];
          GlobalState next = st;
          auto& nt = next.threads[t];
          nt.method = midx;
          nt.pc = 0;
          nt.done = th.done + 1;
          nt.locals.assign(static_cast<std::size_t>(r.num_slots), Value::null());
          for (std::size_t p = 0; p < args.size(); ++p) nt.locals[p] = args[p];
          fold(r, next, tid, nt);
          emit(Action::call(tid, r.name, client_.threads[t].allowed[k].args.empty() ? "" : join_args(args)),
               std::move(next));
        }
        continue;
      }
      const auto& r = m_.methods[static_cast<std::size_t>(th.method)];
      const auto& in = r.code[th.pc];
      GlobalState next = st;
      auto& nt = next.threads[t];
      if (in.kind == Instr::Kind::Return) {
        std::string value;
        if (in.ret) value = render(eval(*in.ret, next, tid, nt));
        nt.method = -1;
        nt.pc = 0;
        nt.locals.clear();
        emit(Action::ret(tid, r.name, value), std::move(next));
        continue;
      }
      auto variant = exec(r, next, tid, nt);
      fold(r, next, tid, nt);
      emit(Action::tau(tid, variant.empty() ? in.tag : in.tag + ":" + variant), std::move(next));
    }
  }

  std::string render_state(const GlobalState& st) const {
    std::string out = "shared{";
    for (std::size_t i = 0; i < m_.shared.size(); ++i) {
      out += fmt::format("{}{}=", i ? " " : "", m_.shared[i].name);
      if (size_[i] == 0) {
        out += render(st.shared[static_cast<std::size_t>(offset_[i])]);
      } else {
        out += "[";
        for (int k = 0; k < size_[i]; ++k)
          out += (k ? "," : "") + render(st.shared[static_cast<std::size_t>(offset_[i] + k)]);
        out += "]";
      }
    }
    out += "}";
    for (std::size_t t = 0; t < st.threads.size(); ++t) {
      const auto& th = st.threads[t];
      if (th.method < 0) {
        out += fmt::format(" t{}{{idle done={}}}", t + 1, th.done);
        continue;
      }
      const auto& r = m_.methods[static_cast<std::size_t>(th.method)];
      const auto& in = r.code[th.pc];
      auto at = in.kind == Instr::Kind::Return ? std::string("ret") : in.tag;
      out += fmt::format(" t{}{{{}@{}", t + 1, r.name, at.empty() ? fmt::format("line{}", in.line) : at);
      for (std::size_t s = 0; s < th.locals.size(); ++s)
        if (!(th.locals[s] == Value::null())) out += fmt::format(" {}={}", r.slot_names[s], render(th.locals[s]));
      out += "}";
    }
    for (std::size_t n = 0; n < st.heap.size(); ++n) {
      out += fmt::format(" #{}{{", n);
      for (std::size_t f = 0; f < st.heap[n].size(); ++f)
        if (!(st.heap[n][f] == Value::null()))
          out += fmt::format("{}={} ", m_.fields[f], render(st.heap[n][f]));
      if (out.back() == ' ') out.pop_back();
      out += "}";
    }
    return out;
  }

  std::size_t arena_size(const GlobalState& st) const { return st.heap.size(); }

 private:
  static constexpr std::size_t kFoldLimit = 10000;

  Value parse_value(const std::string& s) {
    if (s == "true" || s == "false") return Value::boolean(s == "true");
    if (s == "null") return Value::null();
    bool num = !s.empty() && (std::isdigit(static_cast<unsigned char>(s[0])) || (s[0] == '-' && s.size() > 1));
    for (std::size_t i = 1; num && i < s.size(); ++i) num = std::isdigit(static_cast<unsigned char>(s[i]));
    if (num) return Value::integer(std::stoll(s));
    auto name = s[0] == ':' ? s.substr(1) : s;
    auto it = std::find(atoms_.begin(), atoms_.end(), name);
    if (it != atoms_.end()) return Value::atom(it - atoms_.begin());
    atoms_.push_back(name);
    return Value::atom(static_cast<std::int64_t>(atoms_.size() - 1));
  }

  std::string render(const Value& v) const {
    switch (v.kind) {
      case Value::Kind::Null:
        return "null";
      case Value::Kind::Int:
        return std::to_string(v.v);
      case Value::Kind::Bool:
        return v.v ? "true" : "false";
      case Value::Kind::Atom:
        return atoms_[static_cast<std::size_t>(v.v)];
      case Value::Kind::Ref:
        return fmt::format("#{}", v.v);
    }
    return "?";
  }

  std::string join_args(const std::vector<Value>& args) const {
    std::string out;
    for (const auto& a : args) out += (out.empty() ? "" : ",") + render(a);
    return out;
  }

  [[noreturn]] void fault(const std::string& what) const { throw ModelError(what); }

  std::size_t shared_slot(const Expr& e, GlobalState& st, int tid, ThreadState& th) {
    const auto i = static_cast<std::size_t>(e.slot);
    if (e.op == Expr::Op::Shared) return static_cast<std::size_t>(offset_[i]);
    auto ix = eval(*e.kids[0], st, tid, th);
    if (ix.kind != Value::Kind::Int || ix.v < 0 || ix.v >= size_[i])
      fault(fmt::format("index {} out of range for {}[{}]", render(ix), m_.shared[i].name, size_[i]));
    return static_cast<std::size_t>(offset_[i] + ix.v);
  }

  Value& node_field(const Expr& e, GlobalState& st, int tid, ThreadState& th) {
    auto obj = eval(*e.kids[0], st, tid, th);
    if (!obj.is_ref()) fault(fmt::format("field {} of non-reference {}", m_.fields[static_cast<std::size_t>(e.field)], render(obj)));
    return st.heap[static_cast<std::size_t>(obj.v)][static_cast<std::size_t>(e.field)];
  }

  Value read(const Expr& lv, GlobalState& st, int tid, ThreadState& th) {
    switch (lv.op) {
      case Expr::Op::Local:
        return th.locals[static_cast<std::size_t>(lv.slot)];
      case Expr::Op::Shared:
      case Expr::Op::SharedAt:
        return st.shared[shared_slot(lv, st, tid, th)];
      case Expr::Op::Field:
        return node_field(lv, st, tid, th);
      default:
        fault("not a location");
    }
  }

  void write(const Expr& lv, const Value& v, GlobalState& st, int tid, ThreadState& th) {
    switch (lv.op) {
      case Expr::Op::Local:
        th.locals[static_cast<std::size_t>(lv.slot)] = v;
        return;
      case Expr::Op::Shared:
      case Expr::Op::SharedAt:
        st.shared[shared_slot(lv, st, tid, th)] = v;
        return;
      case Expr::Op::Field:
        node_field(lv, st, tid, th) = v;
        return;
      default:
        fault("not a location");
    }
  }

  bool as_bool(const Value& v) const {
    if (v.kind != Value::Kind::Bool) fault(fmt::format("condition is {}, not a boolean", render(v)));
    return v.v != 0;
  }
  std::int64_t as_int(const Value& v) const {
    if (v.kind != Value::Kind::Int) fault(fmt::format("arithmetic on {}", render(v)));
    return v.v;
  }

  // Outcome of the most recent cas in the current step.
  std::optional<bool> last_cas_;

  Value eval(const Expr& e, GlobalState& st, int tid, ThreadState& th) {
    switch (e.op) {
      case Expr::Op::Const:
        return e.constant;
      case Expr::Op::Local:
      case Expr::Op::Shared:
      case Expr::Op::SharedAt:
      case Expr::Op::Field:
        return read(e, st, tid, th);
      case Expr::Op::Tid:
        return Value::integer(tid);
      case Expr::Op::Not:
        return Value::boolean(!as_bool(eval(*e.kids[0], st, tid, th)));
      case Expr::Op::Neg:
        return Value::integer(-as_int(eval(*e.kids[0], st, tid, th)));
      case Expr::Op::IsRef:
        return Value::boolean(eval(*e.kids[0], st, tid, th).is_ref());
      case Expr::Op::Binary: {
        using B = Expr::BinOp;
        if (e.binop == B::And) {
          if (!as_bool(eval(*e.kids[0], st, tid, th))) return Value::boolean(false);
          return Value::boolean(as_bool(eval(*e.kids[1], st, tid, th)));
        }
        if (e.binop == B::Or) {
          if (as_bool(eval(*e.kids[0], st, tid, th))) return Value::boolean(true);
          return Value::boolean(as_bool(eval(*e.kids[1], st, tid, th)));
        }
        auto a = eval(*e.kids[0], st, tid, th);
        auto b = eval(*e.kids[1], st, tid, th);
        switch (e.binop) {
          case B::Eq:
            return Value::boolean(a == b);
          case B::Ne:
            return Value::boolean(!(a == b));
          case B::Add:
            return Value::integer(as_int(a) + as_int(b));
          case B::Sub:
            return Value::integer(as_int(a) - as_int(b));
          case B::Mul:
            return Value::integer(as_int(a) * as_int(b));
          case B::Div:
          case B::Mod: {
            auto d = as_int(b);
            if (d == 0) fault("division by zero");
            return Value::integer(e.binop == B::Div ? as_int(a) / d : as_int(a) % d);
          }
          case B::Lt:
            return Value::boolean(as_int(a) < as_int(b));
          case B::Le:
            return Value::boolean(as_int(a) <= as_int(b));
          case B::Gt:
            return Value::boolean(as_int(a) > as_int(b));
          case B::Ge:
            return Value::boolean(as_int(a) >= as_int(b));
          default:
            break;
        }
        fault("bad operator");
      }
      case Expr::Op::Cas:
      case Expr::Op::CasVal: {
        auto expected = eval(*e.kids[1], st, tid, th);
        auto desired = eval(*e.kids[2], st, tid, th);
        auto current = read(*e.kids[0], st, tid, th);
        bool ok = current == expected;
        if (ok) write(*e.kids[0], desired, st, tid, th);
        last_cas_ = ok;
        return e.op == Expr::Op::Cas ? Value::boolean(ok) : current;
      }
      case Expr::Op::New: {
        std::vector<Value> node(m_.fields.size(), Value::null());
        for (std::size_t i = 0; i < e.kids.size(); ++i)
          node[static_cast<std::size_t>(e.fields[i])] = eval(*e.kids[i], st, tid, th);
        st.heap.push_back(std::move(node));
        if (st.heap.size() > opts_.arena_bound)
          throw ExploreError(fmt::format("heap arena exhausted ({} nodes)", opts_.arena_bound));
        return Value::ref(static_cast<std::int64_t>(st.heap.size() - 1));
      }
    }
    fault("bad expression");
  }

  // Executes one instruction; returns the outcome variant for tagged steps.
  std::string exec(const dsl::Routine& r, GlobalState& st, int tid, ThreadState& th) {
    const auto& in = r.code[th.pc];
    last_cas_.reset();
    std::string variant;
    try {
      switch (in.kind) {
        case Instr::Kind::Exec: {
          std::vector<Value> vals;
          vals.reserve(in.values.size());
          for (const auto& v : in.values) vals.push_back(eval(*v, st, tid, th));
          for (std::size_t i = 0; i < in.targets.size(); ++i) write(*in.targets[i], vals[i], st, tid, th);
          if (last_cas_) variant = *last_cas_ ? "ok" : "fail";
          ++th.pc;
          break;
        }
        case Instr::Kind::Branch: {
          bool c = as_bool(eval(*in.cond, st, tid, th));
          th.pc = c ? th.pc + 1 : static_cast<std::uint32_t>(in.target);
          variant = c ? "T" : "F";
          break;
        }
        case Instr::Kind::Jump:
          th.pc = static_cast<std::uint32_t>(in.target);
          break;
        case Instr::Kind::Clear:
          for (auto s : in.clear) th.locals[static_cast<std::size_t>(s)] = Value::null();
          ++th.pc;
          break;
        case Instr::Kind::Return:
          break;
      }
      if (in.annotation) variant = as_bool(eval(*in.annotation, st, tid, th)) ? "T" : "F";
    } catch (const ModelError& e) {
      throw ModelError(fmt::format("{} line {} (thread t{}): {}", r.name, in.line, tid, e.what()));
    }
    return in.tag.empty() ? std::string() : variant;
  }

  void fold(const dsl::Routine& r, GlobalState& st, int tid, ThreadState& th) {
    std::size_t steps = 0;
    for (;;) {
      const auto& in = r.code[th.pc];
      if (!in.tag.empty() || in.kind == Instr::Kind::Return) return;
      exec(r, st, tid, th);
      if (++steps > kFoldLimit)
        throw ModelError(fmt::format("{} line {}: untagged statements loop without reaching a tagged statement or return",
                                     r.name, in.line));
    }
  }

  // Renumbers heap nodes in first-reference order and drops unreachable ones.
  void canonicalize(GlobalState& st) const {
    if (st.heap.empty()) return;
    constexpr std::int64_t kUnset = -1;
    std::vector<std::int64_t> map(st.heap.size(), kUnset);
    std::vector<std::size_t> order;
    auto visit = [&](const Value& v) {
      if (v.is_ref() && map[static_cast<std::size_t>(v.v)] == kUnset) {
        map[static_cast<std::size_t>(v.v)] = static_cast<std::int64_t>(order.size());
        order.push_back(static_cast<std::size_t>(v.v));
      }
    };
    for (const auto& v : st.shared) visit(v);
    for (const auto& t : st.threads)
      for (const auto& v : t.locals) visit(v);
    for (std::size_t i = 0; i < order.size(); ++i)
      for (const auto& v : st.heap[order[i]]) visit(v);
    auto remap = [&](Value& v) {
      if (v.is_ref()) v.v = map[static_cast<std::size_t>(v.v)];
    };
    std::vector<std::vector<Value>> heap;
    heap.reserve(order.size());
    for (auto old : order) heap.push_back(std::move(st.heap[old]));
    for (auto& n : heap)
      for (auto& v : n) remap(v);
    for (auto& v : st.shared) remap(v);
    for (auto& t : st.threads)
      for (auto& v : t.locals) remap(v);
    st.heap = std::move(heap);
  }

  const ObjectModel& m_;
  const ClientConfig& client_;
  const ExploreOptions& opts_;
  std::vector<std::string> atoms_;
  std::vector<int> offset_, size_;
  int total_shared_ = 0;
  std::vector<std::vector<std::pair<int, std::vector<Value>>>> ops_;
};

}  // namespace

Lts explore(const ObjectModel& model, const ClientConfig& client, const ExploreOptions& options) {
  if (client.threads.empty()) throw std::invalid_argument("client has no threads");
  Machine machine(model, client, options);
  auto init = machine.initial();
  std::unordered_map<std::string, StateId> index;
  std::vector<std::string> states;
  std::vector<std::string> payload;
  states.push_back(machine.encode(init));
  index.emplace(states.back(), 0);
  if (options.keep_payload) payload.push_back(machine.render_state(init));
  LtsBuilder b;
  for (std::size_t cur = 0; cur < states.size(); ++cur) {
    auto st = machine.decode(states[cur]);
    machine.successors(st, [&](const Action& a, GlobalState&& next) {
      auto key = machine.encode(next);
      auto [it, inserted] = index.try_emplace(std::move(key), static_cast<StateId>(states.size()));
      if (inserted) {
        if (states.size() >= options.step_bound)
          throw ExploreError(fmt::format("state bound {} exceeded while expanding state {}: {}", options.step_bound, cur,
                                         machine.render_state(machine.decode(states[cur]))));
        states.push_back(it->first);
        if (options.keep_payload) payload.push_back(machine.render_state(next));
      }
      b.add(static_cast<StateId>(cur), a, it->second);
    });
  }
  b.ensure_states(states.size());
  auto lts = std::move(b).build(0);
  if (options.keep_payload) lts.set_payload(std::move(payload));
  return lts;
}

}  // namespace effrace
