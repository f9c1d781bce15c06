#include "effrace/history.hpp"

#include <fmt/format.h>
#include <map>
#include <stdexcept>

namespace effrace {

std::vector<StateId> Path::states() const {
  std::vector<StateId> out{start};
  for (const auto& [label, s] : steps) out.push_back(s);
  return out;
}

Path Path::concat(const Path& tail) const {
  if (tail.start != end()) throw std::invalid_argument("paths do not connect");
  Path p = *this;
  p.steps.insert(p.steps.end(), tail.steps.begin(), tail.steps.end());
  return p;
}

bool valid_path(const Lts& lts, const Path& p) {
  if (p.start >= lts.num_states()) return false;
  StateId cur = p.start;
  for (const auto& [label, next] : p.steps) {
    bool found = false;
    for (const auto& t : lts.out(cur)) {
      if (t.label == label && t.dst == next) {
        found = true;
        break;
      }
    }
    if (!found) return false;
    cur = next;
  }
  return true;
}

History History::project(int thread) const {
  History h;
  for (const auto& e : events)
    if (e.thread == thread) h.events.push_back(e);
  return h;
}

bool History::well_formed() const {
  std::map<int, const Action*> open;
  for (const auto& e : events) {
    if (e.kind == ActionKind::Call) {
      if (open[e.thread]) return false;
      open[e.thread] = &e;
    } else if (e.kind == ActionKind::Ret) {
      auto* c = open[e.thread];
      if (!c || c->method != e.method) return false;
      open[e.thread] = nullptr;
    } else {
      return false;
    }
  }
  return true;
}

bool History::complete() const {
  if (!well_formed()) return false;
  std::map<int, int> open;
  for (const auto& e : events) open[e.thread] += e.kind == ActionKind::Call ? 1 : -1;
  for (const auto& [t, n] : open)
    if (n != 0) return false;
  return true;
}

bool History::sequential() const {
  if (events.size() % 2 != 0) return false;
  for (std::size_t i = 0; i < events.size(); i += 2) {
    const auto& c = events[i];
    const auto& r = events[i + 1];
    if (c.kind != ActionKind::Call || r.kind != ActionKind::Ret || c.thread != r.thread || c.method != r.method)
      return false;
  }
  return true;
}

std::string History::str() const {
  std::string out;
  for (const auto& e : events) {
    if (!out.empty()) out += ", ";
    out += e.str();
  }
  return out;
}

std::string Operation::str() const {
  auto call = arg.empty() ? fmt::format("t{}.{}", thread, method) : fmt::format("t{}.{}({})", thread, method, arg);
  if (pending()) return call + " pending";
  return result.empty() ? call : call + " -> " + result;
}

History history_of(const Lts& lts, const Path& execution) {
  History h;
  for (const auto& [label, s] : execution.steps) {
    const auto& a = lts.label(label);
    if (a.visible()) h.events.push_back(a);
  }
  return h;
}

std::vector<Operation> operations(const History& h) {
  std::vector<Operation> ops;
  std::map<int, std::size_t> open;
  for (std::size_t i = 0; i < h.events.size(); ++i) {
    const auto& e = h.events[i];
    if (e.kind == ActionKind::Call) {
      open[e.thread] = ops.size();
      ops.push_back({i, std::nullopt, e.thread, e.method, e.value, {}});
    } else if (e.kind == ActionKind::Ret) {
      auto it = open.find(e.thread);
      if (it == open.end()) continue;
      auto& op = ops[it->second];
      op.ret_index = i;
      op.result = e.value;
      open.erase(it);
    }
  }
  return ops;
}

namespace {

void require_in(const History& h, const Operation& e) {
  auto ok = e.call_index < h.events.size() && h.events[e.call_index].kind == ActionKind::Call &&
            h.events[e.call_index].thread == e.thread && h.events[e.call_index].method == e.method;
  if (ok && e.ret_index) {
    ok = *e.ret_index < h.events.size() && *e.ret_index > e.call_index &&
         h.events[*e.ret_index].kind == ActionKind::Ret && h.events[*e.ret_index].thread == e.thread;
  }
  if (!ok) throw std::invalid_argument(fmt::format("operation {} does not occur in the history", e.str()));
}

}  // namespace

bool precedes(const History& h, const Operation& e1, const Operation& e2) {
  require_in(h, e1);
  require_in(h, e2);
  return e1.ret_index && *e1.ret_index < e2.call_index;
}

}  // namespace effrace
