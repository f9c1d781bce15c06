#include "effrace/seqspec.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <map>
#include <stdexcept>

namespace effrace {

SequentialSpec SequentialSpec::from_decl(const SpecDecl& decl) {
  SequentialSpec s;
  s.kind_ = decl.kind;
  auto params = decl.params;
  auto take = [&](const std::string& key, const std::string& dflt) {
    auto it = params.find(key);
    if (it == params.end()) return dflt;
    auto v = it->second;
    params.erase(it);
    return v;
  };
  if (decl.kind == "queue" || decl.kind == "stack") {
    bool queue = decl.kind == "queue";
    s.put_ = take(queue ? "enq" : "push", queue ? "Enq" : "Push");
    s.take_ = take(queue ? "deq" : "pop", queue ? "Deq" : "Pop");
    s.put_result_ = take(queue ? "enq_returns" : "push_returns", "");
    s.empty_ = take("empty", "EMPTY");
    s.block_ = s.empty_ == "block";
  } else if (decl.kind == "ccas") {
    s.cas_ = take("ccas", "CCAS");
    s.set_flag_ = take("setflag", "SetFlag");
    s.init_a_ = take("a", "1");
    s.init_flag_ = take("flag", "true");
  } else if (decl.kind.empty()) {
    throw std::invalid_argument("model declares no sequential specification");
  } else {
    throw std::invalid_argument(fmt::format("unknown specification kind '{}'", decl.kind));
  }
  if (!params.empty())
    throw std::invalid_argument(fmt::format("unknown parameter '{}' for {} specification", params.begin()->first, decl.kind));
  return s;
}

SequentialSpec::State SequentialSpec::initial() const {
  if (kind_ == "ccas") return {init_a_, init_flag_};
  return {};
}

std::optional<std::pair<SequentialSpec::State, std::string>> SequentialSpec::apply(const State& s,
                                                                                const std::string& method,
                                                                                const std::string& arg) const {
  if (kind_ == "ccas") {
    if (method == cas_) {
      auto comma = arg.find(',');
      if (comma == std::string::npos) return std::nullopt;
      auto o = arg.substr(0, comma), n = arg.substr(comma + 1);
      State next = s;
      if (s[0] == o && s[1] == "true") next[0] = n;
      return std::pair{next, s[0]};
    }
    if (method == set_flag_) return std::pair{State{s[0], arg}, std::string()};
    return std::nullopt;
  }
  if (method == put_) {
    State next = s;
    next.push_back(arg);
    return std::pair{next, put_result_};
  }
  if (method == take_) {
    if (s.empty()) {
      if (block_) return std::nullopt;
      return std::pair{s, empty_};
    }
    State next = s;
    std::string v;
    if (kind_ == "queue") {
      v = next.front();
      next.erase(next.begin());
    } else {
      v = next.back();
      next.pop_back();
    }
    return std::pair{next, v};
  }
  return std::nullopt;
}

bool legal(const History& s, const SequentialSpec& spec) {
  if (!s.sequential()) return false;
  auto state = spec.initial();
  for (const auto& op : operations(s)) {
    if (op.pending()) return false;
    auto r = spec.apply(state, op.method, op.arg);
    if (!r || r->second != op.result) return false;
    state = std::move(r->first);
  }
  return true;
}

bool linearizable(const History& h, const History& s) {
  if (!s.sequential()) return false;
  std::vector<int> threads;
  for (const auto& e : h.events) threads.push_back(e.thread);
  for (const auto& e : s.events) threads.push_back(e.thread);
  std::sort(threads.begin(), threads.end());
  threads.erase(std::unique(threads.begin(), threads.end()), threads.end());
  for (int t : threads)
    if (!(h.project(t) == s.project(t))) return false;
  // Operations are matched by thread and per-thread position.
  auto hops = operations(h);
  auto sops = operations(s);
  auto key = [](const std::vector<Operation>& ops) {
    std::vector<std::pair<int, int>> k;
    std::map<int, int> seen;
    for (const auto& o : ops) k.emplace_back(o.thread, seen[o.thread]++);
    return k;
  };
  auto hk = key(hops), sk = key(sops);
  std::map<std::pair<int, int>, std::size_t> spos;
  for (std::size_t i = 0; i < sk.size(); ++i) spos[sk[i]] = i;
  for (std::size_t i = 0; i < hops.size(); ++i)
    for (std::size_t j = 0; j < hops.size(); ++j) {
      if (i == j || !hops[i].ret_index) continue;
      if (*hops[i].ret_index < hops[j].call_index && spos[hk[i]] > spos[hk[j]]) return false;
    }
  return true;
}

namespace {

struct Search {
  const std::vector<Operation>& ops;
  const SequentialSpec& spec;
  std::size_t limit;
  std::vector<std::vector<std::size_t>> preds;
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> order;
  std::vector<bool> done;

  void run(const SequentialSpec::State& state) {
    if (out.size() >= limit) return;
    if (order.size() == ops.size()) {
      out.push_back(order);
      return;
    }
    for (std::size_t i = 0; i < ops.size(); ++i) {
      if (done[i]) continue;
      if (std::any_of(preds[i].begin(), preds[i].end(), [&](std::size_t p) { return !done[p]; })) continue;
      auto r = spec.apply(state, ops[i].method, ops[i].arg);
      if (!r || r->second != ops[i].result) continue;
      done[i] = true;
      order.push_back(i);
      run(r->first);
      order.pop_back();
      done[i] = false;
    }
  }
};

}  // namespace

std::vector<std::vector<std::size_t>> linearization_orders(const History& h, const SequentialSpec& spec,
                                                           std::size_t limit) {
  auto all = operations(h);
  std::vector<Operation> ops;
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < all.size(); ++i)
    if (!all[i].pending()) {
      ops.push_back(all[i]);
      ids.push_back(i);
    }
  Search s{ops, spec, limit, {}, {}, {}, {}};
  s.preds.resize(ops.size());
  for (std::size_t i = 0; i < ops.size(); ++i)
    for (std::size_t j = 0; j < ops.size(); ++j)
      if (i != j && *ops[j].ret_index < ops[i].call_index) s.preds[i].push_back(j);
  s.done.assign(ops.size(), false);
  s.run(spec.initial());
  for (auto& order : s.out)
    for (auto& i : order) i = ids[i];
  return s.out;
}

History sequential_history(const std::vector<Operation>& ops, const std::vector<std::size_t>& order) {
  History s;
  for (auto i : order) {
    const auto& o = ops[i];
    s.events.push_back(Action::call(o.thread, o.method, o.arg));
    s.events.push_back(Action::ret(o.thread, o.method, o.result));
  }
  return s;
}

}  // namespace effrace
