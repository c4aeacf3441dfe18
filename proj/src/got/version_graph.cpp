#include "got/version_graph.hpp"

#include <algorithm>
#include <deque>
#include <random>

#include "got/error.hpp"
#include "got/serialize.hpp"

namespace got {

VersionId random_version_id() {
  thread_local std::mt19937_64 rng{std::random_device{}()};
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(32, '0');
  for (int half = 0; half < 2; ++half) {
    auto bits = rng();
    for (int i = 0; i < 16; ++i) {
      out[half * 16 + i] = digits[bits & 0xf];
      bits >>= 4;
    }
  }
  return out;
}

State default_resolver(const MergeInput& in) {
  State merged = in.update_not_conflicting();
  for (const auto& c : in.conflicts) {
    if (!c.theirs) {
      merged.erase(c.key);
    } else if (!c.yours) {
      merged.put(*c.theirs);
    } else {
      ObjectState obj = *c.yours;
      for (const auto& [dim, value] : c.theirs->dims) {
        bool theirs_changed = !c.orig || c.orig->dims.at(dim) != value;
        if (theirs_changed) obj.dims[dim] = value;
      }
      merged.put(std::move(obj));
    }
  }
  return merged;
}

VersionGraph::VersionGraph(const SchemaRegistry* registry, IdSource ids)
    : registry_(registry), ids_(std::move(ids)) {
  parents_[kRootVersion];
  children_[kRootVersion];
  state_cache_[kRootVersion] = State{};
}

std::vector<VersionId> VersionGraph::vertices() const {
  std::vector<VersionId> out;
  for (const auto& [v, _] : parents_) out.push_back(v);
  return out;
}

std::vector<Edge> VersionGraph::edges() const {
  std::vector<Edge> out;
  for (const auto& [src, outs] : children_) {
    for (const auto& [dst, diff] : outs) out.push_back({src, dst, diff});
  }
  return out;
}

const Diff* VersionGraph::edge(const VersionId& src, const VersionId& dst) const {
  auto it = children_.find(src);
  if (it == children_.end()) return nullptr;
  auto e = it->second.find(dst);
  return e == it->second.end() ? nullptr : &e->second;
}

std::vector<VersionId> VersionGraph::parents(const VersionId& v) const {
  require(v);
  const auto& ps = parents_.at(v);
  return {ps.begin(), ps.end()};
}

std::vector<VersionId> VersionGraph::children(const VersionId& v) const {
  require(v);
  std::vector<VersionId> out;
  for (const auto& [c, _] : children_.at(v)) out.push_back(c);
  return out;
}

std::optional<VersionId> VersionGraph::ref(const std::string& name) const {
  auto it = refs_.find(name);
  if (it == refs_.end()) return std::nullopt;
  return it->second;
}

void VersionGraph::update_ref(const std::string& name, const VersionId& v) {
  require(v);
  refs_[name] = v;
}

void VersionGraph::require(const VersionId& v) const {
  if (!contains(v)) throw Error(ErrorCode::unknown_version, "unknown version '" + v + "'");
}

State VersionGraph::state_at(const VersionId& v) const {
  require(v);
  if (auto it = state_cache_.find(v); it != state_cache_.end()) return it->second;

  // Walk back along smallest-id parents to the nearest materialized version,
  // then fold the edge diffs forward.
  std::vector<VersionId> chain{v};
  while (state_cache_.count(chain.back()) == 0) {
    const auto& ps = parents_.at(chain.back());
    if (ps.empty()) throw Error(ErrorCode::unknown_version, "version '" + chain.back() + "' is detached");
    chain.push_back(*ps.begin());
  }
  State state = state_cache_.at(chain.back());
  for (auto it = chain.rbegin() + 1; it != chain.rend(); ++it) {
    const auto& parent = *(it - 1);
    state = apply_diff(state, children_.at(parent).at(*it));
    state_cache_[*it] = state;
  }
  return state;
}

VersionId VersionGraph::fresh_id() {
  auto id = ids_();
  while (contains(id)) id = ids_();
  return id;
}

void VersionGraph::insert_edge(const VersionId& src, const VersionId& dst, Diff diff) {
  parents_[dst].insert(src);
  children_[dst];
  children_[src][dst] = std::move(diff);
}

void VersionGraph::remove_vertex(const VersionId& v) {
  for (const auto& p : parents_.at(v)) children_[p].erase(v);
  for (const auto& [c, _] : children_.at(v)) parents_[c].erase(v);
  parents_.erase(v);
  children_.erase(v);
  state_cache_.erase(v);
}

VersionId VersionGraph::extend(const VersionId& start, const Diff& diff) {
  require(start);
  auto id = fresh_id();
  add_version(start, id, diff);
  if (start == head_) head_ = id;
  return id;
}

void VersionGraph::add_version(const VersionId& start, const VersionId& id, const Diff& diff) {
  require(start);
  if (contains(id)) throw Error(ErrorCode::duplicate, "version '" + id + "' already exists");
  // Reject diffs that do not apply before the vertex becomes visible.
  State next = apply_diff(state_at(start), diff);
  insert_edge(start, id, diff);
  state_cache_[id] = std::move(next);
}

MergePlan VersionGraph::stage_incoming(const VersionId& start, const VersionId& end, const Diff& diff) {
  require(start);
  if (!contains(end)) add_version(start, end, diff);
  MergePlan plan;
  plan.incoming = end;
  plan.yours = head_;
  if (is_ancestor(end, head_)) {
    plan.kind = UpdateKind::already_known;
  } else if (is_ancestor(head_, end)) {
    plan.kind = UpdateKind::fast_forward;
  } else {
    plan.kind = UpdateKind::merge;
    plan.orig = lowest_common_ancestor(head_, end);
  }
  return plan;
}

void VersionGraph::analyze(MergePlan& plan) const {
  if (plan.kind == UpdateKind::merge) {
    plan.orig_state = state_at(plan.orig);
    plan.your_state = state_at(plan.yours);
    plan.their_state = state_at(plan.incoming);
    plan.report = detect_conflicts(plan.orig_state, diff_states(plan.orig_state, plan.your_state),
                                   diff_states(plan.orig_state, plan.their_state));
  }
  plan.analyzed = true;
}

State VersionGraph::resolve(const MergePlan& plan, const Resolver& resolver) const {
  if (plan.kind != UpdateKind::merge) return state_at(plan.incoming);
  if (!plan.analyzed) throw Error(ErrorCode::precondition, "merge plan has not been analyzed");

  MergeInput input{{}, plan.orig_state, plan.your_state, plan.their_state,
                   plan.report.nonconflicting_theirs};
  if (plan.report.concurrent.empty()) return input.update_not_conflicting();

  auto lookup = [](const State& s, const ObjectKey& k) -> std::optional<ObjectState> {
    if (const auto* o = s.find(k)) return *o;
    return std::nullopt;
  };
  for (const auto& key : plan.report.concurrent) {
    input.conflicts.push_back({key, lookup(plan.orig_state, key), lookup(plan.your_state, key),
                               lookup(plan.their_state, key)});
  }
  State merged;
  try {
    merged = resolver ? resolver(input) : default_resolver(input);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::resolver, std::string("merge function failed: ") + e.what());
  }
  if (registry_ != nullptr) {
    try {
      registry_->validate(merged);
    } catch (const Error& e) {
      throw Error(ErrorCode::resolver, std::string("merge function returned a bad state: ") + e.what());
    }
  }
  return merged;
}

MergeReport VersionGraph::complete(const MergePlan& plan, const State& merged) {
  if (plan.yours != head_) {
    throw Error(ErrorCode::precondition, "HEAD moved while an update was being received");
  }
  switch (plan.kind) {
    case UpdateKind::already_known:
      return {head_, false, false};
    case UpdateKind::fast_forward:
      head_ = plan.incoming;
      return {head_, false, false};
    case UpdateKind::merge:
      break;
  }
  auto m = fresh_id();
  insert_edge(plan.yours, m, diff_states(plan.your_state, merged));
  insert_edge(plan.incoming, m, diff_states(plan.their_state, merged));
  state_cache_[m] = merged;
  head_ = m;
  bool conflicted = plan.conflicted();
  return {m, conflicted, conflicted};
}

MergeReport VersionGraph::receive_update(const VersionId& start, const VersionId& end,
                                         const Diff& diff, const Resolver& resolver) {
  auto plan = stage_incoming(start, end, diff);
  analyze(plan);
  auto merged = resolve(plan, resolver);
  return complete(plan, merged);
}

std::pair<Diff, VersionId> VersionGraph::delta_between(const VersionId& from) const {
  require(from);
  if (from == head_) return {Diff{}, head_};

  std::map<VersionId, VersionId> came_from;
  std::deque<VersionId> frontier{from};
  came_from[from] = from;
  while (!frontier.empty() && came_from.count(head_) == 0) {
    auto v = frontier.front();
    frontier.pop_front();
    for (const auto& [c, _] : children_.at(v)) {
      if (came_from.emplace(c, v).second) frontier.push_back(c);
    }
  }
  if (came_from.count(head_) != 0) {
    std::vector<VersionId> path{head_};
    while (path.back() != from) path.push_back(came_from.at(path.back()));
    std::reverse(path.begin(), path.end());
    try {
      Diff composed;
      for (std::size_t i = 1; i < path.size(); ++i) {
        composed = compose_diffs(composed, children_.at(path[i - 1]).at(path[i]));
      }
      return {composed, head_};
    } catch (const Error&) {
      // fall through to full differencing
    }
  }
  return {diff_states(state_at(from), state_at(head_)), head_};
}

std::set<VersionId> VersionGraph::garbage_collect() {
  std::set<VersionId> pinned{kRootVersion, head_};
  for (const auto& [_, v] : refs_) pinned.insert(v);

  std::set<VersionId> removed;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& v : vertices()) {
      if (pinned.count(v) != 0) continue;
      const auto& ins = parents_.at(v);
      const auto& outs = children_.at(v);
      if (ins.size() != 1 || outs.size() > 1) continue;
      if (outs.empty()) {
        remove_vertex(v);
      } else {
        auto p = *ins.begin();
        auto c = outs.begin()->first;
        Diff composed;
        try {
          composed = compose_diffs(children_.at(p).at(v), outs.begin()->second);
        } catch (const Error&) {
          composed = diff_states(state_at(p), state_at(c));
        }
        remove_vertex(v);
        // A parallel p->c edge already carries an equivalent diff.
        if (edge(p, c) == nullptr) insert_edge(p, c, std::move(composed));
      }
      removed.insert(v);
      changed = true;
    }
  }
  return removed;
}

void VersionGraph::rollback(const VersionId& v) {
  require(v);
  if (!is_ancestor(v, head_)) {
    throw Error(ErrorCode::precondition, "version '" + v + "' is not an ancestor of HEAD");
  }
  std::set<VersionId> doomed;
  std::deque<VersionId> frontier{v};
  while (!frontier.empty()) {
    auto cur = frontier.front();
    frontier.pop_front();
    for (const auto& [c, _] : children_.at(cur)) {
      if (doomed.insert(c).second) frontier.push_back(c);
    }
  }
  for (const auto& d : doomed) {
    if (contains(d)) remove_vertex(d);
  }
  for (auto& [_, target] : refs_) {
    if (doomed.count(target) != 0) target = v;
  }
  head_ = v;
}

std::set<VersionId> VersionGraph::ancestors(const VersionId& v) const {
  require(v);
  std::set<VersionId> seen{v};
  std::deque<VersionId> frontier{v};
  while (!frontier.empty()) {
    auto cur = frontier.front();
    frontier.pop_front();
    for (const auto& p : parents_.at(cur)) {
      if (seen.insert(p).second) frontier.push_back(p);
    }
  }
  return seen;
}

bool VersionGraph::is_ancestor(const VersionId& ancestor, const VersionId& v) const {
  require(ancestor);
  return ancestors(v).count(ancestor) != 0;
}

VersionId VersionGraph::lowest_common_ancestor(const VersionId& a, const VersionId& b) const {
  auto from_a = ancestors(a);
  auto from_b = ancestors(b);
  std::set<VersionId> common;
  std::set_intersection(from_a.begin(), from_a.end(), from_b.begin(), from_b.end(),
                        std::inserter(common, common.end()));
  std::set<VersionId> dominated;
  for (const auto& c : common) {
    for (const auto& anc : ancestors(c)) {
      if (anc != c) dominated.insert(anc);
    }
  }
  for (const auto& c : common) {
    if (dominated.count(c) == 0) return c;  // std::set order: smallest id wins ties
  }
  return kRootVersion;
}

nlohmann::json VersionGraph::to_json() const {
  json edges_json = json::array();
  for (const auto& e : edges()) {
    edges_json.push_back({{"src", e.src}, {"dst", e.dst}, {"diff", diff_to_json(e.diff)}});
  }
  json refs_json = json::object();
  for (const auto& [name, v] : refs_) refs_json[name] = v;
  return {{"vertices", vertices()}, {"edges", edges_json}, {"head", head_}, {"refs", refs_json}};
}

VersionGraph VersionGraph::from_json(const nlohmann::json& j, const SchemaRegistry* registry) {
  VersionGraph g(registry);
  for (const auto& v : j.at("vertices")) {
    auto id = v.get<std::string>();
    g.parents_[id];
    g.children_[id];
  }
  for (const auto& e : j.at("edges")) {
    auto src = e.at("src").get<std::string>();
    auto dst = e.at("dst").get<std::string>();
    if (!g.contains(src) || !g.contains(dst)) {
      throw Error(ErrorCode::protocol, "edge " + src + "->" + dst + " references an unknown vertex");
    }
    g.insert_edge(src, dst, diff_from_json(e.at("diff")));
  }
  g.head_ = j.at("head").get<std::string>();
  g.require(g.head_);
  for (const auto& [name, v] : j.at("refs").items()) g.update_ref(name, v.get<std::string>());
  return g;
}

}  // namespace got
