#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "got/diff.hpp"
#include "got/schema.hpp"

namespace got {

using VersionId = std::string;

inline const VersionId kRootVersion = "ROOT";
inline const std::string kSnapshotRef = "SNAPSHOT";

/// 128-bit random id rendered as 32 hex digits.
VersionId random_version_id();

struct Edge {
  VersionId src;
  VersionId dst;
  Diff diff;
};

struct ConflictTriple {
  ObjectKey key;
  std::optional<ObjectState> orig;
  std::optional<ObjectState> yours;
  std::optional<ObjectState> theirs;
};

/// Everything a three-way merge function sees. Absent objects in a triple
/// mean the object does not exist (or was deleted) at that version.
struct MergeInput {
  std::vector<ConflictTriple> conflicts;
  const State& orig;
  const State& yours;
  const State& theirs;
  const Diff& nonconflicting_theirs;

  /// `yours` with every non-conflicting incoming change accepted.
  State update_not_conflicting() const { return apply_diff(yours, nonconflicting_theirs); }
};

using Resolver = std::function<State(const MergeInput&)>;

/// Accepts non-conflicting incoming changes and prefers `theirs` on
/// concurrently written dimensions.
State default_resolver(const MergeInput& in);

struct MergeReport {
  VersionId merged_version;
  bool conflicted = false;
  bool resolver_invoked = false;
};

enum class UpdateKind { already_known, fast_forward, merge };

/// An incoming update split into the separately observable stages of
/// reception: stage -> analyze -> resolve -> complete.
struct MergePlan {
  UpdateKind kind = UpdateKind::already_known;
  VersionId incoming;
  VersionId yours;
  VersionId orig;
  State orig_state;
  State your_state;
  State their_state;
  ConflictReport report;
  bool analyzed = false;

  bool conflicted() const { return kind == UpdateKind::merge && !report.concurrent.empty(); }
};

/// Per-node version history: a DAG rooted at ROOT whose edges carry the diff
/// between their endpoint states. Not internally synchronized.
class VersionGraph {
 public:
  using IdSource = std::function<VersionId()>;

  explicit VersionGraph(const SchemaRegistry* registry = nullptr, IdSource ids = random_version_id);

  const VersionId& head() const { return head_; }
  bool contains(const VersionId& v) const { return parents_.count(v) != 0; }
  std::vector<VersionId> vertices() const;
  std::size_t vertex_count() const { return parents_.size(); }
  std::vector<Edge> edges() const;
  const Diff* edge(const VersionId& src, const VersionId& dst) const;
  std::vector<VersionId> parents(const VersionId& v) const;
  std::vector<VersionId> children(const VersionId& v) const;

  const std::map<std::string, VersionId>& refs() const { return refs_; }
  std::optional<VersionId> ref(const std::string& name) const;
  void update_ref(const std::string& name, const VersionId& v);
  void remove_ref(const std::string& name) { refs_.erase(name); }

  State state_at(const VersionId& v) const;

  /// Adds a fresh version reached from `start` by `diff`. Moves HEAD only when
  /// `start` is the current HEAD.
  VersionId extend(const VersionId& start, const Diff& diff);

  /// Adds `id` as a child of `start` without touching HEAD.
  void add_version(const VersionId& start, const VersionId& id, const Diff& diff);

  MergePlan stage_incoming(const VersionId& start, const VersionId& end, const Diff& diff);
  void analyze(MergePlan& plan) const;
  State resolve(const MergePlan& plan, const Resolver& resolver) const;
  MergeReport complete(const MergePlan& plan, const State& merged);

  /// All four stages at once.
  MergeReport receive_update(const VersionId& start, const VersionId& end, const Diff& diff,
                             const Resolver& resolver);

  /// Changes needed to bring a peer at `from` up to HEAD.
  std::pair<Diff, VersionId> delta_between(const VersionId& from) const;

  /// Squashes linear chains between retained versions (ROOT, HEAD, refs,
  /// forks and merges) and drops unreferenced tips.
  std::set<VersionId> garbage_collect();

  /// Moves HEAD back to an ancestor, dropping everything after it.
  void rollback(const VersionId& v);

  /// True if `ancestor` == `v` or reaches it along edges.
  bool is_ancestor(const VersionId& ancestor, const VersionId& v) const;
  std::set<VersionId> ancestors(const VersionId& v) const;
  VersionId lowest_common_ancestor(const VersionId& a, const VersionId& b) const;

  nlohmann::json to_json() const;
  static VersionGraph from_json(const nlohmann::json& j, const SchemaRegistry* registry = nullptr);

 private:
  void require(const VersionId& v) const;
  void insert_edge(const VersionId& src, const VersionId& dst, Diff diff);
  void remove_vertex(const VersionId& v);
  VersionId fresh_id();

  const SchemaRegistry* registry_;
  IdSource ids_;
  VersionId head_ = kRootVersion;
  std::map<VersionId, std::set<VersionId>> parents_;
  std::map<VersionId, std::map<VersionId, Diff>> children_;
  std::map<std::string, VersionId> refs_;
  mutable std::map<VersionId, State> state_cache_;
};

}  // namespace got
