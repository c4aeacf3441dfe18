#pragma once

#include <map>
#include <optional>
#include <set>
#include <vector>

#include "got/state.hpp"

namespace got {

enum class DeltaKind { added, modified, deleted };

std::string_view to_string(DeltaKind kind);

/// One object's change. `added` carries the full dimension map, `modified` a
/// non-empty partial map, `deleted` nothing.
struct ObjectDelta {
  DeltaKind kind = DeltaKind::modified;
  DimMap dims;

  static ObjectDelta added(DimMap dims) { return {DeltaKind::added, std::move(dims)}; }
  static ObjectDelta modified(DimMap dims) { return {DeltaKind::modified, std::move(dims)}; }
  static ObjectDelta deleted() { return {DeltaKind::deleted, {}}; }

  friend bool operator==(const ObjectDelta& a, const ObjectDelta& b) {
    return a.kind == b.kind && a.dims == b.dims;
  }
};

/// Keyed delta set: at most one delta per object.
class Diff {
 public:
  using Map = std::map<ObjectKey, ObjectDelta>;

  Diff() = default;
  Diff(std::initializer_list<Map::value_type> entries) : entries_(entries) {}

  void set(ObjectKey key, ObjectDelta delta) { entries_[std::move(key)] = std::move(delta); }
  void erase(const ObjectKey& key) { entries_.erase(key); }
  const ObjectDelta* find(const ObjectKey& key) const;

  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  const Map& entries() const { return entries_; }
  Map::const_iterator begin() const { return entries_.begin(); }
  Map::const_iterator end() const { return entries_.end(); }

  friend bool operator==(const Diff& a, const Diff& b) { return a.entries_ == b.entries_; }

 private:
  Map entries_;
};

/// Strict application: errors on Modified/Deleted of a missing object and on
/// New over an existing one.
State apply_diff(const State& state, const Diff& diff);

/// d1 followed by d2 as a single diff.
Diff compose_diffs(const Diff& first, const Diff& second);

/// Minimal diff turning `from` into `to`.
Diff diff_states(const State& from, const State& to);

struct ConflictReport {
  /// Objects with contradictory changes: same dimension written to different
  /// values, delete against modify, or unequal concurrent creations.
  std::set<ObjectKey> conflicting;
  /// Objects both sides wrote in overlapping dimensions (or both created),
  /// including equal writes. Superset of `conflicting`; these are the objects
  /// handed to a merge function.
  std::set<ObjectKey> concurrent;
  /// Incoming changes that can be applied on top of `yours` as-is: objects only
  /// theirs touched, plus dimension-disjoint modifications.
  Diff nonconflicting_theirs;
};

ConflictReport detect_conflicts(const State& base, const Diff& yours, const Diff& theirs);

}  // namespace got
