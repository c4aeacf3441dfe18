#include "got/diff.hpp"

#include "got/error.hpp"

namespace got {

std::string_view to_string(DeltaKind kind) {
  switch (kind) {
    case DeltaKind::added: return "new";
    case DeltaKind::modified: return "mod";
    case DeltaKind::deleted: return "del";
  }
  return "?";
}

const ObjectDelta* Diff::find(const ObjectKey& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

State apply_diff(const State& state, const Diff& diff) {
  State out = state;
  for (const auto& [key, delta] : diff) {
    const auto* current = out.find(key);
    switch (delta.kind) {
      case DeltaKind::added: {
        if (current != nullptr) {
          throw Error(ErrorCode::invalid_diff, "new object " + to_string(key) + " already exists");
        }
        out.put(ObjectState{key.type_name, key.pkey, delta.dims});
        break;
      }
      case DeltaKind::modified: {
        if (current == nullptr) {
          throw Error(ErrorCode::invalid_diff, "modified object " + to_string(key) + " does not exist");
        }
        if (delta.dims.empty()) {
          throw Error(ErrorCode::invalid_diff, "empty modification of " + to_string(key));
        }
        ObjectState next = *current;
        for (const auto& [dim, value] : delta.dims) {
          auto it = next.dims.find(dim);
          if (it == next.dims.end()) {
            throw Error(ErrorCode::invalid_diff,
                        "modification of " + to_string(key) + " names unknown dimension '" + dim + "'");
          }
          it->second = value;
        }
        out.put(std::move(next));
        break;
      }
      case DeltaKind::deleted: {
        if (current == nullptr) {
          throw Error(ErrorCode::invalid_diff, "deleted object " + to_string(key) + " does not exist");
        }
        out.erase(key);
        break;
      }
    }
  }
  return out;
}

namespace {

[[noreturn]] void incompatible(const ObjectKey& key, DeltaKind a, DeltaKind b) {
  throw Error(ErrorCode::invalid_diff, "cannot compose " + std::string(to_string(a)) + " then " +
                                           std::string(to_string(b)) + " on " + to_string(key));
}

}  // namespace

Diff compose_diffs(const Diff& first, const Diff& second) {
  Diff out = first;
  for (const auto& [key, next] : second) {
    const auto* prev = first.find(key);
    if (prev == nullptr) {
      out.set(key, next);
      continue;
    }
    switch (prev->kind) {
      case DeltaKind::added:
        if (next.kind == DeltaKind::modified) {
          DimMap merged = prev->dims;
          for (const auto& [dim, value] : next.dims) merged[dim] = value;
          out.set(key, ObjectDelta::added(std::move(merged)));
        } else if (next.kind == DeltaKind::deleted) {
          out.erase(key);
        } else {
          incompatible(key, prev->kind, next.kind);
        }
        break;
      case DeltaKind::modified:
        if (next.kind == DeltaKind::modified) {
          DimMap merged = prev->dims;
          for (const auto& [dim, value] : next.dims) merged[dim] = value;
          out.set(key, ObjectDelta::modified(std::move(merged)));
        } else if (next.kind == DeltaKind::deleted) {
          out.set(key, ObjectDelta::deleted());
        } else {
          incompatible(key, prev->kind, next.kind);
        }
        break;
      case DeltaKind::deleted:
        // A delete in `first` means the object existed before it.
        if (next.kind == DeltaKind::added) {
          out.set(key, ObjectDelta::modified(next.dims));
        } else {
          incompatible(key, prev->kind, next.kind);
        }
        break;
    }
  }
  return out;
}

Diff diff_states(const State& from, const State& to) {
  Diff out;
  for (const auto& [type, objects] : from.types()) {
    for (const auto& [pkey, obj] : objects) {
      const auto* target = to.find(obj.key());
      if (target == nullptr) {
        out.set(obj.key(), ObjectDelta::deleted());
        continue;
      }
      DimMap changed;
      for (const auto& [dim, value] : target->dims) {
        auto it = obj.dims.find(dim);
        if (it == obj.dims.end() || it->second != value) changed.emplace(dim, value);
      }
      if (!changed.empty()) out.set(obj.key(), ObjectDelta::modified(std::move(changed)));
    }
  }
  for (const auto& [type, objects] : to.types()) {
    for (const auto& [pkey, obj] : objects) {
      if (!from.contains(obj.key())) out.set(obj.key(), ObjectDelta::added(obj.dims));
    }
  }
  return out;
}

ConflictReport detect_conflicts(const State& base, const Diff& yours, const Diff& theirs) {
  (void)base;
  ConflictReport report;
  for (const auto& [key, t] : theirs) {
    const ObjectDelta* y = yours.find(key);
    if (y == nullptr) {
      report.nonconflicting_theirs.set(key, t);
      continue;
    }
    const bool y_del = y->kind == DeltaKind::deleted;
    const bool t_del = t.kind == DeltaKind::deleted;
    if (y_del && t_del) continue;
    if (y_del != t_del) {
      report.conflicting.insert(key);
      report.concurrent.insert(key);
      continue;
    }
    if (y->kind == DeltaKind::added && t.kind == DeltaKind::added) {
      report.concurrent.insert(key);
      if (y->dims != t.dims) report.conflicting.insert(key);
      continue;
    }
    if (y->kind != t.kind) {
      // New against Modified cannot both be valid against one base.
      report.conflicting.insert(key);
      report.concurrent.insert(key);
      continue;
    }
    bool overlap = false;
    bool contradicts = false;
    for (const auto& [dim, value] : t.dims) {
      auto it = y->dims.find(dim);
      if (it == y->dims.end()) continue;
      overlap = true;
      if (it->second != value) contradicts = true;
    }
    if (!overlap) {
      report.nonconflicting_theirs.set(key, t);
      continue;
    }
    report.concurrent.insert(key);
    if (contradicts) report.conflicting.insert(key);
  }
  return report;
}

}  // namespace got
