#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "got/schema.hpp"
#include "got/sync.hpp"
#include "got/transport.hpp"
#include "got/version_graph.hpp"

namespace got {

class Dataframe;
class StepGate;

/// A tracked view of one object in the snapshot. Writes are staged; handles
/// taken before a checkout throw on use.
class ObjectHandle {
 public:
  const ObjectKey& key() const { return key_; }
  const Value& pkey() const { return key_.pkey; }

  Value get(const std::string& dim) const;
  std::int64_t get_int(const std::string& dim) const;
  double get_float(const std::string& dim) const;
  std::string get_string(const std::string& dim) const;
  bool get_bool(const std::string& dim) const;

  void set(const std::string& dim, Value value);

  ObjectState state() const;

 private:
  friend class Dataframe;
  ObjectHandle(Dataframe* df, ObjectKey key, std::uint64_t generation)
      : df_(df), key_(std::move(key)), generation_(generation) {}

  Dataframe* df_;
  ObjectKey key_;
  std::uint64_t generation_;
};

struct DataframeOptions {
  std::string node_name = "node";
  std::optional<std::string> remote;
  Resolver resolver;
  std::shared_ptr<Network> network;
  std::shared_ptr<DebugChannel> debug;
  VersionGraph::IdSource ids = random_version_id;
};

/// A node's repository: the snapshot (staging area) the application reads and
/// writes, plus the version history peers synchronize with.
class Dataframe {
 public:
  Dataframe(SchemaRegistry registry, DataframeOptions options);
  Dataframe(const Dataframe&) = delete;
  Dataframe& operator=(const Dataframe&) = delete;

  const SchemaRegistry& registry() const { return registry_; }
  const std::string& node_name() const { return options_.node_name; }
  const std::optional<std::string>& remote() const { return options_.remote; }

  std::optional<ObjectHandle> read_one(std::string_view type, const Value& pkey);
  std::vector<ObjectHandle> read_all(std::string_view type);

  void add_one(ObjectState obj);
  void add_many(std::vector<ObjectState> objs);
  void delete_one(std::string_view type, const Value& pkey);
  void delete_all(std::string_view type);

  void commit();
  void checkout();
  void push();
  void fetch();
  void pull();

  /// Inbound side of push/fetch (and of debugger rollback commands).
  SyncMessage serve(const SyncMessage& msg, const std::string& origin_step = {});

  nlohmann::json history() const;
  VersionId head() const;
  VersionId snapshot_version() const;
  Diff staged() const;
  State snapshot_state() const;
  State head_state() const;
  VersionGraph graph() const;

 private:
  friend class ObjectHandle;
  friend class StepGate;

  Value handle_get(const ObjectHandle& h, const std::string& dim) const;
  void handle_set(const ObjectHandle& h, const std::string& dim, Value value);
  ObjectState handle_state(const ObjectHandle& h) const;
  void check_handle(const ObjectHandle& h) const;

  // Caller holds data_mutex_.
  void stage(const Diff& delta);
  void collect_garbage();

  MergeReport receive(StepGate& gate, const VersionId& start, const VersionId& end, const Diff& diff,
                      const nlohmann::json& payload);
  SyncMessage respond_to_push(const PushRequest& req, const std::string& origin);
  SyncMessage respond_to_fetch(const FetchRequest& req, const std::string& origin);
  SyncMessage apply_rollback(const RollbackRequest& req);
  std::string remote_ref() const;
  std::string next_step_id();

  SchemaRegistry registry_;
  DataframeOptions options_;

  // Serializes primitives that touch the version history (the writer queue).
  std::mutex step_mutex_;
  // Guards the fields below.
  mutable std::mutex data_mutex_;
  VersionGraph graph_;
  VersionId base_version_;
  State materialized_;
  Diff staged_;
  std::uint64_t generation_ = 0;

  std::atomic<std::uint64_t> step_counter_{0};
};

}  // namespace got
