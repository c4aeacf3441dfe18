#include "got/state.hpp"

#include "got/error.hpp"

namespace got {

std::string to_string(const ObjectKey& key) { return key.type_name + "(" + display(key.pkey) + ")"; }

const Value& ObjectState::at(const std::string& dim) const {
  auto it = dims.find(dim);
  if (it == dims.end()) {
    throw Error(ErrorCode::not_found, "object " + to_string(key()) + " has no dimension '" + dim + "'");
  }
  return it->second;
}

const ObjectState* State::find(const ObjectKey& key) const {
  auto t = types_.find(key.type_name);
  if (t == types_.end()) return nullptr;
  auto o = t->second.find(key.pkey);
  return o == t->second.end() ? nullptr : &o->second;
}

void State::put(ObjectState obj) {
  auto& bucket = types_[obj.type_name];
  auto pkey = obj.pkey;
  bucket.insert_or_assign(std::move(pkey), std::move(obj));
}

bool State::erase(const ObjectKey& key) {
  auto t = types_.find(key.type_name);
  if (t == types_.end()) return false;
  bool removed = t->second.erase(key.pkey) != 0;
  if (t->second.empty()) types_.erase(t);
  return removed;
}

const State::TypeMap* State::objects(const std::string& type_name) const {
  auto t = types_.find(type_name);
  return t == types_.end() ? nullptr : &t->second;
}

std::vector<ObjectState> State::all() const {
  std::vector<ObjectState> out;
  for (const auto& [_, objects] : types_) {
    for (const auto& [__, obj] : objects) out.push_back(obj);
  }
  return out;
}

std::size_t State::size() const {
  std::size_t n = 0;
  for (const auto& [_, objects] : types_) n += objects.size();
  return n;
}

}  // namespace got
