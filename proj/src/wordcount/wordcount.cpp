#include "wordcount/wordcount.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "got/error.hpp"

namespace wordcount {

using got::Dimension;
using got::ValueKind;

got::SchemaRegistry schemas() {
  got::SchemaRegistry reg;
  reg.register_schema(kLine, "line_num", {{"line_num", ValueKind::integer}, {"line", ValueKind::string}});
  reg.register_schema(kWordCount, "word", {{"word", ValueKind::string}, {"count", ValueKind::integer}});
  reg.register_schema(kStop, "index", {{"index", ValueKind::integer}, {"accepted", ValueKind::boolean}});
  return reg;
}

got::ObjectState make_line(std::int64_t line_num, std::string line) {
  return {kLine, line_num, {{"line_num", line_num}, {"line", std::move(line)}}};
}

got::ObjectState make_word_count(std::string word, std::int64_t count) {
  got::Value key = word;
  return {kWordCount, key, {{"word", std::move(word)}, {"count", count}}};
}

got::ObjectState make_stop(std::int64_t index, bool accepted) {
  return {kStop, index, {{"index", index}, {"accepted", accepted}}};
}

std::vector<std::string> tokenize(std::string_view line) {
  std::istringstream in{std::string(line)};
  std::vector<std::string> words;
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw got::Error(got::ErrorCode::not_found, "cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

Counts ordered_counts(got::Dataframe& df) {
  std::map<std::string, std::int64_t> counts;
  for (auto& w : df.read_all(kWordCount)) counts[w.get_string("word")] = w.get_int("count");

  Counts out;
  for (auto& line : df.read_all(kLine)) {
    for (auto& word : tokenize(line.get_string("line"))) {
      auto it = counts.find(word);
      if (it == counts.end()) continue;
      out.emplace_back(it->first, it->second);
      counts.erase(it);
    }
  }
  for (auto& [word, count] : counts) out.emplace_back(word, count);
  return out;
}

std::string format_counts(const Counts& counts) {
  std::string out;
  for (const auto& [word, count] : counts) out += word + " " + std::to_string(count) + "\n";
  return out;
}

void grouper_app(got::Dataframe& df, const std::vector<std::string>& lines, int num_workers, std::ostream& out,
                 const AppOptions& options) {
  std::int64_t i = 0;
  for (const auto& line : lines) {
    df.add_one(make_line(i, line));
    df.commit();
    ++i;
  }
  std::vector<got::ObjectState> stops;
  for (int n = 0; n < num_workers; ++n) stops.push_back(make_stop(n));
  df.add_many(std::move(stops));
  df.commit();

  auto all_accepted = [&] {
    for (auto& s : df.read_all(kStop)) {
      if (!s.get_bool("accepted")) return false;
    }
    return true;
  };
  while (!all_accepted()) {
    df.checkout();
    if (!all_accepted() && options.poll_interval.count() > 0) std::this_thread::sleep_for(options.poll_interval);
  }
  // The last acceptance may have merged after our final poll.
  df.checkout();
  out << format_counts(ordered_counts(df)) << std::flush;
}

void worker_app(got::Dataframe& df, int index, int num_workers, const AppOptions& options) {
  if (num_workers <= 0 || index < 0 || index >= num_workers) {
    throw got::Error(got::ErrorCode::invalid_argument, "worker index " + std::to_string(index) + " out of range");
  }
  std::int64_t line_num = index;
  bool stop = false;
  bool line = false;
  while (!stop || line) {
    df.pull();
    auto l = df.read_one(kLine, line_num);
    line = l.has_value();
    if (line) {
      for (const auto& word : tokenize(l->get_string("line"))) {
        auto w = df.read_one(kWordCount, word);
        if (!w) {
          df.add_one(make_word_count(word, 0));
          w = df.read_one(kWordCount, word);
        }
        w->set("count", w->get_int("count") + 1);
      }
      line_num += num_workers;
    }
    stop = df.read_one(kStop, static_cast<std::int64_t>(index)).has_value();
    df.commit();
    df.push();
    if (!stop && !line && options.poll_interval.count() > 0) std::this_thread::sleep_for(options.poll_interval);
  }
  df.read_one(kStop, static_cast<std::int64_t>(index))->set("accepted", true);
  df.commit();
  df.push();
}

namespace {

got::State merge_counts(const got::MergeInput& in, bool subtract_orig) {
  auto merged = in.update_not_conflicting();
  for (const auto& c : in.conflicts) {
    if (c.key.type_name != kWordCount) {
      throw got::Error(got::ErrorCode::resolver, "unexpected conflict on " + got::to_string(c.key));
    }
    if (!c.yours || !c.theirs) {
      // One side deleted the word; keep whichever still exists.
      if (c.theirs) merged.put(*c.theirs);
      continue;
    }
    auto count = std::get<std::int64_t>(c.yours->at("count")) + std::get<std::int64_t>(c.theirs->at("count"));
    if (subtract_orig && c.orig) count -= std::get<std::int64_t>(c.orig->at("count"));
    auto obj = *c.yours;
    obj.dims["count"] = count;
    merged.put(std::move(obj));
  }
  return merged;
}

}  // namespace

got::State buggy_merge(const got::MergeInput& in) { return merge_counts(in, false); }

got::State fixed_merge(const got::MergeInput& in) { return merge_counts(in, true); }

got::Resolver resolver_named(std::string_view name) {
  if (name == "default") return got::default_resolver;
  if (name == "buggy") return buggy_merge;
  if (name == "fixed") return fixed_merge;
  throw got::Error(got::ErrorCode::invalid_argument, "unknown resolver '" + std::string(name) + "'");
}

}  // namespace wordcount
