#pragma once

#include <chrono>
#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "got/dataframe.hpp"

namespace wordcount {

inline constexpr const char* kLine = "Line";
inline constexpr const char* kWordCount = "WordCount";
inline constexpr const char* kStop = "Stop";

/// Line(line_num, line), WordCount(word, count), Stop(index, accepted).
got::SchemaRegistry schemas();

got::ObjectState make_line(std::int64_t line_num, std::string line);
got::ObjectState make_word_count(std::string word, std::int64_t count);
got::ObjectState make_stop(std::int64_t index, bool accepted = false);

/// Whitespace split; the trailing newline of a file line is dropped first.
std::vector<std::string> tokenize(std::string_view line);

std::vector<std::string> read_lines(const std::string& path);

using Counts = std::vector<std::pair<std::string, std::int64_t>>;

/// Snapshot WordCounts ordered by each word's first appearance in the Lines.
Counts ordered_counts(got::Dataframe& df);
std::string format_counts(const Counts& counts);

struct AppOptions {
  /// Pause between polls that found nothing new.
  std::chrono::milliseconds poll_interval{2};
};

/// Publishes the lines, waits until every worker accepted its Stop, then
/// writes "word count" lines to `out`.
void grouper_app(got::Dataframe& df, const std::vector<std::string>& lines, int num_workers, std::ostream& out,
                 const AppOptions& options = {});
void worker_app(got::Dataframe& df, int index, int num_workers, const AppOptions& options = {});

/// Adds the concurrent counts together.
got::State buggy_merge(const got::MergeInput& in);
/// Adds both increments to the original count.
got::State fixed_merge(const got::MergeInput& in);

/// "default", "buggy" or "fixed".
got::Resolver resolver_named(std::string_view name);

}  // namespace wordcount
