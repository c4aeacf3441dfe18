#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "got/state.hpp"

namespace gotcha {

enum class CompareOp { eq, ne, lt, le, gt, ge };

std::string_view to_string(CompareOp op);

struct Clause {
  std::string dim;
  CompareOp op;
  got::Value literal;
};

/// exists(<Type> [, <dim> <op> <literal> {and <dim> <op> <literal>}])
struct Predicate {
  std::string type_name;
  std::vector<Clause> clauses;
};

/// Throws got::Error(invalid_argument) with the offending column.
Predicate parse_predicate(std::string_view text);

/// Numbers compare across int/float; any other kind mismatch, or a missing
/// dimension, makes the clause false.
bool clause_holds(const Clause& clause, const got::ObjectState& obj);
bool evaluate(const Predicate& pred, const got::State& state);

struct Breakpoint {
  std::string id;
  std::string text;
  Predicate predicate;
};

}  // namespace gotcha
