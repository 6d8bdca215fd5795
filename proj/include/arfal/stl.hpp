#ifndef ARFAL_STL_HPP
#define ARFAL_STL_HPP

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "arfal/common.hpp"
#include "arfal/signals.hpp"

namespace arfal::stl {

enum class Relation { Lt, Le, Gt, Ge };

// Requirement AST. Atomic predicates are affine combinations of output
// channels compared against a constant; temporal operators carry closed
// intervals in seconds.
class Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

class Formula {
 public:
  enum class Kind { Atomic, Not, And, Or, Implies, Globally, Eventually, Until };

  struct Term {
    double coeff;
    std::string channel;
  };

  Kind kind() const { return kind_; }
  const std::vector<Term>& terms() const { return terms_; }
  double offset() const { return offset_; }
  Relation relation() const { return relation_; }
  double bound() const { return bound_; }
  double interval_lo() const { return lo_; }
  double interval_hi() const { return hi_; }
  const FormulaPtr& left() const { return left_; }
  const FormulaPtr& right() const { return right_; }

  // Farthest time offset the formula looks into the future.
  double horizon() const;

  std::string to_string() const;

  static FormulaPtr atomic(std::vector<Term> terms, double offset, Relation rel, double bound);
  static FormulaPtr negation(FormulaPtr f);
  static FormulaPtr conjunction(FormulaPtr l, FormulaPtr r);
  static FormulaPtr disjunction(FormulaPtr l, FormulaPtr r);
  static FormulaPtr implication(FormulaPtr l, FormulaPtr r);
  static FormulaPtr globally(double lo, double hi, FormulaPtr f);
  static FormulaPtr eventually(double lo, double hi, FormulaPtr f);
  static FormulaPtr until(double lo, double hi, FormulaPtr l, FormulaPtr r);

 private:
  Formula() = default;

  Kind kind_ = Kind::Atomic;
  std::vector<Term> terms_;
  double offset_ = 0.0;
  Relation relation_ = Relation::Lt;
  double bound_ = 0.0;
  double lo_ = 0.0, hi_ = 0.0;
  FormulaPtr left_, right_;
};

// Grammar:
//   formula := or ('->' formula)?
//   or      := and ('|' and)*
//   and     := until ('&' until)*
//   until   := unary ('U' '[' a ',' b ']' until)?
//   unary   := '!' unary | ('G'|'F') '[' a ',' b ']' unary | '(' formula ')' | atom
//   atom    := expr rel number,  expr := term (('+'|'-') term)*,
//   term    := number '*' ident | ident | number,  rel := '<' '<=' '>' '>='
// Channel names are resolved against the declared output set; failures carry
// the offending position.
FormulaPtr parse_stl(std::string_view text, const std::vector<std::string>& output_channels);

// Quantitative robustness over the trace's sample grid, evaluated at t0.
// Positive means satisfied with margin, negative violated; interval bounds
// and t0 must align with the grid within 1e-9 relative.
double robustness(const Formula& formula, const signals::SignalSet& trace, double t0 = 0.0);

// Test objective for a (input, output) pair: the robustness of the output
// trace at time 0. Negative reveals a violation; non-negative satisfies.
double test_objective(const Formula& formula, const signals::SignalSet& input, const signals::SignalSet& output);

}  // namespace arfal::stl

#endif  // ARFAL_STL_HPP
