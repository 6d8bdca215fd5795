#include "arfal/stl.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>

namespace arfal::stl {

namespace {

void check_interval(double lo, double hi) {
  if (!(lo >= 0.0) || !(hi >= lo)) {
    throw StructuralError("temporal interval must satisfy 0 <= a <= b, got [" + std::to_string(lo) + "," +
                          std::to_string(hi) + "]");
  }
}

}  // namespace

FormulaPtr Formula::atomic(std::vector<Term> terms, double offset, Relation rel, double bound) {
  auto f = std::shared_ptr<Formula>(new Formula());
  f->kind_ = Kind::Atomic;
  f->terms_ = std::move(terms);
  f->offset_ = offset;
  f->relation_ = rel;
  f->bound_ = bound;
  return f;
}

FormulaPtr Formula::negation(FormulaPtr c) {
  auto f = std::shared_ptr<Formula>(new Formula());
  f->kind_ = Kind::Not;
  f->left_ = std::move(c);
  return f;
}

FormulaPtr Formula::conjunction(FormulaPtr l, FormulaPtr r) {
  auto f = std::shared_ptr<Formula>(new Formula());
  f->kind_ = Kind::And;
  f->left_ = std::move(l);
  f->right_ = std::move(r);
  return f;
}

FormulaPtr Formula::disjunction(FormulaPtr l, FormulaPtr r) {
  auto f = std::shared_ptr<Formula>(new Formula());
  f->kind_ = Kind::Or;
  f->left_ = std::move(l);
  f->right_ = std::move(r);
  return f;
}

FormulaPtr Formula::implication(FormulaPtr l, FormulaPtr r) {
  auto f = std::shared_ptr<Formula>(new Formula());
  f->kind_ = Kind::Implies;
  f->left_ = std::move(l);
  f->right_ = std::move(r);
  return f;
}

FormulaPtr Formula::globally(double lo, double hi, FormulaPtr c) {
  check_interval(lo, hi);
  auto f = std::shared_ptr<Formula>(new Formula());
  f->kind_ = Kind::Globally;
  f->lo_ = lo;
  f->hi_ = hi;
  f->left_ = std::move(c);
  return f;
}

FormulaPtr Formula::eventually(double lo, double hi, FormulaPtr c) {
  check_interval(lo, hi);
  auto f = std::shared_ptr<Formula>(new Formula());
  f->kind_ = Kind::Eventually;
  f->lo_ = lo;
  f->hi_ = hi;
  f->left_ = std::move(c);
  return f;
}

FormulaPtr Formula::until(double lo, double hi, FormulaPtr l, FormulaPtr r) {
  check_interval(lo, hi);
  auto f = std::shared_ptr<Formula>(new Formula());
  f->kind_ = Kind::Until;
  f->lo_ = lo;
  f->hi_ = hi;
  f->left_ = std::move(l);
  f->right_ = std::move(r);
  return f;
}

double Formula::horizon() const {
  switch (kind_) {
    case Kind::Atomic: return 0.0;
    case Kind::Not: return left_->horizon();
    case Kind::And:
    case Kind::Or:
    case Kind::Implies: return std::max(left_->horizon(), right_->horizon());
    case Kind::Globally:
    case Kind::Eventually: return hi_ + left_->horizon();
    case Kind::Until: return hi_ + std::max(left_->horizon(), right_->horizon());
  }
  return 0.0;
}

std::string Formula::to_string() const {
  std::ostringstream os;
  auto rel = [](Relation r) {
    switch (r) {
      case Relation::Lt: return "<";
      case Relation::Le: return "<=";
      case Relation::Gt: return ">";
      case Relation::Ge: return ">=";
    }
    return "?";
  };
  switch (kind_) {
    case Kind::Atomic: {
      bool first = true;
      for (const auto& t : terms_) {
        if (!first) os << " + ";
        if (t.coeff == 1.0) {
          os << t.channel;
        } else {
          os << t.coeff << "*" << t.channel;
        }
        first = false;
      }
      if (offset_ != 0.0 || terms_.empty()) {
        if (!first) os << " + ";
        os << offset_;
      }
      os << " " << rel(relation_) << " " << bound_;
      return os.str();
    }
    case Kind::Not: return "!(" + left_->to_string() + ")";
    case Kind::And: return "(" + left_->to_string() + ") & (" + right_->to_string() + ")";
    case Kind::Or: return "(" + left_->to_string() + ") | (" + right_->to_string() + ")";
    case Kind::Implies: return "(" + left_->to_string() + ") -> (" + right_->to_string() + ")";
    case Kind::Globally:
      os << "G[" << lo_ << "," << hi_ << "] (" << left_->to_string() << ")";
      return os.str();
    case Kind::Eventually:
      os << "F[" << lo_ << "," << hi_ << "] (" << left_->to_string() << ")";
      return os.str();
    case Kind::Until:
      os << "(" << left_->to_string() << ") U[" << lo_ << "," << hi_ << "] (" << right_->to_string() << ")";
      return os.str();
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Parser

namespace {

struct Token {
  enum class Type { Ident, Number, LParen, RParen, LBracket, RBracket, Comma, Star, Plus, Minus, Not, And, Or, Arrow, Rel, End };
  Type type;
  std::string text;
  double number = 0.0;
  Relation rel = Relation::Lt;
  std::size_t pos = 0;
};

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) { advance(); }

  const Token& peek() const { return current_; }

  Token take() {
    Token t = current_;
    advance();
    return t;
  }

 private:
  void advance() {
    while (i_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[i_]))) ++i_;
    current_.pos = i_;
    if (i_ >= text_.size()) {
      current_.type = Token::Type::End;
      current_.text = "<end>";
      return;
    }
    const char c = text_[i_];
    auto single = [&](Token::Type t, const char* s) {
      current_.type = t;
      current_.text = s;
      ++i_;
    };
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i_;
      while (j < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[j])) || text_[j] == '_')) ++j;
      current_.type = Token::Type::Ident;
      current_.text = std::string(text_.substr(i_, j - i_));
      i_ = j;
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && i_ + 1 < text_.size())) {
      std::size_t consumed = 0;
      const std::string rest(text_.substr(i_));
      try {
        current_.number = std::stod(rest, &consumed);
      } catch (const std::exception&) {
        throw ParseError("malformed number", i_);
      }
      current_.type = Token::Type::Number;
      current_.text = rest.substr(0, consumed);
      i_ += consumed;
      return;
    }
    switch (c) {
      case '(': single(Token::Type::LParen, "("); return;
      case ')': single(Token::Type::RParen, ")"); return;
      case '[': single(Token::Type::LBracket, "["); return;
      case ']': single(Token::Type::RBracket, "]"); return;
      case ',': single(Token::Type::Comma, ","); return;
      case '*': single(Token::Type::Star, "*"); return;
      case '+': single(Token::Type::Plus, "+"); return;
      case '!': single(Token::Type::Not, "!"); return;
      case '&': single(Token::Type::And, "&"); return;
      case '|': single(Token::Type::Or, "|"); return;
      case '-':
        if (i_ + 1 < text_.size() && text_[i_ + 1] == '>') {
          current_.type = Token::Type::Arrow;
          current_.text = "->";
          i_ += 2;
          return;
        }
        single(Token::Type::Minus, "-");
        return;
      case '<':
        if (i_ + 1 < text_.size() && text_[i_ + 1] == '=') {
          current_.type = Token::Type::Rel;
          current_.rel = Relation::Le;
          current_.text = "<=";
          i_ += 2;
        } else {
          current_.type = Token::Type::Rel;
          current_.rel = Relation::Lt;
          current_.text = "<";
          ++i_;
        }
        return;
      case '>':
        if (i_ + 1 < text_.size() && text_[i_ + 1] == '=') {
          current_.type = Token::Type::Rel;
          current_.rel = Relation::Ge;
          current_.text = ">=";
          i_ += 2;
        } else {
          current_.type = Token::Type::Rel;
          current_.rel = Relation::Gt;
          current_.text = ">";
          ++i_;
        }
        return;
      default: throw ParseError(std::string("unexpected character '") + c + "'", i_);
    }
  }

  std::string_view text_;
  std::size_t i_ = 0;
  Token current_;
};

class Parser {
 public:
  Parser(std::string_view text, const std::vector<std::string>& channels) : lex_(text), channels_(channels) {}

  FormulaPtr parse() {
    FormulaPtr f = formula();
    const Token& t = lex_.peek();
    if (t.type != Token::Type::End) throw ParseError("trailing input '" + t.text + "'", t.pos);
    return f;
  }

 private:
  FormulaPtr formula() {
    FormulaPtr l = disjunction();
    if (lex_.peek().type == Token::Type::Arrow) {
      lex_.take();
      return Formula::implication(std::move(l), formula());
    }
    return l;
  }

  FormulaPtr disjunction() {
    FormulaPtr l = conjunction();
    while (lex_.peek().type == Token::Type::Or) {
      lex_.take();
      l = Formula::disjunction(std::move(l), conjunction());
    }
    return l;
  }

  FormulaPtr conjunction() {
    FormulaPtr l = until_chain();
    while (lex_.peek().type == Token::Type::And) {
      lex_.take();
      l = Formula::conjunction(std::move(l), until_chain());
    }
    return l;
  }

  FormulaPtr until_chain() {
    FormulaPtr l = unary();
    if (lex_.peek().type == Token::Type::Ident && lex_.peek().text == "U") {
      const std::size_t pos = lex_.peek().pos;
      lex_.take();
      auto [lo, hi] = interval(pos);
      return Formula::until(lo, hi, std::move(l), until_chain());
    }
    return l;
  }

  FormulaPtr unary() {
    const Token& t = lex_.peek();
    if (t.type == Token::Type::Not) {
      lex_.take();
      return Formula::negation(unary());
    }
    if (t.type == Token::Type::Ident && (t.text == "G" || t.text == "F")) {
      const bool glob = t.text == "G";
      const std::size_t pos = t.pos;
      lex_.take();
      auto [lo, hi] = interval(pos);
      FormulaPtr c = unary();
      return glob ? Formula::globally(lo, hi, std::move(c)) : Formula::eventually(lo, hi, std::move(c));
    }
    if (t.type == Token::Type::LParen) {
      lex_.take();
      FormulaPtr f = formula();
      expect(Token::Type::RParen, ")");
      return f;
    }
    return atom();
  }

  std::pair<double, double> interval(std::size_t at) {
    expect(Token::Type::LBracket, "[");
    const double lo = signed_number();
    expect(Token::Type::Comma, ",");
    const double hi = signed_number();
    expect(Token::Type::RBracket, "]");
    if (lo < 0.0 || hi < lo) throw ParseError("malformed interval: need 0 <= a <= b", at);
    return {lo, hi};
  }

  double signed_number() {
    double sign = 1.0;
    while (lex_.peek().type == Token::Type::Minus || lex_.peek().type == Token::Type::Plus) {
      if (lex_.take().type == Token::Type::Minus) sign = -sign;
    }
    const Token& t = lex_.peek();
    if (t.type != Token::Type::Number) throw ParseError("expected number, got '" + t.text + "'", t.pos);
    return sign * lex_.take().number;
  }

  FormulaPtr atom() {
    std::vector<Formula::Term> terms;
    double offset = 0.0;
    parse_expr_term(terms, offset, 1.0);
    while (lex_.peek().type == Token::Type::Plus || lex_.peek().type == Token::Type::Minus) {
      const double sign = lex_.take().type == Token::Type::Minus ? -1.0 : 1.0;
      parse_expr_term(terms, offset, sign);
    }
    const Token& rt = lex_.peek();
    if (rt.type != Token::Type::Rel) throw ParseError("expected relation, got '" + rt.text + "'", rt.pos);
    const Relation rel = lex_.take().rel;
    const double bound = signed_number();
    return Formula::atomic(std::move(terms), offset, rel, bound);
  }

  void parse_expr_term(std::vector<Formula::Term>& terms, double& offset, double sign) {
    const Token& t = lex_.peek();
    if (t.type == Token::Type::Number) {
      const double v = lex_.take().number;
      if (lex_.peek().type == Token::Type::Star) {
        lex_.take();
        terms.push_back({sign * v, channel()});
      } else {
        offset += sign * v;
      }
      return;
    }
    if (t.type == Token::Type::Ident) {
      terms.push_back({sign, channel()});
      return;
    }
    if (t.type == Token::Type::Minus || t.type == Token::Type::Plus) {
      const double s2 = lex_.take().type == Token::Type::Minus ? -sign : sign;
      parse_expr_term(terms, offset, s2);
      return;
    }
    throw ParseError("expected expression term, got '" + t.text + "'", t.pos);
  }

  std::string channel() {
    const Token& t = lex_.peek();
    if (t.type != Token::Type::Ident) throw ParseError("expected channel name, got '" + t.text + "'", t.pos);
    if (std::find(channels_.begin(), channels_.end(), t.text) == channels_.end()) {
      throw ParseError("unknown channel '" + t.text + "'", t.pos);
    }
    return lex_.take().text;
  }

  void expect(Token::Type type, const char* what) {
    const Token& t = lex_.peek();
    if (t.type != type) throw ParseError(std::string("expected '") + what + "', got '" + t.text + "'", t.pos);
    lex_.take();
  }

  Lexer lex_;
  const std::vector<std::string>& channels_;
};

}  // namespace

FormulaPtr parse_stl(std::string_view text, const std::vector<std::string>& output_channels) {
  Parser p(text, output_channels);
  return p.parse();
}

// ---------------------------------------------------------------------------
// Robustness

namespace {

// Robustness signal with the number of leading samples it is defined on.
struct RobSignal {
  Eigen::VectorXd values;
  Eigen::Index valid;
};

Eigen::Index align_offset(double seconds, double step, const char* what) {
  const double r = seconds / step;
  if (!nearly_integer(r)) {
    throw StructuralError(std::string(what) + " " + std::to_string(seconds) +
                          "s is not aligned to the sample step " + std::to_string(step));
  }
  return static_cast<Eigen::Index>(std::llround(r));
}

// Sliding min (or max) of x over windows [k+lo, k+hi], monotonic deque.
Eigen::VectorXd sliding_extremum(const Eigen::VectorXd& x, Eigen::Index valid_in, Eigen::Index lo, Eigen::Index hi,
                                 bool take_min, Eigen::Index valid_out) {
  Eigen::VectorXd out(x.size());
  out.setZero();
  std::deque<Eigen::Index> dq;
  auto better = [&](double a, double b) { return take_min ? a <= b : a >= b; };
  Eigen::Index j = lo;  // next index to push for window of k=0 is [lo, hi]
  for (Eigen::Index k = 0; k < valid_out; ++k) {
    const Eigen::Index win_lo = k + lo;
    const Eigen::Index win_hi = k + hi;
    while (j <= win_hi && j < valid_in) {
      while (!dq.empty() && better(x(j), x(dq.back()))) dq.pop_back();
      dq.push_back(j);
      ++j;
    }
    while (!dq.empty() && dq.front() < win_lo) dq.pop_front();
    out(k) = x(dq.front());
  }
  return out;
}

RobSignal eval(const Formula& f, const signals::SignalSet& trace) {
  const Eigen::Index n = trace.domain().sample_count();
  const double step = trace.domain().step();
  switch (f.kind()) {
    case Formula::Kind::Atomic: {
      Eigen::VectorXd expr = Eigen::VectorXd::Constant(n, f.offset());
      for (const auto& term : f.terms()) expr += term.coeff * trace.by_name(term.channel).values;
      Eigen::VectorXd rob(n);
      switch (f.relation()) {
        case Relation::Lt:
        case Relation::Le: rob = Eigen::VectorXd::Constant(n, f.bound()) - expr; break;
        case Relation::Gt:
        case Relation::Ge: rob = expr - Eigen::VectorXd::Constant(n, f.bound()); break;
      }
      return {std::move(rob), n};
    }
    case Formula::Kind::Not: {
      RobSignal c = eval(*f.left(), trace);
      c.values = -c.values;
      return c;
    }
    case Formula::Kind::And:
    case Formula::Kind::Or:
    case Formula::Kind::Implies: {
      RobSignal l = eval(*f.left(), trace);
      RobSignal r = eval(*f.right(), trace);
      const Eigen::Index valid = std::min(l.valid, r.valid);
      Eigen::VectorXd out(n);
      out.setZero();
      for (Eigen::Index k = 0; k < valid; ++k) {
        switch (f.kind()) {
          case Formula::Kind::And: out(k) = std::min(l.values(k), r.values(k)); break;
          case Formula::Kind::Or: out(k) = std::max(l.values(k), r.values(k)); break;
          default: out(k) = std::max(-l.values(k), r.values(k)); break;
        }
      }
      return {std::move(out), valid};
    }
    case Formula::Kind::Globally:
    case Formula::Kind::Eventually: {
      RobSignal c = eval(*f.left(), trace);
      const Eigen::Index lo = align_offset(f.interval_lo(), step, "interval bound");
      const Eigen::Index hi = align_offset(f.interval_hi(), step, "interval bound");
      const Eigen::Index valid = c.valid - hi;
      if (valid <= 0) return {Eigen::VectorXd::Zero(n), 0};
      Eigen::VectorXd out =
          sliding_extremum(c.values, c.valid, lo, hi, f.kind() == Formula::Kind::Globally, valid);
      return {std::move(out), valid};
    }
    case Formula::Kind::Until: {
      RobSignal l = eval(*f.left(), trace);
      RobSignal r = eval(*f.right(), trace);
      const Eigen::Index lo = align_offset(f.interval_lo(), step, "interval bound");
      const Eigen::Index hi = align_offset(f.interval_hi(), step, "interval bound");
      const Eigen::Index valid = std::min(l.valid, r.valid) - hi;
      if (valid <= 0) return {Eigen::VectorXd::Zero(n), 0};
      Eigen::VectorXd out(n);
      out.setZero();
      for (Eigen::Index k = 0; k < valid; ++k) {
        double best = -std::numeric_limits<double>::infinity();
        double run_min = std::numeric_limits<double>::infinity();
        for (Eigen::Index d = 0; d <= hi; ++d) {
          run_min = std::min(run_min, l.values(k + d));
          if (d >= lo) best = std::max(best, std::min(r.values(k + d), run_min));
        }
        out(k) = best;
      }
      return {std::move(out), valid};
    }
  }
  throw StructuralError("robustness: unknown formula node");
}

}  // namespace

double robustness(const Formula& formula, const signals::SignalSet& trace, double t0) {
  if (trace.empty()) throw StructuralError("robustness: empty trace");
  const Eigen::Index k0 = align_offset(t0, trace.domain().step(), "evaluation time");
  if (k0 < 0) throw StructuralError("robustness: negative evaluation time");
  RobSignal top = eval(formula, trace);
  if (k0 >= top.valid) {
    throw HorizonError("robustness: formula horizon " + std::to_string(formula.horizon()) +
                       "s at t0=" + std::to_string(t0) + "s exceeds the trace length " +
                       std::to_string(trace.domain().end_time()) + "s");
  }
  const double value = top.values(k0);
  if (!std::isfinite(value)) throw StructuralError("robustness: non-finite value");
  return value;
}

double test_objective(const Formula& formula, const signals::SignalSet& input, const signals::SignalSet& output) {
  (void)input;  // the objective is a function of the output trace
  return robustness(formula, output, 0.0);
}

}  // namespace arfal::stl
