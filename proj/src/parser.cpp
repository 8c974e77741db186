#include <cctype>
#include <string>

#include "canon.hpp"

namespace localscore::detail {

namespace {

// Recursive-descent parser for the ASCII expression grammar:
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := ('-'|'+') factor | base ('^' exponent)?
//   base   := number | 'x' | 'q' digits | 'p' digits | ident ticks? '(' 'x' ')'
//           | 'ln' '(' expr ')' | 'exp' '(' expr ')' | '(' expr ')' | ident
//   exponent := ['-'] digits | '(' ['-'] digits ['/' digits] ')'
// Jet symbols: q0, q1, ...; second-family jets p0, p1, ...; opaque
// derivatives a'(x), a''(x) (ticks also accepted after the call); bare
// identifiers are scalar parameters. Number literals may carry a decimal
// fraction and are read exactly.
class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  NodePtr run() {
    NodePtr e = parse_expr();
    skip_ws();
    if (pos_ != text_.size()) throw ParseError("unexpected trailing input", pos_);
    return e;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  bool eat(char c) {
    if (peek() == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c, const char* what) {
    if (!eat(c)) throw ParseError(std::string("expected ") + what, pos_);
  }

  NodePtr parse_expr() {
    std::vector<NodePtr> terms;
    terms.push_back(parse_term());
    while (true) {
      if (eat('+')) {
        terms.push_back(parse_term());
      } else if (eat('-')) {
        terms.push_back(make_mul({make_number(-1), parse_term()}));
      } else {
        break;
      }
    }
    return make_add(std::move(terms));
  }

  NodePtr parse_term() {
    std::vector<NodePtr> factors;
    factors.push_back(parse_factor());
    while (true) {
      if (eat('*')) {
        factors.push_back(parse_factor());
      } else if (eat('/')) {
        factors.push_back(make_pow(parse_factor(), Rational(-1)));
      } else {
        break;
      }
    }
    return make_mul(std::move(factors));
  }

  NodePtr parse_factor() {
    if (eat('-')) return make_mul({make_number(-1), parse_factor()});
    if (eat('+')) return parse_factor();
    NodePtr b = parse_base();
    if (eat('^')) {
      Rational e = parse_exponent();
      return make_pow(std::move(b), std::move(e));
    }
    return b;
  }

  Rational parse_exponent() {
    skip_ws();
    if (eat('(')) {
      bool neg = eat('-');
      BigInt num = parse_digits("exponent");
      BigInt den = 1;
      if (eat('/')) den = parse_digits("exponent denominator");
      expect(')', "')' after exponent");
      if (den == 0) throw ParseError("zero exponent denominator", pos_);
      Rational r(num, den);
      return neg ? Rational(-r) : r;
    }
    bool neg = eat('-');
    BigInt num = parse_digits("exponent");
    return neg ? Rational(-num) : Rational(num);
  }

  BigInt parse_digits(const char* what) {
    skip_ws();
    std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (pos_ == start) throw ParseError(std::string("expected ") + what, pos_);
    return BigInt(std::string(text_.substr(start, pos_ - start)));
  }

  NodePtr parse_base() {
    skip_ws();
    if (pos_ >= text_.size()) throw ParseError("unexpected end of input", pos_);
    char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (c == '(') {
      ++pos_;
      NodePtr e = parse_expr();
      expect(')', "')'");
      return e;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
    throw ParseError(std::string("unexpected character '") + c + "'", pos_);
  }

  NodePtr parse_number() {
    std::size_t start = pos_;
    BigInt intpart = 0;
    bool any = false;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      intpart = intpart * 10 + (text_[pos_] - '0');
      ++pos_;
      any = true;
    }
    Rational value(intpart);
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      BigInt frac = 0, scale = 1;
      bool fany = false;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        frac = frac * 10 + (text_[pos_] - '0');
        scale *= 10;
        ++pos_;
        fany = true;
      }
      if (!fany && !any) throw ParseError("malformed number", start);
      value += Rational(frac, scale);
    }
    return make_number(std::move(value));
  }

  NodePtr parse_ident() {
    std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
                                   text_[pos_] == '_'))
      ++pos_;
    std::string name(text_.substr(start, pos_ - start));

    if (name == "x") return make_x();
    if (name == "ln" || name == "exp") {
      expect('(', "'(' after function name");
      NodePtr arg = parse_expr();
      expect(')', "')'");
      return name == "ln" ? make_ln(std::move(arg)) : make_exp(std::move(arg));
    }
    if ((name[0] == 'q' || name[0] == 'p') && name.size() > 1 &&
        std::all_of(name.begin() + 1, name.end(),
                    [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
      int idx = std::stoi(name.substr(1));
      return name[0] == 'q' ? make_jet(idx) : make_pjet(idx);
    }
    if (name == "q" || name == "p")
      throw ParseError("jet symbol must carry an index (q0, q1, ...)", start);

    int ticks = 0;
    while (pos_ < text_.size() && text_[pos_] == '\'') {
      ++ticks;
      ++pos_;
    }
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == '(') {
      ++pos_;
      skip_ws();
      if (pos_ >= text_.size() || text_[pos_] != 'x')
        throw ParseError("opaque symbols take the bare argument x", pos_);
      ++pos_;
      expect(')', "')'");
      // also accept ticks written after the call: a(x)''
      while (pos_ < text_.size() && text_[pos_] == '\'') {
        ++ticks;
        ++pos_;
      }
      return make_opaque(std::move(name), ticks);
    }
    if (ticks > 0)
      throw ParseError("derivative ticks are only valid on opaque calls a'(x)", start);
    return make_param(std::move(name));
  }
};

}  // namespace

NodePtr parse_text(std::string_view text) { return Parser(text).run(); }

}  // namespace localscore::detail
