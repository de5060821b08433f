#include "preforge/cli/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <functional>

#include "preforge/error.hpp"

namespace preforge::cli {

namespace {

class Parser {
 public:
  Parser(const std::string& s, const std::map<std::string, double>& vars) : s_(s), vars_(vars) {}

  double parse() {
    double v = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return v;
  }

 private:
  const std::string& s_;
  const std::map<std::string, double>& vars_;
  std::size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorKind::Parse, "expression \"" + s_ + "\" at column " + std::to_string(pos_ + 1) + ": " + msg);
  }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  double expr() {
    double v = term();
    while (true) {
      if (eat('+')) v += term();
      else if (eat('-')) v -= term();
      else return v;
    }
  }
  double term() {
    double v = unary();
    while (true) {
      if (eat('*')) v *= unary();
      else if (eat('/')) v /= unary();
      else return v;
    }
  }
  double unary() {
    if (eat('-')) return -unary();
    if (eat('+')) return unary();
    return power();
  }
  double power() {
    double base = primary();
    if (eat('^')) return std::pow(base, unary());
    return base;
  }
  double primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end");
    if (eat('(')) {
      double v = expr();
      if (!eat(')')) fail("missing ')'");
      return v;
    }
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = s_.c_str() + pos_;
      char* end = nullptr;
      double v = std::strtod(begin, &end);
      if (end == begin) fail("bad number");
      pos_ += static_cast<std::size_t>(end - begin);
      return v;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
      const std::string name = s_.substr(start, pos_ - start);
      if (eat('(')) {
        double a = expr();
        if (!eat(')')) fail("missing ')' after argument of " + name);
        static const std::map<std::string, std::function<double(double)>> fns = {
            {"sqrt", [](double x) { return std::sqrt(x); }}, {"exp", [](double x) { return std::exp(x); }},
            {"log", [](double x) { return std::log(x); }},   {"sin", [](double x) { return std::sin(x); }},
            {"cos", [](double x) { return std::cos(x); }},   {"tan", [](double x) { return std::tan(x); }},
            {"abs", [](double x) { return std::abs(x); }}};
        auto it = fns.find(name);
        if (it == fns.end()) fail("unknown function " + name);
        return it->second(a);
      }
      if (name == "pi") return M_PI;
      auto it = vars_.find(name);
      if (it == vars_.end())
        throw Error(ErrorKind::UnboundParameter, "unbound parameter '" + name + "' in expression \"" + s_ + "\"");
      return it->second;
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }
};

}  // namespace

double evaluate(const std::string& expr, const std::map<std::string, double>& vars) {
  return Parser(expr, vars).parse();
}

}  // namespace preforge::cli
