#pragma once

#include <map>
#include <string>

namespace preforge::cli {

// Arithmetic over named parameters: + - * / ^, parentheses, unary minus,
// sqrt exp log sin cos tan abs, and the constant pi. Throws parse errors
// and unbound-parameter errors naming the symbol.
double evaluate(const std::string& expr, const std::map<std::string, double>& vars);

}  // namespace preforge::cli
