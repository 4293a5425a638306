#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "deferlab/core.hpp"
#include "deferlab/io.hpp"
#include "deferlab/lp.hpp"

namespace deferlab {

void write_lp_text(std::ostream& out, const LinearProgram& lp) {
  out << "deferlab-lp 1\n";
  out << "vars " << lp.num_vars() << '\n';
  for (std::size_t j = 0; j < lp.num_vars(); ++j)
    out << format_double(lp.lower()[j]) << ' ' << format_double(lp.upper()[j]) << ' '
        << format_double(lp.cost()[j]) << '\n';
  out << "rows " << lp.num_rows() << '\n';
  for (const auto& row : lp.rows()) {
    char s = row.sense == RowSense::LessEqual ? 'L' : row.sense == RowSense::GreaterEqual ? 'G' : 'E';
    out << s << ' ' << format_double(row.rhs) << ' ' << row.terms.size();
    for (const auto& t : row.terms) out << ' ' << t.var << ':' << format_double(t.coef);
    out << '\n';
  }
}

LinearProgram read_lp_text(std::istream& in) {
  LinearProgram lp;
  std::string line, word;
  std::size_t lineno = 0;
  auto next_line = [&]() {
    if (!std::getline(in, line)) throw ParseError("unexpected end of LP file", lineno + 1);
    ++lineno;
    return std::istringstream(line);
  };
  auto parse = [&](const std::string& s) {
    try {
      return parse_double(s);
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what(), lineno);
    }
  };

  {
    auto ss = next_line();
    int version = 0;
    if (!(ss >> word >> version) || word != "deferlab-lp" || version != 1)
      throw ParseError("expected 'deferlab-lp 1' header", lineno);
  }
  std::size_t nvars = 0, nrows = 0;
  {
    auto ss = next_line();
    if (!(ss >> word >> nvars) || word != "vars") throw ParseError("expected 'vars <n>'", lineno);
  }
  for (std::size_t j = 0; j < nvars; ++j) {
    auto ss = next_line();
    std::string lo, hi, c;
    if (!(ss >> lo >> hi >> c)) throw ParseError("expected '<lo> <hi> <cost>'", lineno);
    lp.add_variable(parse(lo), parse(hi), parse(c));
  }
  {
    auto ss = next_line();
    if (!(ss >> word >> nrows) || word != "rows") throw ParseError("expected 'rows <m>'", lineno);
  }
  for (std::size_t i = 0; i < nrows; ++i) {
    auto ss = next_line();
    std::string sense, rhs;
    std::size_t k = 0;
    if (!(ss >> sense >> rhs >> k)) throw ParseError("expected '<sense> <rhs> <k>'", lineno);
    RowSense rs;
    if (sense == "L") rs = RowSense::LessEqual;
    else if (sense == "G") rs = RowSense::GreaterEqual;
    else if (sense == "E") rs = RowSense::Equal;
    else throw ParseError("row sense must be L, G or E", lineno);
    std::vector<LinearTerm> terms;
    for (std::size_t t = 0; t < k; ++t) {
      if (!(ss >> word)) throw ParseError("missing term", lineno);
      auto colon = word.find(':');
      if (colon == std::string::npos) throw ParseError("term must be var:coef", lineno);
      std::size_t var = std::stoul(word.substr(0, colon));
      if (var >= nvars) throw ParseError("term references unknown variable", lineno);
      terms.push_back({var, parse(word.substr(colon + 1))});
    }
    lp.add_row(std::move(terms), rs, parse(rhs));
  }
  return lp;
}

}  // namespace deferlab
