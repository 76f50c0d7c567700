// Serves a model file over the oracle line protocol on stdin/stdout:
//   DIM          -> "m n"
//   EVAL k       -> reads k lines of m numbers, answers k lines of n numbers
//   QUIT or EOF  -> exit
#include <charconv>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "pacverify/error.hpp"
#include "pacverify/model_runtime.hpp"

namespace {

bool parse_row(const std::string& line, std::vector<double>& out, std::size_t expect) {
  out.clear();
  const char* p = line.data();
  const char* end = p + line.size();
  while (p < end) {
    while (p < end && (*p == ' ' || *p == '\t' || *p == ',' || *p == '\r')) ++p;
    if (p == end) break;
    double v = 0.0;
    auto [next, ec] = std::from_chars(p, end, v);
    if (ec != std::errc()) return false;
    out.push_back(v);
    p = next;
  }
  return out.size() == expect;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: mlp_oracle_server MODEL.json\n";
    return 2;
  }
  std::ios::sync_with_stdio(false);
  pacverify::ClassifierModel model = [&] {
    try {
      return pacverify::load_model(argv[1]);
    } catch (const pacverify::Error& e) {
      std::cerr << "mlp_oracle_server: " << e.what() << "\n";
      std::exit(3);
    }
  }();
  const auto m = static_cast<std::size_t>(model.input_dim());
  std::string line;
  std::vector<double> row;
  char buf[32];
  while (std::getline(std::cin, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line == "DIM") {
      std::cout << model.input_dim() << ' ' << model.output_dim() << '\n' << std::flush;
    } else if (line.rfind("EVAL ", 0) == 0) {
      long k = 0;
      std::istringstream(line.substr(5)) >> k;
      if (k < 0) return 3;
      std::string reply;
      for (long i = 0; i < k; ++i) {
        if (!std::getline(std::cin, line) || !parse_row(line, row, m)) {
          std::cerr << "mlp_oracle_server: malformed EVAL row\n";
          return 3;
        }
        const Eigen::VectorXd y = model.evaluate(row);
        for (Eigen::Index j = 0; j < y.size(); ++j) {
          auto [p, ec] = std::to_chars(buf, buf + sizeof buf, y(j));
          if (j) reply += ' ';
          reply.append(buf, p);
        }
        reply += '\n';
      }
      std::cout << reply << std::flush;
    } else if (line == "QUIT") {
      return 0;
    } else if (!line.empty()) {
      std::cerr << "mlp_oracle_server: unknown request '" << line << "'\n";
      return 3;
    }
  }
  return 0;
}
