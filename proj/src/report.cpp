#include "pacverify/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "pacverify/error.hpp"

namespace pacverify {

namespace {

void write(const Json& v, std::string& out) {
  switch (v.type()) {
    case Json::value_t::object: {
      out += '{';
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {  // std::map order
        if (!first) out += ',';
        first = false;
        out += Json(it.key()).dump();
        out += ':';
        write(it.value(), out);
      }
      out += '}';
      break;
    }
    case Json::value_t::array: {
      out += '[';
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        write(v[i], out);
      }
      out += ']';
      break;
    }
    case Json::value_t::number_float: {
      const double d = v.get<double>();
      if (!std::isfinite(d)) {
        out += "null";
      } else {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", d);
        out += buf;
      }
      break;
    }
    default:
      out += v.dump();
  }
}

}  // namespace

std::string canonical_json(const Json& value) {
  std::string out;
  write(value, out);
  return out;
}

void emit_report(const Json& report, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open report file " + path.string());
  f << canonical_json(report) << '\n';
  f.close();
  if (!f) throw Error("failed writing report file " + path.string());
}

Json vector_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Json provenance_json(const Provenance& p) {
  return Json{{"master_seed", p.master_seed},
              {"components", p.components},
              {"phase1_samples", p.phase1_samples},
              {"phase2_samples", p.phase2_samples},
              {"split_samples", p.split_samples},
              {"margin_samples", p.margin_samples},
              {"total_samples", p.total_samples()},
              {"margin_epsilon", p.margin_epsilon}};
}

Json robustness_json(const PipelineResult& result, bool include_coefficients) {
  const RobustnessReport& r = result.report;
  Json comps = Json::array();
  for (const auto& c : r.components) {
    Json j{{"label", c.label},
           {"max_point", vector_json(c.max_point)},
           {"max_value", c.max_value},
           {"candidate", c.candidate},
           {"validated", c.validated}};
    j["true_value"] = c.true_value ? Json(*c.true_value) : Json(nullptr);
    comps.push_back(std::move(j));
  }
  Json cands = Json::array();
  for (const auto& c : r.candidates) {
    cands.push_back(Json{{"component", c.component},
                         {"point", vector_json(c.point)},
                         {"validated", c.validated},
                         {"true_value", c.true_value}});
  }
  Json out{{"verdict", to_string(r.verdict)},
              {"label", r.label},
              {"mode", r.mode == ScoreMode::untargeted ? "untargeted" : "targeted"},
              {"margin", r.margin},
              {"eta", r.eta},
              {"epsilon", r.epsilon},
              {"components", std::move(comps)},
              {"candidates", std::move(cands)},
              {"queries", r.query_count},
              {"flags", r.flags},
              {"provenance", provenance_json(result.model.provenance)}};
  if (include_coefficients) {
    Json coeffs = Json::array();
    for (const auto& c : result.model.components) coeffs.push_back(vector_json(c));
    out["coefficients"] = std::move(coeffs);
  }
  return out;
}

}  // namespace pacverify
