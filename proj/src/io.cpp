#include "polyclf/io.hpp"

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "polyclf/error.hpp"

namespace polyclf {

using nlohmann::json;

namespace {

json mat_json(const Mat& m) {
  json out = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(row);
  }
  return out;
}

json vec_json(const Vec& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Mat to_mat(const json& j, const char* what) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw Error(ErrorCode::InvalidArgument, std::string(what) + " must be a list of rows");
  const int r = static_cast<int>(j.size()), c = static_cast<int>(j[0].size());
  Mat m(r, c);
  for (int i = 0; i < r; ++i) {
    if (static_cast<int>(j[i].size()) != c)
      throw Error(ErrorCode::InvalidArgument, std::string(what) + " has ragged rows");
    for (int k = 0; k < c; ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

Vec to_vec(const json& j, const char* what) {
  if (!j.is_array()) throw Error(ErrorCode::InvalidArgument, std::string(what) + " must be a list");
  Vec v(static_cast<int>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) v(static_cast<int>(i)) = j[i].get<double>();
  return v;
}

HPolyhedron to_poly(const json& j, const char* what) {
  if (j.contains("lower")) return HPolyhedron::box(to_vec(j.at("lower"), what), to_vec(j.at("upper"), what));
  return HPolyhedron(to_mat(j.at("F"), what), to_vec(j.at("z"), what));
}

json poly_json(const HPolyhedron& P) {
  Mat F = P.F();
  Vec z = P.z();
  for (int r = 0; r < F.rows(); ++r) {
    F.row(r) *= P.row_norms()(r);
    z(r) *= P.row_norms()(r);
  }
  return {{"F", mat_json(F)}, {"z", vec_json(z)}};
}

SolveStatus status_from_string(const std::string& s) {
  for (auto k : {SolveStatus::Optimal, SolveStatus::Infeasible, SolveStatus::Unbounded,
                 SolveStatus::NumericalTrouble})
    if (to_string(k) == s) return k;
  throw Error(ErrorCode::InvalidArgument, "unknown status '" + s + "'");
}

json parse(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed JSON: ") + e.what());
  }
}

template <class F>
auto guarded(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("bad field: ") + e.what());
  }
}

json template_to(const TemplateArtifact& a) {
  const auto& c = a.config;
  json j;
  j["strategy"] = to_string(c.strategy);
  j["f1"] = c.f1;
  j["f2"] = c.f2;
  j["N"] = c.N;
  j["seed"] = c.seed;
  j["lambda"] = c.lambda;
  j["s3_interior"] = c.s3_interior;
  j["s3_midpoints"] = c.s3_midpoints;
  j["tilt"] = c.tilt;
  j["epsilon"] = c.epsilon;
  j["edges"] = c.edges == EdgeMode::Full ? "full" : "reduced";
  j["kind"] = to_string(a.triplet.kind);
  j["dims"] = {{"f", a.triplet.num_facets()}, {"v", a.triplet.num_vertices()},
               {"e", a.triplet.num_edge_rows()}};
  j["F"] = mat_json(a.triplet.F);
  j["z_bar"] = vec_json(a.z_bar);
  j["zeta"] = vec_json(a.zeta);
  if (a.target_zs) j["target_zs"] = vec_json(*a.target_zs);
  return j;
}

TemplateArtifact template_from(const json& j) {
  TemplateArtifact a;
  auto& c = a.config;
  c.strategy = strategy_from_string(j.at("strategy").get<std::string>());
  c.f1 = j.at("f1").get<int>();
  c.f2 = j.at("f2").get<int>();
  c.N = j.at("N").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.lambda = j.at("lambda").get<double>();
  c.s3_interior = j.at("s3_interior").get<int>();
  c.s3_midpoints = j.at("s3_midpoints").get<int>();
  c.tilt = j.at("tilt").get<double>();
  c.epsilon = j.at("epsilon").get<double>();
  c.edges = j.at("edges").get<std::string>() == "full" ? EdgeMode::Full : EdgeMode::Reduced;
  const Mat F = to_mat(j.at("F"), "F");
  a.z_bar = to_vec(j.at("z_bar"), "z_bar");
  a.zeta = to_vec(j.at("zeta"), "zeta");
  if (j.contains("target_zs")) a.target_zs = to_vec(j.at("target_zs"), "target_zs");
  a.triplet = build_triplet(F, a.z_bar, triplet_kind_from_string(j.at("kind").get<std::string>()), c.edges);
  return a;
}

}  // namespace

Problem parse_problem(const std::string& text) {
  const json j = parse(text);
  return guarded([&] {
    Problem p;
    p.name = j.value("name", "");
    const Mat A = to_mat(j.at("A"), "A"), B = to_mat(j.at("B"), "B");
    p.sys = make_system(A, B, to_poly(j.at("X"), "X"), to_poly(j.at("U"), "U"));
    p.Q = to_mat(j.at("Q"), "Q");
    p.R = to_mat(j.at("R"), "R");
    if (p.Q.rows() != A.rows() || p.Q.cols() != A.rows() || p.R.rows() != B.cols() || p.R.cols() != B.cols())
      throw Error(ErrorCode::InvalidArgument, "Q or R has the wrong shape");
    if (j.contains("uncertainty")) {
      const json& u = j.at("uncertainty");
      const json& w = u.at("W");
      UncertaintyModel m;
      if (w.contains("segment"))
        m = segment_uncertainty(A, B, to_vec(w.at("segment").at("direction"), "direction"),
                                w.at("segment").at("half_width").get<double>());
      else
        m = UncertaintyModel{{{A, B}}, to_poly(w, "W")};
      if (u.contains("AB")) {
        m.AB.clear();
        for (const auto& ab : u.at("AB")) m.AB.emplace_back(to_mat(ab.at("A"), "A_l"), to_mat(ab.at("B"), "B_l"));
      }
      m.validate(p.sys.nx(), p.sys.nu());
      p.uncertainty = m;
    }
    if (j.contains("K")) p.K = to_mat(j.at("K"), "K");
    return p;
  });
}

std::string problem_json(const Problem& p) {
  json j;
  j["name"] = p.name;
  j["A"] = mat_json(p.sys.A);
  j["B"] = mat_json(p.sys.B);
  j["X"] = poly_json(p.sys.X);
  j["U"] = poly_json(p.sys.U);
  j["Q"] = mat_json(p.Q);
  j["R"] = mat_json(p.R);
  if (p.uncertainty) {
    json ab = json::array();
    for (const auto& [A, B] : p.uncertainty->AB) ab.push_back({{"A", mat_json(A)}, {"B", mat_json(B)}});
    j["uncertainty"] = {{"AB", ab}, {"W", poly_json(p.uncertainty->W)}};
  }
  if (p.K) j["K"] = mat_json(*p.K);
  return j.dump(2) + "\n";
}

Problem load_problem(const std::string& path) { return parse_problem(read_file(path)); }

std::string template_json(const TemplateArtifact& a) { return template_to(a).dump(2) + "\n"; }

TemplateArtifact parse_template(const std::string& text) {
  const json j = parse(text);
  return guarded([&] { return template_from(j); });
}

std::string result_json(const ResultArtifact& r) {
  const auto& s = r.result;
  json j;
  j["problem"] = r.problem;
  j["status"] = to_string(s.status);
  j["robust"] = s.robust;
  j["lambda"] = s.lambda;
  j["objective_kind"] = r.config.objective == ObjectiveKind::Linear ? "linear" : "infdist";
  j["domain_weight"] = r.config.domain_weight;
  j["freeze_z1"] = r.config.freeze_z1;
  j["objective"] = s.objective;
  j["iterations"] = s.iterations;
  j["size"] = {{"variables", s.size.variables},
               {"affine_rows", s.size.affine_rows},
               {"quadratic", s.size.quadratic},
               {"counted_constraints", s.size.counted_constraints},
               {"counted_variables", s.size.counted_variables}};
  j["residuals"] = s.residuals;
  j["z"] = vec_json(s.z);
  json v = json::array();
  for (const auto& vi : s.v) v.push_back(vec_json(vi));
  j["v"] = v;
  j["y"] = vec_json(s.y);
  j["template"] = template_to(r.tmpl);
  return j.dump(2) + "\n";
}

ResultArtifact parse_result(const std::string& text) {
  const json j = parse(text);
  return guarded([&] {
    ResultArtifact r;
    r.problem = j.value("problem", "");
    r.tmpl = template_from(j.at("template"));
    r.config.lambda = j.at("lambda").get<double>();
    r.config.objective = j.at("objective_kind").get<std::string>() == "linear" ? ObjectiveKind::Linear
                                                                                : ObjectiveKind::InfDistance;
    r.config.domain_weight = j.at("domain_weight").get<double>();
    r.config.freeze_z1 = j.at("freeze_z1").get<bool>();
    auto& s = r.result;
    s.status = status_from_string(j.at("status").get<std::string>());
    s.robust = j.at("robust").get<bool>();
    s.lambda = r.config.lambda;
    s.objective = j.at("objective").get<double>();
    s.iterations = j.at("iterations").get<int>();
    const json& sz = j.at("size");
    s.size.variables = sz.at("variables").get<int>();
    s.size.affine_rows = sz.at("affine_rows").get<int>();
    s.size.quadratic = sz.at("quadratic").get<int>();
    s.size.counted_constraints = sz.at("counted_constraints").get<int>();
    s.size.counted_variables = sz.at("counted_variables").get<int>();
    s.residuals = j.at("residuals").get<std::map<std::string, double>>();
    s.z = to_vec(j.at("z"), "z");
    for (const auto& vi : j.at("v")) s.v.push_back(to_vec(vi, "v"));
    s.y = to_vec(j.at("y"), "y");
    return r;
  });
}

std::string vector_json(const Vec& v) { return vec_json(v).dump() + "\n"; }

std::string report_json(const VerificationReport& r) {
  json j;
  j["samples"] = r.samples;
  j["violations"] = r.violations;
  j["min_residual"] = r.min_residual;
  j["mean_residual"] = r.mean_residual;
  j["tol"] = r.tol;
  j["worst_x"] = vec_json(r.worst_x);
  j["ok"] = r.ok();
  return j.dump(2) + "\n";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  std::error_code ec;
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

}  // namespace polyclf
