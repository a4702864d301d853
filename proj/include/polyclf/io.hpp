#pragma once

#include <string>

#include "polyclf/pipeline.hpp"
#include "polyclf/sim.hpp"
#include "polyclf/synth.hpp"

namespace polyclf {

/// Problem files:
///   {"name", "A", "B", "X", "U", "Q", "R", "uncertainty"?, "K"?}
/// with matrices as lists of rows, X and U either {"lower", "upper"} boxes
/// or {"F", "z"}, and "uncertainty" = {"AB"?: [{"A", "B"}], "W": {"F", "z"}
/// | {"segment": {"direction", "half_width"}}}.  AB defaults to (A, B).
Problem parse_problem(const std::string& json_text);
std::string problem_json(const Problem& p);
Problem load_problem(const std::string& path);

/// Template artifacts keep F, z_bar and the build settings; the triplet is
/// rebuilt on load.
std::string template_json(const TemplateArtifact& a);
TemplateArtifact parse_template(const std::string& json_text);

/// A synthesis result together with the template and settings it came from.
struct ResultArtifact {
  std::string problem;
  TemplateArtifact tmpl;
  SynthConfig config;
  SynthesisResult result;
};
std::string result_json(const ResultArtifact& r);
ResultArtifact parse_result(const std::string& json_text);

std::string vector_json(const Vec& v);
std::string report_json(const VerificationReport& r);

std::string read_file(const std::string& path);
/// Creates parent directories.  Throws Io.
void write_file(const std::string& path, const std::string& text);

}  // namespace polyclf
