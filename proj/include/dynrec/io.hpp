#pragma once

// Versioned line-oriented text formats for cohorts and fits. Numbers are
// written with 17 significant digits so parsing restores them exactly.

#include "dynrec/errors.hpp"
#include "dynrec/inference.hpp"
#include "dynrec/model.hpp"

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dynrec {

class ParseError : public Error {
 public:
  ParseError(int line, const std::string& message)
      : Error("line " + std::to_string(line) + ": " + message), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

std::string format_double(double x);

struct CohortFile {
  Cohort cohort;
  // Model the cohort was generated under; fitting may override both.
  std::string rho = "identity";
  std::string link = "none";
  int q = 0;
};

void write_cohort(std::ostream& out, const CohortFile& file);
CohortFile read_cohort(std::istream& in);
void save_cohort(const std::string& path, const CohortFile& file);
CohortFile load_cohort(const std::string& path);

struct FitFile {
  int n = 0;
  int event_count = 0;
  double s_star = 0.0;
  double t_star = 0.0;
  std::string rho = "identity";
  std::string link = "none";
  int q = 0;
  double level = 0.95;
  bool converged = false;
  bool degenerate = false;
  bool steepest_ascent = false;
  bool clipped = false;
  int iterations = 0;
  double score_norm = 0.0;
  double condition_number = 1.0;
  // eta_hat with Wald intervals; standard errors are nan when sigma_hat is
  // singular.
  Eigen::VectorXd eta;
  Eigen::VectorXd se;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  Eigen::MatrixXd sigma;
  StepFunction lambda0;
  StepFunction survivor;
  std::vector<BandPoint> band;
  std::vector<Eigen::VectorXd> b_hat;  // on the band grid
};

// Runs the plug-in inference for a fit. A singular sigma_hat leaves the
// standard errors and band half-widths nan and sets singular.
FitFile make_fit_file(const RiskSetIndex& index, const FitResult& fit, double level,
                      std::span<const double> grid, bool* singular = nullptr);

void write_fit(std::ostream& out, const FitFile& file);
FitFile read_fit(std::istream& in);
void save_fit(const std::string& path, const FitFile& file);
FitFile load_fit(const std::string& path);

}  // namespace dynrec
