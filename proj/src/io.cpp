#include "dynrec/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <istream>
#include <ostream>
#include <sstream>

namespace dynrec {

namespace {

constexpr const char* cohort_magic = "dynrec-cohort";
constexpr const char* fit_magic = "dynrec-fit";
constexpr int format_version = 1;

// Tokenized lines with their 1-based line numbers; blank lines and lines
// starting with '#' are skipped.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  int line() const { return line_; }

  std::vector<std::string> next() {
    std::string text;
    while (std::getline(in_, text)) {
      ++line_;
      std::istringstream ss(text);
      std::vector<std::string> tokens;
      for (std::string t; ss >> t;) tokens.push_back(t);
      if (tokens.empty() || tokens[0][0] == '#') continue;
      return tokens;
    }
    ++line_;
    fail("unexpected end of file");
  }

  // Next line, which must start with key and have exactly count values.
  std::vector<std::string> expect(const std::string& key, int count = -1) {
    auto tokens = next();
    if (tokens[0] != key) fail("expected '" + key + "', found '" + tokens[0] + "'");
    tokens.erase(tokens.begin());
    if (count >= 0 && static_cast<int>(tokens.size()) != count) {
      fail("'" + key + "' takes " + std::to_string(count) + " value(s), found " +
           std::to_string(tokens.size()));
    }
    return tokens;
  }

  double number(const std::string& token, const std::string& field) const {
    const char* s = token.c_str();
    char* end = nullptr;
    const double v = std::strtod(s, &end);
    if (end == s || *end != '\0') fail("field '" + field + "': bad number '" + token + "'");
    return v;
  }

  long integer(const std::string& token, const std::string& field) const {
    long v = 0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
      fail("field '" + field + "': bad integer '" + token + "'");
    }
    return v;
  }

  int count(const std::string& token, const std::string& field) const {
    const long v = integer(token, field);
    if (v < 0 || v > 100000000) fail("field '" + field + "': bad count " + token);
    return static_cast<int>(v);
  }

  double scalar(const std::string& key) { return number(expect(key, 1)[0], key); }
  int count(const std::string& key) { return count(expect(key, 1)[0], key); }
  bool flag(const std::string& key) { return integer(expect(key, 1)[0], key) != 0; }
  std::string word(const std::string& key) { return expect(key, 1)[0]; }

  Eigen::VectorXd numbers(const std::vector<std::string>& tokens, std::size_t from,
                          const std::string& field) const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(tokens.size() - from));
    for (std::size_t i = from; i < tokens.size(); ++i) {
      v[static_cast<Eigen::Index>(i - from)] = number(tokens[i], field);
    }
    return v;
  }

  [[noreturn]] void fail(const std::string& message) const {
    throw ParseError(line_, message);
  }

 private:
  std::istream& in_;
  int line_ = 0;
};

void header(Reader& r, const char* magic) {
  const auto tokens = r.next();
  if (tokens.size() != 2 || tokens[0] != magic) {
    r.fail(std::string("missing '") + magic + " <version>' header");
  }
  if (r.integer(tokens[1], "version") != format_version) {
    r.fail("unsupported format version " + tokens[1]);
  }
}

void write_vector(std::ostream& out, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) out << ' ' << format_double(v[i]);
}

void write_step(std::ostream& out, const char* key, const StepFunction& f) {
  out << key << ' ' << f.size() << '\n';
  const auto loc = f.locations();
  const auto val = f.values();
  for (std::size_t i = 0; i < f.size(); ++i) {
    out << "  " << format_double(loc[i]) << ' ' << format_double(val[i]) << '\n';
  }
}

StepFunction read_step(Reader& r, const std::string& key, double initial) {
  const int m = r.count(key);
  std::vector<double> loc(static_cast<std::size_t>(m));
  std::vector<double> val(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    const auto t = r.next();
    if (t.size() != 2) r.fail(key + ": expected 'location value'");
    loc[static_cast<std::size_t>(i)] = r.number(t[0], key);
    val[static_cast<std::size_t>(i)] = r.number(t[1], key);
  }
  try {
    return StepFunction::from_values(std::move(loc), std::move(val), initial);
  } catch (const std::invalid_argument& e) {
    r.fail(key + ": " + e.what());
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return in;
}

}  // namespace

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_cohort(std::ostream& out, const CohortFile& file) {
  const Cohort& c = file.cohort;
  out << cohort_magic << ' ' << format_version << '\n';
  out << "s_star " << format_double(c.s_star()) << '\n';
  out << "t_star " << (c.t_star ? format_double(*c.t_star) : std::string("none")) << '\n';
  out << "p " << c.covariate_dim() << '\n';
  out << "q " << file.q << '\n';
  out << "rho " << file.rho << '\n';
  out << "link " << file.link << '\n';
  out << "units " << c.size() << '\n';
  for (const UnitPath& u : c.units) {
    out << "unit\n";
    out << "tau " << format_double(u.tau) << '\n';
    out << "events " << u.event_count();
    for (double s : u.event_times) out << ' ' << format_double(s);
    out << '\n';
    switch (u.age.policy) {
      case RepairPolicy::Perfect:
        out << "age perfect\n";
        break;
      case RepairPolicy::Minimal:
        out << "age minimal\n";
        break;
      case RepairPolicy::PiecewiseLinear:
        out << "age piecewise " << u.age.segments.size() << '\n';
        for (const AgeSegment& seg : u.age.segments) {
          out << "  " << format_double(seg.start_age) << ' ' << format_double(seg.slope)
              << '\n';
        }
        break;
    }
    const auto& times = u.covariates.times();
    out << "covariates " << times.size() << '\n';
    for (std::size_t k = 0; k < times.size(); ++k) {
      out << "  " << format_double(times[k]);
      write_vector(out, u.covariates.values()[k]);
      out << '\n';
    }
  }
  out << "end\n";
}

CohortFile read_cohort(std::istream& in) {
  Reader r(in);
  header(r, cohort_magic);
  CohortFile file;
  const double s_star = r.scalar("s_star");
  const std::string t_star = r.word("t_star");
  if (t_star != "none") file.cohort.t_star = r.number(t_star, "t_star");
  const int p = r.count("p");
  file.q = r.count("q");
  file.rho = r.word("rho");
  file.link = r.word("link");
  const int n = r.count("units");
  if (n < 1) r.fail("a cohort needs at least one unit");
  for (int i = 0; i < n; ++i) {
    r.expect("unit", 0);
    UnitPath u;
    u.s_star = s_star;
    u.tau = r.scalar("tau");
    const auto ev = r.expect("events");
    if (ev.empty()) r.fail("'events' needs a count");
    const int m = r.count(ev[0], "events");
    if (static_cast<int>(ev.size()) != m + 1) {
      r.fail("'events' declares " + ev[0] + " times, found " + std::to_string(ev.size() - 1));
    }
    for (int k = 1; k <= m; ++k) {
      u.event_times.push_back(r.number(ev[static_cast<std::size_t>(k)], "events"));
    }
    const auto age = r.expect("age");
    if (age.size() == 1 && age[0] == "perfect") {
      u.age = EffectiveAgeSpec::perfect();
    } else if (age.size() == 1 && age[0] == "minimal") {
      u.age = EffectiveAgeSpec::minimal();
    } else if (age.size() == 2 && age[0] == "piecewise") {
      const int segs = r.count(age[1], "age");
      std::vector<AgeSegment> list;
      for (int j = 0; j < segs; ++j) {
        const auto t = r.next();
        if (t.size() != 2) r.fail("age segment: expected 'start_age slope'");
        list.push_back({r.number(t[0], "start_age"), r.number(t[1], "slope")});
      }
      u.age = EffectiveAgeSpec::piecewise(std::move(list));
    } else {
      r.fail("'age' must be 'perfect', 'minimal' or 'piecewise <count>'");
    }
    const int steps = r.count("covariates");
    if (steps < 1) r.fail("'covariates' needs at least the value at time 0");
    std::vector<double> times;
    std::vector<Eigen::VectorXd> values;
    for (int k = 0; k < steps; ++k) {
      const auto t = r.next();
      if (static_cast<int>(t.size()) != p + 1) {
        r.fail("covariate step: expected a time and " + std::to_string(p) + " value(s)");
      }
      times.push_back(r.number(t[0], "covariate time"));
      values.push_back(r.numbers(t, 1, "covariate value"));
    }
    try {
      u.covariates = CovariatePath(std::move(times), std::move(values));
      u.validate();
    } catch (const std::invalid_argument& e) {
      r.fail(std::string("unit ") + std::to_string(i) + ": " + e.what());
    }
    file.cohort.units.push_back(std::move(u));
  }
  r.expect("end", 0);
  return file;
}

void save_cohort(const std::string& path, const CohortFile& file) {
  auto out = open_out(path);
  write_cohort(out, file);
}

CohortFile load_cohort(const std::string& path) {
  auto in = open_in(path);
  return read_cohort(in);
}

FitFile make_fit_file(const RiskSetIndex& index, const FitResult& fit, double level,
                      std::span<const double> grid, bool* singular) {
  const KappaModel& model = index.model();
  FitFile f;
  f.n = fit.n;
  f.event_count = fit.event_count;
  f.s_star = index.cohort().s_star();
  f.t_star = fit.t_star;
  f.rho = model.rho.name();
  f.link = std::string(model.link.name());
  f.q = model.alpha_dim();
  f.level = level;
  f.converged = fit.converged;
  f.degenerate = fit.degenerate;
  f.steepest_ascent = fit.used_steepest_ascent;
  f.clipped = fit.survivor.clipped;
  f.iterations = fit.iterations;
  f.score_norm = fit.final_score_norm;
  f.eta = fit.eta_hat.stacked();
  f.sigma = fit.sigma_hat;
  f.lambda0 = fit.lambda0_hat;
  f.survivor = fit.survivor.survivor;
  const auto k = f.eta.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (singular) *singular = false;
  try {
    const EtaInterval ci = eta_confidence(fit.eta_hat, fit.sigma_hat, fit.n, level);
    f.se = ci.se;
    f.lower = ci.lower;
    f.upper = ci.upper;
    f.condition_number = ci.condition_number;
    const PlugInCovariance cov(index, fit.eta_hat, fit.lambda0_hat, fit.sigma_hat);
    f.band = cov.lambda_band(grid, level);
    for (double t : grid) f.b_hat.push_back(cov.b_hat(t));
  } catch (const SingularMatrixError&) {
    if (singular) *singular = true;
    f.se = Eigen::VectorXd::Constant(k, nan);
    f.lower = f.se;
    f.upper = f.se;
    f.condition_number = std::numeric_limits<double>::infinity();
    f.band.clear();
    f.b_hat.clear();
    for (double t : grid) {
      const double v = fit.lambda0_hat(t);
      f.band.push_back({t, v, nan, nan, nan});
      f.b_hat.push_back(Eigen::VectorXd::Constant(k, nan));
    }
  }
  return f;
}

void write_fit(std::ostream& out, const FitFile& f) {
  out << fit_magic << ' ' << format_version << '\n';
  out << "n " << f.n << '\n';
  out << "event_count " << f.event_count << '\n';
  out << "s_star " << format_double(f.s_star) << '\n';
  out << "t_star " << format_double(f.t_star) << '\n';
  out << "rho " << f.rho << '\n';
  out << "link " << f.link << '\n';
  out << "q " << f.q << '\n';
  out << "level " << format_double(f.level) << '\n';
  out << "converged " << f.converged << '\n';
  out << "degenerate " << f.degenerate << '\n';
  out << "steepest_ascent " << f.steepest_ascent << '\n';
  out << "clipped " << f.clipped << '\n';
  out << "iterations " << f.iterations << '\n';
  out << "score_norm " << format_double(f.score_norm) << '\n';
  out << "condition_number " << format_double(f.condition_number) << '\n';
  out << "eta " << f.eta.size() << '\n';
  for (Eigen::Index j = 0; j < f.eta.size(); ++j) {
    out << "  " << format_double(f.eta[j]) << ' ' << format_double(f.se[j]) << ' '
        << format_double(f.lower[j]) << ' ' << format_double(f.upper[j]) << '\n';
  }
  out << "sigma " << f.sigma.rows() << '\n';
  for (Eigen::Index a = 0; a < f.sigma.rows(); ++a) {
    out << ' ';
    write_vector(out, f.sigma.row(a).transpose());
    out << '\n';
  }
  write_step(out, "lambda0", f.lambda0);
  write_step(out, "survivor", f.survivor);
  out << "band " << f.band.size() << '\n';
  for (std::size_t g = 0; g < f.band.size(); ++g) {
    const BandPoint& b = f.band[g];
    out << "  " << format_double(b.t) << ' ' << format_double(b.estimate) << ' '
        << format_double(b.c) << ' ' << format_double(b.lower) << ' '
        << format_double(b.upper);
    write_vector(out, f.b_hat[g]);
    out << '\n';
  }
  out << "end\n";
}

FitFile read_fit(std::istream& in) {
  Reader r(in);
  header(r, fit_magic);
  FitFile f;
  f.n = r.count("n");
  f.event_count = r.count("event_count");
  f.s_star = r.scalar("s_star");
  f.t_star = r.scalar("t_star");
  f.rho = r.word("rho");
  f.link = r.word("link");
  f.q = r.count("q");
  f.level = r.scalar("level");
  f.converged = r.flag("converged");
  f.degenerate = r.flag("degenerate");
  f.steepest_ascent = r.flag("steepest_ascent");
  f.clipped = r.flag("clipped");
  f.iterations = r.count("iterations");
  f.score_norm = r.scalar("score_norm");
  f.condition_number = r.scalar("condition_number");
  const int k = r.count("eta");
  f.eta.resize(k);
  f.se.resize(k);
  f.lower.resize(k);
  f.upper.resize(k);
  for (int j = 0; j < k; ++j) {
    const auto t = r.next();
    if (t.size() != 4) r.fail("eta: expected 'estimate se lower upper'");
    f.eta[j] = r.number(t[0], "eta");
    f.se[j] = r.number(t[1], "se");
    f.lower[j] = r.number(t[2], "lower");
    f.upper[j] = r.number(t[3], "upper");
  }
  const int ks = r.count("sigma");
  if (ks != k) r.fail("sigma dimension does not match eta");
  f.sigma.resize(k, k);
  for (int a = 0; a < k; ++a) {
    const auto t = r.next();
    if (static_cast<int>(t.size()) != k) r.fail("sigma: wrong row length");
    f.sigma.row(a) = r.numbers(t, 0, "sigma").transpose();
  }
  f.lambda0 = read_step(r, "lambda0", 0.0);
  f.survivor = read_step(r, "survivor", 1.0);
  const int g = r.count("band");
  for (int i = 0; i < g; ++i) {
    const auto t = r.next();
    if (static_cast<int>(t.size()) != 5 + k) {
      r.fail("band: expected 't estimate c lower upper' and " + std::to_string(k) +
             " b_hat value(s)");
    }
    f.band.push_back({r.number(t[0], "t"), r.number(t[1], "estimate"), r.number(t[2], "c"),
                      r.number(t[3], "lower"), r.number(t[4], "upper")});
    f.b_hat.push_back(r.numbers(t, 5, "b_hat"));
  }
  r.expect("end", 0);
  return f;
}

void save_fit(const std::string& path, const FitFile& file) {
  auto out = open_out(path);
  write_fit(out, file);
}

FitFile load_fit(const std::string& path) {
  auto in = open_in(path);
  return read_fit(in);
}

}  // namespace dynrec
