#include "dwos/runner.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "dwos/config.hpp"
#include "dwos/errors.hpp"
#include "dwos/image_io.hpp"

namespace dwos {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return s.str();
}

Image lattice_image(const Lattice& l, const std::vector<double>& values) {
  Image img(l.nx, l.ny, 0.0f);
  for (std::size_t k = 0; k < l.pixels.size(); ++k) img.pixels[l.pixels[k]] = static_cast<float>(values[k]);
  return img;
}

Image lattice_mask(const Lattice& l) {
  Image img(l.nx, l.ny, 0.0f);
  for (std::size_t p : l.pixels) img.pixels[p] = 1.0f;
  return img;
}

const Field& param_field(const PDEProblem& p, ParamField f) {
  switch (f) {
    case ParamField::Source:
      return p.source;
    case ParamField::Sigma:
      return p.sigma;
    case ParamField::Alpha:
      return p.alpha;
    case ParamField::Boundary:
      return p.boundary.field();
  }
  return p.source;
}

void write_manifest(const ExperimentConfig& c, const fs::path& config_path) {
  json m;
  m["config_file"] = fs::absolute(config_path).string();
  m["command"] = to_string(c.command);
  m["resolved"] = c.resolved;
  write_file_atomic(c.output / "manifest.json", m.dump(2) + "\n");
}

int run_solve(const ExperimentConfig& c, std::ostream& log) {
  const Lattice l = measurement_lattice(c.problem.domain, c.measurement.nx, c.measurement.ny, c.measurement.margin);
  PassOptions opt;
  opt.threads = c.threads;
  const PrimalPass pass = run_primal_pass(c.problem, l.points, c.walks, c.seed, opt);
  std::vector<double> mean(l.points.size());
  std::vector<double> se(l.points.size());
  std::ostringstream csv;
  csv << "i,j,x,y,u,se,walks\n";
  for (std::size_t k = 0; k < l.points.size(); ++k) {
    mean[k] = pass.estimates[k].mean;
    se[k] = pass.estimates[k].standard_error();
    csv << l.pixels[k] % l.nx << ',' << l.pixels[k] / l.nx << ',' << fmt(l.points[k].x) << ',' << fmt(l.points[k].y)
        << ',' << fmt(mean[k]) << ',' << fmt(se[k]) << ',' << pass.estimates[k].n_walks << '\n';
  }
  write_pfm(c.output / "solution.pfm", lattice_image(l, mean));
  write_pfm(c.output / "se.pfm", lattice_image(l, se));
  write_pfm(c.output / "mask.pfm", lattice_mask(l));
  write_file_atomic(c.output / "stats.csv", csv.str());
  std::ostringstream summary;
  summary << "points,walks_per_point,total_walks,aborted_walks,mean_steps\n"
          << l.points.size() << ',' << c.walks << ',' << pass.total_walks << ',' << pass.aborted_walks << ','
          << fmt(pass.mean_steps()) << '\n';
  write_file_atomic(c.output / "summary.csv", summary.str());
  log << "solve: " << l.points.size() << " points x " << c.walks << " walks, mean " << pass.mean_steps()
      << " steps per walk\n";
  return kExitOk;
}

int run_validate(const ExperimentConfig& c, std::ostream& log) {
  const Lattice l = measurement_lattice(c.problem.domain, c.measurement.nx, c.measurement.ny, c.measurement.margin);
  LossSpec loss;
  loss.points = l.points;
  loss.reference.assign(l.points.size(), 0.0);
  const GradCheckResult r = check_gradients(c.problem, loss, c.validate, c.seed);

  std::ostringstream csv;
  csv << "field,texel,i,j,adjoint,adjoint_se,fd,fd_se,diff_se,selected,evaluated,rel_err\n";
  for (const GradCheckRow& row : r.rows) {
    const Field& f = param_field(c.problem, row.field);
    long i = -1;
    long j = -1;
    if (row.texel >= 0) {
      i = row.texel % static_cast<long>(f.tex().nx());
      j = row.texel / static_cast<long>(f.tex().nx());
    }
    csv << to_string(row.field) << ',' << row.texel << ',' << i << ',' << j << ',' << fmt(row.adjoint) << ','
        << fmt(row.adjoint_se) << ',' << fmt(row.fd) << ',' << fmt(row.fd_se) << ',' << fmt(row.diff_se) << ',' << row.selected << ','
        << row.evaluated << ',' << fmt(row.rel_err) << '\n';
  }
  write_file_atomic(c.output / "gradcheck.csv", csv.str());

  std::ostringstream sum;
  sum << "field,selected,tolerance,max_rel_err,max_rel_se,max_rel_diff_se,pass\n";
  for (const GradCheckSummary& s : r.summaries) {
    sum << to_string(s.field) << ',' << s.selected << ',' << fmt(s.tolerance) << ',' << fmt(s.max_rel_err) << ','
        << fmt(s.max_rel_se) << ',' << fmt(s.max_rel_diff_se) << ',' << (s.pass ? "pass" : "fail") << '\n';
    log << "validate-grad " << to_string(s.field) << ": " << s.selected << " texels scored, max rel err "
        << s.max_rel_err << " (tolerance " << s.tolerance << "), max rel SE " << s.max_rel_se
        << ", max rel paired SE " << s.max_rel_diff_se << " -> "
        << (s.pass ? "PASS" : "FAIL") << '\n';
  }
  write_file_atomic(c.output / "gradcheck_summary.csv", sum.str());

  // Gradient images of texture parameters.
  for (std::size_t fi = 0; fi < c.validate.fields.size(); ++fi) {
    const Field& f = param_field(c.problem, c.validate.fields[fi]);
    if (f.is_constant()) continue;
    Image img(f.tex().nx(), f.tex().ny());
    for (const GradCheckRow& row : r.rows) {
      if (row.field == c.validate.fields[fi]) img.pixels[static_cast<std::size_t>(row.texel)] = static_cast<float>(row.adjoint);
    }
    write_pfm(c.output / ("gradient_" + std::string(to_string(c.validate.fields[fi])) + ".pfm"), img);
  }
  return r.pass ? kExitOk : kExitValidation;
}

void write_parameters(const fs::path& dir, const PDEProblem& p, const ParamGradients& g,
                      const std::vector<ParamField>& fields, int iteration, bool with_gradient) {
  std::ostringstream tag;
  tag << std::setw(4) << std::setfill('0') << iteration;
  for (ParamField f : fields) {
    const Field& field = param_field(p, f);
    const std::string base = std::string(to_string(f)) + "_" + tag.str();
    if (field.is_constant()) {
      std::ostringstream s;
      s << "value,gradient\n" << fmt(field.constant_value()) << ',' << fmt(gradient_slot(g, f).scalar) << '\n';
      write_file_atomic(dir / (base + ".csv"), s.str());
      continue;
    }
    write_pfm(dir / (base + ".pfm"), texture_image(field.tex()));
    write_texture_csv(dir / (base + ".csv"), field.tex());
    if (with_gradient) write_pfm(dir / ("gradient_" + base + ".pfm"), gradient_image(gradient_slot(g, f).texels));
  }
}

int run_optimize(const ExperimentConfig& c, std::ostream& log) {
  const Lattice l = measurement_lattice(c.problem.domain, c.measurement.nx, c.measurement.ny, c.measurement.margin);
  LossSpec loss;
  loss.points = l.points;
  loss.reference = reference_values(*c.reference, l.points, c.reference_walks, reference_seed(c.seed), c.threads);
  write_pfm(c.output / "reference_solution.pfm", lattice_image(l, loss.reference));
  write_pfm(c.output / "mask.pfm", lattice_mask(l));

  const fs::path snaps = c.output / "snapshots";
  fs::create_directories(snaps);
  const auto start = std::chrono::steady_clock::now();
  auto snapshot = [&](int it, const PDEProblem& p, const ParamGradients& g) {
    write_parameters(snaps, p, g, c.optimizer.parameters, it, it > 0);
  };
  const OptimizeResult result = optimize(c.problem, loss, c.optimizer, c.seed, snapshot);

  std::ostringstream csv;
  csv << "iteration,loss,grad_rms,sigma_bar\n";
  for (const IterationRecord& r : result.history) {
    csv << r.iteration << ',' << fmt(r.loss) << ',' << fmt(r.grad_rms) << ',' << fmt(r.sigma_bar) << '\n';
  }
  write_file_atomic(c.output / "loss.csv", csv.str());
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  log << "optimize: " << result.history.size() << " iterations in " << seconds << " s, loss "
      << result.history.front().loss << " -> " << result.history.back().loss << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::filesystem::path& config_path, const RunOverrides& overrides, std::ostream& log) {
  ExperimentConfig c;
  try {
    c = load_config(config_path);
    if (overrides.seed) {
      c.seed = *overrides.seed;
      c.resolved["seed"] = c.seed;
    }
    if (overrides.threads) {
      if (*overrides.threads < 1) throw ConfigError("--threads must be >= 1");
      c.threads = *overrides.threads;
      c.validate.threads = c.optimizer.threads = c.threads;
      c.resolved["threads"] = c.threads;
    }
    if (overrides.output) {
      c.output = *overrides.output;
      c.resolved["output"] = c.output.string();
    } else if (c.output.is_relative()) {
      c.output = config_path.parent_path() / c.output;
    }
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    log << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    fs::create_directories(c.output);
    write_manifest(c, config_path);
    switch (c.command) {
      case Command::Solve:
        return run_solve(c, log);
      case Command::ValidateGrad:
        return run_validate(c, log);
      case Command::Optimize:
        return run_optimize(c, log);
    }
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitRuntime;
}

}  // namespace dwos
