#include "dwos/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include "dwos/errors.hpp"
#include "dwos/image_io.hpp"

namespace dwos {

using nlohmann::json;

const char* to_string(Command c) {
  switch (c) {
    case Command::Solve:
      return "solve";
    case Command::ValidateGrad:
      return "validate-grad";
    case Command::Optimize:
      return "optimize";
  }
  return "?";
}

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

[[noreturn]] void fail(const std::string& path, const std::string& what) { throw ConfigError(path + ": " + what); }

// A JSON object being read, plus its resolved echo with defaults filled in.
class Section {
 public:
  Section(const json& in, json& out, std::string path) : in_(in), out_(out), path_(std::move(path)) {
    if (!in_.is_object()) fail(path_.empty() ? "config" : path_, "expected an object");
    if (!out_.is_object()) out_ = json::object();
  }

  bool has(const char* key) const { return in_.contains(key); }
  const json& raw(const char* key) const { return in_.at(key); }
  std::string path(const char* key) const { return join(path_, key); }
  json& out(const char* key) { return out_[key]; }

  template <class T>
  T get(const char* key, T fallback) {
    T value = fallback;
    if (in_.contains(key)) value = convert<T>(in_.at(key), path(key));
    out_[key] = value;
    return value;
  }

  template <class T>
  T require(const char* key) {
    if (!in_.contains(key)) fail(path(key), "missing required field");
    T value = convert<T>(in_.at(key), path(key));
    out_[key] = value;
    return value;
  }

  void allow(std::initializer_list<const char*> keys) const {
    std::set<std::string> ok(keys.begin(), keys.end());
    for (auto it = in_.begin(); it != in_.end(); ++it) {
      if (!ok.count(it.key())) fail(path(it.key().c_str()), "unknown field");
    }
  }

  template <class T>
  static T convert(const json& v, const std::string& where) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(where, "expected true or false");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) fail(where, "expected an integer");
      if (std::is_unsigned_v<T> && v.get<long long>() < 0) fail(where, "must be >= 0");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) fail(where, "expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail(where, "expected a string");
    }
    return v.get<T>();
  }

 private:
  const json& in_;
  json& out_;
  std::string path_;
};

Vec3 parse_point(const json& v, const std::string& where, int dim) {
  if (!v.is_array() || v.size() != static_cast<std::size_t>(dim)) {
    fail(where, "expected an array of " + std::to_string(dim) + " numbers");
  }
  double c[3] = {0.0, 0.0, 0.0};
  for (int k = 0; k < dim; ++k) c[k] = Section::convert<double>(v[static_cast<std::size_t>(k)], where);
  return Vec3{c[0], c[1], c[2]};
}

Extent parse_extent(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 4) fail(where, "expected [xmin, ymin, xmax, ymax]");
  Extent e{v[0].get<double>(), v[1].get<double>(), v[2].get<double>(), v[3].get<double>()};
  if (!(e.xmax > e.xmin) || !(e.ymax > e.ymin)) fail(where, "extent is empty");
  return e;
}

Side parse_side(const std::string& s, const std::string& where) {
  if (s == "inside") return Side::Inside;
  if (s == "outside") return Side::Outside;
  fail(where, "expected \"inside\" or \"outside\"");
}

Domain parse_domain(const json& v, json& out, const std::string& where, int dim) {
  if (v.is_string()) {
    const std::string name = v.get<std::string>();
    out = name;
    if (dim != 2) fail(where, "domain presets are 2D");
    if (name == "unit_disk") return unit_disk();
    if (name == "unit_square") return unit_square();
    if (name == "disk_with_obstacles") return disk_with_obstacles();
    fail(where, "unknown domain preset '" + name + "'");
  }
  if (!v.is_array() || v.empty()) fail(where, "expected a preset name or a non-empty array of primitives");
  out = json::array();
  std::vector<Primitive> prims;
  for (std::size_t k = 0; k < v.size(); ++k) {
    const std::string at = where + "[" + std::to_string(k) + "]";
    json o;
    Section s(v[k], o, at);
    const std::string type = s.require<std::string>("type");
    if (type == "ball") {
      s.allow({"type", "center", "radius", "side"});
      Ball b;
      if (!s.has("center")) fail(s.path("center"), "missing required field");
      b.center = parse_point(s.raw("center"), s.path("center"), dim);
      o["center"] = s.raw("center");
      b.radius = s.require<double>("radius");
      if (!(b.radius > 0.0)) fail(s.path("radius"), "must be > 0");
      b.side = parse_side(s.get<std::string>("side", "inside"), s.path("side"));
      prims.emplace_back(b);
    } else if (type == "box") {
      s.allow({"type", "lo", "hi", "side"});
      Box b;
      if (!s.has("lo") || !s.has("hi")) fail(at, "box needs lo and hi");
      b.lo = parse_point(s.raw("lo"), s.path("lo"), dim);
      b.hi = parse_point(s.raw("hi"), s.path("hi"), dim);
      o["lo"] = s.raw("lo");
      o["hi"] = s.raw("hi");
      if (!(b.hi.x > b.lo.x && b.hi.y > b.lo.y && (dim == 2 || b.hi.z > b.lo.z))) fail(at, "box hi must exceed lo");
      b.side = parse_side(s.get<std::string>("side", "inside"), s.path("side"));
      prims.emplace_back(b);
    } else if (type == "segment") {
      s.allow({"type", "a", "b"});
      if (dim != 2) fail(at, "segments are 2D only");
      if (!s.has("a") || !s.has("b")) fail(at, "segment needs a and b");
      Segment seg{parse_point(s.raw("a"), s.path("a"), 2), parse_point(s.raw("b"), s.path("b"), 2)};
      o["a"] = s.raw("a");
      o["b"] = s.raw("b");
      prims.emplace_back(seg);
    } else {
      fail(s.path("type"), "unknown primitive '" + type + "'");
    }
    out.push_back(o);
  }
  try {
    return Domain(dim, std::move(prims));
  } catch (const Error& e) {
    fail(where, e.what());
  }
}

GridTexture parse_texture(Section& s, const std::filesystem::path& base, const Extent& fallback_extent) {
  if (s.has("file")) {
    s.allow({"type", "file"});
    std::filesystem::path file = s.require<std::string>("file");
    if (file.is_relative()) file = base / file;
    if (!std::filesystem::exists(file)) fail(s.path("file"), "texture file not found: " + file.string());
    try {
      GridTexture t = read_texture_csv(file);
      s.out("resolution") = {t.nx(), t.ny()};
      const Extent& e = t.extent();
      s.out("extent") = {e.xmin, e.ymin, e.xmax, e.ymax};
      return t;
    } catch (const IoError& e) {
      fail(s.path("file"), e.what());
    }
  }
  s.allow({"type", "resolution", "extent", "fill", "preset"});
  std::size_t nx = 16;
  std::size_t ny = 16;
  if (s.has("resolution")) {
    const json& r = s.raw("resolution");
    if (r.is_number_integer()) {
      nx = ny = r.get<std::size_t>();
    } else if (r.is_array() && r.size() == 2 && r[0].is_number_integer() && r[1].is_number_integer()) {
      nx = r[0].get<std::size_t>();
      ny = r[1].get<std::size_t>();
    } else {
      fail(s.path("resolution"), "expected an integer or [nx, ny]");
    }
  }
  if (nx < 1 || ny < 1) fail(s.path("resolution"), "must be >= 1");
  s.out("resolution") = {nx, ny};
  Extent extent = fallback_extent;
  if (s.has("extent")) extent = parse_extent(s.raw("extent"), s.path("extent"));
  s.out("extent") = {extent.xmin, extent.ymin, extent.xmax, extent.ymax};
  if (s.has("preset")) {
    const std::string preset = s.require<std::string>("preset");
    if (nx != ny || extent.xmin != -1.0 || extent.ymin != -1.0 || extent.xmax != 1.0 || extent.ymax != 1.0) {
      fail(s.path("preset"), "presets are square textures over [-1, 1]^2");
    }
    if (preset == "source_bumps") return reference_source(nx);
    if (preset == "sigma_bumps") return reference_sigma(nx);
    if (preset == "alpha_bumps") return reference_alpha(nx);
    fail(s.path("preset"), "unknown texture preset '" + preset + "'");
  }
  return GridTexture(nx, ny, extent, s.get<double>("fill", 0.0));
}

Field parse_field(const json& v, json& out, const std::string& where, const std::filesystem::path& base,
                  const Extent& extent) {
  if (v.is_number()) {
    out = {{"type", "constant"}, {"value", v.get<double>()}};
    return Field::constant(v.get<double>());
  }
  Section s(v, out, where);
  const std::string type = s.require<std::string>("type");
  if (type == "constant") {
    s.allow({"type", "value"});
    return Field::constant(s.require<double>("value"));
  }
  if (type == "texture") return Field::texture(parse_texture(s, base, extent));
  fail(s.path("type"), "expected \"constant\" or \"texture\"");
}

BoundaryCondition parse_boundary(const json& v, json& out, const std::string& where,
                                 const std::filesystem::path& base, const Extent& extent, const Domain& domain) {
  if (v.is_number()) {
    out = {{"type", "constant"}, {"value", v.get<double>()}};
    return BoundaryCondition::constant(v.get<double>());
  }
  Section s(v, out, where);
  const std::string type = s.require<std::string>("type");
  if (type == "constant") {
    s.allow({"type", "value"});
    return BoundaryCondition::constant(s.require<double>("value"));
  }
  if (type == "per_primitive") {
    s.allow({"type", "values"});
    if (!s.has("values") || !s.raw("values").is_array()) fail(s.path("values"), "expected an array");
    std::vector<double> values;
    for (const json& x : s.raw("values")) values.push_back(Section::convert<double>(x, s.path("values")));
    if (values.size() != domain.primitives().size()) {
      fail(s.path("values"), "needs one value per domain primitive (" + std::to_string(domain.primitives().size()) + ")");
    }
    s.out("values") = values;
    return BoundaryCondition::per_primitive(std::move(values));
  }
  if (type == "linear") {
    s.allow({"type", "offset", "slope"});
    const double offset = s.get<double>("offset", 0.0);
    Vec3 slope;
    if (s.has("slope")) slope = parse_point(s.raw("slope"), s.path("slope"), domain.dimension());
    s.out("slope") = domain.dimension() == 2 ? json{slope.x, slope.y} : json{slope.x, slope.y, slope.z};
    return BoundaryCondition::linear(offset, slope);
  }
  if (type == "texture") return BoundaryCondition::texture(parse_texture(s, base, extent));
  fail(s.path("type"), "expected constant, per_primitive, linear or texture");
}

PdeKind parse_kind(const std::string& s, const std::string& where) {
  if (s == "poisson") return PdeKind::Poisson;
  if (s == "screened") return PdeKind::ScreenedPoisson;
  if (s == "elliptic") return PdeKind::Elliptic;
  fail(where, "expected poisson, screened or elliptic");
}

ParamField parse_param(const std::string& s, const std::string& where) {
  if (s == "source") return ParamField::Source;
  if (s == "sigma") return ParamField::Sigma;
  if (s == "alpha") return ParamField::Alpha;
  if (s == "boundary") return ParamField::Boundary;
  fail(where, "expected source, sigma, alpha or boundary");
}

std::vector<ParamField> parse_params(Section& s, const char* key, std::vector<ParamField> fallback) {
  if (!s.has(key)) {
    json arr = json::array();
    for (ParamField f : fallback) arr.push_back(to_string(f));
    s.out(key) = arr;
    return fallback;
  }
  const json& v = s.raw(key);
  if (!v.is_array() || v.empty()) fail(s.path(key), "expected a non-empty array of field names");
  std::vector<ParamField> out;
  for (const json& x : v) out.push_back(parse_param(Section::convert<std::string>(x, s.path(key)), s.path(key)));
  s.out(key) = v;
  return out;
}

void check_param_exists(const PDEProblem& p, ParamField f, const std::string& where) {
  if (f == ParamField::Boundary && !p.boundary.differentiable()) {
    fail(where, "boundary parameters need a constant or texture boundary condition");
  }
  if (f == ParamField::Sigma && p.kind == PdeKind::Poisson) fail(where, "poisson problems have no sigma");
  if (f == ParamField::Alpha && p.kind != PdeKind::Elliptic) fail(where, "alpha is only used by elliptic problems");
}

void finish_problem(PDEProblem& p, bool auto_sigma_bar, const std::string& where) {
  if (p.kind == PdeKind::Elliptic && auto_sigma_bar) {
    try {
      p.sigma_bar = default_sigma_bar(p);
    } catch (const Error& e) {
      fail(where, e.what());
    }
  }
  try {
    p.validate();
  } catch (const Error& e) {
    fail(where, e.what());
  }
}

struct ProblemParse {
  PDEProblem problem;
  bool auto_sigma_bar = true;
};

ProblemParse parse_problem(const json& v, json& out, const std::string& where, const std::filesystem::path& base) {
  Section s(v, out, where);
  s.allow({"kind", "dimension", "domain", "source", "sigma", "alpha", "boundary", "sigma_bar", "epsilon", "max_steps",
           "radial_tolerance"});
  ProblemParse r;
  PDEProblem& p = r.problem;
  p.kind = parse_kind(s.get<std::string>("kind", "poisson"), s.path("kind"));
  const int dim = s.get<int>("dimension", 2);
  if (dim != 2 && dim != 3) fail(s.path("dimension"), "must be 2 or 3");
  if (s.has("domain")) {
    p.domain = parse_domain(s.raw("domain"), s.out("domain"), s.path("domain"), dim);
  } else {
    if (dim != 2) fail(s.path("domain"), "3D problems need an explicit domain");
    p.domain = unit_disk();
    s.out("domain") = "unit_disk";
  }
  const Bounds b = p.domain.bounds();
  const Extent extent{b.lo.x, b.lo.y, b.hi.x, b.hi.y};
  auto field = [&](const char* key, double fallback) {
    const json v = s.has(key) ? s.raw(key) : json(fallback);
    return parse_field(v, s.out(key), s.path(key), base, extent);
  };
  p.source = field("source", 0.0);
  p.sigma = field("sigma", 0.0);
  p.alpha = field("alpha", 1.0);
  p.boundary = parse_boundary(s.has("boundary") ? s.raw("boundary") : json(0.0), s.out("boundary"),
                              s.path("boundary"), base, extent, p.domain);
  const double eps = s.get<double>("epsilon", 1e-3 * p.domain.diameter());
  p.eps = EpsilonShell{eps};
  try {
    p.eps.validate(p.domain);
  } catch (const Error& e) {
    fail(s.path("epsilon"), e.what());
  }
  p.max_steps = s.get<int>("max_steps", 10000);
  if (p.max_steps < 1) fail(s.path("max_steps"), "must be >= 1");
  p.radial_tolerance = s.get<double>("radial_tolerance", kDefaultRadialTolerance);
  if (!(p.radial_tolerance > 0.0 && p.radial_tolerance < 1e-2)) fail(s.path("radial_tolerance"), "must lie in (0, 1e-2)");
  if (s.has("sigma_bar") && !(s.raw("sigma_bar").is_string() && s.raw("sigma_bar") == "auto")) {
    p.sigma_bar = s.require<double>("sigma_bar");
    if (!(p.sigma_bar > 0.0)) fail(s.path("sigma_bar"), "must be > 0");
    r.auto_sigma_bar = false;
  } else {
    s.out("sigma_bar") = "auto";
  }
  if (p.kind == PdeKind::ScreenedPoisson && !p.sigma.is_constant()) {
    fail(s.path("sigma"), "screened problems need a constant sigma; use kind elliptic for textures");
  }
  if (p.sigma.is_constant() && p.sigma.constant_value() < 0.0) fail(s.path("sigma"), "must be >= 0");
  finish_problem(p, r.auto_sigma_bar, where);
  if (p.kind == PdeKind::Elliptic) out["sigma_bar_value"] = p.sigma_bar;
  return r;
}

ExperimentKind parse_experiment(const std::string& s, const std::string& where) {
  if (s == "source") return ExperimentKind::Source;
  if (s == "screening") return ExperimentKind::Screening;
  if (s == "diffusion") return ExperimentKind::Diffusion;
  fail(where, "expected source, screening or diffusion");
}

void parse_optimizer_fields(Section& s, OptimizerConfig& o) {
  const std::string method = s.get<std::string>("method", to_string(o.method));
  if (method == "adam") {
    o.method = OptimizerMethod::Adam;
  } else if (method == "gradient_descent") {
    o.method = OptimizerMethod::GradientDescent;
  } else {
    fail(s.path("method"), "expected adam or gradient_descent");
  }
  o.step_size = s.get<double>("step_size", o.step_size);
  if (!(o.step_size > 0.0)) fail(s.path("step_size"), "must be > 0");
  o.iterations = s.get<int>("iterations", o.iterations);
  if (o.iterations < 1) fail(s.path("iterations"), "must be >= 1");
  o.walks = s.get<std::size_t>("walks", o.walks);
  if (o.walks < 1) fail(s.path("walks"), "must be >= 1");
  o.parameters = parse_params(s, "parameters", o.parameters);
  o.positivity = s.get<bool>("positivity", o.positivity);
  o.beta1 = s.get<double>("beta1", o.beta1);
  o.beta2 = s.get<double>("beta2", o.beta2);
  o.adam_epsilon = s.get<double>("adam_epsilon", o.adam_epsilon);
  o.snapshot_every = s.get<int>("snapshot_every", o.snapshot_every);
  try {
    o.validate();
  } catch (const ConfigError& e) {
    fail(s.path("optimizer"), e.what());
  }
}

}  // namespace

ExperimentConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  json& out = c.resolved;
  out = json::object();
  Section s(j, out, "");
  s.allow({"command", "seed", "threads", "output", "problem", "measurement", "walks", "validate", "optimize"});
  const std::string command = s.require<std::string>("command");
  if (command == "solve") {
    c.command = Command::Solve;
  } else if (command == "validate-grad") {
    c.command = Command::ValidateGrad;
  } else if (command == "optimize") {
    c.command = Command::Optimize;
  } else {
    fail("command", "expected solve, validate-grad or optimize");
  }
  c.seed = s.get<std::uint64_t>("seed", 1);
  c.threads = s.get<std::size_t>("threads", 1);
  if (c.threads < 1) fail("threads", "must be >= 1");
  c.output = s.get<std::string>("output", "out");
  c.walks = s.get<std::size_t>("walks", 1024);
  if (c.walks < 1) fail("walks", "must be >= 1");

  // An optimize experiment preset supplies the problem, reference and grid.
  std::optional<Experiment> preset;
  ExperimentScale scale;
  const json empty = json::object();
  const json& opt_in = s.has("optimize") ? s.raw("optimize") : empty;
  if (c.command == Command::Optimize && opt_in.is_object() && opt_in.contains("experiment")) {
    json tmp;
    Section os(opt_in, tmp, "optimize");
    const ExperimentKind kind = parse_experiment(os.require<std::string>("experiment"), "optimize.experiment");
    scale.grid = os.get<std::size_t>("grid", scale.grid);
    scale.texture = os.get<std::size_t>("texture", scale.texture);
    scale.walks = os.get<std::size_t>("walks", scale.walks);
    scale.reference_walks = os.get<std::size_t>("reference_walks", scale.reference_walks);
    scale.iterations = os.get<int>("iterations", scale.iterations);
    if (scale.grid < 2 || scale.texture < 4 || scale.walks < 1 || scale.reference_walks < 1 || scale.iterations < 1) {
      fail("optimize", "experiment grid >= 2, texture >= 4, walks, reference_walks, iterations >= 1");
    }
    if (s.has("problem")) fail("problem", "not allowed together with optimize.experiment");
    if (s.has("measurement")) fail("measurement", "not allowed together with optimize.experiment");
    preset = experiment_setup(kind, scale);
    c.measurement.nx = c.measurement.ny = scale.grid;
    c.reference_walks = scale.reference_walks;
  }

  if (preset) {
    c.problem = preset->initial;
    c.reference = preset->reference;
    c.optimizer = preset->optimizer;
    out["problem"] = {{"experiment_initial", true}};
  } else {
    if (!s.has("problem")) fail("problem", "missing required field");
    ProblemParse pp = parse_problem(s.raw("problem"), out["problem"], "problem", base_dir);
    c.problem = std::move(pp.problem);
    c.auto_sigma_bar = pp.auto_sigma_bar;
  }

  {
    json& mo = out["measurement"];
    mo = json::object();
    const json& min = s.has("measurement") ? s.raw("measurement") : empty;
    Section ms(min, mo, "measurement");
    ms.allow({"grid", "margin"});
    if (ms.has("grid")) {
      const json& g = ms.raw("grid");
      if (g.is_number_integer() && g.get<long long>() >= 1) {
        c.measurement.nx = c.measurement.ny = g.get<std::size_t>();
      } else if (g.is_array() && g.size() == 2 && g[0].is_number_integer() && g[1].is_number_integer() &&
                 g[0].get<long long>() >= 1 && g[1].get<long long>() >= 1) {
        c.measurement.nx = g[0].get<std::size_t>();
        c.measurement.ny = g[1].get<std::size_t>();
      } else {
        fail("measurement.grid", "expected a positive integer or [nx, ny]");
      }
    }
    mo["grid"] = {c.measurement.nx, c.measurement.ny};
    c.measurement.margin = ms.get<double>("margin", 2.0 * c.problem.eps.epsilon);
    if (c.measurement.margin < c.problem.eps.epsilon) {
      fail("measurement.margin", "must be at least epsilon so points avoid the epsilon shell");
    }
  }

  if (c.command == Command::ValidateGrad) {
    json& vo = out["validate"];
    vo = json::object();
    const json& vin = s.has("validate") ? s.raw("validate") : empty;
    Section vs(vin, vo, "validate");
    vs.allow({"parameters", "walks", "batches", "fd_step", "select_fraction", "fd_all", "tolerance"});
    GradCheckOptions& v = c.validate;
    v.fields = parse_params(vs, "parameters", {ParamField::Source});
    for (ParamField f : v.fields) check_param_exists(c.problem, f, "validate.parameters");
    v.walks = vs.get<std::size_t>("walks", v.walks);
    v.batches = vs.get<std::size_t>("batches", v.batches);
    if (v.batches < 2 || v.walks < v.batches) fail("validate.batches", "need 2 <= batches <= walks");
    v.fd_step = vs.get<double>("fd_step", v.fd_step);
    if (!(v.fd_step > 0.0)) fail("validate.fd_step", "must be > 0");
    v.select_fraction = vs.get<double>("select_fraction", v.select_fraction);
    if (!(v.select_fraction >= 0.0 && v.select_fraction < 1.0)) fail("validate.select_fraction", "must lie in [0, 1)");
    v.fd_all = vs.get<bool>("fd_all", v.fd_all);
    v.tolerance = vs.get<double>("tolerance", 0.0);
    if (v.tolerance < 0.0) fail("validate.tolerance", "must be >= 0 (0 selects the defaults)");
    v.threads = c.threads;
  } else if (s.has("validate")) {
    fail("validate", "only used by the validate-grad command");
  }

  if (c.command == Command::Optimize) {
    json& oo = out["optimize"];
    oo = json::object();
    Section os(opt_in, oo, "optimize");
    if (preset) {
      os.allow({"experiment", "grid", "texture", "walks", "reference_walks", "iterations", "method", "step_size",
                "parameters", "positivity", "auto_sigma_bar", "beta1", "beta2", "adam_epsilon", "snapshot_every"});
      oo["experiment"] = opt_in.at("experiment");
      oo["grid"] = c.measurement.nx;
      oo["texture"] = scale.texture;
      oo["reference_walks"] = c.reference_walks;
    } else {
      os.allow({"reference", "reference_walks", "method", "step_size", "iterations", "walks", "parameters",
                "positivity", "auto_sigma_bar", "beta1", "beta2", "adam_epsilon", "snapshot_every"});
    }
    OptimizerConfig& o = c.optimizer;
    parse_optimizer_fields(os, o);
    o.auto_sigma_bar = os.get<bool>("auto_sigma_bar", c.auto_sigma_bar);
    o.threads = c.threads;
    for (ParamField f : o.parameters) check_param_exists(c.problem, f, "optimize.parameters");
    if (!preset) {
      if (!os.has("reference")) fail("optimize.reference", "missing: fields that differ in the reference problem");
      // The reference problem is the problem with the listed fields replaced.
      json merged = s.raw("problem");
      const json& ref = os.raw("reference");
      if (!ref.is_object()) fail("optimize.reference", "expected an object of problem fields");
      for (auto it = ref.begin(); it != ref.end(); ++it) merged[it.key()] = it.value();
      json ref_out;
      ProblemParse rp = parse_problem(merged, ref_out, "optimize.reference", base_dir);
      oo["reference"] = ref_out;
      c.reference = std::move(rp.problem);
      c.reference_walks = os.get<std::size_t>("reference_walks", 10 * o.walks);
      if (c.reference_walks < 1) fail("optimize.reference_walks", "must be >= 1");
    }
  } else if (s.has("optimize")) {
    fail("optimize", "only used by the optimize command");
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error in " + path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path());
}

}  // namespace dwos
