#include "app.hpp"

#include "stratsense/costlab.hpp"
#include "stratsense/errors.hpp"
#include "stratsense/incentives.hpp"
#include "stratsense/model.hpp"
#include "stratsense/montecarlo.hpp"
#include "stratsense/properties.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace stratsense::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class IoFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

double parse_number(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw std::invalid_argument("not a number: '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (;;) {
    const std::size_t at = s.find(sep, start);
    parts.push_back(s.substr(start, at == std::string_view::npos ? std::string_view::npos
                                                                 : at - start));
    if (at == std::string_view::npos) return parts;
    start = at + 1;
  }
}

}  // namespace

std::vector<double> parse_grid(std::string_view text) {
  if (text.find(':') != std::string_view::npos) {
    const auto parts = split(text, ':');
    if (parts.size() != 3 && parts.size() != 4) {
      throw std::invalid_argument("grid must be lo:hi:count[:log]");
    }
    const double lo = parse_number(parts[0]);
    const double hi = parse_number(parts[1]);
    const double count = parse_number(parts[2]);
    if (count < 1 || count != std::floor(count) || count > 1e6) {
      throw std::invalid_argument("grid count must be a positive integer");
    }
    if (parts.size() == 4) {
      if (parts[3] != "log") throw std::invalid_argument("grid spacing must be 'log'");
      if (!(lo > 0.0) || !(hi > 0.0)) {
        throw std::invalid_argument("log grid bounds must be positive");
      }
      return log_grid(lo, hi, static_cast<int>(count));
    }
    return linear_grid(lo, hi, static_cast<int>(count));
  }
  std::vector<double> out;
  for (std::string_view p : split(text, ',')) out.push_back(parse_number(p));
  return out;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void OutputSet::add(std::string name, std::string contents) {
  files_.emplace_back(std::move(name), std::move(contents));
}

void OutputSet::commit(const fs::path& dir) const {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoFailure("cannot use output directory " + dir.string());
  }
  std::vector<fs::path> temps;
  auto discard = [&] {
    for (const auto& t : temps) fs::remove(t, ec);
  };
  for (const auto& [name, contents] : files_) {
    const fs::path tmp = dir / ("." + name + ".partial");
    temps.push_back(tmp);
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    os.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    os.close();
    if (!os) {
      discard();
      throw IoFailure("cannot write " + (dir / name).string());
    }
  }
  for (std::size_t i = 0; i < files_.size(); ++i) {
    fs::rename(temps[i], dir / files_[i].first, ec);
    if (ec) {
      discard();
      throw IoFailure("cannot rename into " + (dir / files_[i].first).string());
    }
  }
}

namespace {

struct Common {
  std::string config;
  std::string out = ".";
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "JSON system configuration")->required();
  sub->add_option("--out", c.out, "output directory (created if missing)");
}

std::string csv(const std::vector<std::string>& header,
                const std::vector<std::vector<double>>& rows) {
  std::string s;
  for (std::size_t i = 0; i < header.size(); ++i) s += (i ? "," : "") + header[i];
  s += '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) s += (i ? "," : "") + format_double(row[i]);
    s += '\n';
  }
  return s;
}

std::string grid_text(const std::vector<double>& g) {
  std::string s;
  for (std::size_t i = 0; i < g.size(); ++i) s += (i ? "," : "") + format_double(g[i]);
  return s;
}

void finish(OutputSet& files, const Common& c, const std::string& command, json parameters,
            std::ostream& out) {
  json outputs = json::array();
  for (const auto& f : files.files()) outputs.push_back(f.first);
  outputs.push_back("manifest.json");
  json manifest = {{"command", command},
                   {"config_path", c.config},
                   {"parameters", std::move(parameters)},
                   {"outputs", outputs},
                   {"tool_version", kToolVersion}};
  files.add("manifest.json", manifest.dump(2) + "\n");
  files.commit(c.out);
  for (const auto& f : files.files()) out << "wrote " << (fs::path(c.out) / f.first).string() << "\n";
}

// ---------------------------------------------------------------- commands

int cmd_fig2(const Common& c, const std::string& ehat_text, std::ostream& out) {
  const LoadedConfig cfg = load_config(c.config);
  const std::vector<double> grid = parse_grid(ehat_text);
  std::vector<std::vector<double>> rows;
  for (double r : grid) {
    const CostProfile prof = analyze(cfg.spec, cfg.mapping, {r});
    rows.push_back({r, prof.decomposition.f1, prof.decomposition.f2});
  }
  OutputSet files;
  files.add("fig2.csv", csv({"e_hat", "f1", "f2"}, rows));
  finish(files, c, "fig2", {{"ehat_grid", ehat_text}, {"rows", rows.size()}}, out);
  return kOk;
}

int cmd_fig3(const Common& c, const std::string& e_text, const std::string& ehat_text,
             std::ostream& out) {
  const LoadedConfig cfg = load_config(c.config);
  const std::vector<double> efforts = parse_grid(e_text);
  // The truthful points are added so every curve has its touching row.
  std::vector<double> grid = parse_grid(ehat_text);
  grid.insert(grid.end(), efforts.begin(), efforts.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  std::vector<CostProfile> profiles;
  profiles.reserve(grid.size());
  for (double r : grid) profiles.push_back(analyze(cfg.spec, cfg.mapping, {r}));
  std::vector<std::vector<double>> rows;
  for (double e : efforts) {
    const double s2 = cfg.mapping.sigma2(e);
    for (const CostProfile& prof : profiles) {
      rows.push_back({e, prof.reported_effort, prof.decomposition.expected_cost(s2),
                      prof.j_star});
    }
  }
  OutputSet files;
  files.add("fig3.csv", csv({"e", "e_hat", "expected_J", "j_star"}, rows));
  finish(files, c, "fig3",
         {{"e_grid", e_text}, {"ehat_grid", ehat_text}, {"ehat_points", grid_text(grid)},
          {"rows", rows.size()}},
         out);
  return kOk;
}

struct McArgs {
  double e = 1.0;
  double ehat = 1.0;
  std::uint64_t samples = 100000;
  std::uint64_t seed = 7;
  int horizon = -1;
};

int cmd_mc_validate(const Common& c, const McArgs& a, std::ostream& out) {
  LoadedConfig cfg = load_config(c.config);
  if (a.samples < 2) throw ConfigError("samples", "--samples must be at least 2");
  const int horizon = a.horizon >= 0 ? a.horizon : std::min(cfg.spec.N, 50);
  cfg.spec.N = horizon;

  const CostProfile prof = analyze(cfg.spec, cfg.mapping, {a.ehat});
  const CostMoments exact = cost_moments(prof, cfg.mapping, {a.e});
  const MCReport mc = mc_moments(cfg.spec, cfg.mapping, {a.e}, {a.ehat}, a.samples, a.seed);
  const double z_mean = (mc.mean_cost - exact.expected_cost) / mc.std_error_mean;
  const double z_var = (mc.var_cost - exact.variance) / mc.std_error_var;
  const bool pass = std::abs(mc.mean_cost - exact.expected_cost) <= 3.0 * mc.std_error_mean &&
                    std::abs(mc.var_cost - exact.variance) <= 3.0 * mc.std_error_var;

  json report = {
      {"e", a.e},
      {"e_hat", a.ehat},
      {"horizon", horizon},
      {"samples", a.samples},
      {"seed", a.seed},
      {"analytic", {{"E_J", exact.expected_cost}, {"Var_J", exact.variance}}},
      {"sampled",
       {{"mean", mc.mean_cost},
        {"var", mc.var_cost},
        {"se_mean", mc.std_error_mean},
        {"se_var", mc.std_error_var}}},
      {"z_mean", z_mean},
      {"z_var", z_var},
      {"pass", pass},
  };
  OutputSet files;
  files.add("mc_validate.json", report.dump(2) + "\n");
  finish(files, c, "mc-validate",
         {{"e", a.e}, {"e_hat", a.ehat}, {"samples", a.samples}, {"seed", a.seed},
          {"horizon", horizon}},
         out);
  out << (pass ? "PASS" : "FAIL") << " mean z=" << format_double(z_mean)
      << " var z=" << format_double(z_var) << "\n";
  return pass ? kOk : kCheckFailed;
}

struct AuditArgs {
  std::string scheme = "p";
  double a = 1000.0;
  double b_e = 1.0;
  double b_j = 1.0;
  double anchor = 1.0;
  double margin = 1e-3;
  double fd_step = 0.0;
};

json audit_json(const TruthfulnessAudit& au) {
  return {{"target", au.target == AuditTarget::p_star ? "p_star" : "expected_payment"},
          {"anchor_e", au.anchor_e},
          {"fd_step", au.fd_step},
          {"first_deriv", au.first_deriv},
          {"second_deriv", au.second_deriv},
          {"utility_first_deriv", au.utility_first_deriv},
          {"tol_grad", au.tol_grad},
          {"tol_curv", au.tol_curv},
          {"verdict", std::string(verdict_name(au.verdict))}};
}

int cmd_audit(const Common& c, const AuditArgs& a, std::ostream& out) {
  const LoadedConfig cfg = load_config(c.config);
  json report = {{"scheme", a.scheme}, {"a", a.a}, {"b_e", a.b_e}, {"anchor_e", a.anchor}};
  TruthfulnessAudit au;
  if (a.scheme == "p0") {
    const PaymentScheme scheme = PaymentScheme::static_p0(a.a, a.b_j, a.b_e);
    au = audit_truthfulness(cfg.spec, cfg.mapping, scheme, {a.anchor}, a.fd_step);
    report["b_j"] = a.b_j;
  } else {
    DesignOptions opts;
    opts.beta0 = a.b_j;
    opts.fd_step = a.fd_step;
    const BjDesign d = design_bj(cfg.spec, cfg.mapping, {a.anchor}, a.a, a.b_e, a.margin, opts);
    const AuditTarget target =
        d.strategic_channel_unused ? AuditTarget::p_star : AuditTarget::expected_payment;
    au = audit_truthfulness(cfg.spec, cfg.mapping, d.scheme, {a.anchor}, a.fd_step, target);
    report["design"] = {{"beta0", d.scheme.b_j.beta0},
                        {"beta1", d.scheme.b_j.beta1},
                        {"beta2", d.scheme.b_j.beta2},
                        {"doublings", d.doublings},
                        {"residual", d.residual},
                        {"curvature", d.curvature},
                        {"curvature_margin", a.margin},
                        {"variance", d.variance},
                        {"variance_slope", d.variance_slope},
                        {"f2", d.f2},
                        {"f2_slope", d.f2_slope},
                        {"strategic_channel_unused", d.strategic_channel_unused}};
  }
  report["audit"] = audit_json(au);

  OutputSet files;
  files.add("audit.json", report.dump(2) + "\n");
  finish(files, c, "audit",
         {{"scheme", a.scheme}, {"a", a.a}, {"b_e", a.b_e}, {"b_j", a.b_j},
          {"anchor_e", a.anchor}, {"curvature_margin", a.margin}, {"fd_step", a.fd_step}},
         out);
  out << "verdict " << verdict_name(au.verdict) << " d1=" << format_double(au.first_deriv)
      << " d2=" << format_double(au.second_deriv) << "\n";
  if (a.scheme == "p" && au.verdict != Verdict::local_max) return kCheckFailed;
  return kOk;
}

int cmd_props(const Common& c, const std::string& e_text, const std::string& ehat_text,
              double fixed, std::ostream& out) {
  const LoadedConfig cfg = load_config(c.config);
  PropertyOptions opts = default_property_options();
  opts.true_grid = parse_grid(e_text);
  opts.reported_grid = parse_grid(ehat_text);
  opts.fixed_reported = fixed;
  const std::vector<PropertyResult> results = run_property_suite(cfg.spec, cfg.mapping, opts);

  bool all = true;
  json checks = json::array();
  for (const auto& r : results) {
    all = all && r.pass;
    checks.push_back({{"name", r.name}, {"pass", r.pass}, {"detail", r.detail}});
  }
  OutputSet files;
  files.add("props.json", json({{"checks", checks}, {"pass", all}}).dump(2) + "\n");
  finish(files, c, "props", {{"e_grid", e_text}, {"ehat_grid", ehat_text}, {"e_hat", fixed}},
         out);
  for (const auto& r : results) {
    out << (r.pass ? "PASS " : "FAIL ") << r.name << "  " << r.detail << "\n";
  }
  return all ? kOk : kCheckFailed;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Strategic-sensor LQG cost analysis and payment audits"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  Common common;
  std::string default_ehat = "0.1:10:64:log";

  std::string fig2_ehat = default_ehat;
  CLI::App* fig2 = app.add_subcommand("fig2", "f1 and f2 over a reported-effort grid");
  add_common(fig2, common);
  fig2->add_option("--ehat-grid", fig2_ehat, "reported-effort grid");

  std::string fig3_e = "0.5,1,2", fig3_ehat = default_ehat;
  CLI::App* fig3 = app.add_subcommand("fig3", "E[J] curves for fixed true efforts, with J*");
  add_common(fig3, common);
  fig3->add_option("--e-grid", fig3_e, "true efforts, one curve each");
  fig3->add_option("--ehat-grid", fig3_ehat, "reported-effort grid");

  McArgs mc;
  CLI::App* mcv = app.add_subcommand("mc-validate", "Monte Carlo check of E[J] and Var[J]");
  add_common(mcv, common);
  mcv->add_option("--e", mc.e, "true effort");
  mcv->add_option("--ehat", mc.ehat, "reported effort");
  mcv->add_option("--samples", mc.samples, "trajectory count");
  mcv->add_option("--seed", mc.seed, "noise seed");
  mcv->add_option("--horizon", mc.horizon, "horizon override (default min(N, 50))");

  AuditArgs au;
  CLI::App* aud = app.add_subcommand("audit", "local truthfulness audit of a payment scheme");
  add_common(aud, common);
  aud->add_option("--scheme", au.scheme, "p0 (static) or p (designed b_J)")
      ->check(CLI::IsMember({"p0", "p"}));
  aud->add_option("--a", au.a, "payment offset a");
  aud->add_option("--b-e", au.b_e, "effort weight b_e");
  aud->add_option("--b-j", au.b_j, "b_J for p0; b_J(anchor) for p");
  aud->add_option("--anchor-e", au.anchor, "true effort to audit at");
  aud->add_option("--curvature-margin", au.margin, "required -d2E[p]/de_hat2 for p");
  aud->add_option("--fd-step", au.fd_step, "finite-difference step (0: automatic)");

  std::string props_e = "0.2:5:32", props_ehat = default_ehat;
  double props_fixed = 1.0;
  CLI::App* props = app.add_subcommand("props", "structural property suite");
  add_common(props, common);
  props->add_option("--e-grid", props_e, "true-effort grid");
  props->add_option("--ehat-grid", props_ehat, "reported-effort grid");
  props->add_option("--ehat", props_fixed, "reported effort held fixed on the e sweep");

  try {
    std::vector<std::string> args;
    for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
    app.parse(std::move(args));
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kIoOrConfig;
  }

  try {
    if (*fig2) return cmd_fig2(common, fig2_ehat, out);
    if (*fig3) return cmd_fig3(common, fig3_e, fig3_ehat, out);
    if (*mcv) return cmd_mc_validate(common, mc, out);
    if (*aud) return cmd_audit(common, au, out);
    if (*props) return cmd_props(common, props_e, props_ehat, props_fixed, out);
  } catch (const ConfigError& e) {
    err << "config error [" << e.field() << "]: " << e.what() << "\n";
    return kIoOrConfig;
  } catch (const DesignError& e) {
    err << "design did not converge: " << e.what() << "\n";
    return kDesignFailed;
  } catch (const IoFailure& e) {
    err << "io error: " << e.what() << "\n";
    return kIoOrConfig;
  } catch (const std::invalid_argument& e) {
    err << "bad argument: " << e.what() << "\n";
    return kIoOrConfig;
  } catch (const DomainError& e) {
    err << "domain error: " << e.what() << "\n";
    return kIoOrConfig;
  } catch (const InternalError& e) {
    err << "cross-check failed: " << e.what() << "\n";
    return kCheckFailed;
  }
  return kIoOrConfig;
}

}  // namespace stratsense::cli
