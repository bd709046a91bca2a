#include <openssl/evp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "schottky_spectral/congruence.hpp"
#include "schottky_spectral/schottky.hpp"
#include "schottky_spectral/spectral.hpp"
#include "schottky_spectral/transfer.hpp"

namespace fs = std::filesystem;
namespace ss = schottky_spectral;
using json = nlohmann::json;

namespace {

struct RunConfig {
  std::string command;
  std::string input;
  long long n = 1;
  double tau = 0.05;
  double beta = 0.55;
  int basis = 0;  // <= 0 selects the cutoff automatically
  std::string region;
  double step = 0.05;
  double radius = 10;
  int max_len = 8;
  double tol = 1e-10;
  int threads = 1;
  std::string out = "out";
  std::string label;
  bool classical = false;
  unsigned seed = 1;

  json to_json() const {
    return {{"command", command}, {"input", input},   {"n", n},           {"tau", tau},
            {"beta", beta},       {"basis", basis},   {"region", region}, {"step", step},
            {"radius", radius},   {"max_len", max_len}, {"tol", tol},     {"threads", threads},
            {"classical", classical}, {"seed", seed}};
  }
};

std::string sha256_hex(const std::string& text) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  EVP_DigestUpdate(ctx, text.data(), text.size());
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

class Output {
 public:
  explicit Output(const RunConfig& cfg) : cfg_(cfg) {
    const json c = cfg.to_json();
    const std::string label = cfg.label.empty() ? sha256_hex(c.dump()).substr(0, 12) : cfg.label;
    dir_ = fs::path(cfg.out) / cfg.command / label;
  }

  void write_report(const json& result, const std::vector<std::string>& csv_header = {},
                    const std::vector<std::vector<double>>& csv_rows = {}) {
    fs::create_directories(dir_);
    const json c = cfg_.to_json();
    json cfg_doc = {{"config", c}, {"content_hash", sha256_hex(c.dump())}};
    write(dir_ / "config.json", cfg_doc.dump(2) + "\n");
    json body = {{"config", c}, {"result", result}};
    body["content_hash"] = sha256_hex(json({{"config", c}, {"result", result}}).dump());
    write(dir_ / "report.json", body.dump(2) + "\n");
    if (!csv_header.empty()) {
      std::ostringstream os;
      os << std::setprecision(17);
      for (std::size_t i = 0; i < csv_header.size(); ++i) os << (i ? "," : "") << csv_header[i];
      os << "\n";
      for (const auto& row : csv_rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
        os << "\n";
      }
      const std::string data = os.str();
      const std::string head = "# config: " + c.dump() + "\n# content_hash: " + sha256_hex(c.dump() + data) + "\n";
      write(dir_ / "grid.csv", head + data);
    }
  }
  const fs::path& dir() const { return dir_; }

 private:
  static void write(const fs::path& p, const std::string& s) {
    std::ofstream out(p);
    if (!out) throw ss::Error(ss::Errc::io, "cannot write " + p.string());
    out << s;
  }
  const RunConfig& cfg_;
  fs::path dir_;
};

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> v;
  std::stringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    try {
      v.push_back(std::stod(tok));
    } catch (...) {
      throw ss::Error(ss::Errc::parameter_range, "cannot parse region component '" + tok + "'");
    }
  }
  return v;
}

ss::AssembleOptions assemble_options(const RunConfig& c) {
  ss::AssembleOptions o;
  o.threads = c.threads;
  return o;
}

ss::SchottkyData load(const RunConfig& c) {
  if (c.input.empty()) throw ss::Error(ss::Errc::io, "--input is required");
  return ss::load_schottky(c.input);
}

int cmd_validate(const RunConfig& c) {
  if (c.input.empty()) throw ss::Error(ss::Errc::io, "--input is required");
  const ss::SchottkyData d = ss::read_schottky_file(c.input);
  const ss::ValidationReport r = ss::validate(d);
  json res = r.to_json();
  res["integral"] = d.integral;
  res["L_Gamma"] = d.max_boundary_length();
  Output(c).write_report(res);
  std::cout << (r.pass ? "PASS" : "FAIL") << " min_gap=" << r.min_gap << " residual=" << r.max_residual << "\n";
  for (const auto& f : r.failures) std::cout << "  " << f << "\n";
  return r.pass ? 0 : 2;
}

int cmd_delta(const RunConfig& c) {
  const ss::SchottkyData d = load(c);
  const ss::DeltaEstimate e = ss::estimate_delta(d, c.basis, c.tol, assemble_options(c));
  json res = {{"delta", e.delta},
              {"delta_det", e.delta_det},
              {"eigen_residual", e.eigen_residual},
              {"eigensolver_fallback", e.fallback},
              {"M", e.M}};
  Output(c).write_report(res);
  std::cout << std::setprecision(17) << e.delta << "\n";
  return 0;
}

std::function<ss::cplx(ss::cplx)> make_function(const RunConfig& c, const ss::SchottkyData& d,
                                                 const ss::CongruenceContext& ctx,
                                                 std::unique_ptr<ss::ZetaTauN>& holder) {
  const auto opt = assemble_options(c);
  const int M = c.basis > 0 ? c.basis : ss::select_basis_degree(d, 1e-8, opt).M;
  if (c.classical) {
    return [&d, opt, M](ss::cplx s) {
      return ss::fredholm_det(ss::assemble_classical(d, s, ss::RepDescriptor::trivial(), M, opt));
    };
  }
  holder = std::make_unique<ss::ZetaTauN>(d, ctx, c.tau, M, opt);
  ss::ZetaTauN* z = holder.get();
  return [z](ss::cplx s) { return (*z)(s); };
}

int cmd_zeros(const RunConfig& c) {
  const ss::SchottkyData d = load(c);
  const ss::CongruenceContext ctx = ss::build_context(d, c.n);
  std::unique_ptr<ss::ZetaTauN> holder;
  auto f = make_function(c, d, ctx, holder);
  const std::vector<double> r = parse_list(c.region.empty() ? "0.1,1.1,-0.5,0.5" : c.region);
  ss::FindOptions fo;
  fo.tol = c.tol;
  ss::ZeroReport rep;
  if (r.size() == 4) {
    rep = ss::find_zeros(f, ss::Rect{r[0], r[1], r[2], r[3]}, fo);
  } else if (r.size() == 3) {
    const ss::Circle circ{{r[0], r[1]}, r[2]};
    const ss::Rect box{r[0] - r[2] * 1.0101, r[0] + r[2] * 1.0087, r[1] - r[2] * 1.0113, r[1] + r[2] * 1.0071};
    rep = ss::find_zeros(f, box, fo);
    std::vector<ss::ZeroInfo> inside;
    for (const auto& z : rep.zeros)
      if (std::abs(z.z - circ.c) < circ.R) inside.push_back(z);
    rep.zeros = inside;
    rep.region = circ;
    rep.argument_principle = ss::argument_count(f, circ);
    rep.jensen_bound = ss::jensen_rhs(f, circ.c, circ.R).value;
  } else {
    throw ss::Error(ss::Errc::parameter_range, "--region must be x0,x1,y0,y1 or cx,cy,r");
  }
  std::vector<std::vector<double>> rows;
  for (const auto& z : rep.zeros) {
    const double lam = z.z.real() > 0.5 ? (z.z * (1.0 - z.z)).real() : NAN;
    rows.push_back({z.z.real(), z.z.imag(), static_cast<double>(z.multiplicity), lam});
  }
  Output(c).write_report(rep.to_json(), {"re_s", "im_s", "multiplicity", "lambda"}, rows);
  std::cout << std::setprecision(12);
  for (const auto& z : rep.zeros) std::cout << z.z.real() << " " << z.z.imag() << " x" << z.multiplicity << "\n";
  return 0;
}

int cmd_zeta_grid(const RunConfig& c) {
  const ss::SchottkyData d = load(c);
  const ss::CongruenceContext ctx = ss::build_context(d, c.n);
  std::unique_ptr<ss::ZetaTauN> holder;
  auto f = make_function(c, d, ctx, holder);
  const std::vector<double> r = parse_list(c.region.empty() ? "0.5,2,0,0" : c.region);
  if (r.size() != 4) throw ss::Error(ss::Errc::parameter_range, "--region must be x0,x1,y0,y1");
  if (!(c.step > 0)) throw ss::Error(ss::Errc::parameter_range, "--step must be positive");
  std::vector<std::vector<double>> rows;
  const long nx = std::lround((r[1] - r[0]) / c.step), ny = std::lround((r[3] - r[2]) / c.step);
  for (long i = 0; i <= nx; ++i)
    for (long j = 0; j <= ny; ++j) {
      const ss::cplx s(r[0] + i * c.step, r[2] + j * c.step);
      const ss::cplx v = f(s);
      rows.push_back({s.real(), s.imag(), v.real(), v.imag(), std::log10(std::abs(v))});
    }
  Output(c).write_report({{"points", rows.size()}}, {"re_s", "im_s", "re_zeta", "im_zeta", "log10_abs_zeta"},
                         rows);
  std::cout << rows.size() << " grid points\n";
  return 0;
}

int cmd_count(const RunConfig& c) {
  const ss::CountResult r = ss::count_Nn(c.n, c.radius);
  std::vector<std::vector<double>> rows;
  for (const auto& w : r.witnesses)
    rows.push_back({static_cast<double>(w[0]), static_cast<double>(w[1]), static_cast<double>(w[2]),
                    static_cast<double>(w[3])});
  Output(c).write_report({{"n", r.n}, {"R", r.R}, {"count", r.count}}, {"a", "b", "c", "d"}, rows);
  std::cout << r.count << "\n";
  return 0;
}

int cmd_audit(const RunConfig& c, bool tau_given) {
  const ss::SchottkyData d = load(c);
  if (!tau_given) {
    const ss::LemmaAudit a = ss::audit_lemmas(d, c.max_len);
    Output(c).write_report(a.to_json());
    std::cout << "contraction=" << a.contraction << " nesting=" << (a.nesting ? "ok" : "FAIL")
              << " block_slope=" << a.block_slope << "\n";
    return 0;
  }
  const ss::CongruenceContext ctx = ss::build_context(d, c.n);
  const double delta = ss::estimate_delta(d, c.basis, c.tol, assemble_options(c)).delta;
  const ss::PairAudit p = ss::audit_ptau(d, ctx, c.tau, delta);
  std::vector<std::vector<double>> rows;
  for (const auto& [ac, cnt] : p.buckets)
    rows.push_back({static_cast<double>(ac.first), static_cast<double>(ac.second), static_cast<double>(cnt),
                    std::ldexp(1.0, ac.first + ac.second) * static_cast<double>(c.n) * c.tau});
  json res = p.to_json();
  res["delta"] = delta;
  Output(c).write_report(res, {"a", "c", "count", "scaled"}, rows);
  std::cout << "pairs=" << p.pairs << " H=" << p.H_empirical << " ratio=" << p.bound_ratio << "\n";
  return 0;
}

int cmd_pipeline(const RunConfig& c) {
  const ss::SchottkyData d = load(c);
  ss::PipelineOptions po;
  po.M = c.basis;
  po.assemble = assemble_options(c);
  const ss::PipelineReport r = ss::multiplicity_pipeline(d, c.n, c.beta, po);
  std::vector<std::vector<double>> rows;
  for (const auto& z : r.zeros) rows.push_back({z.s.real(), z.s.imag(), static_cast<double>(z.multiplicity), z.lambda});
  Output(c).write_report(r.to_json(), {"re_s", "im_s", "multiplicity", "lambda"}, rows);
  std::cout << std::setprecision(12) << "delta=" << r.delta << " tau=" << r.tau << " regime="
            << (r.in_regime ? "in" : "out") << " jensen_bound=" << r.jensen_upper_bound
            << " argument_count=" << r.argument_count << " zeros=" << r.zeros.size() << "\n";
  for (const auto& z : r.zeros)
    std::cout << "  s=" << z.s.real() << (z.s.imag() < 0 ? "" : "+") << z.s.imag() << "i lambda=" << z.lambda
              << (z.persistent ? "" : " (not tau-stable)") << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  CLI::App app{"Schottky group symbolic dynamics, transfer operators and zeta functions"};
  app.require_subcommand(1, 1);
  std::vector<CLI::App*> subs;
  CLI::Option* tau_opt = nullptr;
  const std::pair<const char*, const char*> commands[] = {
      {"validate", "check disk geometry and generator pairing"},
      {"delta", "estimate the growth exponent"},
      {"zeros", "locate zeta zeros in a rectangle"},
      {"zeta-grid", "tabulate zeta over a grid"},
      {"count", "count congruence matrices in a norm ball"},
      {"audit", "word-geometry audits or pair audits at --tau"},
      {"pipeline", "zero multiplicity bound near 1/2"}};
  for (const auto& [name, about] : commands) {
    CLI::App* s = app.add_subcommand(name, about);
    s->add_option("--input", cfg.input, "Schottky data JSON file");
    s->add_option("--n", cfg.n, "congruence modulus");
    auto* t = s->add_option("--tau", cfg.tau, "block scale tau");
    if (std::string(name) == "audit") tau_opt = t;
    s->add_option("--beta", cfg.beta, "spectral gap parameter beta");
    s->add_option("--basis", cfg.basis, "Bergman basis degree cutoff M (0 = automatic)");
    s->add_option("--region", cfg.region, "x0,x1,y0,y1 or cx,cy,r");
    s->add_option("--step", cfg.step, "grid step");
    s->add_option("--radius", cfg.radius, "norm radius R for counting");
    s->add_option("--max-len", cfg.max_len, "maximal word length for audits");
    s->add_option("--tol", cfg.tol, "tolerance");
    s->add_option("--threads", cfg.threads, "worker thread cap");
    s->add_option("--out", cfg.out, "output directory");
    s->add_option("--label", cfg.label, "run label (default: config hash prefix)");
    s->add_option("--seed", cfg.seed, "seed for randomized sampling");
    s->add_flag("--classical", cfg.classical, "use det(I - L_s) of the classical operator");
    subs.push_back(s);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  for (CLI::App* s : subs)
    if (s->parsed()) cfg.command = s->get_name();
  try {
    if (cfg.command == "validate") return cmd_validate(cfg);
    if (cfg.command == "delta") return cmd_delta(cfg);
    if (cfg.command == "zeros") return cmd_zeros(cfg);
    if (cfg.command == "zeta-grid") return cmd_zeta_grid(cfg);
    if (cfg.command == "count") return cmd_count(cfg);
    if (cfg.command == "audit") return cmd_audit(cfg, tau_opt && tau_opt->count() > 0);
    if (cfg.command == "pipeline") return cmd_pipeline(cfg);
  } catch (const ss::Error& e) {
    std::cerr << "error (" << ss::errc_name(e.code()) << "): " << e.what() << "\n";
    return e.exit_code();
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error (io): " << e.what() << "\n";
    return 1;
  }
  return 1;
}
