#pragma once

// Text formats: CSV datasets, JSON run configuration, and posterior files as
// one JSON header line followed by one JSON record per retained sample.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dnnmp/errors.hpp"
#include "dnnmp/mcmc.hpp"
#include "dnnmp/model.hpp"
#include "dnnmp/simulate.hpp"

namespace dnnmp::io {

using nlohmann::json;
namespace fs = std::filesystem;

// ---- small helpers -----------------------------------------------------

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

/// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string read_text(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot open " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// Writes atomically-ish: refuses to replace an existing file unless forced.
inline void write_text(const fs::path &p, const std::string &text, bool force) {
  if (!force && fs::exists(p)) throw ConfigError(p.string() + " exists; pass --force to overwrite");
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + p.string());
  out << text;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto k = line.find(',', start);
    out.push_back(line.substr(start, k == std::string_view::npos ? std::string_view::npos : k - start));
    if (k == std::string_view::npos) break;
    start = k + 1;
  }
  for (auto &f : out) {
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
  }
  return out;
}

inline bool parse_double(std::string_view s, double &v) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(v);
}

inline bool parse_count(std::string_view s, int &v) {
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec == std::errc() && res.ptr == s.data() + s.size()) return true;
  // accept integral floating text such as "3.0"
  double d;
  if (!parse_double(s, d) || d != std::floor(d) || std::abs(d) > 2e9) return false;
  v = static_cast<int>(d);
  return true;
}

// ---- datasets ----------------------------------------------------------

/// Parses coord1,coord2,count[,covariate_1..covariate_k] with a header.
/// Every malformed row is reported, not just the first.
inline Dataset parse_dataset_csv(const std::string &text, const std::string &origin = "input") {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw DataError(origin + ": empty file");
  ++lineno;
  const auto header = split_fields(line);
  if (header.size() < 3 || header[0] != "coord1" || header[1] != "coord2" || header[2] != "count")
    throw DataError(origin + ": header must start with coord1,coord2,count");
  const std::size_t k = header.size() - 3;
  for (std::size_t c = 0; c < k; ++c)
    if (header[3 + c] != "covariate_" + std::to_string(c + 1))
      throw DataError(origin + ": covariate columns must be named covariate_1..covariate_k");
  Dataset d;
  std::vector<std::vector<double>> cov;
  std::ostringstream errors;
  std::size_t n_errors = 0;
  const auto fail = [&](const std::string &msg) {
    if (n_errors < 50) errors << "\n  line " << lineno << ": " << msg;
    ++n_errors;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_fields(line);
    if (f.size() != header.size()) {
      fail("expected " + std::to_string(header.size()) + " fields, found " + std::to_string(f.size()));
      continue;
    }
    Location s;
    int y = 0;
    bool ok = true;
    if (!parse_double(f[0], s.x) || !parse_double(f[1], s.y)) {
      fail("coordinates must be finite numbers");
      ok = false;
    }
    if (!parse_count(f[2], y) || y < 0) {
      fail("count must be a nonnegative integer, got '" + std::string(f[2]) + "'");
      ok = false;
    }
    std::vector<double> row(k);
    for (std::size_t c = 0; c < k; ++c) {
      if (!parse_double(f[3 + c], row[c])) {
        fail("covariate_" + std::to_string(c + 1) + " is not a finite number");
        ok = false;
      }
    }
    if (!ok) continue;
    d.sites.push_back(s);
    d.counts.push_back(y);
    cov.push_back(std::move(row));
  }
  if (n_errors > 0) {
    std::ostringstream os;
    os << origin << ": " << n_errors << " malformed row(s):" << errors.str();
    throw DataError(os.str());
  }
  d.covariates.resize(static_cast<Eigen::Index>(cov.size()), static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < cov.size(); ++i)
    for (std::size_t c = 0; c < k; ++c) d.covariates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = cov[i][c];
  try {
    d.validate();
  } catch (const DataError &e) {
    throw DataError(origin + ": " + e.what());
  }
  return d;
}

inline Dataset read_dataset_csv(const fs::path &p) { return parse_dataset_csv(read_text(p), p.string()); }

inline std::string dataset_csv(const Dataset &d) {
  std::ostringstream os;
  os << "coord1,coord2,count";
  for (Eigen::Index c = 0; c < d.covariates.cols(); ++c) os << ",covariate_" << (c + 1);
  os << '\n';
  for (std::size_t i = 0; i < d.size(); ++i) {
    os << format_double(d.sites[i].x) << ',' << format_double(d.sites[i].y) << ',' << d.counts[i];
    for (Eigen::Index c = 0; c < d.covariates.cols(); ++c)
      os << ',' << format_double(d.covariates(static_cast<Eigen::Index>(i), c));
    os << '\n';
  }
  return os.str();
}

/// Digest of the canonical CSV rendering; binds posterior files to data.
inline std::string dataset_digest(const Dataset &d) { return hex64(fnv1a64(dataset_csv(d))); }

// ---- configuration -----------------------------------------------------

struct SimulateSection {
  std::string kind = "skew";  ///< skew | sglmm | nnmp
  SkewFieldConfig skew;
  SglmmConfig sglmm;
  // nnmp forward simulation
  std::size_t nnmp_sites = 800;
  double nnmp_lambda = 5.0;
  double nnmp_phi = 0.1;
  double nnmp_zeta = 0.1;
  Eigen::Vector3d nnmp_gamma{-1.5, 0.0, 0.0};
  double nnmp_kappa2 = 1.0;
  std::uint64_t seed = 1;
};

struct RunConfig {
  ModelSpec model;
  ChainConfig mcmc;
  std::uint64_t ordering_seed = 7;
  int chains = 1;
  double holdout = 0.0;
  std::uint64_t split_seed = 11;
  fs::path train_path;
  fs::path test_path;
  fs::path output = "out";
  int draws_per_sample = 1;
  std::uint64_t predict_seed = 13;
  SimulateSection simulate;
  fs::path base_dir = ".";

  void validate() const {
    if (model.L < 1) throw ConfigError("model.L must be at least 1");
    if (!(mcmc.n_iter > mcmc.burnin && mcmc.burnin >= 0))
      throw ConfigError("mcmc requires n_iter > burnin >= 0");
    if (mcmc.thin < 1) throw ConfigError("mcmc.thin must be at least 1");
    if (chains < 1) throw ConfigError("chains must be at least 1");
    if (!(holdout >= 0.0 && holdout < 1.0)) throw ConfigError("holdout must lie in [0, 1)");
    if (draws_per_sample < 1) throw ConfigError("predict.draws_per_sample must be at least 1");
  }
};

namespace detail {

template <typename T>
T get_or(const json &j, const char *key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception &e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

inline void check_keys(const json &j, std::initializer_list<std::string_view> allowed, const std::string &where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto &[k, v] : j.items()) {
    bool known = false;
    for (auto a : allowed) known = known || a == k;
    if (!known) throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

inline std::pair<double, double> pair_of(const json &j, const char *key, std::pair<double, double> fallback) {
  if (!j.contains(key)) return fallback;
  const auto &v = j.at(key);
  if (!v.is_array() || v.size() != 2) throw ConfigError(std::string("prior '") + key + "' must be [shape, scale_or_rate]");
  return {v[0].get<double>(), v[1].get<double>()};
}

inline Eigen::VectorXd vector_of(const json &v, const std::string &what) {
  if (!v.is_array()) throw ConfigError(what + " must be an array");
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
  return out;
}

inline Eigen::MatrixXd matrix_of(const json &v, const std::string &what) {
  if (!v.is_array() || v.empty()) throw ConfigError(what + " must be a non-empty array of rows");
  const std::size_t n = v.size();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (!v[i].is_array() || v[i].size() != n) throw ConfigError(what + " must be square");
    for (std::size_t k = 0; k < n; ++k)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = v[i][k].get<double>();
  }
  return out;
}

}  // namespace detail

inline Priors parse_priors(const json &j) {
  using namespace detail;
  check_keys(j, {"phi", "zeta", "kappa2", "lambda", "r", "gamma_mean", "gamma_cov", "beta_mean", "beta_cov",
                 "beta_variance"},
             "model.priors");
  Priors p;
  auto [a, b] = pair_of(j, "phi", {p.phi.shape, p.phi.scale});
  p.phi = {a, b};
  std::tie(a, b) = pair_of(j, "zeta", {p.zeta.shape, p.zeta.scale});
  p.zeta = {a, b};
  std::tie(a, b) = pair_of(j, "kappa2", {p.kappa2.shape, p.kappa2.scale});
  p.kappa2 = {a, b};
  std::tie(a, b) = pair_of(j, "lambda", {p.lambda.shape, p.lambda.rate});
  p.lambda = {a, b};
  std::tie(a, b) = pair_of(j, "r", {p.r.shape, p.r.rate});
  p.r = {a, b};
  if (j.contains("gamma_mean")) {
    const Eigen::VectorXd m = vector_of(j.at("gamma_mean"), "gamma_mean");
    if (m.size() != 3) throw ConfigError("gamma_mean must have 3 entries");
    p.gamma_mean = m;
  }
  if (j.contains("gamma_cov")) {
    const Eigen::MatrixXd c = matrix_of(j.at("gamma_cov"), "gamma_cov");
    if (c.rows() != 3) throw ConfigError("gamma_cov must be 3 x 3");
    p.gamma_cov = c;
  }
  if (j.contains("beta_mean")) p.beta_mean = vector_of(j.at("beta_mean"), "beta_mean");
  if (j.contains("beta_cov")) p.beta_cov = matrix_of(j.at("beta_cov"), "beta_cov");
  p.default_beta_variance = get_or<double>(j, "beta_variance", p.default_beta_variance);
  if (!(p.default_beta_variance > 0.0)) throw ConfigError("beta_variance must be positive");
  return p;
}

inline json priors_json(const Priors &p) {
  json j;
  j["phi"] = {p.phi.shape, p.phi.scale};
  j["zeta"] = {p.zeta.shape, p.zeta.scale};
  j["kappa2"] = {p.kappa2.shape, p.kappa2.scale};
  j["lambda"] = {p.lambda.shape, p.lambda.rate};
  j["r"] = {p.r.shape, p.r.rate};
  j["gamma_mean"] = {p.gamma_mean[0], p.gamma_mean[1], p.gamma_mean[2]};
  json gc = json::array();
  for (int i = 0; i < 3; ++i) gc.push_back({p.gamma_cov(i, 0), p.gamma_cov(i, 1), p.gamma_cov(i, 2)});
  j["gamma_cov"] = gc;
  if (p.beta_mean.size() > 0) j["beta_mean"] = std::vector<double>(p.beta_mean.data(), p.beta_mean.data() + p.beta_mean.size());
  if (p.beta_cov.size() > 0) {
    json bc = json::array();
    for (Eigen::Index i = 0; i < p.beta_cov.rows(); ++i) {
      json row = json::array();
      for (Eigen::Index k = 0; k < p.beta_cov.cols(); ++k) row.push_back(p.beta_cov(i, k));
      bc.push_back(row);
    }
    j["beta_cov"] = bc;
  }
  j["beta_variance"] = p.default_beta_variance;
  return j;
}

inline RunConfig parse_config(const json &j, const fs::path &base_dir = ".") {
  using namespace detail;
  check_keys(j, {"model", "mcmc", "data", "holdout", "split_seed", "predict", "simulate", "output"}, "config");
  RunConfig c;
  c.base_dir = base_dir;
  const auto resolve = [&](const std::string &s) { return s.empty() ? fs::path() : fs::path(s).is_absolute() ? fs::path(s) : base_dir / s; };
  try {
    if (j.contains("model")) {
      const auto &m = j.at("model");
      check_keys(m, {"marginal", "copula", "L", "priors"}, "model");
      c.model.marginal = marginal_family_from_string(get_or<std::string>(m, "marginal", "poisson"));
      c.model.copula = copula_family_from_string(get_or<std::string>(m, "copula", "gaussian"));
      c.model.L = get_or<int>(m, "L", 10);
      if (m.contains("priors")) c.model.priors = parse_priors(m.at("priors"));
    }
    if (j.contains("mcmc")) {
      const auto &m = j.at("mcmc");
      check_keys(m, {"n_iter", "burnin", "thin", "seed", "ordering_seed", "adapt", "target_accept", "steps", "chains"},
                 "mcmc");
      c.mcmc.n_iter = get_or<int>(m, "n_iter", c.mcmc.n_iter);
      c.mcmc.burnin = get_or<int>(m, "burnin", c.mcmc.burnin);
      c.mcmc.thin = get_or<int>(m, "thin", c.mcmc.thin);
      c.mcmc.seed = get_or<std::uint64_t>(m, "seed", c.mcmc.seed);
      c.ordering_seed = get_or<std::uint64_t>(m, "ordering_seed", c.ordering_seed);
      c.mcmc.adapt = get_or<bool>(m, "adapt", c.mcmc.adapt);
      c.mcmc.target_accept = get_or<double>(m, "target_accept", c.mcmc.target_accept);
      c.chains = get_or<int>(m, "chains", c.chains);
      if (m.contains("steps")) {
        const auto &s = m.at("steps");
        check_keys(s, {"lambda", "r", "phi", "zeta", "beta"}, "mcmc.steps");
        c.mcmc.steps.lambda = get_or<double>(s, "lambda", c.mcmc.steps.lambda);
        c.mcmc.steps.r = get_or<double>(s, "r", c.mcmc.steps.r);
        c.mcmc.steps.phi = get_or<double>(s, "phi", c.mcmc.steps.phi);
        c.mcmc.steps.zeta = get_or<double>(s, "zeta", c.mcmc.steps.zeta);
        c.mcmc.steps.beta = get_or<double>(s, "beta", c.mcmc.steps.beta);
      }
    }
    if (j.contains("data")) {
      const auto &d = j.at("data");
      check_keys(d, {"train", "test"}, "data");
      c.train_path = resolve(get_or<std::string>(d, "train", ""));
      c.test_path = resolve(get_or<std::string>(d, "test", ""));
    }
    c.holdout = get_or<double>(j, "holdout", c.holdout);
    c.split_seed = get_or<std::uint64_t>(j, "split_seed", c.split_seed);
    c.output = resolve(get_or<std::string>(j, "output", "out"));
    if (j.contains("predict")) {
      const auto &p = j.at("predict");
      check_keys(p, {"draws_per_sample", "seed"}, "predict");
      c.draws_per_sample = get_or<int>(p, "draws_per_sample", c.draws_per_sample);
      c.predict_seed = get_or<std::uint64_t>(p, "seed", c.predict_seed);
    }
    if (j.contains("simulate")) {
      const auto &s = j.at("simulate");
      check_keys(s, {"kind", "seed", "sigma1", "sigma2", "gp_range", "lambda0", "grid", "n_sites", "beta",
                     "gp_sigma2", "phi", "zeta", "gamma", "kappa2", "lambda"},
                 "simulate");
      auto &sim = c.simulate;
      sim.kind = get_or<std::string>(s, "kind", sim.kind);
      if (sim.kind != "skew" && sim.kind != "sglmm" && sim.kind != "nnmp")
        throw ConfigError("simulate.kind must be skew, sglmm or nnmp");
      sim.seed = get_or<std::uint64_t>(s, "seed", sim.seed);
      sim.skew.seed = sim.sglmm.seed = sim.seed;
      sim.skew.sigma1 = get_or<double>(s, "sigma1", sim.skew.sigma1);
      sim.skew.sigma2 = get_or<double>(s, "sigma2", sim.skew.sigma2);
      sim.skew.lambda0 = get_or<double>(s, "lambda0", sim.skew.lambda0);
      const int grid = get_or<int>(s, "grid", 120);
      sim.skew.grid = sim.sglmm.grid = grid;
      const auto n = get_or<std::size_t>(s, "n_sites", 1000);
      sim.skew.n_sites = sim.sglmm.n_sites = sim.nnmp_sites = n;
      if (sim.kind == "skew") sim.skew.gp_range = get_or<double>(s, "gp_range", sim.skew.gp_range);
      if (sim.kind == "sglmm") {
        sim.sglmm.gp_range = get_or<double>(s, "gp_range", sim.sglmm.gp_range);
        sim.sglmm.gp_sigma2 = get_or<double>(s, "gp_sigma2", sim.sglmm.gp_sigma2);
        if (s.contains("beta")) {
          const Eigen::VectorXd b = vector_of(s.at("beta"), "simulate.beta");
          if (b.size() != 3) throw ConfigError("simulate.beta must have 3 entries");
          sim.sglmm.beta = b;
        }
      }
      sim.nnmp_lambda = get_or<double>(s, "lambda", sim.nnmp_lambda);
      sim.nnmp_phi = get_or<double>(s, "phi", sim.nnmp_phi);
      sim.nnmp_zeta = get_or<double>(s, "zeta", sim.nnmp_zeta);
      sim.nnmp_kappa2 = get_or<double>(s, "kappa2", sim.nnmp_kappa2);
      if (s.contains("gamma")) {
        const Eigen::VectorXd g = vector_of(s.at("gamma"), "simulate.gamma");
        if (g.size() != 3) throw ConfigError("simulate.gamma must have 3 entries");
        sim.nnmp_gamma = g;
      }
    }
  } catch (const json::exception &e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

inline RunConfig read_config(const fs::path &p) {
  json j;
  try {
    j = json::parse(read_text(p));
  } catch (const json::parse_error &e) {
    throw ConfigError(p.string() + ": " + e.what());
  } catch (const DataError &e) {
    throw ConfigError(e.what());
  }
  return parse_config(j, p.has_parent_path() ? p.parent_path() : fs::path("."));
}

// ---- posterior files ---------------------------------------------------

struct PosteriorHeader {
  ModelSpec model;
  std::uint64_t ordering_seed = 0;
  std::string data_digest;
  std::size_t n_sites = 0;
  std::vector<PosteriorSamples> chains;  ///< metadata only when read back; samples filled separately
};

inline json sample_json(const ModelState &s, int chain) {
  json j;
  j["chain"] = chain;
  j["lambda"] = s.lambda;
  j["beta"] = std::vector<double>(s.beta.data(), s.beta.data() + s.beta.size());
  j["r"] = s.r;
  j["phi"] = s.phi;
  j["zeta"] = s.zeta;
  j["gamma"] = {s.gamma[0], s.gamma[1], s.gamma[2]};
  j["kappa2"] = s.kappa2;
  j["o"] = s.o;
  return j;
}

inline ModelState sample_from_json(const json &j) {
  ModelState s;
  s.lambda = j.at("lambda").get<double>();
  const auto beta = j.at("beta").get<std::vector<double>>();
  s.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
  s.r = j.at("r").get<double>();
  s.phi = j.at("phi").get<double>();
  s.zeta = j.at("zeta").get<double>();
  const auto g = j.at("gamma").get<std::vector<double>>();
  if (g.size() != 3) throw DataError("posterior record: gamma must have 3 entries");
  s.gamma = Eigen::Vector3d(g[0], g[1], g[2]);
  s.kappa2 = j.at("kappa2").get<double>();
  s.o = j.at("o").get<std::vector<double>>();
  return s;
}

inline std::string posterior_text(const PosteriorHeader &h, const std::vector<PosteriorSamples> &chains) {
  json head;
  head["format"] = "dnnmp-posterior";
  head["version"] = 1;
  head["model"] = {{"marginal", std::string(to_string(h.model.marginal))},
                   {"copula", std::string(to_string(h.model.copula))},
                   {"L", h.model.L},
                   {"priors", priors_json(h.model.priors)}};
  head["ordering_seed"] = h.ordering_seed;
  head["data_digest"] = h.data_digest;
  head["n_sites"] = h.n_sites;
  json cj = json::array();
  for (const auto &c : chains) {
    json m;
    m["chain"] = c.chain;
    m["seed"] = c.seed;
    m["n_iter"] = c.n_iter;
    m["burnin"] = c.burnin;
    m["thin"] = c.thin;
    m["n_samples"] = c.samples.size();
    m["acceptance"] = c.acceptance;
    m["step_sizes"] = c.step_sizes;
    cj.push_back(m);
  }
  head["chains"] = cj;
  std::string out = head.dump() + "\n";
  for (const auto &c : chains)
    for (const auto &s : c.samples) out += sample_json(s, c.chain).dump() + "\n";
  return out;
}

struct PosteriorFile {
  PosteriorHeader header;
  std::vector<PosteriorSamples> chains;
  /// All samples pooled across chains in file order.
  PosteriorSamples pooled() const {
    PosteriorSamples p;
    for (const auto &c : chains) p.samples.insert(p.samples.end(), c.samples.begin(), c.samples.end());
    if (!chains.empty()) {
      p.seed = chains[0].seed;
      p.n_iter = chains[0].n_iter;
      p.burnin = chains[0].burnin;
      p.thin = chains[0].thin;
    }
    return p;
  }
};

inline PosteriorFile parse_posterior(const std::string &text, const std::string &origin = "posterior") {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError(origin + ": empty posterior file");
  PosteriorFile f;
  try {
    const json head = json::parse(line);
    if (head.value("format", "") != "dnnmp-posterior") throw DataError(origin + ": not a posterior file");
    const auto &m = head.at("model");
    f.header.model.marginal = marginal_family_from_string(m.at("marginal").get<std::string>());
    f.header.model.copula = copula_family_from_string(m.at("copula").get<std::string>());
    f.header.model.L = m.at("L").get<int>();
    f.header.model.priors = parse_priors(m.at("priors"));
    f.header.ordering_seed = head.at("ordering_seed").get<std::uint64_t>();
    f.header.data_digest = head.at("data_digest").get<std::string>();
    f.header.n_sites = head.at("n_sites").get<std::size_t>();
    for (const auto &c : head.at("chains")) {
      PosteriorSamples ps;
      ps.chain = c.at("chain").get<int>();
      ps.seed = c.at("seed").get<std::uint64_t>();
      ps.n_iter = c.at("n_iter").get<int>();
      ps.burnin = c.at("burnin").get<int>();
      ps.thin = c.at("thin").get<int>();
      ps.acceptance = c.at("acceptance").get<std::map<std::string, double>>();
      ps.step_sizes = c.at("step_sizes").get<std::map<std::string, double>>();
      f.chains.push_back(std::move(ps));
    }
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const json rec = json::parse(line);
      const int chain = rec.at("chain").get<int>();
      auto it = std::find_if(f.chains.begin(), f.chains.end(), [&](const auto &c) { return c.chain == chain; });
      if (it == f.chains.end()) throw DataError(origin + ": record for unknown chain at line " + std::to_string(lineno));
      ModelState s = sample_from_json(rec);
      if (s.o.size() != f.header.n_sites)
        throw DataError(origin + ": record at line " + std::to_string(lineno) + " has the wrong number of sites");
      it->samples.push_back(std::move(s));
    }
  } catch (const json::exception &e) {
    throw DataError(origin + ": malformed posterior file: " + e.what());
  }
  return f;
}

inline PosteriorFile read_posterior(const fs::path &p) { return parse_posterior(read_text(p), p.string()); }

}  // namespace dnnmp::io
