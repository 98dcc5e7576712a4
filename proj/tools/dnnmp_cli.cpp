// dnnmp: simulate | fit | predict | validate | score

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "dnnmp/dnnmp.hpp"
#include "dnnmp/io.hpp"

namespace fs = std::filesystem;
using namespace dnnmp;

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kData = 3, kNumerical = 4 };

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  bool force = false;
  std::optional<int> chains;
  std::optional<double> holdout;
};

io::RunConfig load(const Options &opt) {
  io::RunConfig cfg = io::read_config(opt.config);
  if (opt.out) cfg.output = *opt.out;
  if (opt.chains) cfg.chains = *opt.chains;
  if (opt.holdout) cfg.holdout = *opt.holdout;
  cfg.validate();
  return cfg;
}

std::string key_values(const std::vector<std::pair<std::string, std::string>> &kv) {
  std::ostringstream os;
  for (const auto &[k, v] : kv) os << k << '\t' << v << '\n';
  return os.str();
}

// ---- simulate ----------------------------------------------------------

int cmd_simulate(const Options &opt) {
  io::RunConfig cfg = load(opt);
  auto &sim = cfg.simulate;
  if (opt.seed) sim.seed = sim.skew.seed = sim.sglmm.seed = *opt.seed;
  Dataset data;
  if (sim.kind == "skew") {
    data = skew_field_counts(sim.skew).data;
  } else if (sim.kind == "sglmm") {
    data = sglmm_counts(sim.sglmm).data;
  } else {
    Rng rng(sim.seed);
    const auto sites = uniform_sites(sim.nnmp_sites, rng);
    const OrderedReferenceSet ref = random_ordering(sites, cfg.ordering_seed, cfg.model.L);
    NnmpParams par{MarginalModel::poisson(sim.nnmp_lambda), {cfg.model.copula, sim.nnmp_phi},
                   {{sim.nnmp_gamma[0], sim.nnmp_gamma[1], sim.nnmp_gamma[2]}, sim.nnmp_kappa2, sim.nnmp_zeta}};
    const ForwardDraw draw = nnmp_forward_sample(ref, par, rng);
    data.sites = sites;
    data.counts.assign(sites.size(), 0);
    for (std::size_t i = 0; i < ref.size(); ++i) data.counts[ref.original_index(i)] = draw.y[i];
    data.covariates.resize(static_cast<Eigen::Index>(sites.size()), 0);
  }
  io::write_text(cfg.output / "data.csv", io::dataset_csv(data), opt.force);
  nlohmann::json side;
  side["kind"] = sim.kind;
  side["seed"] = sim.seed;
  side["n_sites"] = data.size();
  if (sim.kind == "skew") {
    side["sigma1"] = sim.skew.sigma1;
    side["sigma2"] = sim.skew.sigma2;
    side["gp_range"] = sim.skew.gp_range;
    side["lambda0"] = sim.skew.lambda0;
    side["grid"] = sim.skew.grid;
  } else if (sim.kind == "sglmm") {
    side["beta"] = {sim.sglmm.beta[0], sim.sglmm.beta[1], sim.sglmm.beta[2]};
    side["gp_sigma2"] = sim.sglmm.gp_sigma2;
    side["gp_range"] = sim.sglmm.gp_range;
    side["grid"] = sim.sglmm.grid;
  } else {
    side["copula"] = std::string(to_string(cfg.model.copula));
    side["L"] = cfg.model.L;
    side["ordering_seed"] = cfg.ordering_seed;
    side["lambda"] = sim.nnmp_lambda;
    side["phi"] = sim.nnmp_phi;
    side["zeta"] = sim.nnmp_zeta;
    side["gamma"] = {sim.nnmp_gamma[0], sim.nnmp_gamma[1], sim.nnmp_gamma[2]};
    side["kappa2"] = sim.nnmp_kappa2;
  }
  side["data_digest"] = io::dataset_digest(data);
  io::write_text(cfg.output / "simulate.json", side.dump(2) + "\n", opt.force);
  std::cout << "wrote " << data.size() << " sites to " << (cfg.output / "data.csv").string() << '\n';
  return kOk;
}

// ---- fit ---------------------------------------------------------------

int cmd_fit(const Options &opt) {
  io::RunConfig cfg = load(opt);
  if (opt.seed) cfg.mcmc.seed = *opt.seed;
  if (cfg.train_path.empty()) throw ConfigError("config needs data.train for fit");
  Dataset all = io::read_dataset_csv(cfg.train_path);
  Dataset train = all;
  if (cfg.holdout > 0.0) {
    std::vector<std::size_t> perm(all.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(cfg.split_seed);
    for (std::size_t i = perm.size(); i-- > 1;) {
      const auto j = static_cast<std::size_t>(uniform_open(rng) * static_cast<double>(i + 1));
      std::swap(perm[i], perm[std::min(j, i)]);
    }
    const auto n_test = static_cast<std::size_t>(std::llround(cfg.holdout * static_cast<double>(all.size())));
    if (n_test == 0 || n_test >= all.size()) throw ConfigError("holdout leaves an empty train or test set");
    std::vector<std::size_t> test_rows(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::vector<std::size_t> train_rows(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
    std::sort(test_rows.begin(), test_rows.end());
    std::sort(train_rows.begin(), train_rows.end());
    train = all.subset(train_rows);
    io::write_text(cfg.output / "test.csv", io::dataset_csv(all.subset(test_rows)), opt.force);
    std::ostringstream split;
    split << "row,role\n";
    for (std::size_t r : train_rows) split << r << ",train\n";
    for (std::size_t r : test_rows) split << r << ",test\n";
    io::write_text(cfg.output / "split.csv", split.str(), opt.force);
  }
  io::write_text(cfg.output / "train.csv", io::dataset_csv(train), opt.force);

  const FitContext ctx = make_context(train, cfg.model, cfg.ordering_seed);
  std::vector<PosteriorSamples> chains(static_cast<std::size_t>(cfg.chains));
  std::vector<std::exception_ptr> errors(chains.size());
  const auto run_one = [&](std::size_t c) {
    try {
      ChainConfig cc = cfg.mcmc;
      cc.chain = static_cast<int>(c);
      cc.seed = c == 0 ? cfg.mcmc.seed : splitmix64(cfg.mcmc.seed + c);
      chains[c] = run_chain(ctx, cc);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  if (chains.size() == 1) {
    run_one(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t c = 0; c < chains.size(); ++c) pool.emplace_back(run_one, c);
    for (auto &t : pool) t.join();
  }
  for (const auto &e : errors)
    if (e) std::rethrow_exception(e);

  io::PosteriorHeader head{cfg.model, cfg.ordering_seed, io::dataset_digest(train), train.size(), {}};
  io::write_text(cfg.output / "posterior.jsonl", io::posterior_text(head, chains), opt.force);

  std::vector<std::pair<std::string, std::string>> kv;
  for (const auto &c : chains) {
    const std::string prefix = "chain" + std::to_string(c.chain) + ".";
    kv.emplace_back(prefix + "n_samples", std::to_string(c.samples.size()));
    for (const auto &[name, rate] : c.acceptance) kv.emplace_back(prefix + "accept." + name, io::format_double(rate));
    double lam = 0.0;
    for (const auto &s : c.samples) lam += s.lambda;
    if (cfg.model.marginal == MarginalFamily::poisson && !c.samples.empty())
      kv.emplace_back(prefix + "lambda_mean", io::format_double(lam / static_cast<double>(c.samples.size())));
  }
  io::write_text(cfg.output / "acceptance.txt", key_values(kv), opt.force);
  std::cout << "fitted " << train.size() << " sites; wrote " << (cfg.output / "posterior.jsonl").string() << '\n';
  return kOk;
}

// ---- shared loading for predict / validate -------------------------------

struct Fitted {
  io::PosteriorFile post;
  Dataset train;
  FitContext ctx;
};

Fitted load_fitted(const io::RunConfig &cfg) {
  io::PosteriorFile post = io::read_posterior(cfg.output / "posterior.jsonl");
  Dataset train = io::read_dataset_csv(cfg.output / "train.csv");
  if (io::dataset_digest(train) != post.header.data_digest)
    throw DataError("training data do not match the posterior file (digest mismatch)");
  FitContext ctx = make_context(train, post.header.model, post.header.ordering_seed);
  return {std::move(post), std::move(train), std::move(ctx)};
}

fs::path test_path(const io::RunConfig &cfg) {
  if (fs::exists(cfg.output / "test.csv")) return cfg.output / "test.csv";
  return cfg.test_path;
}

int cmd_predict(const Options &opt) {
  io::RunConfig cfg = load(opt);
  if (opt.seed) cfg.predict_seed = *opt.seed;
  const Fitted f = load_fitted(cfg);
  const fs::path tp = test_path(cfg);
  const Dataset targets = tp.empty() ? f.train : io::read_dataset_csv(tp);
  PredictionRequest req;
  req.targets = targets.sites;
  req.covariates = targets.covariates;
  req.draws_per_sample = cfg.draws_per_sample;
  req.seed = cfg.predict_seed;
  const PosteriorSamples pooled = f.post.pooled();
  if (pooled.samples.empty()) throw DataError("posterior file holds no samples");
  const Eigen::MatrixXi draws = predict(f.ctx, pooled, req);
  const auto summary = predictive_summary(draws);
  std::ostringstream tab, raw;
  tab << "coord1,coord2,median,mean,lower95,upper95,n_draws\n";
  raw << "coord1,coord2";
  for (Eigen::Index b = 0; b < draws.cols(); ++b) raw << ",draw_" << (b + 1);
  raw << '\n';
  for (std::size_t a = 0; a < targets.size(); ++a) {
    const auto &s = summary[a];
    tab << io::format_double(targets.sites[a].x) << ',' << io::format_double(targets.sites[a].y) << ','
        << io::format_double(s.median) << ',' << io::format_double(s.mean) << ',' << io::format_double(s.lower95)
        << ',' << io::format_double(s.upper95) << ',' << s.n_draws << '\n';
    raw << io::format_double(targets.sites[a].x) << ',' << io::format_double(targets.sites[a].y);
    for (Eigen::Index b = 0; b < draws.cols(); ++b) raw << ',' << draws(static_cast<Eigen::Index>(a), b);
    raw << '\n';
  }
  io::write_text(cfg.output / "predictions.csv", tab.str(), opt.force);
  io::write_text(cfg.output / "draws.csv", raw.str(), opt.force);
  std::cout << "predicted " << targets.size() << " targets with " << draws.cols() << " draws each\n";
  return kOk;
}

int cmd_validate(const Options &opt) {
  const io::RunConfig cfg = load(opt);
  const Fitted f = load_fitted(cfg);
  const PosteriorSamples pooled = f.post.pooled();
  if (pooled.samples.empty()) throw DataError("posterior file holds no samples");
  const ResidualSummary rs = summarize_residuals(pooled, f.ctx);
  std::ostringstream tab;
  tab << "site,coord1,coord2,residual_mean,residual_lower95,residual_upper95\n";
  std::vector<std::size_t> by_row(f.ctx.size());
  for (std::size_t i = 0; i < f.ctx.size(); ++i) by_row[f.ctx.ref.original_index(i)] = i;
  for (std::size_t row = 0; row < f.ctx.size(); ++row) {
    const std::size_t i = by_row[row];
    const Location &s = f.ctx.ref.site(i);
    tab << row << ',' << io::format_double(s.x) << ',' << io::format_double(s.y) << ','
        << io::format_double(rs.mean[i]) << ',' << io::format_double(rs.lower95[i]) << ','
        << io::format_double(rs.upper95[i]) << '\n';
  }
  io::write_text(cfg.output / "residuals.csv", tab.str(), opt.force);
  const AndersonDarling ad = anderson_darling(rs.mean);
  io::write_text(cfg.output / "validation.txt",
                 key_values({{"n_sites", std::to_string(f.ctx.size())},
                             {"anderson_darling", io::format_double(ad.a2_adjusted)},
                             {"critical_5pct", io::format_double(AndersonDarling::critical_5pct)},
                             {"normality_5pct", ad.passes() ? "pass" : "fail"},
                             {"clamped_levels", std::to_string(rs.clamped)}}),
                 opt.force);
  std::cout << "Anderson-Darling " << ad.a2_adjusted << (ad.passes() ? " (pass)" : " (fail)") << '\n';
  return kOk;
}

int cmd_score(const Options &opt) {
  const io::RunConfig cfg = load(opt);
  const fs::path tp = test_path(cfg);
  if (tp.empty()) throw ConfigError("score needs held-out data: data.test or a holdout fit");
  const Dataset test = io::read_dataset_csv(tp);
  const std::string text = io::read_text(cfg.output / "draws.csv");
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = io::split_fields(line);
    if (f.size() < 3) throw DataError("draws.csv line " + std::to_string(lineno) + ": no draws");
    std::vector<double> r;
    for (const auto &x : f) {
      double v;
      if (!io::parse_double(x, v)) throw DataError("draws.csv line " + std::to_string(lineno) + ": bad number");
      r.push_back(v);
    }
    rows.push_back(std::move(r));
  }
  if (rows.size() != test.size()) throw DataError("draws.csv rows do not match the test sites");
  const std::size_t m = rows[0].size() - 2;
  Eigen::MatrixXd draws(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(rows.size()));
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t a = 0; a < rows.size(); ++a) {
    if (rows[a].size() != m + 2) throw DataError("draws.csv has ragged rows");
    if (rows[a][0] != test.sites[a].x || rows[a][1] != test.sites[a].y)
      throw DataError("draws.csv coordinates do not match the test sites at row " + std::to_string(a + 1));
    for (std::size_t b = 0; b < m; ++b) draws(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = rows[a][b + 2];
    y[static_cast<Eigen::Index>(a)] = test.counts[a];
  }
  const ScoreReport rep = scores(y, draws);
  const std::string table = key_values({{"rmspe", io::format_double(rep.rmspe)},
                                        {"ci95_cover", io::format_double(rep.ci95_cover)},
                                        {"ci95_width", io::format_double(rep.ci95_width)},
                                        {"crps", io::format_double(rep.crps)},
                                        {"es", io::format_double(rep.es)},
                                        {"vs", io::format_double(rep.vs)}});
  io::write_text(cfg.output / "scores.txt", table, opt.force);
  std::cout << table;
  return kOk;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Count-data nearest-neighbor mixture processes with copula links"};
  app.require_subcommand(1);
  Options opt;
  const auto add_common = [&](CLI::App *sub) {
    sub->add_option("--config", opt.config, "JSON run configuration")->required();
    sub->add_option("--seed", opt.seed, "override the seed used by this command");
    sub->add_option("--out", opt.out, "output directory");
    sub->add_flag("--force", opt.force, "overwrite existing outputs");
    sub->add_option("--chains", opt.chains, "number of chains (fit)");
    sub->add_option("--holdout", opt.holdout, "fraction of rows held out for testing (fit)");
  };
  auto *sim = app.add_subcommand("simulate", "generate a synthetic dataset");
  auto *fit = app.add_subcommand("fit", "run the sampler and write posterior.jsonl");
  auto *pre = app.add_subcommand("predict", "posterior predictive draws at test or training sites");
  auto *val = app.add_subcommand("validate", "quantile residuals and a normality check");
  auto *sco = app.add_subcommand("score", "score predictive draws against held-out counts");
  for (auto *s : {sim, fit, pre, val, sco}) add_common(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfig;
  }
  try {
    if (*sim) return cmd_simulate(opt);
    if (*fit) return cmd_fit(opt);
    if (*pre) return cmd_predict(opt);
    if (*val) return cmd_validate(opt);
    if (*sco) return cmd_score(opt);
  } catch (const ConfigError &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const DataError &e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception &e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  }
  return kOk;
}
