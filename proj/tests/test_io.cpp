#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "dnnmp/io.hpp"

using namespace dnnmp;
namespace fs = std::filesystem;

TEST(DatasetCsv, ParsesCountsAndCovariates) {
  const auto d = io::parse_dataset_csv(
      "coord1,coord2,count,covariate_1,covariate_2\n"
      "0.1,0.2,3,1.5,-2\n"
      "0.3,0.4,0,0,1e-3\n"
      "\n"
      "0.5,0.6,12.0,2,2\n");
  ASSERT_EQ(d.size(), 3u);
  EXPECT_EQ(d.counts[2], 12);
  EXPECT_EQ(d.sites[1].y, 0.4);
  EXPECT_EQ(d.covariates.cols(), 2);
  EXPECT_EQ(d.covariates(1, 1), 1e-3);
}

TEST(DatasetCsv, ReportsEveryBadRow) {
  try {
    io::parse_dataset_csv(
        "coord1,coord2,count\n"
        "0.1,0.2,3\n"
        "0.1,x,3\n"
        "0.3,0.4,-1\n"
        "0.5,0.6,2.5\n"
        "0.5,0.6\n",
        "sites.csv");
    FAIL() << "expected a DataError";
  } catch (const DataError &e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("sites.csv: 4 malformed"), std::string::npos) << msg;
    for (const char *l : {"line 3", "line 4", "line 5", "line 6"}) EXPECT_NE(msg.find(l), std::string::npos) << l;
    EXPECT_EQ(msg.find("line 2:"), std::string::npos);
  }
}

TEST(DatasetCsv, HeaderAndContentErrors) {
  EXPECT_THROW(io::parse_dataset_csv(""), DataError);
  EXPECT_THROW(io::parse_dataset_csv("x,y,count\n0,0,1\n"), DataError);
  EXPECT_THROW(io::parse_dataset_csv("coord1,coord2,count,z\n0,0,1,2\n"), DataError);
  EXPECT_THROW(io::parse_dataset_csv("coord1,coord2,count\n0,0,1\n0,0,2\n"), DataError);
  EXPECT_THROW(io::parse_dataset_csv("coord1,coord2,count\n0,nan,1\n1,1,1\n"), DataError);
}

TEST(DatasetCsv, RoundTripIsExact) {
  Dataset d;
  d.sites = {{0.1, 1.0 / 3.0}, {2.5e-7, -4.0}, {1e10, 0.7}};
  d.counts = {0, 17, 123456};
  d.covariates.resize(3, 1);
  d.covariates << 0.1, -1.0 / 7.0, 3.0;
  const std::string text = io::dataset_csv(d);
  const auto back = io::parse_dataset_csv(text);
  EXPECT_EQ(back.counts, d.counts);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(back.sites[i], d.sites[i]);
  EXPECT_EQ(back.covariates, d.covariates);
  EXPECT_EQ(io::dataset_csv(back), text);
  EXPECT_EQ(io::dataset_digest(back), io::dataset_digest(d));
  d.counts[0] = 1;
  EXPECT_NE(io::dataset_digest(back), io::dataset_digest(d));
}

TEST(Config, DefaultsAndOverrides) {
  const auto c = io::parse_config(nlohmann::json::parse(R"({
    "model": {"marginal": "negative_binomial", "copula": "clayton", "L": 7,
              "priors": {"phi": [2, 0.5], "gamma_mean": [0, 0, 0]}},
    "mcmc": {"n_iter": 300, "burnin": 100, "thin": 2, "seed": 9, "steps": {"lambda": 0.3}},
    "data": {"train": "train.csv"},
    "holdout": 0.2,
    "predict": {"draws_per_sample": 4}
  })"),
                                  "/tmp/base");
  EXPECT_EQ(c.model.marginal, MarginalFamily::negative_binomial);
  EXPECT_EQ(c.model.copula, CopulaFamily::clayton);
  EXPECT_EQ(c.model.L, 7);
  EXPECT_EQ(c.model.priors.phi.shape, 2.0);
  EXPECT_EQ(c.model.priors.phi.scale, 0.5);
  EXPECT_EQ(c.model.priors.zeta.shape, 3.0);
  EXPECT_EQ(c.model.priors.gamma_mean, Eigen::Vector3d::Zero());
  EXPECT_EQ(c.mcmc.n_iter, 300);
  EXPECT_EQ(c.mcmc.seed, 9u);
  EXPECT_EQ(c.mcmc.steps.lambda, 0.3);
  EXPECT_EQ(c.train_path, fs::path("/tmp/base/train.csv"));
  EXPECT_EQ(c.holdout, 0.2);
  EXPECT_EQ(c.draws_per_sample, 4);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  const auto parse = [](const char *s) { return io::parse_config(nlohmann::json::parse(s)); };
  EXPECT_THROW(parse(R"({"modle": {}})"), ConfigError);
  EXPECT_THROW(parse(R"({"model": {"copula": "frank"}})"), ConfigError);
  EXPECT_THROW(parse(R"({"model": {"L": "ten"}})"), ConfigError);
  EXPECT_THROW(parse(R"({"model": {"priors": {"phi": [1]}}})"), ConfigError);
  EXPECT_THROW(parse(R"({"mcmc": {"steps": {"gamma": 1}}})"), ConfigError);
  EXPECT_THROW(parse(R"({"simulate": {"kind": "lattice"}})"), ConfigError);
  EXPECT_THROW(parse(R"({"mcmc": {"n_iter": 10, "burnin": 10}})").validate(), ConfigError);
  EXPECT_THROW(parse(R"({"holdout": 1.0})").validate(), ConfigError);
  EXPECT_THROW(parse(R"({"model": {"L": 0}})").validate(), ConfigError);
}

TEST(Config, ReadsFileAndReportsSyntaxErrors) {
  const fs::path dir = fs::temp_directory_path() / "dnnmp_io_test";
  fs::create_directories(dir);
  io::write_text(dir / "good.json", R"({"model": {"L": 3}, "output": "runs"})", true);
  const auto c = io::read_config(dir / "good.json");
  EXPECT_EQ(c.model.L, 3);
  EXPECT_EQ(c.output, dir / "runs");
  io::write_text(dir / "bad.json", "{\"model\": ", true);
  EXPECT_THROW(io::read_config(dir / "bad.json"), ConfigError);
  EXPECT_THROW(io::read_config(dir / "missing.json"), ConfigError);
  EXPECT_THROW(io::write_text(dir / "good.json", "{}", false), ConfigError);
  fs::remove_all(dir);
}

TEST(Config, PriorsSurviveSerialization) {
  Priors p;
  p.phi = {2.5, 0.3};
  p.lambda = {1.5, 0.2};
  p.gamma_cov = 3.0 * Eigen::Matrix3d::Identity();
  p.beta_mean = Eigen::Vector2d(0.1, -0.2);
  p.beta_cov = Eigen::Matrix2d::Identity() * 4.0;
  const Priors q = io::parse_priors(io::priors_json(p));
  EXPECT_EQ(q.phi.shape, 2.5);
  EXPECT_EQ(q.phi.scale, 0.3);
  EXPECT_EQ(q.lambda.rate, 0.2);
  EXPECT_EQ(q.gamma_cov, p.gamma_cov);
  EXPECT_EQ(q.beta_mean, p.beta_mean);
  EXPECT_EQ(q.beta_cov, p.beta_cov);
}

TEST(PosteriorFile, RoundTrip) {
  io::PosteriorHeader h;
  h.model.copula = CopulaFamily::gumbel;
  h.model.L = 4;
  h.ordering_seed = 17;
  h.data_digest = "00000000deadbeef";
  h.n_sites = 3;
  std::vector<PosteriorSamples> chains(2);
  for (int c = 0; c < 2; ++c) {
    chains[static_cast<std::size_t>(c)].chain = c;
    chains[static_cast<std::size_t>(c)].seed = 100 + static_cast<std::uint64_t>(c);
    chains[static_cast<std::size_t>(c)].n_iter = 50;
    chains[static_cast<std::size_t>(c)].burnin = 10;
    chains[static_cast<std::size_t>(c)].thin = 4;
    chains[static_cast<std::size_t>(c)].acceptance = {{"lambda", 0.3 + c}, {"o", 0.8}};
    for (int k = 0; k < 3; ++k) {
      ModelState s;
      s.lambda = 1.0 / 3.0 + k;
      s.beta = Eigen::VectorXd::Zero(0);
      s.phi = 0.1 * (k + 1);
      s.gamma = {-1.5, 1e-300, 2.0 / 7.0};
      s.o = {0.1, 0.2 + c, 0.999999999};
      chains[static_cast<std::size_t>(c)].samples.push_back(s);
    }
  }
  const auto text = io::posterior_text(h, chains);
  const auto f = io::parse_posterior(text);
  EXPECT_EQ(f.header.model.copula, CopulaFamily::gumbel);
  EXPECT_EQ(f.header.model.L, 4);
  EXPECT_EQ(f.header.ordering_seed, 17u);
  EXPECT_EQ(f.header.data_digest, h.data_digest);
  ASSERT_EQ(f.chains.size(), 2u);
  EXPECT_EQ(f.chains[1].acceptance.at("lambda"), 1.3);
  EXPECT_EQ(f.chains[1].seed, 101u);
  for (std::size_t c = 0; c < 2; ++c) {
    ASSERT_EQ(f.chains[c].samples.size(), 3u);
    for (std::size_t k = 0; k < 3; ++k) {
      EXPECT_EQ(f.chains[c].samples[k].lambda, chains[c].samples[k].lambda);
      EXPECT_EQ(f.chains[c].samples[k].gamma, chains[c].samples[k].gamma);
      EXPECT_EQ(f.chains[c].samples[k].o, chains[c].samples[k].o);
    }
  }
  EXPECT_EQ(f.pooled().samples.size(), 6u);
  EXPECT_EQ(io::posterior_text(f.header, f.chains), text);
}

TEST(PosteriorFile, Corruption) {
  EXPECT_THROW(io::parse_posterior(""), DataError);
  EXPECT_THROW(io::parse_posterior("{\"format\": \"other\"}\n"), DataError);
  EXPECT_THROW(io::parse_posterior("not json\n"), DataError);
  io::PosteriorHeader h;
  h.n_sites = 2;
  PosteriorSamples c;
  ModelState s;
  s.o = {0.5, 0.5};
  c.samples = {s};
  std::string text = io::posterior_text(h, {c});
  EXPECT_NO_THROW(io::parse_posterior(text));
  // a record with the wrong number of sites
  EXPECT_THROW(io::parse_posterior(text + R"({"chain":0,"lambda":1,"beta":[],"r":1,"phi":1,"zeta":1,"gamma":[0,0,0],"kappa2":1,"o":[0.5]})" "\n"),
               DataError);
  EXPECT_THROW(io::parse_posterior(text + R"({"chain":5,"lambda":1,"beta":[],"r":1,"phi":1,"zeta":1,"gamma":[0,0,0],"kappa2":1,"o":[0.5,0.5]})" "\n"),
               DataError);
}
