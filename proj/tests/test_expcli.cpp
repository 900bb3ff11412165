#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fedapm/config.hpp"
#include "fedapm/csv.hpp"
#include "fedapm/errors.hpp"
#include "fedapm/experiment.hpp"
#include "fedapm/metrics.hpp"

using namespace fedapm;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("fedapm_test_" + name);
  fs::remove_all(dir);
  return dir;
}

MetricsRow sample_row(int round) {
  MetricsRow r;
  r.round = round;
  r.method = "fedapm";
  r.seed = 3;
  r.train_loss = 0.123456789012345;
  r.accuracy = 0.75;
  r.f1 = 2.0 / 3.0;
  r.auc = 0.9;
  r.drift = 1e-7;
  r.lagrangian = -12.5;
  r.lyapunov = 3.25e10;
  r.descent_lhs = 1.0 / 7.0;
  r.descent_rhs = 0.0;
  r.relerr_lhs = 5e-300;
  r.relerr_rhs = std::nan("");
  r.r1 = r.r2 = r.r3 = r.r4 = 0.5;
  return r;
}

}  // namespace

TEST(Config, EmptyDocumentGivesDefaults) {
  const RunConfig cfg = parse_config("");
  EXPECT_EQ(cfg.methods, std::vector<Method>{Method::fedapm});
  EXPECT_FALSE(cfg.rho.has_value());
  EXPECT_EQ(cfg.seeds.size(), 20u);
  EXPECT_NO_THROW(validate_config(cfg));
}

TEST(Config, RoundTripThroughSerialization) {
  const RunConfig cfg = parse_config("method = fedapm\nrho = 0.01\n");
  ASSERT_TRUE(cfg.rho.has_value());
  EXPECT_DOUBLE_EQ(*cfg.rho, 0.01);
  const std::string text = serialize_config(cfg);
  EXPECT_EQ(serialize_config(parse_config(text)), text);
}

TEST(Config, FullRoundTripOfNonDefaults) {
  RunConfig cfg = parse_config(
      "method = fedavg, fedalt\nseeds = 2..4\nsigma = 0.5,0.25\nrho_policy = literal\n"
      "dual_warm_start = false\nu_batch_size = 64\nbatch_size = 16\nproblem = quadratic\n"
      "strategy = split_input\nalpha_mode = proportional\nout = somewhere\n");
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{2, 3, 4}));
  EXPECT_EQ(cfg.inner.batch_size, 64);
  EXPECT_EQ(cfg.sgd.batch_size, 16);
  const std::string text = serialize_config(cfg);
  EXPECT_EQ(serialize_config(parse_config(text)), text);
}

TEST(Config, NegativeRhoIsRejected) {
  try {
    parse_config("rho = -1\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "rho");
    EXPECT_NE(std::string(e.what()).find("rho must be positive"), std::string::npos);
  }
}

TEST(Config, UnknownKeyAndMalformedValues) {
  EXPECT_THROW(parse_config("learning_rate = 0.1\n"), ConfigError);
  EXPECT_THROW(parse_config("rounds = ten\n"), ConfigError);
  EXPECT_THROW(parse_config("method = fedfoo\n"), ConfigError);
  EXPECT_THROW(parse_config("fraction = 0\n"), ConfigError);
  EXPECT_THROW(parse_config("just words\n"), ConfigError);
}

TEST(Config, CommentsAndBlankLines) {
  const RunConfig cfg = parse_config("# header\n\nrounds = 7   # trailing\n");
  EXPECT_EQ(cfg.rounds, 7);
}

TEST(Csv, ZeroRowsIsHeaderOnly) {
  EXPECT_EQ(emit_csv({}), std::string(kCsvHeader) + "\n");
}

TEST(Csv, OneRowIsTwoLines) {
  const std::vector<MetricsRow> rows{sample_row(1)};
  const std::string text = emit_csv(rows);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
  EXPECT_EQ(text.back(), '\n');
}

TEST(Csv, ParseBackReproducesTwelveDigits) {
  const std::vector<MetricsRow> rows{sample_row(1), sample_row(2)};
  const auto back = parse_csv(emit_csv(rows));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].round, 2);
  EXPECT_EQ(back[0].method, "fedapm");
  EXPECT_EQ(back[0].seed, 3u);
  EXPECT_NEAR(back[0].train_loss, rows[0].train_loss, 5e-12 * rows[0].train_loss);
  EXPECT_NEAR(back[0].lyapunov, rows[0].lyapunov, 5e-12 * rows[0].lyapunov);
  EXPECT_TRUE(std::isnan(back[0].relerr_rhs));
  EXPECT_EQ(emit_csv(back), emit_csv(rows));
}

TEST(Csv, MixedMethodsRejected) {
  std::vector<MetricsRow> rows{sample_row(1), sample_row(2)};
  rows[1].method = "fedavg";
  EXPECT_THROW(emit_csv(rows), ContractViolation);
  EXPECT_THROW(parse_csv("round,method\n"), ContractViolation);
}

TEST(Metrics, PerfectScores) {
  Matrix s(4, 3);
  s << 5, 0, 0, 0, 5, 0, 0, 0, 5, 5, 0, 0;
  const std::vector<int> y{0, 1, 2, 0};
  const auto m = evaluate_metrics(s, y);
  EXPECT_DOUBLE_EQ(m.accuracy, 1.0);
  EXPECT_DOUBLE_EQ(m.macro_f1, 1.0);
  EXPECT_DOUBLE_EQ(m.auc, 1.0);
}

TEST(Metrics, ConstantPredictorOnBalancedPair) {
  const Matrix s = Matrix::Zero(6, 2);
  const std::vector<int> y{0, 1, 0, 1, 0, 1};
  const auto m = evaluate_metrics(s, y);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.5);
  EXPECT_DOUBLE_EQ(m.auc, 0.5);
  EXPECT_FALSE(m.warnings.empty());
}

TEST(Metrics, RandomScoresGiveChanceAuc) {
  Rng rng(1);
  std::vector<double> s(10000);
  std::vector<int> y(10000);
  for (std::size_t k = 0; k < s.size(); ++k) {
    s[k] = uniform01(rng);
    y[k] = static_cast<int>(uniform_index(rng, 2));
  }
  EXPECT_NEAR(binary_auc(s, y, 1), 0.5, 0.03);
}

TEST(Metrics, MidrankTies) {
  const std::vector<double> s{0.1, 0.5, 0.5, 0.9};
  const std::vector<int> y{0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(binary_auc(s, y, 1), 0.875);
}

TEST(Summary, MeanAndSampleDeviation) {
  const std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
  const auto [mean, sd] = mean_std(xs);
  EXPECT_DOUBLE_EQ(mean, 2.5);
  EXPECT_NEAR(sd, std::sqrt(5.0 / 3.0), 1e-15);
  const std::vector<double> one{7.0};
  EXPECT_EQ(mean_std(one).second, 0.0);
}

TEST(Experiment, OneRoundTwoClientQuadratic) {
  const fs::path dir = scratch_dir("one_round");
  RunConfig cfg = parse_config("method = fedapm, fedavg\nproblem = quadratic\nclients = 2\nrounds = 1\nseeds = 0\n");
  cfg.out_dir = dir.string();
  std::ostringstream log;
  ASSERT_EQ(run_experiment(cfg, log), 0);
  for (const char* name : {"fedapm_seed0.csv", "fedavg_seed0.csv"}) {
    const auto rows = parse_csv(slurp(dir / name));
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].round, 1);
  }
  const std::string summary = slurp(dir / "summary.txt");
  EXPECT_NE(summary.find("fedapm,"), std::string::npos);
  EXPECT_NE(summary.find("fedavg,"), std::string::npos);
  const auto fedavg = parse_csv(slurp(dir / "fedavg_seed0.csv"));
  EXPECT_TRUE(std::isnan(fedavg[0].lagrangian));
  EXPECT_TRUE(std::isnan(fedavg[0].accuracy));
  fs::remove_all(dir);
}

TEST(Experiment, RepeatRunsAreByteIdentical) {
  RunConfig cfg = parse_config(
      "method = fedapm, fedsim\nclients = 4\nsamples_per_client = 40\nrounds = 3\nseeds = 1\n"
      "fraction = 0.5\nu_max_passes = 3\nv_max_iters = 10\n");
  std::string first;
  for (int workers : {1, 3}) {
    const fs::path dir = scratch_dir("repeat_" + std::to_string(workers));
    cfg.out_dir = dir.string();
    std::ostringstream log;
    ASSERT_EQ(run_experiment(cfg, log, workers), 0);
    const std::string text = slurp(dir / "fedapm_seed1.csv") + slurp(dir / "fedsim_seed1.csv");
    if (first.empty()) {
      first = text;
    } else {
      EXPECT_EQ(text, first);
    }
    fs::remove_all(dir);
  }
}

TEST(Experiment, TheoryRowsOnlyForFedApm) {
  RunConfig cfg = parse_config("problem = quadratic\nclients = 3\nrounds = 2\nseeds = 0\n");
  Simulation sim(cfg, Method::fedapm, 0);
  sim.run(2);
  EXPECT_EQ(sim.theory().size(), 2u);
  EXPECT_EQ(sim.rows().back().round, 2);
  EXPECT_TRUE(sim.hyperparam_check().all_ok());
  Simulation base(cfg, Method::fedalt, 0);
  base.run(2);
  EXPECT_TRUE(base.theory().empty());
}
