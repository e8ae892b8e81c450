#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "geomlr/checks.hpp"
#include "geomlr/train.hpp"

using namespace geomlr;

namespace {

bool bits_eq(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(bool(in));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string temp_path(const std::string& stem) { return "/tmp/geomlr_test_" + stem; }

RunConfig small_cfg(Classifier c) {
  RunConfig cfg;
  cfg.classifier = c;
  cfg.theta = c == Classifier::Bwm ? 0.5 : 1.0;
  cfg.epochs = 3;
  cfg.batch = 4;
  cfg.lr = 1e-2;
  cfg.momentum = 0.9;
  cfg.grad_clip = 5.0;
  cfg.seed = 7;
  return cfg;
}

}  // namespace

TEST_CASE("generated clusters shrink with sigma and are reproducible") {
  const Dataset tight = gen_spd_data(3, 2, 4, 1e-15, 7);
  CHECK((tight.spd[0].mat() - tight.spd[1].mat()).norm() < 1e-10);
  CHECK((tight.spd[4].mat() - tight.spd[5].mat()).norm() < 1e-10);
  CHECK((tight.spd[0].mat() - tight.spd[4].mat()).norm() > 1e-3);

  const Dataset a = gen_spd_data(4, 3, 5, 0.3, 11);
  const Dataset b = gen_spd_data(4, 3, 5, 0.3, 11);
  REQUIRE(a.count() == b.count());
  CHECK(a.labels == b.labels);
  for (std::size_t i = 0; i < a.count(); ++i) CHECK(bits_eq(a.spd[i].mat(), b.spd[i].mat()));
  CHECK(a.train_idx == b.train_idx);
  CHECK(a.test_idx == b.test_idx);
}

TEST_CASE("generator input validation") {
  CHECK_THROWS_AS(gen_spd_data(1, 2, 5, 0.3, 1), DomainError);
  CHECK_THROWS_AS(gen_spd_data(3, 1, 5, 0.3, 1), DomainError);
  CHECK_THROWS_AS(gen_spd_data(3, 2, 0, 0.3, 1), DomainError);
  CHECK_THROWS_AS(gen_spd_data(3, 2, 5, 0.0, 1), DomainError);
  CHECK_THROWS_AS(gen_spd_data(3, 2, 5, -1.0, 1), DomainError);
  CHECK_THROWS_AS(gen_so3_data(0, 2, 5, 0.3, 1), DomainError);
  CHECK_THROWS_AS(gen_so3_data(2, 2, 5, 0.0, 1), DomainError);
}

TEST_CASE("dataset validation rejects tampered data") {
  Dataset ds = gen_spd_data(3, 2, 4, 0.3, 3);
  ds.validate();
  Dataset bad_label = ds;
  bad_label.labels[0] = 9;
  CHECK_THROWS_AS(bad_label.validate(), DomainError);
  Dataset bad_split = ds;
  bad_split.train_idx.push_back(0);
  CHECK_THROWS_AS(bad_split.validate(), DomainError);
}

TEST_CASE("dataset files round-trip exactly") {
  const std::string path = temp_path("spd.ds");
  const Dataset ds = gen_spd_data(4, 3, 6, 0.3, 13);
  save_dataset(ds, path);
  const Dataset back = load_dataset(path);
  CHECK(back.kind == ds.kind);
  CHECK(back.n == ds.n);
  CHECK(back.classes == ds.classes);
  CHECK(back.seed == ds.seed);
  CHECK(back.labels == ds.labels);
  CHECK(back.train_idx == ds.train_idx);
  REQUIRE(back.count() == ds.count());
  for (std::size_t i = 0; i < ds.count(); ++i) CHECK(bits_eq(back.spd[i].mat(), ds.spd[i].mat()));

  save_dataset(back, temp_path("spd2.ds"));
  CHECK(slurp(path) == slurp(temp_path("spd2.ds")));

  const std::string rpath = temp_path("so3.ds");
  const Dataset rds = gen_so3_data(2, 3, 5, 0.3, 17);
  save_dataset(rds, rpath);
  const Dataset rback = load_dataset(rpath);
  REQUIRE(rback.count() == rds.count());
  for (std::size_t i = 0; i < rds.count(); ++i)
    for (Index b = 0; b < rds.n; ++b)
      CHECK(bits_eq(rback.so3[i][static_cast<std::size_t>(b)].mat(),
                    rds.so3[i][static_cast<std::size_t>(b)].mat()));

  CHECK_THROWS_AS(load_dataset(temp_path("missing.ds")), IoError);
}

TEST_CASE("nearest-mean oracle separates the reference datasets") {
  CHECK(nearest_mean_accuracy(gen_spd_data(10, 3, 200, 0.3, 42)) >= 0.99);
  CHECK(nearest_mean_accuracy(gen_so3_data(2, 3, 200, 0.3, 42)) >= 0.99);
}

TEST_CASE("run config file parsing") {
  const std::string path = temp_path("run.cfg");
  {
    std::ofstream out(path);
    out << "# reference setup\n"
        << "classifier = bwm\n"
        << "theta=0.25\n"
        << "alpha = 1\n"
        << "beta=0.1\n"
        << "epochs=17\n"
        << "batch = 8\n"
        << "lr=0.005\n"
        << "momentum=0.8\n"
        << "grad_clip=2.5\n"
        << "seed=99  # trailing comment\n";
  }
  const RunConfig cfg = load_run_config(path);
  CHECK(cfg.classifier == Classifier::Bwm);
  CHECK(cfg.theta == 0.25);
  CHECK(cfg.alpha == 1.0);
  CHECK(cfg.beta == 0.1);
  CHECK(cfg.epochs == 17);
  CHECK(cfg.batch == 8);
  CHECK(cfg.lr == 0.005);
  CHECK(cfg.momentum == 0.8);
  CHECK(cfg.grad_clip == 2.5);
  CHECK(cfg.seed == 99);

  {
    std::ofstream out(temp_path("bad1.cfg"));
    out << "lr=0.1\nfoo=1\n";
  }
  try {
    load_run_config(temp_path("bad1.cfg"));
    FAIL("expected UsageError");
  } catch (const UsageError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(":2:") != std::string::npos);
    CHECK(msg.find("unknown key foo") != std::string::npos);
  }

  {
    std::ofstream out(temp_path("bad2.cfg"));
    out << "lr=fast\n";
  }
  try {
    load_run_config(temp_path("bad2.cfg"));
    FAIL("expected UsageError");
  } catch (const UsageError& e) {
    CHECK(std::string(e.what()).find("bad value for lr") != std::string::npos);
  }

  {
    std::ofstream out(temp_path("bad3.cfg"));
    out << "epochs 5\n";
  }
  CHECK_THROWS_AS(load_run_config(temp_path("bad3.cfg")), UsageError);
  CHECK_THROWS_AS(load_run_config(temp_path("missing.cfg")), IoError);
}

TEST_CASE("run config validation") {
  RunConfig cfg;
  cfg.validate();
  cfg.epochs = -1;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg.epochs = 5;
  cfg.batch = 0;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg.batch = 8;
  cfg.lr = -0.5;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg.lr = 0.01;
  cfg.momentum = 1.0;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg.momentum = 0.9;
  cfg.grad_clip = -1.0;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg.grad_clip = 0.0;
  cfg.theta = 0.0;
  cfg.classifier = Classifier::Aim;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
}

TEST_CASE("published hyper-parameter candidates are all accepted") {
  struct Cand {
    Classifier c;
    std::vector<double> thetas;
  };
  // the bwm grid is stated in terms of the power 2*theta
  const std::vector<Cand> table = {
      {Classifier::Aim, {0.25, 0.5, 0.75, 1.0, 1.25, 1.5}},
      {Classifier::Em, {0.5, 1.0, 1.5}},
      {Classifier::Lcm, {0.5, 1.0, 1.5}},
      {Classifier::Bwm, {0.25 / 2, 0.5 / 2, 0.75 / 2}},
  };
  for (const auto& cand : table) {
    for (double theta : cand.thetas) {
      RunConfig cfg;
      cfg.classifier = cand.c;
      cfg.theta = theta;
      cfg.validate();
      const MetricParams mp = cfg.metric_params();
      mp.require_ab(2);
      mp.require_ab(5);
      CHECK(mp.power() != 0.0);
    }
  }

  const double eps = 0.01;
  for (Classifier c : {Classifier::Lem, Classifier::Aim, Classifier::Em}) {
    for (Index n : {Index(2), Index(5)}) {
      const double nn = static_cast<double>(n);
      for (double beta : {1.0, 1.0 / nn, 1.0 / (nn * nn), 0.0, -1.0 / nn + eps,
                          -1.0 / (nn * nn)}) {
        RunConfig cfg;
        cfg.classifier = c;
        cfg.beta = beta;
        cfg.validate();
        cfg.metric_params().require_ab(n);
      }
    }
  }
}

TEST_CASE("out-of-range trace weight is rejected at model setup") {
  const Dataset ds = gen_spd_data(2, 2, 4, 0.3, 19);
  RunConfig cfg = small_cfg(Classifier::Em);
  cfg.beta = -1.0;
  CHECK_THROWS_AS(init_model(cfg, ds), DomainError);
}

TEST_CASE("classifier and dataset kinds must agree") {
  const Dataset spd = gen_spd_data(3, 2, 4, 0.3, 21);
  const Dataset so3 = gen_so3_data(2, 2, 4, 0.3, 21);
  CHECK_THROWS_AS(init_model(small_cfg(Classifier::Lie), spd), UsageError);
  CHECK_THROWS_AS(init_model(small_cfg(Classifier::Aim), so3), UsageError);
  CHECK_THROWS_AS(init_model(small_cfg(Classifier::LogEig), so3), UsageError);
}

TEST_CASE("training with zero epochs or zero lr does not move the model") {
  const Dataset ds = gen_spd_data(3, 3, 8, 0.3, 23);

  RunConfig cfg0 = small_cfg(Classifier::Em);
  cfg0.epochs = 0;
  const RunReport rep0 = train(ds, cfg0);
  REQUIRE(rep0.rows.size() == 1);
  CHECK(rep0.rows[0].epoch == 0);
  CHECK(rep0.rows[0].train_loss > 0.0);
  CHECK(rep0.rows[0].train_acc >= 0.0);
  CHECK(rep0.rows[0].test_acc <= 1.0);

  RunConfig frozen = small_cfg(Classifier::Em);
  frozen.lr = 0.0;
  const RunReport repf = train(ds, frozen);
  REQUIRE(repf.rows.size() == 4);
  for (const auto& row : repf.rows) {
    CHECK(row.train_acc == repf.rows[0].train_acc);
    CHECK(row.test_acc == repf.rows[0].test_acc);
    CHECK(row.train_loss == doctest::Approx(repf.rows[0].train_loss).epsilon(1e-12));
  }
}

TEST_CASE("batch gradients agree bit-for-bit across execution modes") {
  const Dataset ds = gen_spd_data(3, 2, 6, 0.3, 25);
  const Model m = init_model(small_cfg(Classifier::Aim), ds);
  std::vector<std::size_t> idx(ds.train_idx.begin(), ds.train_idx.end());
  const BatchGrad gs = batch_gradient(m, ds, idx, ExecMode::Serial);
  const BatchGrad gp = batch_gradient(m, ds, idx, ExecMode::Parallel);
  CHECK(std::memcmp(&gs.loss, &gp.loss, sizeof(double)) == 0);
  REQUIRE(gs.bundle.dP.size() == gp.bundle.dP.size());
  for (std::size_t k = 0; k < gs.bundle.dP.size(); ++k) {
    CHECK(bits_eq(gs.bundle.dP[k][0], gp.bundle.dP[k][0]));
    CHECK(bits_eq(gs.bundle.dA[k][0], gp.bundle.dA[k][0]));
  }
  CHECK_THROWS_AS(batch_gradient(m, ds, {}, ExecMode::Serial), DomainError);
}

TEST_CASE("repeated runs and execution modes give one digest") {
  const Dataset ds = gen_spd_data(3, 2, 10, 0.3, 27);
  const RunConfig cfg = small_cfg(Classifier::Aim);
  const RunReport r1 = train(ds, cfg, ExecMode::Parallel);
  const RunReport r2 = train(ds, cfg, ExecMode::Parallel);
  const RunReport r3 = train(ds, cfg, ExecMode::Serial);
  CHECK(r1.digest == r2.digest);
  CHECK(r1.digest == r3.digest);
  CHECK(r1.digest.size() == 16);

  RunConfig other = cfg;
  other.seed = 8;
  CHECK(train(ds, other).digest != r1.digest);
}

TEST_CASE("csv report format") {
  const Dataset ds = gen_spd_data(3, 2, 6, 0.3, 29);
  RunConfig cfg = small_cfg(Classifier::Lcm);
  cfg.epochs = 2;
  const RunReport rep = train(ds, cfg);
  const std::string path = temp_path("report.csv");
  write_csv(rep, path);

  std::ifstream in(path);
  REQUIRE(bool(in));
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  REQUIRE(lines.size() == 5);  // header, epochs 0..2, summary
  CHECK(lines[0] == "epoch,train_loss,train_acc,test_acc,seconds");
  CHECK(lines[1].rfind("0,", 0) == 0);
  CHECK(lines[2].rfind("1,", 0) == 0);
  CHECK(lines[3].rfind("2,", 0) == 0);
  CHECK(lines[4].rfind("# total_seconds=", 0) == 0);
  CHECK(lines[4].find("digest=" + rep.digest) != std::string::npos);
}

TEST_CASE("model files round-trip the exact parameters") {
  const Dataset ds = gen_spd_data(3, 2, 8, 0.3, 31);
  RunConfig cfg = small_cfg(Classifier::Bwm);
  cfg.epochs = 2;
  Model trained;
  train(ds, cfg, ExecMode::Parallel, &trained);
  const std::string path = temp_path("model.txt");
  save_model(trained, path);
  const Model back = load_model(path);
  CHECK(back.classifier == trained.classifier);
  CHECK(back.mp.theta == trained.mp.theta);
  for (std::size_t s = 0; s < 5; ++s) {
    const Logits a = model_logits(trained, ds, s);
    const Logits b = model_logits(back, ds, s);
    CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) ==
          0);
  }

  const Dataset rds = gen_so3_data(2, 2, 6, 0.3, 33);
  const Model lie_model = init_model(small_cfg(Classifier::Lie), rds);
  save_model(lie_model, temp_path("lie_model.txt"));
  const Model lie_back = load_model(temp_path("lie_model.txt"));
  for (std::size_t s = 0; s < 4; ++s) {
    const Logits a = model_logits(lie_model, rds, s);
    const Logits b = model_logits(lie_back, rds, s);
    CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) ==
          0);
  }

  const Model le_model = init_model(small_cfg(Classifier::LogEig), ds);
  save_model(le_model, temp_path("le_model.txt"));
  const Model le_back = load_model(temp_path("le_model.txt"));
  CHECK(bits_eq(le_back.logeig.weight, le_model.logeig.weight));
  CHECK((le_back.logeig.bias - le_model.logeig.bias).norm() == 0.0);

  CHECK_THROWS_AS(load_model(temp_path("missing_model.txt")), IoError);
}

TEST_CASE("seeded fault in the lyapunov adjoint is caught by the checks") {
  CheckOptions opts;
  opts.fault_lyap_vjp_sign = true;
  const CheckReport rep = run_suite("gradients", opts);
  CHECK(!rep.all_pass());
  bool found = false;
  for (const auto& r : rep.results) {
    if (!r.pass && r.invariant.find("lyap_vjp") != std::string::npos) found = true;
  }
  CHECK(found);

  CHECK_THROWS_AS(run_suite("bogus", CheckOptions{}), UsageError);
}
