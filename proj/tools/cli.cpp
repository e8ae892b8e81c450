#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "geomlr/checks.hpp"
#include "geomlr/train.hpp"

namespace {

using namespace geomlr;

struct GenDataArgs {
  std::string kind = "spd";
  Index n = 10;
  Index classes = 3;
  Index per_class = 200;
  double sigma = 0.3;
  std::uint64_t seed = 42;
  std::string out;
};

struct TrainArgs {
  std::string data;
  std::string config;
  std::string out;
  std::string model;
  bool serial = false;
};

struct EvalArgs {
  std::string data;
  std::string model;
};

struct CheckArgs {
  std::string suite = "all";
  std::uint64_t seed = 12345;
};

int run_gen_data(const GenDataArgs& a) {
  const DataKind kind = parse_data_kind(a.kind);
  const Dataset ds = kind == DataKind::Spd
                         ? gen_spd_data(a.n, a.classes, a.per_class, a.sigma, a.seed)
                         : gen_so3_data(a.n, a.classes, a.per_class, a.sigma, a.seed);
  save_dataset(ds, a.out);
  std::cout << "wrote " << a.out << ": kind=" << data_kind_name(ds.kind) << " n=" << ds.n
            << " classes=" << ds.classes << " count=" << ds.count()
            << " train=" << ds.train_idx.size() << " test=" << ds.test_idx.size() << '\n';
  return 0;
}

int run_train(const TrainArgs& a, const RunConfig& cfg) {
  const Dataset ds = load_dataset(a.data);
  cfg.validate();
  Model trained;
  const ExecMode mode = a.serial ? ExecMode::Serial : ExecMode::Parallel;
  const RunReport report = train(ds, cfg, mode, &trained);
  const EpochRow& last = report.rows.back();
  std::cout << "classifier=" << classifier_name(cfg.classifier) << " epochs=" << last.epoch
            << " train_loss=" << last.train_loss << " train_acc=" << last.train_acc
            << " test_acc=" << last.test_acc << '\n';
  std::cout << "total_seconds=" << report.total_seconds << " digest=" << report.digest << '\n';
  if (!a.out.empty()) {
    write_csv(report, a.out);
    std::cout << "wrote " << a.out << '\n';
  }
  if (!a.model.empty()) {
    save_model(trained, a.model);
    std::cout << "wrote " << a.model << '\n';
  }
  return 0;
}

int run_eval(const EvalArgs& a) {
  const Dataset ds = load_dataset(a.data);
  const Model m = load_model(a.model);
  const double train_acc = model_accuracy(m, ds, ds.train_idx, ExecMode::Parallel);
  const double test_acc = model_accuracy(m, ds, ds.test_idx, ExecMode::Parallel);
  const double test_loss = model_mean_loss(m, ds, ds.test_idx, ExecMode::Parallel);
  std::cout << "classifier=" << classifier_name(m.classifier) << " train_acc=" << train_acc
            << " test_acc=" << test_acc << " test_loss=" << test_loss << '\n';
  return 0;
}

int run_check(const CheckArgs& a) {
  CheckOptions opts;
  opts.seed = a.seed;
  const CheckReport report = run_suite(a.suite, opts);
  print_report(report, std::cout);
  return report.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Riemannian multinomial logistic regression on SPD matrices and rotation products"};
  app.require_subcommand(1);

  GenDataArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen_cmd->add_option("--kind", gen.kind, "spd or so3-product");
  gen_cmd->add_option("--n", gen.n, "matrix dimension (spd) or block count (so3-product)");
  gen_cmd->add_option("--classes", gen.classes, "number of classes");
  gen_cmd->add_option("--per-class", gen.per_class, "samples per class");
  gen_cmd->add_option("--sigma", gen.sigma, "within-class noise scale");
  gen_cmd->add_option("--seed", gen.seed, "generator seed");
  gen_cmd->add_option("--out", gen.out, "output path")->required();

  TrainArgs ta;
  RunConfig cfg;
  std::string classifier_flag;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a classifier");
  train_cmd->add_option("--data", ta.data, "dataset path")->required();
  train_cmd->add_option("--config", ta.config, "key=value config file");
  auto* opt_cls = train_cmd->add_option("--classifier", classifier_flag,
                                        "logeig|lem|aim|em|lcm|bwm|lie");
  auto* opt_theta = train_cmd->add_option("--theta", cfg.theta, "deformation parameter");
  auto* opt_alpha = train_cmd->add_option("--alpha", cfg.alpha, "inner-product alpha");
  auto* opt_beta = train_cmd->add_option("--beta", cfg.beta, "inner-product beta");
  auto* opt_epochs = train_cmd->add_option("--epochs", cfg.epochs, "training epochs");
  auto* opt_batch = train_cmd->add_option("--batch", cfg.batch, "mini-batch size");
  auto* opt_lr = train_cmd->add_option("--lr", cfg.lr, "learning rate");
  auto* opt_mom = train_cmd->add_option("--momentum", cfg.momentum, "momentum coefficient");
  auto* opt_clip = train_cmd->add_option("--grad-clip", cfg.grad_clip,
                                         "gradient norm clip, 0 disables");
  auto* opt_seed = train_cmd->add_option("--seed", cfg.seed, "run seed");
  train_cmd->add_option("--out", ta.out, "per-epoch CSV output path");
  train_cmd->add_option("--model", ta.model, "trained model output path");
  train_cmd->add_flag("--serial", ta.serial, "single-threaded reference path");

  EvalArgs ea;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a saved model on a dataset");
  eval_cmd->add_option("--data", ea.data, "dataset path")->required();
  eval_cmd->add_option("--model", ea.model, "model path")->required();

  CheckArgs ca;
  CLI::App* check_cmd = app.add_subcommand("check", "Run invariant check suites");
  check_cmd->add_option("suite", ca.suite, "geometry|gradients|equivalence|limits|all");
  check_cmd->add_option("--seed", ca.seed, "suite seed");

  CheckArgs gca;
  CLI::App* gradcheck_cmd =
      app.add_subcommand("gradcheck", "Run the gradient check suites");
  gradcheck_cmd->add_option("--seed", gca.seed, "suite seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(gen_cmd)) return run_gen_data(gen);
    if (app.got_subcommand(train_cmd)) {
      RunConfig base;
      if (!ta.config.empty()) base = load_run_config(ta.config);
      if (opt_cls->count() > 0) base.classifier = parse_classifier(classifier_flag);
      if (opt_theta->count() > 0) base.theta = cfg.theta;
      if (opt_alpha->count() > 0) base.alpha = cfg.alpha;
      if (opt_beta->count() > 0) base.beta = cfg.beta;
      if (opt_epochs->count() > 0) base.epochs = cfg.epochs;
      if (opt_batch->count() > 0) base.batch = cfg.batch;
      if (opt_lr->count() > 0) base.lr = cfg.lr;
      if (opt_mom->count() > 0) base.momentum = cfg.momentum;
      if (opt_clip->count() > 0) base.grad_clip = cfg.grad_clip;
      if (opt_seed->count() > 0) base.seed = cfg.seed;
      return run_train(ta, base);
    }
    if (app.got_subcommand(eval_cmd)) return run_eval(ea);
    if (app.got_subcommand(check_cmd)) return run_check(ca);
    if (app.got_subcommand(gradcheck_cmd)) {
      CheckArgs a = gca;
      a.suite = "gradients";
      return run_check(a);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
