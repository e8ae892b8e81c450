#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "geomlr/train.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using namespace geomlr;

bool bits_eq(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

bool bits_eq(const Matrix& A, const Matrix& B) {
  if (A.rows() != B.rows() || A.cols() != B.cols()) return false;
  return std::memcmp(A.data(), B.data(), sizeof(double) * static_cast<std::size_t>(A.size())) ==
         0;
}

bool bundle_eq(const GradBundle& x, const GradBundle& y) {
  if (x.dP.size() != y.dP.size() || x.dA.size() != y.dA.size()) return false;
  for (std::size_t k = 0; k < x.dP.size(); ++k) {
    if (x.dP[k].size() != y.dP[k].size()) return false;
    for (std::size_t b = 0; b < x.dP[k].size(); ++b)
      if (!bits_eq(x.dP[k][b], y.dP[k][b])) return false;
  }
  for (std::size_t k = 0; k < x.dA.size(); ++k) {
    if (x.dA[k].size() != y.dA[k].size()) return false;
    for (std::size_t b = 0; b < x.dA[k].size(); ++b)
      if (!bits_eq(x.dA[k][b], y.dA[k][b])) return false;
  }
  return true;
}

double time_reps(int reps, const std::function<void()>& f) {
  const auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) f();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count() / reps;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compare the serial and OpenMP batch kernels on one mini-batch gradient"};
  std::string classifier = "aim";
  Index n = 10;
  Index classes = 3;
  Index per_class = 200;
  double sigma = 0.3;
  std::uint64_t seed = 42;
  int reps = 5;
  app.add_option("--classifier", classifier, "logeig|lem|aim|em|lcm|bwm|lie");
  app.add_option("--n", n, "matrix dimension (spd) or block count (lie)");
  app.add_option("--classes", classes, "number of classes");
  app.add_option("--per-class", per_class, "samples per class");
  app.add_option("--sigma", sigma, "within-class noise scale");
  app.add_option("--seed", seed, "dataset and init seed");
  app.add_option("--reps", reps, "timing repetitions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg;
    cfg.classifier = parse_classifier(classifier);
    cfg.seed = seed;
    if (cfg.classifier == Classifier::Bwm) cfg.theta = 0.5;
    const Dataset ds = cfg.classifier == Classifier::Lie
                           ? gen_so3_data(n, classes, per_class, sigma, seed)
                           : gen_spd_data(n, classes, per_class, sigma, seed);
    const Model m = init_model(cfg, ds);
    const std::vector<std::size_t>& idx = ds.train_idx;

    // warm-up and the correctness comparison
    const BatchGrad gs = batch_gradient(m, ds, idx, ExecMode::Serial);
    const BatchGrad gp = batch_gradient(m, ds, idx, ExecMode::Parallel);
    const double ls = model_mean_loss(m, ds, idx, ExecMode::Serial);
    const double lp = model_mean_loss(m, ds, idx, ExecMode::Parallel);
    const bool identical =
        bits_eq(gs.loss, gp.loss) && bits_eq(ls, lp) && bundle_eq(gs.bundle, gp.bundle);

    const double ts =
        time_reps(reps, [&] { batch_gradient(m, ds, idx, ExecMode::Serial); });
    const double tp =
        time_reps(reps, [&] { batch_gradient(m, ds, idx, ExecMode::Parallel); });

    int threads = 1;
#ifdef _OPENMP
    threads = omp_get_max_threads();
#endif
    std::cout << "dataset: " << data_kind_name(ds.kind) << " n=" << ds.n
              << " classes=" << ds.classes << " batch=" << idx.size() << '\n';
    std::cout << "classifier=" << classifier_name(cfg.classifier) << " reps=" << reps << '\n';
    std::printf("serial:   %.6f s/rep\n", ts);
    std::printf("parallel: %.6f s/rep  (%d threads, speedup %.2fx)\n", tp, threads,
                ts / std::max(tp, 1e-12));
    std::cout << "bit-identical results: " << (identical ? "yes" : "NO") << '\n';
    return identical ? 0 : 1;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
