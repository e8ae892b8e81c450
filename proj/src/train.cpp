#include "geomlr/train.hpp"

#include <chrono>
#include <cstdio>
#include <exception>
#include <fstream>
#include <sstream>

namespace geomlr {

std::string classifier_name(Classifier c) {
  switch (c) {
    case Classifier::LogEig: return "logeig";
    case Classifier::Lem: return "lem";
    case Classifier::Aim: return "aim";
    case Classifier::Em: return "em";
    case Classifier::Lcm: return "lcm";
    case Classifier::Bwm: return "bwm";
    case Classifier::Lie: return "lie";
  }
  throw DomainError("classifier_name: bad tag");
}

Classifier parse_classifier(const std::string& name) {
  if (name == "logeig") return Classifier::LogEig;
  if (name == "lem") return Classifier::Lem;
  if (name == "aim") return Classifier::Aim;
  if (name == "em") return Classifier::Em;
  if (name == "lcm") return Classifier::Lcm;
  if (name == "bwm") return Classifier::Bwm;
  if (name == "lie") return Classifier::Lie;
  throw UsageError("unknown classifier: " + name);
}

namespace {

bool is_spd_family(Classifier c) {
  return c == Classifier::Lem || c == Classifier::Aim || c == Classifier::Em ||
         c == Classifier::Lcm || c == Classifier::Bwm;
}

Family family_of(Classifier c) {
  switch (c) {
    case Classifier::Lem: return Family::Lem;
    case Classifier::Aim: return Family::Aim;
    case Classifier::Em: return Family::Em;
    case Classifier::Lcm: return Family::Lcm;
    case Classifier::Bwm: return Family::Bwm;
    default: throw DomainError("classifier has no SPD metric family");
  }
}

}  // namespace

void RunConfig::validate() const {
  if (epochs < 0) throw UsageError("epochs must be >= 0");
  if (batch < 1) throw UsageError("batch must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw UsageError("lr must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw UsageError("momentum must lie in [0, 1)");
  if (!(grad_clip >= 0.0)) throw UsageError("grad_clip must be >= 0");
  if (is_spd_family(classifier)) metric_params();  // theta/alpha/beta domain checks
}

MetricParams RunConfig::metric_params() const {
  return MetricParams(family_of(classifier), theta, alpha, beta);
}

OptConfig RunConfig::opt_config() const {
  OptConfig opt;
  opt.lr = lr;
  opt.momentum = momentum;
  opt.weight_decay = 0.0;
  opt.grad_clip = grad_clip;
  opt.validate();
  return opt;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string();
      const auto b = s.find_last_not_of(" \t\r");
      return s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw UsageError(path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    try {
      if (key == "classifier") cfg.classifier = parse_classifier(value);
      else if (key == "theta") cfg.theta = std::stod(value);
      else if (key == "alpha") cfg.alpha = std::stod(value);
      else if (key == "beta") cfg.beta = std::stod(value);
      else if (key == "epochs") cfg.epochs = static_cast<Index>(std::stoll(value));
      else if (key == "batch") cfg.batch = static_cast<Index>(std::stoll(value));
      else if (key == "lr") cfg.lr = std::stod(value);
      else if (key == "momentum") cfg.momentum = std::stod(value);
      else if (key == "grad_clip") cfg.grad_clip = std::stod(value);
      else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(std::stoull(value));
      else throw UsageError(path + ":" + std::to_string(lineno) + ": unknown key " + key);
    } catch (const std::invalid_argument&) {
      throw UsageError(path + ":" + std::to_string(lineno) + ": bad value for " + key);
    } catch (const std::out_of_range&) {
      throw UsageError(path + ":" + std::to_string(lineno) + ": bad value for " + key);
    }
  }
  return cfg;
}

Model init_model(const RunConfig& cfg, const Dataset& ds) {
  if ((cfg.classifier == Classifier::Lie) != (ds.kind == DataKind::So3Product)) {
    throw UsageError("classifier " + classifier_name(cfg.classifier) +
                     " does not match dataset kind " + data_kind_name(ds.kind));
  }
  Rng rng(cfg.seed);
  Model m;
  m.classifier = cfg.classifier;
  if (is_spd_family(cfg.classifier)) {
    m.mp = cfg.metric_params();
    m.mp.require_ab(ds.n);
    m.spd = init_spd_mlr(m.mp, ds.n, ds.classes, rng);
  } else if (cfg.classifier == Classifier::Lie) {
    m.lie = init_lie_mlr(ds.n, ds.classes, rng);
  } else {
    m.logeig = init_logeig(ds.n, ds.classes, rng);
  }
  return m;
}

Logits model_logits(const Model& m, const Dataset& ds, std::size_t sample) {
  if (m.classifier == Classifier::Lie) return lie_mlr_logits(ds.so3[sample], m.lie);
  if (m.classifier == Classifier::LogEig) return logeig_logits(ds.spd[sample], m.logeig);
  return spd_mlr_logits(m.mp, ds.spd[sample], m.spd);
}

namespace {

int argmax_lowest(const Logits& z) {
  int arg = 0;
  for (Index c = 1; c < z.size(); ++c)
    if (z(c) > z(arg)) arg = static_cast<int>(c);
  return arg;
}

void rethrow_first(std::vector<std::exception_ptr>& errs) {
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
}

}  // namespace

double model_accuracy(const Model& m, const Dataset& ds, const std::vector<std::size_t>& idx,
                      ExecMode mode) {
  if (idx.empty()) return 0.0;
  const auto cnt = static_cast<std::ptrdiff_t>(idx.size());
  std::vector<char> hit(idx.size(), 0);
  std::vector<std::exception_ptr> errs(idx.size());
  const bool par = mode == ExecMode::Parallel;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t i = 0; i < cnt; ++i) {
    try {
      const auto s = idx[static_cast<std::size_t>(i)];
      hit[static_cast<std::size_t>(i)] =
          argmax_lowest(model_logits(m, ds, s)) == ds.labels[s] ? 1 : 0;
    } catch (...) {
      errs[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  rethrow_first(errs);
  std::size_t correct = 0;
  for (char h : hit) correct += static_cast<std::size_t>(h);
  return static_cast<double>(correct) / static_cast<double>(idx.size());
}

double model_mean_loss(const Model& m, const Dataset& ds, const std::vector<std::size_t>& idx,
                       ExecMode mode) {
  if (idx.empty()) return 0.0;
  const auto cnt = static_cast<std::ptrdiff_t>(idx.size());
  std::vector<double> losses(idx.size(), 0.0);
  std::vector<std::exception_ptr> errs(idx.size());
  const bool par = mode == ExecMode::Parallel;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t i = 0; i < cnt; ++i) {
    try {
      const auto s = idx[static_cast<std::size_t>(i)];
      losses[static_cast<std::size_t>(i)] =
          softmax_xent(model_logits(m, ds, s), ds.labels[s]).loss;
    } catch (...) {
      errs[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  rethrow_first(errs);
  double sum = 0.0;
  for (double l : losses) sum += l;
  return sum / static_cast<double>(idx.size());
}

BatchGrad batch_gradient(const Model& m, const Dataset& ds,
                         const std::vector<std::size_t>& idx, ExecMode mode) {
  if (idx.empty()) throw DomainError("batch_gradient: empty batch");
  const auto cnt = static_cast<std::ptrdiff_t>(idx.size());
  const double w = 1.0 / static_cast<double>(idx.size());
  std::vector<double> losses(idx.size(), 0.0);
  std::vector<GradBundle> grads(idx.size());
  std::vector<std::exception_ptr> errs(idx.size());
  const bool par = mode == ExecMode::Parallel;

#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t i = 0; i < cnt; ++i) {
    try {
      const auto s = idx[static_cast<std::size_t>(i)];
      const auto ii = static_cast<std::size_t>(i);
      if (m.classifier == Classifier::Lie) {
        auto [loss, g] = grad_lie_mlr(ds.so3[s], m.lie, ds.labels[s]);
        losses[ii] = loss;
        grads[ii] = std::move(g);
      } else if (m.classifier == Classifier::LogEig) {
        LogEigGrad g = grad_logeig(ds.spd[s], m.logeig, ds.labels[s]);
        losses[ii] = g.loss;
        GradBundle b;
        b.dA = {{std::move(g.dweight)}, {Matrix(g.dbias)}};
        grads[ii] = std::move(b);
      } else {
        auto [loss, g] = grad_spd_mlr(m.mp, ds.spd[s], m.spd, ds.labels[s]);
        losses[ii] = loss;
        grads[ii] = std::move(g);
      }
    } catch (...) {
      errs[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  rethrow_first(errs);

  BatchGrad out;
  out.bundle = grads[0];
  out.bundle.has_dS = false;
  out.bundle.dS.clear();
  out.bundle.scale(w);
  out.loss = losses[0] * w;
  for (std::size_t i = 1; i < grads.size(); ++i) {
    out.bundle.axpy(w, grads[i]);
    out.loss += losses[i] * w;
  }
  return out;
}

namespace {

struct SlotSet {
  std::vector<ParamSlot> slots;

  static SlotSet from_model(const Model& m) {
    SlotSet s;
    if (m.classifier == Classifier::Lie) {
      for (std::size_t k = 0; k < m.lie.P.size(); ++k)
        for (std::size_t b = 0; b < m.lie.P[k].size(); ++b)
          s.slots.emplace_back(SlotKind::Rotation,
                               "P" + std::to_string(k) + "b" + std::to_string(b),
                               m.lie.P[k][b].mat());
      for (std::size_t k = 0; k < m.lie.A.size(); ++k)
        for (std::size_t b = 0; b < m.lie.A[k].size(); ++b)
          s.slots.emplace_back(SlotKind::Euclidean,
                               "A" + std::to_string(k) + "b" + std::to_string(b),
                               m.lie.A[k][b].mat());
    } else if (m.classifier == Classifier::LogEig) {
      s.slots.emplace_back(SlotKind::Euclidean, "weight", m.logeig.weight);
      s.slots.emplace_back(SlotKind::Euclidean, "bias", Matrix(m.logeig.bias));
    } else {
      for (std::size_t k = 0; k < m.spd.P.size(); ++k)
        s.slots.emplace_back(SlotKind::SpdAim, "P" + std::to_string(k), m.spd.P[k].mat());
      for (std::size_t k = 0; k < m.spd.A.size(); ++k)
        s.slots.emplace_back(SlotKind::Euclidean, "A" + std::to_string(k), m.spd.A[k].mat());
    }
    return s;
  }

  // Gradient matrices in slot order, mirroring from_model.
  static std::vector<const Matrix*> grads_in_order(const Model& m, const GradBundle& g) {
    std::vector<const Matrix*> out;
    if (m.classifier == Classifier::LogEig) {
      out.push_back(&g.dA[0][0]);
      out.push_back(&g.dA[1][0]);
      return out;
    }
    for (const auto& per_class : g.dP)
      for (const auto& mat : per_class) out.push_back(&mat);
    for (const auto& per_class : g.dA)
      for (const auto& mat : per_class) out.push_back(&mat);
    return out;
  }

  void write_back(Model& m) const {
    std::size_t i = 0;
    if (m.classifier == Classifier::Lie) {
      for (auto& row : m.lie.P)
        for (auto& p : row) p = RotationMatrix(slots[i++].value);
      for (auto& row : m.lie.A)
        for (auto& a : row) a = SkewMatrix(slots[i++].value);
    } else if (m.classifier == Classifier::LogEig) {
      m.logeig.weight = slots[i++].value;
      m.logeig.bias = slots[i++].value.col(0);
    } else {
      for (auto& p : m.spd.P) p = SpdMatrix(slots[i++].value);
      for (auto& a : m.spd.A) a = SymmetricMatrix(sym_part(slots[i++].value));
    }
  }
};

std::uint64_t fnv1a(const std::string& data) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void append_g17(std::string& s, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  s += buf;
}

void append_matrix(std::string& s, const Matrix& M) {
  for (Index i = 0; i < M.rows(); ++i)
    for (Index j = 0; j < M.cols(); ++j) {
      append_g17(s, M(i, j));
      s += '\n';
    }
}

std::string digest_input(const std::vector<EpochRow>& rows, const Model& m) {
  std::string s;
  for (const auto& r : rows) {
    s += std::to_string(r.epoch);
    s += ',';
    append_g17(s, r.train_loss);
    s += ',';
    append_g17(s, r.train_acc);
    s += ',';
    append_g17(s, r.test_acc);
    s += '\n';
  }
  s += "params\n";
  if (m.classifier == Classifier::Lie) {
    for (const auto& row : m.lie.P)
      for (const auto& p : row) append_matrix(s, p.mat());
    for (const auto& row : m.lie.A)
      for (const auto& a : row) append_matrix(s, a.mat());
  } else if (m.classifier == Classifier::LogEig) {
    append_matrix(s, m.logeig.weight);
    append_matrix(s, Matrix(m.logeig.bias));
  } else {
    for (const auto& p : m.spd.P) append_matrix(s, p.mat());
    for (const auto& a : m.spd.A) append_matrix(s, a.mat());
  }
  return s;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

RunReport train(const Dataset& ds, const RunConfig& cfg, ExecMode mode, Model* trained) {
  using Clock = std::chrono::steady_clock;
  cfg.validate();
  ds.validate();
  const auto t_start = Clock::now();

  Model model = init_model(cfg, ds);
  SlotSet slots = SlotSet::from_model(model);
  const OptConfig opt = cfg.opt_config();
  Rng shuffle_rng(cfg.seed + 0x9e3779b97f4a7c15ULL);

  RunReport report;
  const auto seconds_since = [](Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
  };

  {
    const auto t0 = Clock::now();
    EpochRow row;
    row.epoch = 0;
    row.train_loss = model_mean_loss(model, ds, ds.train_idx, mode);
    row.train_acc = model_accuracy(model, ds, ds.train_idx, mode);
    row.test_acc = model_accuracy(model, ds, ds.test_idx, mode);
    row.seconds = seconds_since(t0);
    report.rows.push_back(row);
  }

  const std::size_t train_cnt = ds.train_idx.size();
  std::vector<Index> perm(train_cnt);
  for (std::size_t i = 0; i < train_cnt; ++i) perm[i] = static_cast<Index>(i);

  for (Index epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = Clock::now();
    try {
      shuffle_indices(shuffle_rng, perm);
      double loss_sum = 0.0;
      std::size_t pos = 0;
      while (pos < train_cnt) {
        const std::size_t take =
            std::min(static_cast<std::size_t>(cfg.batch), train_cnt - pos);
        std::vector<std::size_t> batch(take);
        for (std::size_t i = 0; i < take; ++i) {
          batch[i] = ds.train_idx[static_cast<std::size_t>(perm[pos + i])];
        }
        pos += take;

        BatchGrad bg = batch_gradient(model, ds, batch, mode);
        loss_sum += bg.loss * static_cast<double>(take);
        const GradBundle clipped =
            opt.grad_clip > 0.0 ? clip_grads(bg.bundle, opt.grad_clip) : bg.bundle;
        const auto gmats = SlotSet::grads_in_order(model, clipped);
        if (gmats.size() != slots.slots.size()) {
          throw DimensionError("train: slot/gradient count mismatch");
        }
        for (std::size_t i = 0; i < gmats.size(); ++i) {
          step(slots.slots[i], *gmats[i], opt);
        }
        slots.write_back(model);
      }

      EpochRow row;
      row.epoch = epoch;
      row.train_loss = loss_sum / static_cast<double>(train_cnt);
      row.train_acc = model_accuracy(model, ds, ds.train_idx, mode);
      row.test_acc = model_accuracy(model, ds, ds.test_idx, mode);
      row.seconds = seconds_since(t0);
      report.rows.push_back(row);
    } catch (const DivergenceError& e) {
      throw DivergenceError("epoch " + std::to_string(epoch) + ": " + e.what());
    }
  }

  report.total_seconds = seconds_since(t_start);
  report.digest = hex64(fnv1a(digest_input(report.rows, model)));
  if (trained) *trained = model;
  return report;
}

void write_csv(const RunReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "epoch,train_loss,train_acc,test_acc,seconds\n";
  char buf[160];
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,%.17g,%.6f\n",
                  static_cast<long long>(r.epoch), r.train_loss, r.train_acc, r.test_acc,
                  r.seconds);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "# total_seconds=%.6f digest=%s\n", report.total_seconds,
                report.digest.c_str());
  out << buf;
  if (!out) throw IoError("write failed: " + path);
}

void save_model(const Model& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "model " << classifier_name(m.classifier) << '\n';
  char buf[96];
  std::snprintf(buf, sizeof(buf), "theta %.17g alpha %.17g beta %.17g\n", m.mp.theta,
                m.mp.alpha, m.mp.beta);
  out << buf;
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g\n", v);
    out << buf;
  };
  auto put_matrix = [&](const Matrix& M) {
    for (Index i = 0; i < M.rows(); ++i)
      for (Index j = 0; j < M.cols(); ++j) put(M(i, j));
  };
  if (m.classifier == Classifier::Lie) {
    out << "classes " << m.lie.classes() << " n " << m.lie.blocks << '\n';
    for (const auto& row : m.lie.P)
      for (const auto& p : row) put_matrix(p.mat());
    for (const auto& row : m.lie.A)
      for (const auto& a : row) put_matrix(a.mat());
  } else if (m.classifier == Classifier::LogEig) {
    out << "classes " << m.logeig.classes() << " n " << m.logeig.dim << '\n';
    put_matrix(m.logeig.weight);
    put_matrix(Matrix(m.logeig.bias));
  } else {
    out << "classes " << m.spd.classes() << " n " << m.spd.n() << '\n';
    for (const auto& p : m.spd.P) put_matrix(p.mat());
    for (const auto& a : m.spd.A) put_matrix(a.mat());
  }
  if (!out) throw IoError("write failed: " + path);
}

Model load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  std::string tag, name, key;
  if (!(in >> tag >> name) || tag != "model") throw IoError("malformed model file: " + path);
  Model m;
  m.classifier = parse_classifier(name);
  double theta, alpha, beta;
  if (!(in >> key >> theta) || key != "theta") throw IoError("malformed model file: " + path);
  if (!(in >> key >> alpha) || key != "alpha") throw IoError("malformed model file: " + path);
  if (!(in >> key >> beta) || key != "beta") throw IoError("malformed model file: " + path);
  Index C, n;
  if (!(in >> key >> C) || key != "classes") throw IoError("malformed model file: " + path);
  if (!(in >> key >> n) || key != "n") throw IoError("malformed model file: " + path);
  auto read_matrix = [&](Index rows, Index cols) {
    Matrix M(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j)
        if (!(in >> M(i, j))) throw IoError("truncated model file: " + path);
    return M;
  };
  if (m.classifier == Classifier::Lie) {
    m.lie.blocks = n;
    for (Index k = 0; k < C; ++k) {
      std::vector<RotationMatrix> row;
      for (Index b = 0; b < n; ++b) row.emplace_back(read_matrix(3, 3));
      m.lie.P.push_back(std::move(row));
    }
    for (Index k = 0; k < C; ++k) {
      std::vector<SkewMatrix> row;
      for (Index b = 0; b < n; ++b) row.emplace_back(read_matrix(3, 3));
      m.lie.A.push_back(std::move(row));
    }
  } else if (m.classifier == Classifier::LogEig) {
    m.logeig.dim = n;
    const Index D = n * (n + 1) / 2;
    m.logeig.weight = read_matrix(C, D);
    m.logeig.bias = read_matrix(C, 1).col(0);
  } else {
    Family fam;
    switch (m.classifier) {
      case Classifier::Lem: fam = Family::Lem; break;
      case Classifier::Aim: fam = Family::Aim; break;
      case Classifier::Em: fam = Family::Em; break;
      case Classifier::Lcm: fam = Family::Lcm; break;
      default: fam = Family::Bwm; break;
    }
    m.mp = MetricParams(fam, theta, alpha, beta);
    for (Index k = 0; k < C; ++k) m.spd.P.emplace_back(read_matrix(n, n));
    for (Index k = 0; k < C; ++k) {
      m.spd.A.emplace_back(sym_part(read_matrix(n, n)));
    }
    m.spd.mp = m.mp;
  }
  return m;
}

}  // namespace geomlr
