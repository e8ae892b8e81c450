#include "geomlr/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "geomlr/songeo.hpp"

namespace geomlr {

std::string data_kind_name(DataKind k) {
  return k == DataKind::Spd ? "spd" : "so3-product";
}

DataKind parse_data_kind(const std::string& name) {
  if (name == "spd") return DataKind::Spd;
  if (name == "so3-product") return DataKind::So3Product;
  throw UsageError("unknown dataset kind: " + name);
}

void Dataset::validate() const {
  if (classes < 2) throw DomainError("dataset: need at least 2 classes");
  const std::size_t cnt = labels.size();
  if (kind == DataKind::Spd) {
    if (spd.size() != cnt) throw DimensionError("dataset: sample/label count mismatch");
    for (const auto& s : spd)
      if (s.n() != n) throw DimensionError("dataset: sample dimension mismatch");
  } else {
    if (so3.size() != cnt) throw DimensionError("dataset: sample/label count mismatch");
    for (const auto& blocks : so3)
      if (static_cast<Index>(blocks.size()) != n) {
        throw DimensionError("dataset: sample block count mismatch");
      }
  }
  for (int lab : labels)
    if (lab < 0 || lab >= classes) throw DomainError("dataset: label out of range");
  if (train_idx.size() + test_idx.size() != cnt) {
    throw DomainError("dataset: split not exhaustive");
  }
  std::vector<char> seen(cnt, 0);
  for (std::size_t i : train_idx) seen.at(i) += 1;
  for (std::size_t i : test_idx) seen.at(i) += 1;
  for (char c : seen)
    if (c != 1) throw DomainError("dataset: split not a partition");
}

namespace {

// First ceil(count/2) occurrences of each label, in file order, train the
// model; the rest are held out. Recomputable from the labels alone so a
// saved file round-trips to the same split.
void assign_splits(Dataset& ds) {
  std::map<int, std::size_t> total, seen;
  for (int lab : ds.labels) ++total[lab];
  ds.train_idx.clear();
  ds.test_idx.clear();
  for (std::size_t i = 0; i < ds.labels.size(); ++i) {
    const int lab = ds.labels[i];
    if (seen[lab] < (total[lab] + 1) / 2) {
      ds.train_idx.push_back(i);
    } else {
      ds.test_idx.push_back(i);
    }
    ++seen[lab];
  }
}

double skew3_angle(const Matrix& K) {
  return std::sqrt(K(2, 1) * K(2, 1) + K(0, 2) * K(0, 2) + K(1, 0) * K(1, 0));
}

constexpr double kPi = 3.14159265358979323846;

}  // namespace

Dataset gen_spd_data(Index n, Index C, Index per_class, double sigma, std::uint64_t seed) {
  if (n < 2 || C < 2 || per_class < 1) throw DomainError("gen_spd_data: bad shape");
  if (!(sigma > 0.0)) throw DomainError("gen_spd_data: sigma must be > 0");
  Rng rng(seed);
  Dataset ds;
  ds.kind = DataKind::Spd;
  ds.n = n;
  ds.classes = C;
  ds.seed = seed;

  std::vector<Matrix> mean_half;
  for (Index c = 0; c < C; ++c) {
    const SpdMatrix M(funcm(sym_gauss(rng, n, 1.0), fn::exp()).mat());
    mean_half.push_back(funcm(M, fn::sqrt()).mat());
  }
  for (Index c = 0; c < C; ++c) {
    const Matrix& Mh = mean_half[static_cast<std::size_t>(c)];
    for (Index i = 0; i < per_class; ++i) {
      const Matrix E = funcm(sym_gauss(rng, n, sigma), fn::exp()).mat();
      ds.spd.emplace_back(sym_part(Mh * E * Mh));
      ds.labels.push_back(static_cast<int>(c));
    }
  }
  assign_splits(ds);
  ds.validate();
  return ds;
}

Dataset gen_so3_data(Index m, Index C, Index per_class, double sigma, std::uint64_t seed) {
  if (m < 1 || C < 2 || per_class < 1) throw DomainError("gen_so3_data: bad shape");
  if (!(sigma > 0.0)) throw DomainError("gen_so3_data: sigma must be > 0");
  Rng rng(seed);
  Dataset ds;
  ds.kind = DataKind::So3Product;
  ds.n = m;
  ds.classes = C;
  ds.seed = seed;

  std::vector<std::vector<RotationMatrix>> means;
  std::vector<std::vector<double>> mean_angle;
  for (Index c = 0; c < C; ++c) {
    std::vector<RotationMatrix> blocks;
    std::vector<double> angles;
    for (Index b = 0; b < m; ++b) {
      Matrix K = skew_gauss(rng, 3, 1.0).mat();
      const double t = skew3_angle(K);
      if (t > 2.0) K *= 2.0 / t;
      blocks.push_back(so3_exp(SkewMatrix(K)));
      angles.push_back(std::min(t, 2.0));
    }
    means.push_back(std::move(blocks));
    mean_angle.push_back(std::move(angles));
  }
  for (Index c = 0; c < C; ++c) {
    for (Index i = 0; i < per_class; ++i) {
      std::vector<RotationMatrix> sample;
      for (Index b = 0; b < m; ++b) {
        Matrix W = skew_gauss(rng, 3, sigma).mat();
        const double tw = skew3_angle(W);
        const double cap =
            kPi - 0.1 - mean_angle[static_cast<std::size_t>(c)][static_cast<std::size_t>(b)];
        if (tw > cap) W *= cap / tw;
        const RotationMatrix pert = so3_exp(SkewMatrix(W));
        sample.emplace_back(
            means[static_cast<std::size_t>(c)][static_cast<std::size_t>(b)].mat() * pert.mat());
      }
      ds.so3.push_back(std::move(sample));
      ds.labels.push_back(static_cast<int>(c));
    }
  }
  assign_splits(ds);
  ds.validate();
  return ds;
}

namespace {

void append_value(std::string& line, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), " %.17g", v);
  line += buf;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& path) {
  ds.validate();
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << data_kind_name(ds.kind) << ' ' << ds.n << ' ' << ds.classes << ' ' << ds.count()
      << ' ' << ds.seed << '\n';
  for (std::size_t s = 0; s < ds.count(); ++s) {
    std::string line = std::to_string(ds.labels[s]);
    if (ds.kind == DataKind::Spd) {
      const Matrix& M = ds.spd[s].mat();
      for (Index i = 0; i < ds.n; ++i)
        for (Index j = 0; j <= i; ++j) append_value(line, M(i, j));
    } else {
      for (const auto& block : ds.so3[s]) {
        const Matrix& M = block.mat();
        for (Index i = 0; i < 3; ++i)
          for (Index j = 0; j < 3; ++j) append_value(line, M(i, j));
      }
    }
    out << line << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  Dataset ds;
  std::string kind;
  std::size_t count = 0;
  if (!(in >> kind >> ds.n >> ds.classes >> count >> ds.seed)) {
    throw IoError("malformed dataset header: " + path);
  }
  ds.kind = parse_data_kind(kind);
  for (std::size_t s = 0; s < count; ++s) {
    int label;
    if (!(in >> label)) throw IoError("truncated dataset file: " + path);
    ds.labels.push_back(label);
    if (ds.kind == DataKind::Spd) {
      Matrix M(ds.n, ds.n);
      for (Index i = 0; i < ds.n; ++i) {
        for (Index j = 0; j <= i; ++j) {
          double v;
          if (!(in >> v)) throw IoError("truncated dataset file: " + path);
          M(i, j) = M(j, i) = v;
        }
      }
      ds.spd.emplace_back(M);
    } else {
      std::vector<RotationMatrix> blocks;
      for (Index b = 0; b < ds.n; ++b) {
        Matrix M(3, 3);
        for (Index i = 0; i < 3; ++i)
          for (Index j = 0; j < 3; ++j) {
            double v;
            if (!(in >> v)) throw IoError("truncated dataset file: " + path);
            M(i, j) = v;
          }
        blocks.emplace_back(M);
      }
      ds.so3.push_back(std::move(blocks));
    }
  }
  assign_splits(ds);
  ds.validate();
  return ds;
}

double nearest_mean_accuracy(const Dataset& ds) {
  ds.validate();
  const Index C = ds.classes;
  std::size_t correct = 0;

  if (ds.kind == DataKind::Spd) {
    std::vector<Matrix> log_sum(static_cast<std::size_t>(C), Matrix::Zero(ds.n, ds.n));
    std::vector<std::size_t> cnt(static_cast<std::size_t>(C), 0);
    for (std::size_t i : ds.train_idx) {
      const auto c = static_cast<std::size_t>(ds.labels[i]);
      log_sum[c] += funcm(ds.spd[i], fn::log()).mat();
      ++cnt[c];
    }
    std::vector<Matrix> mean_invhalf;
    for (Index c = 0; c < C; ++c) {
      const auto cc = static_cast<std::size_t>(c);
      if (cnt[cc] == 0) throw DomainError("nearest_mean_accuracy: empty class in train split");
      const Matrix Z = log_sum[cc] / static_cast<double>(cnt[cc]);
      mean_invhalf.push_back(funcm(SymmetricMatrix(-0.5 * Z), fn::exp()).mat());
    }
    for (std::size_t i : ds.test_idx) {
      double best = 0.0;
      int arg = 0;
      for (Index c = 0; c < C; ++c) {
        const Matrix& W = mean_invhalf[static_cast<std::size_t>(c)];
        const SymmetricMatrix X(sym_part(W * ds.spd[i].mat() * W));
        const double d = funcm(X, fn::log()).mat().norm();
        if (c == 0 || d < best) {
          best = d;
          arg = static_cast<int>(c);
        }
      }
      if (arg == ds.labels[i]) ++correct;
    }
  } else {
    std::vector<std::vector<Matrix>> sums(
        static_cast<std::size_t>(C), std::vector<Matrix>(static_cast<std::size_t>(ds.n), Matrix::Zero(3, 3)));
    for (std::size_t i : ds.train_idx) {
      const auto c = static_cast<std::size_t>(ds.labels[i]);
      for (Index b = 0; b < ds.n; ++b) {
        sums[c][static_cast<std::size_t>(b)] += ds.so3[i][static_cast<std::size_t>(b)].mat();
      }
    }
    std::vector<std::vector<RotationMatrix>> means;
    for (Index c = 0; c < C; ++c) {
      std::vector<RotationMatrix> blocks;
      for (Index b = 0; b < ds.n; ++b) {
        blocks.push_back(
            orthonormalize_det1(sums[static_cast<std::size_t>(c)][static_cast<std::size_t>(b)]));
      }
      means.push_back(std::move(blocks));
    }
    for (std::size_t i : ds.test_idx) {
      double best = 0.0;
      int arg = 0;
      for (Index c = 0; c < C; ++c) {
        double d = 0.0;
        for (Index b = 0; b < ds.n; ++b) {
          d += so_log(means[static_cast<std::size_t>(c)][static_cast<std::size_t>(b)],
                      ds.so3[i][static_cast<std::size_t>(b)])
                   .mat()
                   .squaredNorm();
        }
        if (c == 0 || d < best) {
          best = d;
          arg = static_cast<int>(c);
        }
      }
      if (arg == ds.labels[i]) ++correct;
    }
  }
  return ds.test_idx.empty() ? 0.0
                             : static_cast<double>(correct) / static_cast<double>(ds.test_idx.size());
}

}  // namespace geomlr
