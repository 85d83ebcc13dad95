#include "moniqua/objectives.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "moniqua/error.hpp"

namespace moniqua {

ObjectiveKind parse_objective_kind(const std::string& s) {
  if (s == "theorem1_quadratic") return ObjectiveKind::Theorem1Quadratic;
  if (s == "hetero_quadratic") return ObjectiveKind::HeteroQuadratic;
  if (s == "least_squares") return ObjectiveKind::LeastSquares;
  if (s == "logistic") return ObjectiveKind::Logistic;
  fail(Err::InvalidParameter, "unknown objective kind: " + s);
}

std::string to_string(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::Theorem1Quadratic: return "theorem1_quadratic";
    case ObjectiveKind::HeteroQuadratic: return "hetero_quadratic";
    case ObjectiveKind::LeastSquares: return "least_squares";
    case ObjectiveKind::Logistic: return "logistic";
  }
  return "?";
}

ObjectiveSpec ObjectiveSpec::theorem1_quadratic(int dim, double delta_q) {
  if (!(delta_q > 0.0)) fail(Err::InvalidParameter, "delta_q must be positive");
  ObjectiveSpec o;
  o.kind_ = ObjectiveKind::Theorem1Quadratic;
  o.n_ = 1;  // identical f_i on all workers; worker count is free
  o.dim_ = dim;
  o.delta_q_ = delta_q;
  return o;
}

ObjectiveSpec ObjectiveSpec::hetero_quadratic(int n, int dim, double spread,
                                              std::uint64_t seed) {
  if (n < 1 || dim < 1) fail(Err::InvalidParameter, "hetero_quadratic needs n, dim >= 1");
  if (spread < 0.0) fail(Err::InvalidParameter, "spread must be nonnegative");
  ObjectiveSpec o;
  o.kind_ = ObjectiveKind::HeteroQuadratic;
  o.n_ = n;
  o.dim_ = dim;
  o.centers_.assign(static_cast<std::size_t>(n) * dim, 0.0);
  if (spread > 0.0 && n > 1) {
    CounterRng rng(seed, Stream::ObjectiveGen);
    std::vector<double> base(dim);
    for (int c = 0; c < dim; ++c) base[c] = rng.sym(0, c);
    // draw offsets, center them, then scale so that mean ||c_i - c_bar||^2
    // equals spread^2 exactly
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < dim; ++c)
        o.centers_[static_cast<std::size_t>(i) * dim + c] = rng.sym(i + 1, c);
    for (int c = 0; c < dim; ++c) {
      double mean = 0.0;
      for (int i = 0; i < n; ++i) mean += o.centers_[static_cast<std::size_t>(i) * dim + c];
      mean /= n;
      for (int i = 0; i < n; ++i) o.centers_[static_cast<std::size_t>(i) * dim + c] -= mean;
    }
    double ms = 0.0;
    for (double v : o.centers_) ms += v * v;
    ms /= n;
    const double scale = spread / std::sqrt(ms);
    for (double& v : o.centers_) v *= scale;
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < dim; ++c)
        o.centers_[static_cast<std::size_t>(i) * dim + c] += base[c];
  }
  return o;
}

ObjectiveSpec ObjectiveSpec::least_squares(int n, int dim, int samples, double noise_b,
                                           std::uint64_t seed, bool shared_design) {
  if (samples < dim)
    fail(Err::InvalidParameter, "least squares needs samples >= dim per worker");
  ObjectiveSpec o;
  o.kind_ = ObjectiveKind::LeastSquares;
  o.n_ = n;
  o.dim_ = dim;
  o.samples_ = samples;
  o.noise_b_ = noise_b;
  CounterRng rng(seed, Stream::ObjectiveGen);
  std::vector<double> truth(dim);
  for (int c = 0; c < dim; ++c) truth[c] = rng.sym(0, 0, c);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  o.a_.resize(n);
  o.y_.resize(n);
  for (int i = 0; i < n; ++i) {
    const int src = shared_design ? 0 : i;
    o.a_[i].resize(static_cast<std::size_t>(samples) * dim);
    o.y_[i].resize(samples);
    for (int s = 0; s < samples; ++s) {
      double dot = 0.0;
      for (int c = 0; c < dim; ++c) {
        const double v = rng.sym(src + 1, s, c) * scale;
        o.a_[i][static_cast<std::size_t>(s) * dim + c] = v;
        dot += v * truth[c];
      }
      // per-worker target perturbation makes the shards heterogeneous
      o.y_[i][s] = dot + 0.1 * rng.sym(i + 1, s, static_cast<std::uint64_t>(dim) + 7);
    }
  }
  return o;
}

ObjectiveSpec ObjectiveSpec::logistic(int n, int dim, int samples, double l2_reg,
                                      std::uint64_t seed) {
  if (samples < 1 || dim < 1) fail(Err::InvalidParameter, "logistic needs samples, dim >= 1");
  if (!(l2_reg > 0.0))
    fail(Err::InvalidParameter, "logistic needs l2_reg > 0 for a unique optimum");
  ObjectiveSpec o;
  o.kind_ = ObjectiveKind::Logistic;
  o.n_ = n;
  o.dim_ = dim;
  o.samples_ = samples;
  o.l2_reg_ = l2_reg;
  CounterRng rng(seed, Stream::ObjectiveGen);
  std::vector<double> truth(dim);
  for (int c = 0; c < dim; ++c) truth[c] = rng.sym(0, 0, c);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  o.a_.resize(n);
  o.y_.resize(n);
  for (int i = 0; i < n; ++i) {
    o.a_[i].resize(static_cast<std::size_t>(samples) * dim);
    o.y_[i].resize(samples);
    for (int s = 0; s < samples; ++s) {
      double dot = 0.0;
      for (int c = 0; c < dim; ++c) {
        const double v = rng.sym(i + 1, s, c) * scale;
        o.a_[i][static_cast<std::size_t>(s) * dim + c] = v;
        dot += v * truth[c];
      }
      const double p = 1.0 / (1.0 + std::exp(-4.0 * dot));
      o.y_[i][s] = rng.u01(i + 1, s, static_cast<std::uint64_t>(dim) + 13) < p ? 1.0 : -1.0;
    }
  }
  return o;
}

std::vector<double> ObjectiveSpec::grad_i(int worker, const std::vector<double>& x) const {
  if (static_cast<int>(x.size()) != dim_) fail(Err::StateError, "gradient dimension mismatch");
  std::vector<double> g(dim_, 0.0);
  switch (kind_) {
    case ObjectiveKind::Theorem1Quadratic: {
      const double c = delta_q_ / 2.0;
      for (int j = 0; j < dim_; ++j) g[j] = x[j] - c;
      break;
    }
    case ObjectiveKind::HeteroQuadratic: {
      const double* c = centers_.data() + static_cast<std::size_t>(worker) * dim_;
      for (int j = 0; j < dim_; ++j) g[j] = x[j] - c[j];
      break;
    }
    case ObjectiveKind::LeastSquares: {
      const auto& A = a_[worker];
      const auto& y = y_[worker];
      for (int s = 0; s < samples_; ++s) {
        double r = -y[s];
        const double* row = A.data() + static_cast<std::size_t>(s) * dim_;
        for (int j = 0; j < dim_; ++j) r += row[j] * x[j];
        for (int j = 0; j < dim_; ++j) g[j] += r * row[j];
      }
      for (int j = 0; j < dim_; ++j) g[j] /= samples_;
      break;
    }
    case ObjectiveKind::Logistic: {
      const auto& A = a_[worker];
      const auto& y = y_[worker];
      for (int s = 0; s < samples_; ++s) {
        const double* row = A.data() + static_cast<std::size_t>(s) * dim_;
        double dot = 0.0;
        for (int j = 0; j < dim_; ++j) dot += row[j] * x[j];
        const double m = -y[s] / (1.0 + std::exp(y[s] * dot));
        for (int j = 0; j < dim_; ++j) g[j] += m * row[j];
      }
      for (int j = 0; j < dim_; ++j) g[j] = g[j] / samples_ + l2_reg_ * x[j];
      break;
    }
  }
  return g;
}

double ObjectiveSpec::value(const std::vector<double>& x) const {
  double f = 0.0;
  switch (kind_) {
    case ObjectiveKind::Theorem1Quadratic: {
      const double c = delta_q_ / 2.0;
      for (int j = 0; j < dim_; ++j) f += (x[j] - c) * (x[j] - c);
      return 0.5 * f;
    }
    case ObjectiveKind::HeteroQuadratic: {
      for (int i = 0; i < n_; ++i) {
        const double* c = centers_.data() + static_cast<std::size_t>(i) * dim_;
        for (int j = 0; j < dim_; ++j) f += (x[j] - c[j]) * (x[j] - c[j]);
      }
      return 0.5 * f / n_;
    }
    case ObjectiveKind::LeastSquares: {
      for (int i = 0; i < n_; ++i) {
        for (int s = 0; s < samples_; ++s) {
          double r = -y_[i][s];
          const double* row = a_[i].data() + static_cast<std::size_t>(s) * dim_;
          for (int j = 0; j < dim_; ++j) r += row[j] * x[j];
          f += r * r / (2.0 * samples_);
        }
      }
      return f / n_;
    }
    case ObjectiveKind::Logistic: {
      for (int i = 0; i < n_; ++i) {
        for (int s = 0; s < samples_; ++s) {
          const double* row = a_[i].data() + static_cast<std::size_t>(s) * dim_;
          double dot = 0.0;
          for (int j = 0; j < dim_; ++j) dot += row[j] * x[j];
          f += std::log1p(std::exp(-y_[i][s] * dot)) / samples_;
        }
      }
      double reg = 0.0;
      for (int j = 0; j < dim_; ++j) reg += x[j] * x[j];
      return f / n_ + 0.5 * l2_reg_ * reg;
    }
  }
  return f;
}

std::vector<double> ObjectiveSpec::grad(const std::vector<double>& x) const {
  std::vector<double> g(dim_, 0.0);
  const int workers = kind_ == ObjectiveKind::Theorem1Quadratic ? 1 : n_;
  for (int i = 0; i < workers; ++i) {
    std::vector<double> gi = grad_i(i, x);
    for (int j = 0; j < dim_; ++j) g[j] += gi[j];
  }
  for (int j = 0; j < dim_; ++j) g[j] /= workers;
  return g;
}

std::vector<double> ObjectiveSpec::optimum_oracle() const {
  switch (kind_) {
    case ObjectiveKind::Theorem1Quadratic:
      return std::vector<double>(dim_, delta_q_ / 2.0);
    case ObjectiveKind::HeteroQuadratic: {
      std::vector<double> mean(dim_, 0.0);
      for (int i = 0; i < n_; ++i)
        for (int j = 0; j < dim_; ++j)
          mean[j] += centers_[static_cast<std::size_t>(i) * dim_ + j] / n_;
      return mean;
    }
    case ObjectiveKind::LeastSquares: {
      Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim_, dim_);
      Eigen::VectorXd b = Eigen::VectorXd::Zero(dim_);
      for (int i = 0; i < n_; ++i) {
        for (int s = 0; s < samples_; ++s) {
          Eigen::Map<const Eigen::VectorXd> row(
              a_[i].data() + static_cast<std::size_t>(s) * dim_, dim_);
          h += row * row.transpose() / samples_;
          b += row * (y_[i][s] / samples_);
        }
      }
      Eigen::VectorXd sol = h.ldlt().solve(b);
      return std::vector<double>(sol.data(), sol.data() + dim_);
    }
    case ObjectiveKind::Logistic: {
      // damped Newton on the full objective
      Eigen::VectorXd x = Eigen::VectorXd::Zero(dim_);
      for (int it = 0; it < 200; ++it) {
        std::vector<double> xs(x.data(), x.data() + dim_);
        std::vector<double> gv = grad(xs);
        Eigen::Map<Eigen::VectorXd> g(gv.data(), dim_);
        if (g.norm() < 1e-14) break;
        Eigen::MatrixXd h = l2_reg_ * Eigen::MatrixXd::Identity(dim_, dim_);
        for (int i = 0; i < n_; ++i)
          for (int s = 0; s < samples_; ++s) {
            Eigen::Map<const Eigen::VectorXd> row(
                a_[i].data() + static_cast<std::size_t>(s) * dim_, dim_);
            const double dot = row.dot(x);
            const double p = 1.0 / (1.0 + std::exp(-dot));
            h += (p * (1.0 - p) / (n_ * static_cast<double>(samples_))) * row *
                 row.transpose();
          }
        x -= h.ldlt().solve(g);
      }
      return std::vector<double>(x.data(), x.data() + dim_);
    }
  }
  return std::vector<double>(dim_, 0.0);
}

double ObjectiveSpec::outer_variance(const std::vector<double>& x) const {
  std::vector<double> g = grad(x);
  double v = 0.0;
  for (int i = 0; i < n_; ++i) {
    std::vector<double> gi = grad_i(kind_ == ObjectiveKind::Theorem1Quadratic ? 0 : i, x);
    for (int j = 0; j < dim_; ++j) v += (gi[j] - g[j]) * (gi[j] - g[j]);
  }
  return v / n_;
}

double ObjectiveSpec::noise_variance() const {
  return dim_ * noise_b_ * noise_b_ / 3.0;
}

double ObjectiveSpec::lipschitz() const {
  switch (kind_) {
    case ObjectiveKind::Theorem1Quadratic:
    case ObjectiveKind::HeteroQuadratic:
      return 1.0;
    case ObjectiveKind::LeastSquares:
    case ObjectiveKind::Logistic: {
      double worst = 0.0;
      for (int i = 0; i < n_; ++i) {
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim_, dim_);
        for (int s = 0; s < samples_; ++s) {
          Eigen::Map<const Eigen::VectorXd> row(
              a_[i].data() + static_cast<std::size_t>(s) * dim_, dim_);
          h += row * row.transpose() / samples_;
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
        worst = std::max(worst, es.eigenvalues().maxCoeff());
      }
      if (kind_ == ObjectiveKind::Logistic) return worst / 4.0 + l2_reg_;
      return worst;
    }
  }
  return 1.0;
}

std::vector<double> GradOracle::sample(int worker, const std::vector<double>& x,
                                       std::uint64_t k) const {
  for (double v : x)
    if (!std::isfinite(v))
      fail(Err::Diverged, "worker " + std::to_string(worker) + " state diverged");
  const int gw = obj_->kind() == ObjectiveKind::Theorem1Quadratic ? 0 : worker;
  std::vector<double> g = obj_->grad_i(gw, x);
  const double b = obj_->noise_b();
  if (b > 0.0) {
    for (std::size_t j = 0; j < g.size(); ++j)
      g[j] += b * rng_.sym(k, static_cast<std::uint64_t>(worker) + 1, j);
  }
  count_.fetch_add(1, std::memory_order_relaxed);
  return g;
}

}  // namespace moniqua
