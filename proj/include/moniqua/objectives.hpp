#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <vector>

#include "moniqua/rng.hpp"

namespace moniqua {

enum class ObjectiveKind { Theorem1Quadratic, HeteroQuadratic, LeastSquares, Logistic };

ObjectiveKind parse_objective_kind(const std::string& s);
std::string to_string(ObjectiveKind k);

// Problem instances with analytic per-worker gradients, an independently
// computable global optimum, and bounded-support gradient noise (uniform
// half-width b per coordinate, so sigma^2 = d b^2 / 3 and G_inf stays finite
// on bounded iterates).
class ObjectiveSpec {
public:
  static ObjectiveSpec theorem1_quadratic(int dim, double delta_q);
  static ObjectiveSpec hetero_quadratic(int n, int dim, double spread, std::uint64_t seed);
  static ObjectiveSpec least_squares(int n, int dim, int samples, double noise_b,
                                     std::uint64_t seed, bool shared_design = false);
  static ObjectiveSpec logistic(int n, int dim, int samples, double l2_reg,
                                std::uint64_t seed);

  ObjectiveKind kind() const { return kind_; }
  int workers() const { return n_; }
  int dim() const { return dim_; }
  double noise_b() const { return noise_b_; }
  void set_noise_b(double b) { noise_b_ = b; }

  // Analytic local gradient of f_i at x.
  std::vector<double> grad_i(int worker, const std::vector<double>& x) const;
  // Global objective f(x) = (1/n) sum_i f_i(x) and its gradient.
  double value(const std::vector<double>& x) const;
  std::vector<double> grad(const std::vector<double>& x) const;

  // Independent oracle for the global optimum: closed form for the quadratics,
  // normal equations for least squares, damped Newton for logistic.
  std::vector<double> optimum_oracle() const;

  // Outer variance E_i ||grad f_i(x) - grad f(x)||^2 evaluated at x
  // (x-independent for the quadratic families).
  double outer_variance(const std::vector<double>& x) const;
  // sigma^2 = dim * noise_b^2 / 3 of the bounded uniform gradient noise.
  double noise_variance() const;
  // Smoothness constant: max_i of the largest local Hessian eigenvalue.
  double lipschitz() const;

private:
  ObjectiveKind kind_ = ObjectiveKind::Theorem1Quadratic;
  int n_ = 1;
  int dim_ = 1;
  double noise_b_ = 0.0;
  double delta_q_ = 0.0;      // off-grid quadratic: optimum sits at delta_q/2
  double l2_reg_ = 0.0;       // logistic
  std::vector<double> centers_;  // hetero: n x dim
  // least_squares / logistic per-worker data, row-major samples x dim
  std::vector<std::vector<double>> a_;
  std::vector<std::vector<double>> y_;
  int samples_ = 0;
};

// Stochastic gradient oracle: analytic local gradient plus bounded uniform
// noise, reproducible from (seed, iteration, worker, coordinate).
class GradOracle {
public:
  GradOracle(const ObjectiveSpec* obj, std::uint64_t seed)
      : obj_(obj), rng_(seed, Stream::GradNoise) {}
  GradOracle(const GradOracle& o) : obj_(o.obj_), rng_(o.rng_), count_(o.count_.load()) {}

  const ObjectiveSpec& objective() const { return *obj_; }

  std::vector<double> sample(int worker, const std::vector<double>& x, std::uint64_t k) const;
  std::uint64_t samples_drawn() const { return count_.load(); }

private:
  const ObjectiveSpec* obj_;
  CounterRng rng_;
  mutable std::atomic<std::uint64_t> count_{0};
};

}  // namespace moniqua
