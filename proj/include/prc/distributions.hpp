#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "prc/rng.hpp"

namespace prc {

inline double std_normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

inline double std_normal_cdf(double x) {
  return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0)));
}

enum class DistKind { Uniform, TruncatedGaussian };

inline std::string to_string(DistKind k) {
  return k == DistKind::Uniform ? "uniform" : "truncated-gaussian";
}

inline DistKind dist_kind_from_string(const std::string& s) {
  if (s == "uniform") return DistKind::Uniform;
  if (s == "truncated-gaussian" || s == "truncated_gaussian")
    return DistKind::TruncatedGaussian;
  throw std::invalid_argument("unknown distribution kind: " + s);
}

// A continuous distribution with bounded support [lo, hi], either uniform or
// a gaussian N(mu0, sigma0^2) truncated to the support. Moments and the CDF
// are closed form; both are needed by the theory integrals.
class BoundedDist {
 public:
  static BoundedDist uniform(double lo, double hi) {
    return BoundedDist(DistKind::Uniform, lo, hi, 0.0, 0.0);
  }

  static BoundedDist truncated_gaussian(double lo, double hi, double mu0,
                                        double sigma0) {
    return BoundedDist(DistKind::TruncatedGaussian, lo, hi, mu0, sigma0);
  }

  DistKind kind() const { return kind_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  double mu0() const { return mu0_; }
  double sigma0() const { return sigma0_; }

  bool degenerate() const { return lo_ == hi_; }

  double mean() const {
    if (kind_ == DistKind::Uniform) return 0.5 * (lo_ + hi_);
    return mu0_ + sigma0_ * (std_normal_pdf(a_) - std_normal_pdf(b_)) / z_;
  }

  double variance() const {
    if (kind_ == DistKind::Uniform) {
      const double w = hi_ - lo_;
      return w * w / 12.0;
    }
    const double pa = std_normal_pdf(a_);
    const double pb = std_normal_pdf(b_);
    const double m = (pa - pb) / z_;
    return sigma0_ * sigma0_ * (1.0 + (a_ * pa - b_ * pb) / z_ - m * m);
  }

  double pdf(double x) const {
    if (x < lo_ || x > hi_ || degenerate()) return 0.0;
    if (kind_ == DistKind::Uniform) return 1.0 / (hi_ - lo_);
    return std_normal_pdf((x - mu0_) / sigma0_) / (sigma0_ * z_);
  }

  double cdf(double x) const {
    if (x < lo_) return 0.0;
    if (x >= hi_) return 1.0;
    if (kind_ == DistKind::Uniform) return (x - lo_) / (hi_ - lo_);
    return (std_normal_cdf((x - mu0_) / sigma0_) - std_normal_cdf(a_)) / z_;
  }

  double sample(RngStream& rng) const {
    if (degenerate()) return lo_;
    if (kind_ == DistKind::Uniform) return rng.uniform(lo_, hi_);
    for (;;) {
      const double x = mu0_ + sigma0_ * rng.normal();
      if (x >= lo_ && x <= hi_) return x;
    }
  }

 private:
  BoundedDist(DistKind kind, double lo, double hi, double mu0, double sigma0)
      : kind_(kind), lo_(lo), hi_(hi), mu0_(mu0), sigma0_(sigma0) {
    // Point masses are allowed only for the uniform kind (degenerate demand).
    const bool ok = kind == DistKind::Uniform ? lo <= hi : lo < hi;
    if (!ok || !std::isfinite(lo) || !std::isfinite(hi))
      throw std::invalid_argument("BoundedDist: invalid support");
    if (kind_ == DistKind::TruncatedGaussian) {
      if (!(sigma0 > 0.0))
        throw std::invalid_argument("BoundedDist: sigma0 must be positive");
      a_ = (lo_ - mu0_) / sigma0_;
      b_ = (hi_ - mu0_) / sigma0_;
      z_ = std_normal_cdf(b_) - std_normal_cdf(a_);
      if (!(z_ > 0.0))
        throw std::invalid_argument("BoundedDist: empty truncation mass");
    }
  }

  DistKind kind_;
  double lo_, hi_, mu0_, sigma0_;
  double a_ = 0.0, b_ = 0.0, z_ = 1.0;
};

// Zero-mean outflow noise supported exactly on [-eps_max, eps_max].
class NoiseModel {
 public:
  NoiseModel() : NoiseModel(BoundedDist::uniform(-1.0, 1.0), 1.0) {}

  static NoiseModel uniform(double eps_max) {
    return NoiseModel(BoundedDist::uniform(-eps_max, eps_max), eps_max);
  }

  // Symmetric truncation keeps the mean at zero for any sigma0.
  static NoiseModel truncated_gaussian(double eps_max, double sigma0) {
    return NoiseModel(
        BoundedDist::truncated_gaussian(-eps_max, eps_max, 0.0, sigma0),
        eps_max);
  }

  double eps_max() const { return eps_max_; }
  double sigma2() const { return dist_.variance(); }
  DistKind kind() const { return dist_.kind(); }
  const BoundedDist& dist() const { return dist_; }

  double pdf(double e) const { return dist_.pdf(e); }
  double cdf(double e) const { return dist_.cdf(e); }
  double sample(RngStream& rng) const { return dist_.sample(rng); }

 private:
  // eps_max = 0 is the noiseless limit (uniform kind only).
  NoiseModel(BoundedDist dist, double eps_max)
      : dist_(dist), eps_max_(eps_max) {
    if (!(eps_max >= 0.0))
      throw std::invalid_argument("NoiseModel: eps_max must be non-negative");
  }

  BoundedDist dist_;
  double eps_max_;
};

// Arrival processes for the two traffic classes. A is the uncontrolled
// inflow on [A_min, A_max]; B is the platoon inflow with support inside
// [0, B_max].
struct DemandModel {
  BoundedDist a_dist = BoundedDist::uniform(0.0, 1.0);
  BoundedDist b_dist = BoundedDist::uniform(0.0, 1.0);

  DemandModel() = default;
  DemandModel(BoundedDist a, BoundedDist b) : a_dist(a), b_dist(b) {
    if (a_dist.lo() < 0.0 || b_dist.lo() < 0.0)
      throw std::invalid_argument("DemandModel: negative demand support");
  }

  double a_min() const { return a_dist.lo(); }
  double a_max() const { return a_dist.hi(); }
  double b_max() const { return b_dist.hi(); }
  double a_mean() const { return a_dist.mean(); }
  double b_mean() const { return b_dist.mean(); }
  double a_var() const { return a_dist.variance(); }
  double b_var() const { return b_dist.variance(); }
};

}  // namespace prc
