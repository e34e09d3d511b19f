#pragma once

// Generators and independent reference implementations shared by the tests.
// The oracles here deliberately avoid the library's own code paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

namespace testing_support {

using Vec = std::vector<double>;
using Mat = std::vector<std::vector<double>>;

struct Gen {
  std::mt19937_64 rng;
  explicit Gen(std::uint64_t seed) : rng(seed) {}

  double normal(double m = 0.0, double s = 1.0) { return std::normal_distribution<double>(m, s)(rng); }
  double uniform(double a = 0.0, double b = 1.0) { return std::uniform_real_distribution<double>(a, b)(rng); }
  std::size_t index(std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); }

  Vec normals(std::size_t n, double m = 0.0, double s = 1.0) {
    Vec v(n);
    for (auto& x : v) x = normal(m, s);
    return v;
  }
};

// A labeled/unlabeled instance with a linearly related, noisy predictor.
struct Instance {
  Vec y, yhat_h, yhat_u;
};

inline Instance random_instance(Gen& g, std::size_t n, std::size_t big_n) {
  Instance in;
  const double mu = g.normal(0.0, 5.0);
  const double slope = g.uniform(-0.5, 1.5);
  const double shift = g.normal(0.0, 1.0);
  const double noise = g.uniform(0.1, 2.0);
  const double spread = g.uniform(0.5, 3.0);
  auto draw = [&](Vec* y, Vec& yhat, std::size_t m) {
    yhat.resize(m);
    if (y) y->resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      const double t = g.normal(mu, spread);
      if (y) (*y)[i] = t;
      yhat[i] = slope * t + shift + g.normal(0.0, noise);
    }
  };
  draw(&in.y, in.yhat_h, n);
  draw(nullptr, in.yhat_u, big_n);
  return in;
}

inline double plain_mean(const Vec& v) {
  long double s = 0;
  for (double x : v) s += x;
  return static_cast<double>(s / v.size());
}

inline double plain_var(const Vec& v) {
  const double m = plain_mean(v);
  long double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return static_cast<double>(s / (v.size() - 1));
}

inline double plain_cov(const Vec& a, const Vec& b) {
  const double ma = plain_mean(a), mb = plain_mean(b);
  long double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - ma) * (b[i] - mb);
  return static_cast<double>(s / (a.size() - 1));
}

// Plug-in variance of the rectified mean written out term by term.
inline double objective(const Instance& in, double lambda) {
  Vec r(in.y.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = in.y[i] - lambda * in.yhat_h[i];
  return lambda * lambda * plain_var(in.yhat_u) / in.yhat_u.size() + plain_var(r) / in.y.size();
}

// Gaussian elimination with partial pivoting.
inline Vec solve_dense(Mat a, Vec b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
    std::swap(a[c], a[p]);
    std::swap(b[c], b[p]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  Vec x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
    x[i] = s / a[i][i];
  }
  return x;
}

// Ordinary least squares through the normal equations.
inline Vec least_squares(const Mat& x, const Vec& y) {
  const std::size_t p = x[0].size();
  Mat a(p, Vec(p, 0.0));
  Vec b(p, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < p; ++j) {
      b[j] += x[i][j] * y[i];
      for (std::size_t k = 0; k < p; ++k) a[j][k] += x[i][j] * x[i][k];
    }
  return solve_dense(a, b);
}

// Iteratively reweighted least squares for logistic regression.
inline Vec irls_logistic(const Mat& x, const Vec& y, int iterations = 200) {
  const std::size_t p = x[0].size();
  Vec beta(p, 0.0);
  for (int it = 0; it < iterations; ++it) {
    Mat a(p, Vec(p, 0.0));
    Vec b(p, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      double eta = 0;
      for (std::size_t j = 0; j < p; ++j) eta += x[i][j] * beta[j];
      const double mu = 1.0 / (1.0 + std::exp(-eta));
      const double w = std::max(mu * (1 - mu), 1e-12);
      const double z = eta + (y[i] - mu) / w;
      for (std::size_t j = 0; j < p; ++j) {
        b[j] += w * x[i][j] * z;
        for (std::size_t k = 0; k < p; ++k) a[j][k] += w * x[i][j] * x[i][k];
      }
    }
    const Vec next = solve_dense(a, b);
    double step = 0;
    for (std::size_t j = 0; j < p; ++j) step = std::max(step, std::abs(next[j] - beta[j]));
    beta = next;
    if (step < 1e-14) break;
  }
  return beta;
}

// Smallest sample value v with (fraction of y <= v) >= q.
inline double brute_quantile(const Vec& y, double q) {
  double best = INFINITY;
  for (double v : y) {
    std::size_t c = 0;
    for (double w : y) c += w <= v;
    if (static_cast<double>(c) >= q * static_cast<double>(y.size()) && v < best) best = v;
  }
  return best;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("ppsurvey_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
  std::string write(const std::string& name, const std::string& body) const {
    std::ofstream(path / name, std::ios::binary) << body;
    return file(name);
  }
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace testing_support
