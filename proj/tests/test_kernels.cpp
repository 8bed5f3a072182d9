#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cmath>
#include <random>
#include <vector>

#include "bitloupe/kernels.hpp"
#include "bitloupe/parallel.hpp"

using namespace bitloupe;

namespace {

std::vector<float> random_vec(std::mt19937_64& rng, std::size_t n, float span = 2.0f) {
  std::vector<float> v(n);
  for (float& x : v) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    x = static_cast<float>((2.0 * u - 1.0) * span);
  }
  return v;
}

// Independent oracle: plain serial double accumulation.
double dot_oracle(const std::vector<float>& x, const std::vector<float>& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    s += static_cast<double>(x[i]) * static_cast<double>(y[i]);
  }
  return s;
}

const std::size_t kSizes[] = {0, 1, 3, 7, 8, 9, 15, 16, 31, 64, 100, 257, 1024};

}  // namespace

TEST_CASE("scalar kernels match a double-precision oracle") {
  std::mt19937_64 rng(1);
  const auto& k = kern::scalar();
  for (std::size_t n : kSizes) {
    const auto x = random_vec(rng, n);
    const auto y = random_vec(rng, n);
    const double expect = dot_oracle(x, y);
    const double got = k.dot(x.data(), y.data(), n);
    CHECK(got == doctest::Approx(expect).epsilon(1e-5).scale(1.0));

    double sq = 0.0, sd = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sq += static_cast<double>(x[i]) * x[i];
      const double d = static_cast<double>(x[i]) - y[i];
      sd += d * d;
    }
    CHECK(k.sum_squares(x.data(), n) == doctest::Approx(sq).epsilon(1e-5).scale(1.0));
    CHECK(k.squared_distance(x.data(), y.data(), n) ==
          doctest::Approx(sd).epsilon(1e-5).scale(1.0));
  }
}

TEST_CASE("elementwise kernels are exact") {
  std::mt19937_64 rng(2);
  const auto& k = kern::scalar();
  const auto x = random_vec(rng, 100);
  auto y = random_vec(rng, 100);
  auto y2 = y;
  k.axpy(0.37f, x.data(), y.data(), x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(y[i] == y2[i] + 0.37f * x[i]);
  }
  std::vector<float> out(x.size());
  k.scale_add(y2.data(), x.data(), -1.25f, out.data(), x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(out[i] == y2[i] + -1.25f * x[i]);
  }
}

TEST_CASE("matvec_rows equals per-row dot") {
  std::mt19937_64 rng(3);
  const auto& k = kern::scalar();
  const std::size_t out_dim = 13, in_dim = 37;
  const auto w = random_vec(rng, out_dim * in_dim);
  const auto x = random_vec(rng, in_dim);
  std::vector<float> y(out_dim);
  k.matvec_rows(w.data(), x.data(), y.data(), out_dim, in_dim);
  for (std::size_t o = 0; o < out_dim; ++o) {
    CHECK(y[o] == k.dot(w.data() + o * in_dim, x.data(), in_dim));
  }
}

TEST_CASE("vector variants are bit-identical to the scalar reference") {
  const kern::KernelTable* v = kern::avx2();
  if (!v) {
    MESSAGE("AVX2 unavailable; equivalence suite skipped on this host");
    return;
  }
  const auto& s = kern::scalar();
  std::mt19937_64 rng(4);
  for (std::size_t n : kSizes) {
    for (int rep = 0; rep < 8; ++rep) {
      const auto x = random_vec(rng, n, rep % 2 ? 1e-3f : 30.0f);
      const auto y = random_vec(rng, n, rep % 2 ? 40.0f : 1e-2f);

      CHECK(s.dot(x.data(), y.data(), n) == v->dot(x.data(), y.data(), n));
      CHECK(s.sum_squares(x.data(), n) == v->sum_squares(x.data(), n));
      CHECK(s.squared_distance(x.data(), y.data(), n) ==
            v->squared_distance(x.data(), y.data(), n));

      auto ys = y;
      auto yv = y;
      s.axpy(0.77f, x.data(), ys.data(), n);
      v->axpy(0.77f, x.data(), yv.data(), n);
      CHECK(ys == yv);

      std::vector<float> os(n), ov(n);
      s.scale_add(y.data(), x.data(), 1.4f, os.data(), n);
      v->scale_add(y.data(), x.data(), 1.4f, ov.data(), n);
      CHECK(os == ov);
    }
  }
  const std::size_t out_dim = 9, in_dim = 129;
  const auto w = random_vec(rng, out_dim * in_dim);
  const auto x = random_vec(rng, in_dim);
  std::vector<float> ys(out_dim), yv(out_dim);
  s.matvec_rows(w.data(), x.data(), ys.data(), out_dim, in_dim);
  v->matvec_rows(w.data(), x.data(), yv.data(), out_dim, in_dim);
  CHECK(ys == yv);
}

TEST_CASE("active kernel table is one of the known variants") {
  const auto name = kern::active_name();
  CHECK((name == "scalar" || name == "avx2"));
}

TEST_CASE("parallel_for visits every index exactly once") {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i].fetch_add(1); });
  for (const auto& h : hits) {
    CHECK(h.load() == 1);
  }
}

TEST_CASE("parallel_for propagates exceptions") {
  CHECK_THROWS_AS(
      parallel_for(64, [](std::size_t i) {
        if (i == 13) {
          throw std::runtime_error("boom");
        }
      }),
      std::runtime_error);
}
