#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "vrf/ctmc.hpp"
#include "vrf/kernels.hpp"

using namespace vrf::kernels;

namespace {

std::vector<const KernelTable*> vector_tables() {
  std::vector<const KernelTable*> out;
  if (avx2_table() && set_isa(Isa::kAvx2)) out.push_back(avx2_table());
  if (neon_table()) out.push_back(neon_table());
  set_isa(detected_isa());
  return out;
}

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

bool close(double a, double b) { return std::fabs(a - b) <= 1e-12 * (1.0 + std::fabs(a) + std::fabs(b)); }

}  // namespace

TEST_CASE("scalar kernels compute the textbook results") {
  const std::vector<double> x{1, -2, 3, -4, 5};
  const std::vector<double> y{2, 2, 2, 2, 2};
  const auto& t = scalar_table();
  CHECK(t.dot(x.data(), y.data(), 5) == 6.0);
  CHECK(t.sum(x.data(), 5) == 3.0);
  CHECK(t.max_abs(x.data(), 5) == 5.0);
  std::vector<double> z = y;
  t.axpy(0.5, x.data(), z.data(), 5);
  CHECK(z == std::vector<double>{2.5, 1, 3.5, 0, 4.5});
  t.scale(2.0, z.data(), 5);
  CHECK(z == std::vector<double>{5, 2, 7, 0, 9});
  const std::vector<double> a{1, 2, 3, 4, 5, 6};  // 2 x 3
  std::vector<double> out(3);
  const double w[2] = {1.0, -1.0};
  t.vec_mat(w, {a.data(), 2, 3, 3}, out.data());
  CHECK(out == std::vector<double>{-3, -3, -3});
}

TEST_CASE("vector kernels match the scalar reference on every length and offset") {
  const auto tables = vector_tables();
  if (tables.empty()) {
    MESSAGE("no vector kernels on this build/CPU");
    return;
  }
  std::mt19937_64 rng(11);
  const auto& ref = scalar_table();
  for (const KernelTable* vt : tables) {
    for (std::size_t n = 0; n <= 67; ++n) {
      for (std::size_t off = 0; off < 3; ++off) {
        auto a = random_vec(n + off, rng);
        auto b = random_vec(n + off, rng);
        CHECK(close(vt->dot(a.data() + off, b.data() + off, n), ref.dot(a.data() + off, b.data() + off, n)));
        CHECK(close(vt->sum(a.data() + off, n), ref.sum(a.data() + off, n)));
        CHECK(vt->max_abs(a.data() + off, n) == ref.max_abs(a.data() + off, n));
        auto y1 = b, y2 = b;
        vt->axpy(0.37, a.data() + off, y1.data() + off, n);
        ref.axpy(0.37, a.data() + off, y2.data() + off, n);
        for (std::size_t i = 0; i < y1.size(); ++i) CHECK(close(y1[i], y2[i]));
        y1 = a;
        y2 = a;
        vt->scale(-1.25, y1.data() + off, n);
        ref.scale(-1.25, y2.data() + off, n);
        CHECK(y1 == y2);
      }
    }
    for (std::size_t rows : {1u, 3u, 8u, 17u})
      for (std::size_t cols : {1u, 4u, 5u, 33u}) {
        const std::size_t stride = cols + 3;
        auto m = random_vec(rows * stride, rng);
        auto x = random_vec(rows, rng);
        std::vector<double> y1(cols), y2(cols);
        vt->vec_mat(x.data(), {m.data(), rows, cols, stride}, y1.data());
        ref.vec_mat(x.data(), {m.data(), rows, cols, stride}, y2.data());
        for (std::size_t j = 0; j < cols; ++j) CHECK(close(y1[j], y2[j]));
      }
  }
}

TEST_CASE("steady-state solve agrees across kernel variants") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t n = 40;
  vrf::ctmc::Matrix rates(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && u(rng) < 0.3) rates(i, j) = u(rng);
  for (std::size_t i = 0; i < n; ++i) rates(i, (i + 1) % n) += 0.1;
  const auto q = vrf::ctmc::RateMatrix::from_rates(rates);

  REQUIRE(set_isa(Isa::kScalar));
  const auto ref = vrf::ctmc::steady_state(q);
  for (Isa isa : {Isa::kAvx2, Isa::kNeon}) {
    if (!set_isa(isa)) continue;
    const auto got = vrf::ctmc::steady_state(q);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::fabs(got[i] - ref[i]) <= 1e-14 * ref[i] + 1e-17);
  }
  set_isa(detected_isa());
}

TEST_CASE("set_isa refuses unavailable variants") {
  const Isa before = active_isa();
  if (!neon_table()) CHECK_FALSE(set_isa(Isa::kNeon));
  CHECK(active_isa() == before);
  CHECK(isa_name(Isa::kScalar) == "scalar");
}
