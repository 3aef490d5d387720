#pragma once

// Small hand-worked cases shared by the unit tests and the acceptance run.

#include <vector>

#include "flim/kernel.hpp"

namespace flim::test {

// Two kernels of two channels with every factorization quantity worked out
// by hand (spread as the mean squared deviation).
struct FactorizationFixture {
  const char* name;
  KernelBank bank;
  std::vector<double> depthwise;
  std::vector<double> mu, sigma;
  double beta;
  std::vector<double> omega;
  std::vector<double> pointwise;  // m x f
};

inline KernelBank make_bank(int a, int f, const std::vector<std::vector<double>>& kernels) {
  KernelBank bank(a, f);
  for (const auto& k : kernels) bank.push_back(k);
  return bank;
}

inline std::vector<FactorizationFixture> factorization_fixtures() {
  std::vector<FactorizationFixture> out;

  // 1x1 kernels k1 = (1, 2), k2 = (3, 6).
  // mu = (2, 4); sigma = ((1 + 1) / 2, (4 + 4) / 2) = (1, 4); beta = 6;
  // omega = (2 * 1 / 6, 4 * 4 / 6) = (1/3, 8/3); phi(k) = omega * k.
  out.push_back({"positive 1x1",
                 make_bank(1, 2, {{1, 2}, {3, 6}}),
                 {2, 4},
                 {2, 4},
                 {1, 4},
                 6,
                 {1.0 / 3, 8.0 / 3},
                 {1.0 / 3, 16.0 / 3, 1.0, 16.0}});

  // 1x1 kernels k1 = (-1, 2), k2 = (3, 0).
  // mu = (1, 1); sigma = ((4 + 4) / 2, (1 + 1) / 2) = (4, 1); beta = 2;
  // omega = (2, 1/2).
  out.push_back({"mixed sign 1x1",
                 make_bank(1, 2, {{-1, 2}, {3, 0}}),
                 {1, 1},
                 {1, 1},
                 {4, 1},
                 2,
                 {2, 0.5},
                 {-2, 1, 6, 0}});

  // 3x3 kernels. k1: channel 0 is 9 at the centre and 0 elsewhere, channel 1
  // is 0. k2: channel 0 is 1 everywhere, channel 1 is 2 everywhere.
  // mu = (18/18, 18/18) = (1, 1); sigma_0 = (64 + 8 * 1 + 9 * 0) / 18 = 4,
  // sigma_1 = (9 * 1 + 9 * 1) / 18 = 1; beta = 2; omega = (2, 1/2);
  // phi_b(k) = omega_b / 9 * sum of channel b: k1 -> (2, 0), k2 -> (2, 1).
  std::vector<double> k1(18, 0.0), k2(18, 0.0), dw(18, 0.0);
  k1[4 * 2 + 0] = 9;
  for (int p = 0; p < 9; ++p) {
    k2[p * 2 + 0] = 1;
    k2[p * 2 + 1] = 2;
    dw[p * 2 + 0] = p == 4 ? 5.0 : 0.5;
    dw[p * 2 + 1] = 1;
  }
  out.push_back({"3x3 centre spike", make_bank(3, 2, {k1, k2}), dw, {1, 1}, {4, 1}, 2, {2, 0.5}, {2, 0, 2, 1}});
  return out;
}

// {k, k, k'} with D^2(k, k') = d: uniqueness (d/3, d/3, 2d/3).
struct SimplifyFixture {
  KernelBank bank;
  double d;
  std::vector<double> k, k_prime;
};

inline SimplifyFixture simplify_fixture() {
  const std::vector<double> k{1, 0, 2, -1}, kp{4, 4, 2, -1};  // d = 9 + 16 = 25
  return {make_bank(1, 4, {k, k, kp}), 25.0, k, kp};
}

// One row of the polarity rule: +1 when mean <= tau - margin and psi > 0.1,
// -1 when mean >= tau + margin and psi < 0.2, otherwise (or both) 0.
struct PolarityRow {
  const char* what;
  double mean, tau, margin, psi;
  int alpha;
};

inline std::vector<PolarityRow> polarity_truth_table() {
  return {
      {"low mean, psi 0.05", 0.2, 0.5, 0.25, 0.05, 0},
      {"low mean, psi exactly 0.1", 0.2, 0.5, 0.25, 0.1, 0},
      {"low mean, psi 0.15", 0.2, 0.5, 0.25, 0.15, 1},
      {"low mean, psi 0.5", 0.2, 0.5, 0.25, 0.5, 1},
      {"high mean, psi 0.05", 0.8, 0.5, 0.25, 0.05, -1},
      {"high mean, psi 0.15", 0.8, 0.5, 0.25, 0.15, -1},
      {"high mean, psi exactly 0.2", 0.8, 0.5, 0.25, 0.2, 0},
      {"high mean, psi 0.5", 0.8, 0.5, 0.25, 0.5, 0},
      {"middle mean, psi 0.15", 0.5, 0.5, 0.25, 0.15, 0},
      {"middle mean, psi 0.05", 0.5, 0.5, 0.25, 0.05, 0},
      {"middle mean, psi 0.5", 0.5, 0.5, 0.25, 0.5, 0},
      {"zero margin tie, psi 0.15", 0.5, 0.5, 0.0, 0.15, 0},
      {"zero margin tie, psi 0.05", 0.5, 0.5, 0.0, 0.05, -1},
      {"zero margin tie, psi 0.5", 0.5, 0.5, 0.0, 0.5, 1},
      {"mean exactly tau - margin, psi 0.3", 0.25, 0.5, 0.25, 0.3, 1},
      {"mean exactly tau + margin, psi 0", 0.75, 0.5, 0.25, 0.0, -1},
  };
}

}  // namespace flim::test
