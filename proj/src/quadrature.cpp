#include "clf_etc/quadrature.hpp"

#include <array>
#include <cmath>
#include <queue>
#include <vector>

namespace clf_etc {
namespace {

// 15-point Kronrod nodes on [0,1] (symmetric), with the embedded 7-point
// Gauss weights on the odd-indexed nodes.
constexpr std::array<double, 8> kNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kKronrod = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kGauss = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Interval {
  double a;
  double b;
  double value;
  double error;
  bool operator<(const Interval& other) const { return error < other.error; }
};

Interval gauss_kronrod(const std::function<double(double)>& f, double a,
                       double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double f_center = f(center);
  double kronrod = f_center * kKronrod[7];
  double gauss = f_center * kGauss[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kNodes[j];
    const double sum = f(center - dx) + f(center + dx);
    kronrod += kKronrod[j] * sum;
    if (j % 2 == 1) gauss += kGauss[j / 2] * sum;
  }
  kronrod *= half;
  gauss *= half;
  return {a, b, kronrod, std::abs(kronrod - gauss)};
}

}  // namespace

QuadratureResult integrate_adaptive(const std::function<double(double)>& f,
                                    double a, double b, double rel_tol,
                                    double abs_tol, int max_intervals) {
  if (a == b) return {0.0, 0.0, 0, true};
  if (b < a) {
    QuadratureResult flipped =
        integrate_adaptive(f, b, a, rel_tol, abs_tol, max_intervals);
    flipped.value = -flipped.value;
    return flipped;
  }

  std::priority_queue<Interval> heap;
  Interval whole = gauss_kronrod(f, a, b);
  double total = whole.value;
  double total_error = whole.error;
  heap.push(whole);

  int count = 1;
  while (total_error > std::max(abs_tol, rel_tol * std::abs(total)) &&
         count < max_intervals) {
    const Interval worst = heap.top();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) break;  // interval exhausted
    heap.pop();
    const Interval left = gauss_kronrod(f, worst.a, mid);
    const Interval right = gauss_kronrod(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    total_error += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    ++count;
  }

  // Recompute the sums from scratch to shed accumulated cancellation error.
  double value = 0.0;
  double error = 0.0;
  std::vector<Interval> leaves;
  leaves.reserve(heap.size());
  while (!heap.empty()) {
    leaves.push_back(heap.top());
    heap.pop();
  }
  for (auto it = leaves.rbegin(); it != leaves.rend(); ++it) {
    value += it->value;
    error += it->error;
  }
  const bool converged = error <= std::max(abs_tol, rel_tol * std::abs(value));
  return {value, error, count, converged};
}

}  // namespace clf_etc
