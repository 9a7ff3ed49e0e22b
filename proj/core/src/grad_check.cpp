#include "pft/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "pft/errors.hpp"

namespace pft::ad {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

namespace {

double scalar_of(Var v) {
  const Tensor& t = v.value();
  if (t.size() != 1) throw ShapeError("grad_check: function must be scalar, got " + shape_str(t.shape()));
  if (!std::isfinite(t[0])) throw NumericalError("grad_check: function value is not finite");
  return t[0];
}

void record(GradCheckResult& r, std::size_t index, double analytic, double numeric) {
  const double err = relative_error(analytic, numeric);
  if (r.checked == 0 || err > r.max_rel_error) {
    r.max_rel_error = err;
    r.worst_index = index;
    r.analytic = analytic;
    r.numeric = numeric;
  }
  ++r.checked;
}

}  // namespace

GradCheckResult grad_check_detailed(const ScalarFn& f, const Tensor& x, double eps) {
  Tensor analytic;
  {
    Tape tape;
    Var in = tape.input(x);
    Var out = f(tape, in);
    scalar_of(out);
    tape.backward(out);
    analytic = tape.grad_tensor(in);
  }
  auto eval = [&](const Tensor& point) {
    Tape tape(Tape::Mode::inference);
    return scalar_of(f(tape, tape.constant(point)));
  };
  GradCheckResult result;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + eps;
    const double up = eval(probe);
    probe[i] = x[i] - eps;
    const double down = eval(probe);
    probe[i] = x[i];
    record(result, i, analytic[i], (up - down) / (2.0 * eps));
  }
  return result;
}

double grad_check(const ScalarFn& f, const Tensor& x, double eps) {
  return grad_check_detailed(f, x, eps).max_rel_error;
}

GradCheckResult grad_check_params(const std::function<Var(Tape&)>& loss, std::span<Tensor* const> params,
                                  double eps, std::size_t entries_per_tensor, std::uint64_t seed) {
  for (Tensor* p : params) p->clear_grad();
  {
    Tape tape;
    for (Tensor* p : params) tape.param(*p);
    Var out = loss(tape);
    scalar_of(out);
    tape.backward(out);
  }
  auto eval = [&] {
    Tape tape(Tape::Mode::inference);
    return scalar_of(loss(tape));
  };

  std::mt19937_64 rng(seed);
  GradCheckResult result;
  std::size_t flat = 0;
  for (Tensor* p : params) {
    std::vector<double> analytic(p->size(), 0.0);
    if (p->has_grad()) std::copy(p->grad().begin(), p->grad().end(), analytic.begin());

    std::vector<std::size_t> entries(p->size());
    std::iota(entries.begin(), entries.end(), std::size_t{0});
    if (entries_per_tensor != 0 && entries.size() > entries_per_tensor) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(entries_per_tensor);
      std::sort(entries.begin(), entries.end());
    }
    for (std::size_t i : entries) {
      const double saved = (*p)[i];
      (*p)[i] = saved + eps;
      const double up = eval();
      (*p)[i] = saved - eps;
      const double down = eval();
      (*p)[i] = saved;
      record(result, flat + i, analytic[i], (up - down) / (2.0 * eps));
    }
    flat += p->size();
    p->clear_grad();
  }
  return result;
}

}  // namespace pft::ad
