#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "contextloc/numerics/tape.hpp"

namespace contextloc {

template <typename T>
struct GradCheckEntry {
  std::string name;
  T max_rel_error = T(0);
};

template <typename T>
struct GradCheckReport {
  /// max over entries of |analytic - numeric| / max(1, |analytic|)
  T max_rel_error = T(0);
  std::vector<GradCheckEntry<T>> per_parameter;
  /// False when the loss or a gradient went non-finite; max_rel_error is NaN then.
  bool finite = true;
  /// Kink margin of the analytic pass; see Tape::min_kink_margin().
  T min_kink_margin = std::numeric_limits<T>::infinity();

  bool passed(T tolerance) const { return finite && max_rel_error < tolerance; }
};

/// Compares reverse-mode gradients with central differences.
///
/// `build_loss(tape)` must record a scalar loss on the given tape using the
/// parameters in `params`. It is called once for the analytic pass and twice
/// per scalar entry for the numeric pass, so it must be a pure function of
/// the parameter values.
template <typename T, typename BuildLoss>
GradCheckReport<T> finite_diff_check(BuildLoss&& build_loss, const std::vector<Parameter<T>*>& params,
                                     T h, typename Tape<T>::Options options = {}) {
  GradCheckReport<T> report;
  for (Parameter<T>* p : params) p->zero_grad();

  Tape<T> tape(options);
  Var<T> loss = build_loss(tape);
  const T base = loss.scalar();
  tape.backward(loss);
  report.min_kink_margin = tape.min_kink_margin();
  if (!std::isfinite(base)) report.finite = false;

  auto eval = [&]() {
    Tape<T> t(options);
    return build_loss(t).scalar();
  };

  for (Parameter<T>* p : params) {
    GradCheckEntry<T> entry{p->name, T(0)};
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const T saved = p->value[i];
      p->value[i] = saved + h;
      const T up = eval();
      p->value[i] = saved - h;
      const T down = eval();
      p->value[i] = saved;
      const T numeric = (up - down) / (T(2) * h);
      const T analytic = p->grad[i];
      if (!std::isfinite(numeric) || !std::isfinite(analytic)) {
        report.finite = false;
        entry.max_rel_error = std::numeric_limits<T>::quiet_NaN();
        continue;
      }
      const T err = std::abs(analytic - numeric) / std::max(T(1), std::abs(analytic));
      if (!std::isnan(entry.max_rel_error)) entry.max_rel_error = std::max(entry.max_rel_error, err);
    }
    report.per_parameter.push_back(entry);
  }
  if (!report.finite) {
    report.max_rel_error = std::numeric_limits<T>::quiet_NaN();
  } else {
    for (const auto& e : report.per_parameter) report.max_rel_error = std::max(report.max_rel_error, e.max_rel_error);
  }
  return report;
}

}  // namespace contextloc
