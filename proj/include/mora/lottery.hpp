#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>

namespace mora {

// Payoffs are stored in whole cents; utilities and expectations are doubles.
struct Money {
  std::int64_t cents = 0;

  double dollars() const { return static_cast<double>(cents) / 100.0; }

  // "$2.00" style, as printed on the decision sheet.
  std::string str() const {
    const std::int64_t a = cents < 0 ? -cents : cents;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s$%lld.%02lld", cents < 0 ? "-" : "",
                  static_cast<long long>(a / 100), static_cast<long long>(a % 100));
    return buf;
  }

  friend auto operator<=>(const Money&, const Money&) = default;
};

enum class Option { A, B };

struct LotteryOption {
  double p_high = 0.0;  // probability of the high payoff
  Money payoff_high;
  Money payoff_low;
};

// One row of the ten-decision sheet. Both options share the same high-payoff
// probability index/10.
struct LotteryDecision {
  int index = 0;  // 1..10
  LotteryOption option_a;
  LotteryOption option_b;
};

// The ten-decision sheet: the safe option pays $2.00/$1.60, the risky one
// $3.85/$0.10, with the high-payoff probability rising from 1/10 to 10/10.
inline std::array<LotteryDecision, 10> build_task_sheet() {
  constexpr Money safe_high{200}, safe_low{160}, risky_high{385}, risky_low{10};
  std::array<LotteryDecision, 10> sheet{};
  for (int i = 1; i <= 10; ++i) {
    const double p = static_cast<double>(i) / 10.0;
    sheet[i - 1] = LotteryDecision{
        i, LotteryOption{p, safe_high, safe_low}, LotteryOption{p, risky_high, risky_low}};
  }
  return sheet;
}

inline const LotteryOption& pick(const LotteryDecision& d, Option which) {
  return which == Option::A ? d.option_a : d.option_b;
}

inline double expected_value(const LotteryDecision& d, Option which) {
  const LotteryOption& o = pick(d, which);
  return o.p_high * o.payoff_high.dollars() + (1.0 - o.p_high) * o.payoff_low.dollars();
}

/// CRRA utility u(x) = x^(1-r) / (1-r), with u(x) = ln x at r = 1.
/// Defined for x > 0 only; larger r means more risk-averse.
inline double crra_utility(double x, double r) {
  if (!(x > 0.0)) {
    throw std::domain_error("crra_utility: x must be positive, got " + std::to_string(x));
  }
  if (r == 1.0) return std::log(x);
  return std::pow(x, 1.0 - r) / (1.0 - r);
}

// What happens at exact expected-utility indifference: switch on the first
// weak preference for B, or hold out for a strict one.
enum class TieBreak { PreferB, PreferA };

struct CrraParams {
  double r = 0.0;
  TieBreak tie_break = TieBreak::PreferB;
};

inline double expected_utility(const LotteryDecision& d, Option which, const CrraParams& params) {
  const LotteryOption& o = pick(d, which);
  return o.p_high * crra_utility(o.payoff_high.dollars(), params.r) +
         (1.0 - o.p_high) * crra_utility(o.payoff_low.dollars(), params.r);
}

/// First decision (1..10) at which Option B is chosen. The single-crossing
/// response format makes this one number a complete choice record.
class SwitchPoint {
 public:
  explicit SwitchPoint(int value) : value_(value) {
    if (value < 1 || value > 10) {
      throw std::out_of_range("SwitchPoint: value must be in 1..10, got " + std::to_string(value));
    }
  }

  int value() const { return value_; }

  friend bool operator==(const SwitchPoint&, const SwitchPoint&) = default;

 private:
  int value_;
};

// Smallest decision index at which B is weakly (PreferB) or strictly
// (PreferA) preferred under CRRA expected utility. Never exceeds 10: the
// certain $3.85 at decision 10 beats the certain $2.00 for any increasing
// utility.
inline SwitchPoint predicted_switch_point(const CrraParams& params) {
  const auto sheet = build_task_sheet();
  for (const auto& d : sheet) {
    const double eu_a = expected_utility(d, Option::A, params);
    const double eu_b = expected_utility(d, Option::B, params);
    const bool prefers_b =
        params.tie_break == TieBreak::PreferB ? eu_b >= eu_a : eu_b > eu_a;
    if (prefers_b) return SwitchPoint{d.index};
  }
  return SwitchPoint{10};
}

enum class RiskClass { RiskSeeking, RiskNeutral, RiskAverse };

// Classification runs on the number of safe choices n_safe = switch - 1:
// fewer than 4 is risk-seeking, exactly 4 risk-neutral, more than 4 risk-averse.
inline RiskClass classify(SwitchPoint sp) {
  const int n_safe = sp.value() - 1;
  if (n_safe < 4) return RiskClass::RiskSeeking;
  if (n_safe == 4) return RiskClass::RiskNeutral;
  return RiskClass::RiskAverse;
}

// Interval of r values that predict a given switch point. Endpoints are
// conservative: every r in [lo, hi] (and anything strictly inside) maps back
// to the switch point. Unbounded ends carry infinity sentinels.
struct CrraInterval {
  double lo = 0.0;
  double hi = 0.0;
  bool empty = false;

  bool contains(double r) const {
    if (empty) return false;
    const bool above = lo == -std::numeric_limits<double>::infinity() || r >= lo;
    const bool below = hi == std::numeric_limits<double>::infinity() || r <= hi;
    return above && below;
  }
};

namespace detail {

// Bisection bracket around inf { r : predicted switch >= target }:
// S(below) < target <= S(above) with above - below <= tol.
struct BoundaryBracket {
  double below = 0.0;
  double above = 0.0;
};

inline BoundaryBracket locate_switch_boundary(int target, double lo, double hi, double tol,
                                              TieBreak tb) {
  double a = lo, b = hi;
  while (b - a > tol) {
    const double mid = 0.5 * (a + b);
    if (predicted_switch_point({mid, tb}).value() >= target) {
      b = mid;
    } else {
      a = mid;
    }
  }
  return {a, b};
}

}  // namespace detail

// Inverts predicted_switch_point by bisection on the monotone switch-point
// function. Search runs over r in [-20, 20]; an endpoint still unresolved at
// a search bound is reported as +/-infinity. A switch value no r can produce
// comes back with empty = true rather than as an exception.
inline CrraInterval crra_interval_for_switch(SwitchPoint sp, double tolerance = 1e-9,
                                             TieBreak tb = TieBreak::PreferB) {
  if (!(tolerance > 0.0)) {
    throw std::invalid_argument("crra_interval_for_switch: tolerance must be positive");
  }
  constexpr double r_min = -20.0, r_max = 20.0;
  constexpr double inf = std::numeric_limits<double>::infinity();
  const int s = sp.value();
  const int s_lo = predicted_switch_point({r_min, tb}).value();
  const int s_hi = predicted_switch_point({r_max, tb}).value();

  CrraInterval out;
  if (s_lo > s || s_hi < s) {
    // Monotonicity puts every in-bounds r above (or below) the target.
    out.empty = true;
    return out;
  }

  if (s_lo == s) {
    out.lo = -inf;
  } else {
    out.lo = detail::locate_switch_boundary(s, r_min, r_max, tolerance, tb).above;
  }
  if (s_hi == s) {
    out.hi = inf;
  } else {
    out.hi = detail::locate_switch_boundary(s + 1, r_min, r_max, tolerance, tb).below;
  }

  if (out.lo != -inf && out.hi != inf) {
    if (out.lo > out.hi ||
        predicted_switch_point({0.5 * (out.lo + out.hi), tb}).value() != s) {
      out = CrraInterval{0.0, 0.0, true};
    }
  }
  return out;
}

// Safe-choice indicator per decision: 1 = the safe Option A was chosen.
// Entries before the switch are 1, entries from the switch on are 0, so the
// vector is nonincreasing and higher aggregates mean more risk aversion.
inline std::array<int, 10> switch_to_choice_vector(SwitchPoint sp) {
  std::array<int, 10> v{};
  for (int d = 1; d <= 10; ++d) v[d - 1] = d < sp.value() ? 1 : 0;
  return v;
}

}  // namespace mora
