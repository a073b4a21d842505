/**
 * @file discount_core.hpp
 * @brief Questionnaire validation, discount-point construction, prospect
 *        valuation and hyperbolic factors
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "decimal.hpp"
#include "error.hpp"

namespace discfda {

/// Horizons (days) at which Part 1 elicits equivalent amounts.
class TimeGrid {
public:
    TimeGrid() : TimeGrid(std::vector<double>{0, 2, 4, 7, 10, 14, 20, 30, 45, 60, 90}) {}

    explicit TimeGrid(std::vector<double> horizons) : horizons_(std::move(horizons)) {
        if (horizons_.empty() || horizons_.front() != 0.0)
            throw Error(ErrorCode::InvalidArgument, "time grid must start at 0");
        if (horizons_.size() < 2) throw Error(ErrorCode::InvalidArgument, "time grid needs at least two horizons");
        for (std::size_t i = 1; i < horizons_.size(); ++i)
            if (!(horizons_[i] > horizons_[i - 1]))
                throw Error(ErrorCode::InvalidArgument, "time grid must be strictly increasing");
    }

    const std::vector<double>& horizons() const noexcept { return horizons_; }
    std::size_t size() const noexcept { return horizons_.size(); }
    double operator[](std::size_t i) const { return horizons_[i]; }
    double t_max() const noexcept { return horizons_.back(); }

    friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

private:
    std::vector<double> horizons_;
};

/// Cardinal utility U. Identity unless a strictly increasing map with U(0)=0 is supplied.
struct UtilitySpec {
    std::function<double(double)> map;  // empty => identity

    static UtilitySpec identity() { return {}; }
    static UtilitySpec custom(std::function<double(double)> u) { return {std::move(u)}; }

    bool is_identity() const noexcept { return !map; }
    double operator()(double amount) const { return map ? map(amount) : amount; }
};

enum class Scenario { Delay, Magnitude, Interval, Sign };

inline constexpr Scenario kAllScenarios[] = {Scenario::Delay, Scenario::Magnitude, Scenario::Interval, Scenario::Sign};

constexpr std::string_view scenario_name(Scenario s) {
    switch (s) {
    case Scenario::Delay: return "delay";
    case Scenario::Magnitude: return "magnitude";
    case Scenario::Interval: return "interval";
    case Scenario::Sign: return "sign";
    }
    return "?";
}

inline std::optional<Scenario> parse_scenario(std::string_view name) {
    for (Scenario s : kAllScenarios)
        if (scenario_name(s) == name) return s;
    return std::nullopt;
}

/// Scenario header H(s, t, x, sigma): the respondent supplies tau.
struct ScenarioSpec {
    Scenario scenario;
    double s;
    double t;
    Decimal base_amount;
    double sigma;
};

/// Defaults: H(0,6,500,12), H(0,6,50,12), H(0,1,50,1), H(0,6,-500,12).
inline std::vector<ScenarioSpec> default_scenarios() {
    return {
        {Scenario::Delay, 0, 6, Decimal::from_integer(500), 12},
        {Scenario::Magnitude, 0, 6, Decimal::from_integer(50), 12},
        {Scenario::Interval, 0, 1, Decimal::from_integer(50), 1},
        {Scenario::Sign, 0, 6, Decimal::from_integer(-500), 12},
    };
}

struct AnomalyResponse {
    Scenario scenario = Scenario::Delay;
    double s = 0;
    double t = 0;
    double sigma = 0;
    double tau = 0;
    Decimal base_amount;

    friend bool operator==(const AnomalyResponse&, const AnomalyResponse&) = default;
};

struct Part1Answer {
    double horizon = 0;
    Decimal amount;
    int expiry_count = 0;

    friend bool operator==(const Part1Answer&, const Part1Answer&) = default;
};

struct RespondentSubmission {
    std::string respondent_id;
    std::string gender;
    int age = 0;
    std::vector<Part1Answer> part1_answers;
    std::vector<AnomalyResponse> part2_answers;
    std::map<std::string, int> part3_tallies;
    std::vector<std::string> distractor_answers;  // stored, never analysed
    int expiry_total = 0;
    bool invalidated = false;

    friend bool operator==(const RespondentSubmission&, const RespondentSubmission&) = default;
};

struct RuleViolation {
    ErrorCode code;
    std::string detail;
};

/// Outcome of validate_submission. `amounts` is aligned with the grid when
/// every horizon was answered.
struct ValidationOutcome {
    bool accepted = false;
    std::vector<RuleViolation> violations;
    std::vector<Decimal> amounts;

    bool has(ErrorCode code) const {
        return std::any_of(violations.begin(), violations.end(), [code](const RuleViolation& v) { return v.code == code; });
    }
};

struct DiscountSamples {
    TimeGrid grid;
    std::vector<double> values;
    std::vector<double> source_amounts;
    bool degenerate = false;  // every value equals 1
};

namespace detail {

inline std::vector<double> implied_discounts(const std::vector<Decimal>& amounts, const UtilitySpec& utility) {
    std::vector<double> f(amounts.size());
    if (amounts.empty()) return f;
    f[0] = 1.0;
    if (utility.is_identity()) {
        // the chain telescopes to x(t_0)/x(t_i)
        for (std::size_t i = 1; i < amounts.size(); ++i) f[i] = amounts[0].ratio(amounts[i]);
    } else {
        for (std::size_t i = 0; i + 1 < amounts.size(); ++i)
            f[i + 1] = f[i] * utility(amounts[i].to_double()) / utility(amounts[i + 1].to_double());
    }
    return f;
}

inline std::string fmt_time(double t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", t);
    return buf;
}

}  // namespace detail

/// Checks a raw submission against the acceptance rules. Every failed rule
/// is reported, not just the first.
inline ValidationOutcome validate_submission(const RespondentSubmission& raw, const TimeGrid& grid = TimeGrid{},
                                             const UtilitySpec& utility = UtilitySpec::identity()) {
    ValidationOutcome out;
    std::vector<std::optional<Decimal>> by_horizon(grid.size());
    for (const auto& a : raw.part1_answers) {
        auto it = std::find(grid.horizons().begin(), grid.horizons().end(), a.horizon);
        if (it == grid.horizons().end()) continue;
        by_horizon[static_cast<std::size_t>(it - grid.horizons().begin())] = a.amount;
    }
    bool complete = true;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!by_horizon[i]) {
            complete = false;
            out.violations.push_back({ErrorCode::MissingAnswer, "no amount for t=" + detail::fmt_time(grid[i])});
        }
    }
    bool positive = true;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (by_horizon[i] && !by_horizon[i]->is_positive()) {
            positive = false;
            out.violations.push_back({ErrorCode::NonPositiveAmount,
                                      "amount " + by_horizon[i]->to_string() + " at t=" + detail::fmt_time(grid[i])});
        }
    }
    if (complete) {
        out.amounts.reserve(grid.size());
        for (auto& a : by_horizon) out.amounts.push_back(*a);
    }
    if (complete && positive) {
        auto f = detail::implied_discounts(out.amounts, utility);
        for (std::size_t i = 0; i < f.size(); ++i) {
            if (f[i] > 1.0) {
                char buf[64];
                std::snprintf(buf, sizeof buf, "%.6g", f[i]);
                out.violations.push_back({ErrorCode::DiscountAboveOne, "f(" + detail::fmt_time(grid[i]) + ")=" + buf});
            }
        }
    }
    if (raw.invalidated || raw.expiry_total >= 10) {
        out.violations.push_back({ErrorCode::TimerInvalidated, "timer expired " + std::to_string(raw.expiry_total) + " times"});
    }
    out.accepted = out.violations.empty();
    return out;
}

/// f(0) = 1, f(t_{i+1}) = f(t_i) U(x(t_i)) / U(x(t_{i+1})).
inline DiscountSamples build_discount_points(const std::vector<Decimal>& amounts, const UtilitySpec& utility = UtilitySpec::identity(),
                                             const TimeGrid& grid = TimeGrid{}) {
    if (amounts.size() != grid.size())
        throw Error(ErrorCode::MissingAnswer, "expected " + std::to_string(grid.size()) + " amounts, got " + std::to_string(amounts.size()));
    for (const auto& a : amounts)
        if (!a.is_positive()) throw Error(ErrorCode::NonPositiveAmount, "amount " + a.to_string());
    DiscountSamples out{grid, detail::implied_discounts(amounts, utility), {}, false};
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        if (out.values[i] > 1.0) throw Error(ErrorCode::DiscountAboveOne, "f(" + detail::fmt_time(grid[i]) + ") > 1");
        if (!(out.values[i] > 0.0)) throw Error(ErrorCode::InvalidArgument, "non-positive discount value");
    }
    out.source_amounts.reserve(amounts.size());
    for (const auto& a : amounts) out.source_amounts.push_back(a.to_double());
    out.degenerate = std::all_of(out.values.begin(), out.values.end(), [](double v) { return v == 1.0; });
    return out;
}

inline DiscountSamples build_discount_points(const std::vector<double>& amounts, const UtilitySpec& utility = UtilitySpec::identity(),
                                             const TimeGrid& grid = TimeGrid{}) {
    std::vector<Decimal> dec;
    dec.reserve(amounts.size());
    for (double a : amounts) dec.push_back(Decimal::from_double(a));
    return build_discount_points(dec, utility, grid);
}

struct Outcome {
    double amount;
    double time;
};

struct Prospect {
    std::vector<Outcome> outcomes;
};

/// A discount function known on [0, t_max].
struct DiscountFunction {
    std::function<double(double)> eval;
    double t_max;
};

/// Discounted utility: sum of U(x_i) f(t_i).
inline double prospect_value(const Prospect& p, const DiscountFunction& f, const UtilitySpec& utility = UtilitySpec::identity()) {
    double total = 0.0;
    for (const auto& o : p.outcomes) {
        if (o.time < 0.0 || o.time > f.t_max)
            throw Error(ErrorCode::TimeOutsideDomain, "outcome at t=" + detail::fmt_time(o.time));
        total += utility(o.amount) * f.eval(o.time);
    }
    return total;
}

enum class Preference { First, Second, Indifferent };

inline Preference prefer(const Prospect& p1, const Prospect& p2, const DiscountFunction& f,
                         const UtilitySpec& utility = UtilitySpec::identity()) {
    double v1 = prospect_value(p1, f, utility);
    double v2 = prospect_value(p2, f, utility);
    if (v1 > v2) return Preference::First;
    if (v2 > v1) return Preference::Second;
    return Preference::Indifferent;
}

/// Degree of decreasing impatience from (x,s)~(y,t) and (x,s+sigma)~(y,t+tau):
/// H = (tau - sigma) / (t sigma - s tau).
inline double hyperbolic_factor(double s, double t, double sigma, double tau) {
    if (!(s < t)) throw Error(ErrorCode::InvalidArgument, "hyperbolic factor requires s < t");
    if (!(sigma > 0) || !(tau > 0)) throw Error(ErrorCode::InvalidArgument, "hyperbolic factor requires sigma, tau > 0");
    double denom = t * sigma - s * tau;
    if (denom == 0.0) throw Error(ErrorCode::DegenerateDenominator, "t*sigma == s*tau");
    return (tau - sigma) / denom;
}

inline double hyperbolic_factor(const AnomalyResponse& r) { return hyperbolic_factor(r.s, r.t, r.sigma, r.tau); }

/// Median with the midpoint convention for even counts.
inline double median(std::vector<double> v) {
    if (v.empty()) throw Error(ErrorCode::EmptyGroup, "median of empty set");
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

using MedianTable = std::map<std::string, std::map<Scenario, double>>;

/// Per-label, per-scenario median hyperbolic factor.
inline MedianTable group_median_factors(const std::map<std::string, std::vector<AnomalyResponse>>& groups) {
    MedianTable table;
    for (const auto& [label, responses] : groups) {
        if (responses.empty()) throw Error(ErrorCode::EmptyGroup, "group '" + label + "' has no responses");
        std::map<Scenario, std::vector<double>> by_scenario;
        for (const auto& r : responses) by_scenario[r.scenario].push_back(hyperbolic_factor(r));
        for (auto& [sc, hs] : by_scenario) table[label][sc] = median(std::move(hs));
    }
    return table;
}

}  // namespace discfda
