#pragma once

// Per-item contribution scores, the copy posterior and decision thresholds.

#include <copydet/error.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace copydet {

struct ModelParams {
    double alpha = 0.1;           // prior probability of S1 -> S2 (and of S2 -> S1)
    double s = 0.8;               // copy selectivity
    int n = 50;                   // false values per item
    double accuracy_init = 0.8;
    double accuracy_clamp = 0.01;
    double prob_clamp = 1e-6;

    double beta() const noexcept { return 1.0 - 2.0 * alpha; }

    void validate() const
    {
        if (!(alpha > 0.0 && alpha < 0.5)) {
            throw ConfigError("alpha must be in (0, 0.5)");
        }
        if (!(s >= 0.0 && s < 1.0)) {
            throw ConfigError("s must be in [0, 1)");
        }
        if (n < 2) {
            throw ConfigError("n must be an integer > 1");
        }
        if (!(accuracy_init > 0.0 && accuracy_init < 1.0)) {
            throw ConfigError("accuracy-init must be in (0, 1)");
        }
        if (!(accuracy_clamp > 0.0 && accuracy_clamp < 0.5)) {
            throw ConfigError("accuracy clamp must be in (0, 0.5)");
        }
        if (!(prob_clamp > 0.0 && prob_clamp < 0.5)) {
            throw ConfigError("probability clamp must be in (0, 0.5)");
        }
    }

    double clamp_accuracy(double a) const { return std::clamp(a, accuracy_clamp, 1.0 - accuracy_clamp); }
    double clamp_prob(double p) const { return std::clamp(p, prob_clamp, 1.0 - prob_clamp); }
};

/// Evidence one item adds to C-> (S1 copies S2) and C<- (S2 copies S1).
struct Contribution {
    double forward;
    double backward;
};

namespace detail {

inline double log_ratio(double copy, double indep, double s)
{
    double r = std::log(1.0 - s + s * copy / indep);
    if (!std::isfinite(r)) {
        throw NumericError("non-finite contribution score");
    }
    return r;
}

inline double indep_prob(double p, double a1, double a2, int n)
{
    return p * a1 * a2 + (1.0 - p) * (1.0 - a1) * (1.0 - a2) / n;
}

}  // namespace detail

/// C->(D) for a value shared by S1 (accuracy a1) and S2 (accuracy a2).
inline double score_same_value(double p_true, double a1, double a2, const ModelParams& prm)
{
    double p = prm.clamp_prob(p_true);
    a1 = prm.clamp_accuracy(a1);
    a2 = prm.clamp_accuracy(a2);
    double copy = p * a2 + (1.0 - p) * (1.0 - a2);
    return detail::log_ratio(copy, detail::indep_prob(p, a1, a2, prm.n), prm.s);
}

/// Both directions for a shared value.
inline Contribution contribution(double p_true, double a1, double a2, const ModelParams& prm)
{
    return {score_same_value(p_true, a1, a2, prm), score_same_value(p_true, a2, a1, prm)};
}

/// ln(1 - s): evidence from an item on which the two sources differ.
inline double score_diff_value(const ModelParams& prm) { return std::log(1.0 - prm.s); }

/// Pr(S1 and S2 independent | observations).
inline double posterior_no_copy(double c_fwd, double c_bwd, const ModelParams& prm)
{
    double hi = std::max(c_fwd, c_bwd);
    double lse = hi + std::log1p(std::exp(std::min(c_fwd, c_bwd) - hi));
    double x = std::log(prm.alpha / prm.beta()) + lse;
    if (x > 0.0) {
        double e = std::exp(-x);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(x));
}

/// Pr(S1 copies S2 | observations), the forward share of the copy posterior.
inline double posterior_copy_forward(double c_fwd, double c_bwd, const ModelParams& prm)
{
    double la = std::log(prm.alpha);
    double lb = std::log(prm.beta());
    double f = la + c_fwd;
    double b = la + c_bwd;
    double hi = std::max({lb, f, b});
    double denom = std::exp(lb - hi) + std::exp(f - hi) + std::exp(b - hi);
    return std::exp(f - hi) / denom;
}

struct Thresholds {
    double theta_cp;   // either direction at or above -> copying
    double theta_ind;  // both directions below -> no-copying
};

/// Thresholds guaranteeing Pr(no copy) > q_ind below theta_ind and
/// Pr(no copy) <= q_cp at or above theta_cp. The defaults give ln(beta/2alpha)
/// and ln(beta/alpha).
inline Thresholds thresholds(const ModelParams& prm, double q_ind = 0.5, double q_cp = 0.5)
{
    double ratio = prm.beta() / prm.alpha;
    return {std::log(ratio * (1.0 - q_cp) / q_cp), std::log(ratio * (1.0 - q_ind) / (2.0 * q_ind))};
}

enum class Decision { undecided, copying, no_copying, uncertain };

inline const char* to_string(Decision d)
{
    switch (d) {
    case Decision::copying:
        return "copying";
    case Decision::no_copying:
        return "no-copying";
    case Decision::uncertain:
        return "uncertain";
    case Decision::undecided:
        break;
    }
    return "undecided";
}

/// Binary rule: copying iff posterior <= 0.5. Three-way mode reports
/// posteriors in [0.1, 0.9] as uncertain.
inline Decision decide(double p_no_copy, bool three_way = false)
{
    if (three_way) {
        if (p_no_copy > 0.9) {
            return Decision::no_copying;
        }
        if (p_no_copy < 0.1) {
            return Decision::copying;
        }
        return Decision::uncertain;
    }
    return p_no_copy <= 0.5 ? Decision::copying : Decision::no_copying;
}

}  // namespace copydet
