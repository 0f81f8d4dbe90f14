#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "supou/divergence.hpp"
#include "supou/errors.hpp"
#include "supou/measures.hpp"

namespace supou {

enum class Direction { Upper, Lower };

[[nodiscard]] inline const char* to_string(Direction d) { return d == Direction::Upper ? "upper" : "lower"; }

struct IntegrabilityReport {
    bool admissible = false;
    double r_exponent = 0.0;   ///< power of r in the phi*-weighted integrand as r -> 0
    double z_exponent = 0.0;   ///< power of z in front of the exponential factor as z -> inf
    double z_decay = 0.0;      ///< remaining exponential decay rate in z (p minus any tilting)
    double min_tau = 0.0;      ///< smallest multiplier keeping the KL tilting positive, 0 if irrelevant
    std::string reason;
};

/// Small-r and large-z behaviour of z^k phi* r^-1 pi nu for the shipped coefficient families.
/// @param tau multiplier of a solved problem; only the KL upper case uses it
/// @throws IllPosedError if alpha < 1 anywhere
[[nodiscard]] inline IntegrabilityReport integrability_report(const BenchmarkModel& model, const DivergenceSpec& spec,
                                                              int k, Direction direction,
                                                              std::optional<double> tau = std::nullopt) {
    model.validate();
    const auto [amin, amax] = spec.alpha_range();
    if (amin < 1.0 - detail::kKlBand)
        throw IllPosedError("alpha below 1 makes the conjugate blow up at finite argument");
    const double A = model.reversion.A;
    const double q = model.levy.q;
    const double p = model.levy.p;
    const double a0 = spec.alpha_at_zero();
    const bool kl0 = detail::kl_branch(a0);

    IntegrabilityReport rep;
    rep.z_decay = p;
    rep.r_exponent = A - 2.0;
    rep.z_exponent = k - q - 1.0;

    if (direction == Direction::Lower) {
        rep.admissible = true;
        rep.reason = "lower direction: distortion is at most one where the argument is nonpositive";
        return rep;
    }
    if (kl0 || spec.is_kl()) {
        if (spec.bounded_weight()) {
            rep.admissible = false;
            rep.r_exponent = -std::numeric_limits<double>::infinity();
            rep.reason = "KL with bounded weight: exp(z^k / (tau w r)) is not integrable as r -> 0";
            return rep;
        }
        if (k >= 2) {
            rep.admissible = false;
            rep.z_decay = -std::numeric_limits<double>::infinity();
            rep.reason = "KL tilting grows like exp(theta z^k) with k >= 2 and beats exp(-p z)";
            return rep;
        }
        // theta(r) = (1 - e^-Wr)/(c tau r) <= W/(c tau)
        const double W = spec.regularization();
        const double c = spec.normalization_constant();
        rep.min_tau = W / (c * p);
        if (tau) {
            const double theta = W / (c * *tau);
            rep.z_decay = p - theta;
            rep.admissible = rep.z_decay > 0.0;
            rep.reason = rep.admissible ? "regularized KL: tilting stays positive"
                                        : "regularized KL: tilting W/(c tau) reaches p";
        } else {
            rep.admissible = true;
            rep.reason = "regularized KL: admissible provided tau > W/(c p)";
        }
        return rep;
    }
    // alpha > 1: phi* grows like (z^k/(w r tau))^(1/(alpha-1))
    rep.z_exponent = k * amin / (amin - 1.0) - q - 1.0;
    if (spec.bounded_weight()) {
        rep.r_exponent = A - 1.0 / (a0 - 1.0) - 2.0;
        rep.admissible = rep.r_exponent > -1.0;
        rep.reason = rep.admissible ? "bounded weight: r-exponent above -1"
                                    : "bounded weight: r-exponent A - 1/(alpha-1) - 2 not above -1";
    } else {
        rep.admissible = true;
        rep.reason = "regularized weight keeps w r bounded at r = 0";
    }
    return rep;
}

}  // namespace supou
