//! Delay-tolerant-network content distribution priced by the fluid
//! profit-sharing machinery.
//!
//! A provider keeps a fraction `x` of a mobile population's devices
//! up to date by seeding fresh content copies at Poisson rate `μ`;
//! devices meet pairwise at rate `λ` and relay epidemically.  In steady
//! state the expected content age at a random subscribed device is
//!
//! ```text
//! Ḡ(x, μ) = ln((xλ + μ)/μ) / (xλ),
//! ```
//!
//! and the probability that the age exceeds a hard deadline `g_max` is
//! `(xλ + μ)/(xλ + μ·e^{(μ+xλ)·g_max})`.  Seeding is pure cost and `Ḡ`
//! is strictly decreasing in `μ`, so a provider guaranteeing a mean-age
//! target `g` runs at the binding rate
//!
//! ```text
//! μ*(x) = xλ / (e^{xλg} − 1),
//! ```
//!
//! for an operational cost (seeding effort) of
//! `Ω̃(x) = x·μ*(x) = x²λ/(e^{xλg} − 1)` — exactly
//! [`FluidCurve::Dtn`], whose removable singularity at `x = 0` is filled
//! with its limit value `0` rather than an ε-shifted evaluation.
//!
//! [`scenario`] plays two such providers against each other: each has a
//! locked-in subscriber base `x⁰`, the remaining free users
//! `F = 1 − x⁰_p − x⁰_q` drift between them, and the per-`λ` normalized
//! shifted costs `Ω̃(x⁰ + F·s)/λ` over the free share `s ∈ [0, 1]` feed
//! [`peer_split_equilibrium`].  The report carries the resulting
//! allocation and compares what a free user earns under χ versus
//! Aumann–Drèze at that allocation.

use crate::fluid_payoffs::{
    fluid_ad_single, peer_split_equilibrium, EquilibriumReport, FluidChiContext, FluidCost,
    FluidCurve, FluidSystem, FluidValueKind, QuadratureConfig, SplitOutcome,
};
use crate::{CoreError, Result};

/// One provider's distribution service parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DtnParams {
    /// Pairwise meeting rate of the mobile population (per unit time).
    pub lambda: f64,
    /// Mean content-age target the provider guarantees (time units).
    pub g: f64,
    /// Hard age deadline used for outage reporting (time units).
    pub g_max: f64,
    /// Fraction of the population already subscribed to this provider.
    pub x0: f64,
}

impl DtnParams {
    /// Validated constructor: `lambda`, `g`, `g_max` must be positive
    /// and finite, `x0` must lie in `[0, 1]`.
    pub fn new(lambda: f64, g: f64, g_max: f64, x0: f64) -> Result<Self> {
        let params = DtnParams {
            lambda,
            g,
            g_max,
            x0,
        };
        params.validate()?;
        Ok(params)
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda", self.lambda),
            ("g", self.g),
            ("g_max", self.g_max),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(CoreError::invalid(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !self.x0.is_finite() || !(0.0..=1.0).contains(&self.x0) {
            return Err(CoreError::invalid(format!(
                "x0 must lie in [0, 1], got {}",
                self.x0
            )));
        }
        Ok(())
    }
}

/// Steady-state expected content age `ln((xλ + μ)/μ)/(xλ)` at a random
/// device when a fraction `x > 0` is subscribed and fresh copies are
/// seeded at rate `μ > 0`.
///
/// With no subscribers (`x = 0`) the epidemic never starts and the age
/// is undefined, which is reported as a domain error.
pub fn expected_age(x: f64, mu: f64, lambda: f64) -> Result<f64> {
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(CoreError::domain(format!(
            "meeting rate lambda must be positive, got {lambda}"
        )));
    }
    if !mu.is_finite() || mu <= 0.0 {
        return Err(CoreError::domain(format!(
            "seeding rate mu must be positive, got {mu}"
        )));
    }
    if !x.is_finite() || x <= 0.0 {
        return Err(CoreError::domain(format!(
            "expected age needs a positive subscribed fraction, got x = {x}"
        )));
    }
    let xl = x * lambda;
    // ln((xλ + μ)/μ) = ln(1 + xλ/μ), accurate for both tiny and huge μ.
    Ok((xl / mu).ln_1p() / xl)
}

/// Probability that the content age exceeds the deadline `g_max`:
/// `(xλ + μ)/(xλ + μ·e^{(μ+xλ)·g_max})`.
///
/// `g_max = 0` gives 1 (the age is always positive); `g_max → ∞` gives 0.
pub fn outage_probability(x: f64, mu: f64, lambda: f64, g_max: f64) -> Result<f64> {
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(CoreError::domain(format!(
            "meeting rate lambda must be positive, got {lambda}"
        )));
    }
    if !mu.is_finite() || mu <= 0.0 {
        return Err(CoreError::domain(format!(
            "seeding rate mu must be positive, got {mu}"
        )));
    }
    if !x.is_finite() || x <= 0.0 {
        return Err(CoreError::domain(format!(
            "outage probability needs a positive subscribed fraction, got x = {x}"
        )));
    }
    if !g_max.is_finite() || g_max < 0.0 {
        return Err(CoreError::domain(format!(
            "deadline g_max must be nonnegative, got {g_max}"
        )));
    }
    let xl = x * lambda;
    Ok((xl + mu) / (xl + mu * ((mu + xl) * g_max).exp()))
}

/// Cheapest seeding rate meeting the mean-age target `g`:
/// `μ*(x) = xλ/(e^{xλg} − 1)` (the constraint `Ḡ(x, μ) ≤ g` binds).
///
/// At `x = 0` the removable singularity is filled with its limit `1/g`.
pub fn optimal_rate(x: f64, lambda: f64, g: f64) -> Result<f64> {
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(CoreError::domain(format!(
            "meeting rate lambda must be positive, got {lambda}"
        )));
    }
    if !g.is_finite() || g <= 0.0 {
        return Err(CoreError::domain(format!(
            "age target g must be positive, got {g}"
        )));
    }
    if !x.is_finite() || x < 0.0 {
        return Err(CoreError::domain(format!(
            "subscribed fraction must be nonnegative, got x = {x}"
        )));
    }
    let t = x * lambda * g;
    if t < 1e-8 {
        // xλ/(e^t − 1) = (1/g)·t/(e^t − 1) ≈ (1/g)·(1 − t/2) near 0.
        Ok((1.0 - 0.5 * t) / g)
    } else {
        Ok(x * lambda / t.exp_m1())
    }
}

/// Operational cost curve `Ω̃(x) = x·μ*(x) = x²λ/(e^{xλg} − 1)` of a
/// provider running at the binding seeding rate for its age target.
pub fn cost_curve(params: &DtnParams) -> Result<FluidCurve> {
    params.validate()?;
    Ok(FluidCurve::Dtn {
        lambda: params.lambda,
        g: params.g,
    })
}

/// Outcome of a two-provider DTN competition for the free users.
#[derive(Clone, Debug)]
pub struct DtnScenario {
    /// Per-`λ` normalized shifted cost system over the free-user share
    /// `s ∈ [0, 1]` (provider 0 is `p`, provider 1 is `q`).
    pub system: FluidSystem,
    /// Fraction of the population not locked into either provider.
    pub free_fraction: f64,
    /// The peer-split analysis over the free share.
    pub equilibrium: EquilibriumReport,
    /// Absolute population fraction of free users ending up with `p`
    /// and with `q` (sums to [`Self::free_fraction`]).
    pub allocation: (f64, f64),
    /// Per-peer Aumann–Drèze payoff at the final allocation, in the
    /// block where the free users ended up (the majority block for an
    /// interior split).
    pub peer_aumann_dreze: f64,
    /// Per-peer χ payoff (unit weights) at the same allocation.
    pub peer_chi: f64,
}

impl DtnScenario {
    /// Is there a monopoly, and by whom? (system index: 0 = `p`, 1 = `q`)
    pub fn monopoly(&self) -> Option<usize> {
        match self.equilibrium.outcome {
            SplitOutcome::Monopoly { provider } => Some(provider),
            SplitOutcome::Split { .. } => None,
        }
    }

    /// Do free users earn at least as much under χ as under
    /// Aumann–Drèze at the final allocation?
    pub fn chi_improves_peers(&self) -> bool {
        self.peer_chi >= self.peer_aumann_dreze - 1e-9
    }

    /// Sample both normalized shifted cost curves on an even grid over
    /// the free share: rows `(s, cost_p, cost_q)`, `points ≥ 2`.
    pub fn cost_samples(&self, points: usize) -> Result<Vec<(f64, f64, f64)>> {
        if points < 2 {
            return Err(CoreError::invalid("need at least 2 sample points"));
        }
        (0..points)
            .map(|k| {
                let s = k as f64 / (points - 1) as f64;
                Ok((s, self.system.omega(0, s)?, self.system.omega(1, s)?))
            })
            .collect()
    }
}

/// Play two providers against each other for the free users.
///
/// Both providers must quote the same meeting rate `λ` (it is a property
/// of the shared population), and their locked-in bases must satisfy
/// `x⁰_p + x⁰_q < 1` so a free mass remains.  The normalized costs
/// `Ω̃_i(x⁰_i + F·s)/λ` over the free share feed
/// [`peer_split_equilibrium`] under `kind`; the per-peer χ-vs-A-D
/// comparison in the report is always made at the resulting allocation.
pub fn scenario(
    params_p: &DtnParams,
    params_q: &DtnParams,
    kind: &FluidValueKind,
    cfg: &QuadratureConfig,
) -> Result<DtnScenario> {
    params_p.validate()?;
    params_q.validate()?;
    cfg.validate()?;
    if (params_p.lambda - params_q.lambda).abs() > 1e-12 * params_p.lambda.abs() {
        return Err(CoreError::invalid(format!(
            "providers must share the population meeting rate: lambda_p = {}, lambda_q = {}",
            params_p.lambda, params_q.lambda
        )));
    }
    if params_p.x0 + params_q.x0 > 1.0 {
        return Err(CoreError::invalid(format!(
            "locked-in bases exceed the population: x0_p + x0_q = {}",
            params_p.x0 + params_q.x0
        )));
    }
    let free = 1.0 - params_p.x0 - params_q.x0;
    if free <= 1e-9 {
        return Err(CoreError::invalid(
            "no free users left to allocate (x0_p + x0_q = 1)",
        ));
    }

    let shifted = |params: &DtnParams| -> Result<FluidCurve> {
        Ok(FluidCurve::Affine {
            base: Box::new(cost_curve(params)?),
            shift: params.x0,
            scale: free,
            value_scale: 1.0 / params.lambda,
        })
    };
    let system = FluidSystem::new(vec![
        FluidCost::with_fluid_curve("p", shifted(params_p)?),
        FluidCost::with_fluid_curve("q", shifted(params_q)?),
    ])?;

    let equilibrium = peer_split_equilibrium(&system, 0, 1, kind, cfg)?;
    let share_p = match equilibrium.outcome {
        SplitOutcome::Split { x } => x,
        SplitOutcome::Monopoly { provider: 0 } => 1.0,
        SplitOutcome::Monopoly { .. } => 0.0,
    };
    // Where did the free users end up?  Compare χ vs A-D per peer there.
    let (block, xval) = match equilibrium.outcome {
        SplitOutcome::Monopoly { provider } => (provider, 1.0),
        SplitOutcome::Split { x } if x >= 0.5 => (0, x),
        SplitOutcome::Split { x } => (1, 1.0 - x),
    };
    let peer_aumann_dreze = fluid_ad_single(&system, block, xval, cfg)?.1;
    let peer_chi =
        FluidChiContext::new(&system, vec![1.0, 1.0], cfg.clone())?.peer_payoff(block, xval)?;

    Ok(DtnScenario {
        system,
        free_fraction: free,
        equilibrium,
        allocation: (free * share_p, free * (1.0 - share_p)),
        peer_aumann_dreze,
        peer_chi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(got: f64, want: f64, tol: f64, what: &str) {
        assert!(
            (got - want).abs() <= tol,
            "{what}: got {got}, want {want} (tol {tol})"
        );
    }

    // [TRIVIAL] Formula limits and the x = 0 domain error.
    #[test]
    fn expected_age_basics() {
        assert!(matches!(
            expected_age(0.0, 1.0, 1.0),
            Err(CoreError::Domain { .. })
        ));
        assert!(matches!(
            expected_age(0.4, 0.0, 1.0),
            Err(CoreError::Domain { .. })
        ));
        // μ → ∞: instant seeding, zero age.
        assert!(expected_age(0.5, 1e12, 2.0).unwrap() < 1e-9);
        // xλ = μ: Ḡ = ln(2)/μ.
        assert_close(
            expected_age(0.5, 1.0, 2.0).unwrap(),
            std::f64::consts::LN_2,
            1e-14,
            "age at xλ = μ",
        );
    }

    // [DERIVED] Running at μ*(x) makes the age constraint bind exactly:
    // Ḡ(x, μ*) = g to 1e-10 relative across the (x, λ, g) grid.
    #[test]
    fn age_constraint_binds_at_optimal_rate() {
        for (x, lambda, g) in [(0.4, 1.0, 5.0), (0.7, 2.0, 1.5), (0.05, 0.5, 10.0)] {
            let mu = optimal_rate(x, lambda, g).unwrap();
            assert!(mu > 0.0);
            let age = expected_age(x, mu, lambda).unwrap();
            assert!(
                ((age - g) / g).abs() <= 1e-10,
                "binding failed at (x={x}, λ={lambda}, g={g}): Ḡ = {age}"
            );
        }
        // x = 0 limit: μ* → 1/g.
        assert_close(optimal_rate(0.0, 1.0, 5.0).unwrap(), 0.2, 1e-15, "μ*(0)");
    }

    // [DERIVED] (xλ+μ)/(xλ+μe^{(μ+xλ)g_max}) at x=0.5, λ=2, μ=1,
    // g_max=3 is 0.004945246313269549; boundary behaviour in g_max.
    #[test]
    fn outage_probability_limits() {
        assert_close(
            outage_probability(0.5, 1.0, 2.0, 3.0).unwrap(),
            0.004945246313269549,
            1e-15,
            "outage frozen value",
        );
        // g_max = 0: the age is always positive, certain outage.
        assert_close(
            outage_probability(0.5, 1.0, 2.0, 0.0).unwrap(),
            1.0,
            0.0,
            "outage at g_max = 0",
        );
        // g_max → ∞: outage vanishes.
        assert!(outage_probability(0.5, 1.0, 2.0, 1e3).unwrap() < 1e-12);
        // Strictly decreasing in the deadline.
        let p1 = outage_probability(0.3, 0.7, 1.5, 1.0).unwrap();
        let p2 = outage_probability(0.3, 0.7, 1.5, 2.0).unwrap();
        assert!(p2 < p1);
    }

    // [DERIVED] The closed-form cost x·μ*(x) agrees to 1e-8 with a
    // brute-force constrained optimizer (bisect the binding rate out of
    // the monotone age constraint, then price it).
    #[test]
    fn cost_curve_matches_constrained_optimizer() {
        for (x, lambda, g) in [(0.4, 1.0, 5.0), (0.7, 2.0, 1.5), (0.05, 0.5, 10.0)] {
            let params = DtnParams::new(lambda, g, 3.0 * g, 0.0).unwrap();
            let curve = cost_curve(&params).unwrap();
            // Ḡ(x, μ) is strictly decreasing in μ: bisect Ḡ = g.
            let (mut lo, mut hi) = (1e-12, 1e9);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if expected_age(x, mid, lambda).unwrap() > g {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let brute = x * 0.5 * (lo + hi);
            assert_close(
                curve.eval(x).unwrap(),
                brute,
                1e-8,
                &format!("cost vs optimizer at (x={x}, λ={lambda}, g={g})"),
            );
        }
    }

    // [TRIVIAL] Curve limit at 0 and nonnegativity.
    #[test]
    fn cost_curve_limit_and_sign() {
        let params = DtnParams::new(1.0, 5.0, 8.0, 0.4).unwrap();
        let curve = cost_curve(&params).unwrap();
        assert_eq!(curve.eval(0.0).unwrap(), 0.0);
        for k in 0..=20 {
            let x = k as f64 / 20.0;
            let v = curve.eval(x).unwrap();
            assert!(v >= 0.0 && v.is_finite());
            // x²λ/(e^{xλg}−1) directly, away from the singularity.
            if x > 1e-3 {
                assert_close(
                    v,
                    x * x * 1.0 / (x * 1.0 * 5.0).exp_m1(),
                    1e-15,
                    "curve formula",
                );
            }
        }
    }

    fn paper_pair() -> (DtnParams, DtnParams) {
        (
            DtnParams::new(1.0, 5.0, 8.0, 0.4).unwrap(),
            DtnParams::new(1.0, 10.0, 8.0, 0.3).unwrap(),
        )
    }

    // [DERIVED] The asymmetric two-provider scenario: p (cheaper age
    // target economics on its window) takes all 0.3 of the free users
    // under Aumann–Drèze, per-peer payoffs 0.005241378 (A-D) and
    // 0.006286104 (χ) at that monopoly.
    #[test]
    fn paper_scenario_p_monopoly_under_aumann_dreze() {
        let (pp, pq) = paper_pair();
        let cfg = QuadratureConfig::default();
        let sc = scenario(&pp, &pq, &FluidValueKind::AumannDreze, &cfg).unwrap();
        assert!(sc.system.warnings().is_empty(), "{:?}", sc.system.warnings());
        assert_close(sc.free_fraction, 0.3, 1e-15, "free fraction");
        assert!(sc.equilibrium.roots.is_empty(), "A-D gap never closes");
        assert_eq!(sc.monopoly(), Some(0));
        assert_close(sc.allocation.0, 0.3, 1e-12, "p's allocation");
        assert_close(sc.allocation.1, 0.0, 1e-12, "q's allocation");
        assert_close(sc.peer_aumann_dreze, 0.005241378, 1e-6, "per-peer A-D");
        assert_close(sc.peer_chi, 0.006286104, 1e-6, "per-peer χ");
        assert!(sc.chi_improves_peers());
        let samples = sc.cost_samples(11).unwrap();
        assert_eq!(samples.len(), 11);
        assert_close(samples[0].0, 0.0, 0.0, "first sample s");
        assert_close(samples[10].0, 1.0, 0.0, "last sample s");
        // ω_p(0.4 + 0.3s) and ω_q(0.3 + 0.3s) at s = 1.
        assert_close(
            samples[10].1,
            0.7 * 0.7 / (5.0 * 0.7f64).exp_m1(),
            1e-12,
            "cost_p(1)",
        );
        assert_close(
            samples[10].2,
            0.6 * 0.6 / (10.0 * 0.6f64).exp_m1(),
            1e-12,
            "cost_q(1)",
        );
    }

    // [DERIVED] Same scenario under χ: one unstable interior crossing
    // near 0.575155, decided at the boundaries — p's monopoly pays
    // peers 0.006286104 against q's 0.004448602.
    #[test]
    fn paper_scenario_p_monopoly_under_chi() {
        let (pp, pq) = paper_pair();
        let cfg = QuadratureConfig::default();
        let kind = FluidValueKind::Chi {
            weights: vec![1.0, 1.0],
        };
        let sc = scenario(&pp, &pq, &kind, &cfg).unwrap();
        assert_eq!(sc.monopoly(), Some(0));
        assert!(sc.equilibrium.bistable);
        assert_eq!(sc.equilibrium.roots.len(), 1);
        assert!(!sc.equilibrium.roots[0].stable);
        assert_close(sc.equilibrium.roots[0].x, 0.575155, 1e-3, "χ upcross");
        assert_close(
            sc.equilibrium.boundary_peer_payoffs.0,
            0.006286104,
            1e-6,
            "peer payoff, all with p",
        );
        assert_close(
            sc.equilibrium.boundary_peer_payoffs.1,
            0.004448602,
            1e-6,
            "peer payoff, all with q",
        );
        assert_close(sc.allocation.0, 0.3, 1e-12, "p's allocation");
        assert!(sc.chi_improves_peers());
    }

    // [TRIVIAL] Identical providers split the free users evenly.
    #[test]
    fn symmetric_scenario_splits_evenly() {
        let p = DtnParams::new(1.0, 5.0, 8.0, 0.35).unwrap();
        let cfg = QuadratureConfig::default();
        let sc = scenario(&p, &p, &FluidValueKind::AumannDreze, &cfg).unwrap();
        let SplitOutcome::Split { x } = sc.equilibrium.outcome else {
            panic!("symmetric scenario must split, got {:?}", sc.equilibrium);
        };
        assert_close(x, 0.5, 1e-6, "even split");
        assert_close(sc.allocation.0, 0.15, 1e-6, "p's half");
        assert_close(sc.allocation.1, 0.15, 1e-6, "q's half");
        assert!(sc.chi_improves_peers());
    }

    // [TRIVIAL] Parameter and scenario validation.
    #[test]
    fn validation_rejects_bad_inputs() {
        assert!(DtnParams::new(0.0, 5.0, 8.0, 0.4).is_err());
        assert!(DtnParams::new(1.0, -1.0, 8.0, 0.4).is_err());
        assert!(DtnParams::new(1.0, 5.0, 0.0, 0.4).is_err());
        assert!(DtnParams::new(1.0, 5.0, 8.0, 1.2).is_err());
        assert!(DtnParams::new(1.0, 5.0, 8.0, -0.1).is_err());

        let cfg = QuadratureConfig::default();
        let a = DtnParams::new(1.0, 5.0, 8.0, 0.6).unwrap();
        let b = DtnParams::new(1.0, 10.0, 8.0, 0.5).unwrap();
        // 0.6 + 0.5 > 1: no free users.
        assert!(scenario(&a, &b, &FluidValueKind::AumannDreze, &cfg).is_err());
        // Different meeting rates.
        let c = DtnParams::new(2.0, 10.0, 8.0, 0.3).unwrap();
        assert!(scenario(&a, &c, &FluidValueKind::AumannDreze, &cfg).is_err());
    }
}
