//! Fluid-limit payoffs: the constrained cost minimization `M_Ω`, the
//! Aumann-Drèze payoff integrals over random arrival orders (with single-
//! and two-provider specializations as cross-checks), the fluid
//! χ formula, noncontributing-provider detection, and the peer-indifference
//! equilibrium between two providers.
//!
//! Everything here is IEEE-double numerics. Cost curves are validated and
//! *classified* (monotonicity, curvature) on construction, and `M_Ω` picks
//! its minimization strategy from the classification:
//!
//! * all nonincreasing + concave → extreme-point enumeration (the optimum
//!   hands the whole budget to one provider);
//! * all nonincreasing + convex → golden-section over the split (the
//!   partial minimum of a jointly convex function is convex);
//! * anything else → dense grid with local refinement.
//!
//! Integrals use adaptive Simpson with Richardson extrapolation; known
//! regime-switch points of `M_Ω` (where the winning extreme point changes)
//! are planted as panel boundaries so the quadrature never straddles a kink.

use crate::expr::CostCurve;
use crate::{CoreError, Result};
use std::fmt;

/// A provider cost curve for the fluid regime. [`FluidCurve::Expr`] wraps
/// the expression language; [`FluidCurve::Dtn`] is the delay-tolerant-
/// network operational cost `x²λ/(e^{xλg}−1)` (whose removable singularity
/// at 0 the expression grammar cannot express); [`FluidCurve::Affine`]
/// evaluates `value_scale · base(shift + scale·x)` for domain re-mapping.
#[derive(Clone, Debug)]
pub enum FluidCurve {
    Expr(CostCurve),
    Dtn { lambda: f64, g: f64 },
    Affine {
        base: Box<FluidCurve>,
        shift: f64,
        scale: f64,
        value_scale: f64,
    },
}

impl FluidCurve {
    pub fn eval(&self, x: f64) -> Result<f64> {
        match self {
            FluidCurve::Expr(c) => c.eval(x),
            FluidCurve::Dtn { lambda, g } => {
                let t = x * lambda * g;
                let value = if t < 1e-8 {
                    // e^t − 1 = t(1 + t/2 + O(t²))
                    x / (g * (1.0 + 0.5 * t))
                } else {
                    x * x * lambda / t.exp_m1()
                };
                if value.is_finite() {
                    Ok(value)
                } else {
                    Err(CoreError::domain(format!(
                        "DTN cost not finite at x = {x} (lambda = {lambda}, g = {g})"
                    )))
                }
            }
            FluidCurve::Affine {
                base,
                shift,
                scale,
                value_scale,
            } => Ok(value_scale * base.eval(shift + scale * x)?),
        }
    }
}

impl fmt::Display for FluidCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FluidCurve::Expr(c) => write!(f, "{c}"),
            FluidCurve::Dtn { lambda, g } => {
                write!(f, "x^2*{lambda}/(exp({lambda}*{g}*x) - 1)")
            }
            FluidCurve::Affine {
                base,
                shift,
                scale,
                value_scale,
            } => write!(f, "{value_scale}*[{base}]({shift} + {scale}*x)"),
        }
    }
}

/// A provider's fluid cost: id plus curve `Ω̃_p` on `[0,1]`.
#[derive(Clone, Debug)]
pub struct FluidCost {
    pub provider: String,
    pub curve: FluidCurve,
}

impl FluidCost {
    pub fn new(provider: impl Into<String>, curve: CostCurve) -> Self {
        FluidCost {
            provider: provider.into(),
            curve: FluidCurve::Expr(curve),
        }
    }

    pub fn with_fluid_curve(provider: impl Into<String>, curve: FluidCurve) -> Self {
        FluidCost {
            provider: provider.into(),
            curve,
        }
    }
}

/// Validation grid size for classification (also the envelope resolution).
const CLASS_GRID: usize = 1024;

#[derive(Clone, Debug)]
struct CurveClass {
    nonincreasing: bool,
    concave: bool,
    convex: bool,
    omega0: f64,
    /// running minimum on the grid, for non-monotone curves only
    envelope: Option<Vec<f64>>,
}

/// A validated set of provider cost curves. Construction checks every curve
/// on a dense grid: evaluable and nonnegative on `[0,1]` (hard errors, as is
/// a constant curve — the model's standing assumption), nonincreasing
/// (violations are reported as [`FluidSystem::warnings`], and `M_Ω` then
/// minimizes over the running-minimum envelope instead).
#[derive(Clone, Debug)]
pub struct FluidSystem {
    costs: Vec<FluidCost>,
    classes: Vec<CurveClass>,
    warnings: Vec<String>,
}

impl FluidSystem {
    pub fn new(costs: Vec<FluidCost>) -> Result<Self> {
        if costs.is_empty() {
            return Err(CoreError::invalid("at least one provider is required"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for c in &costs {
            if !seen.insert(c.provider.clone()) {
                return Err(CoreError::invalid(format!(
                    "duplicate provider id `{}`",
                    c.provider
                )));
            }
        }
        let mut classes = Vec::with_capacity(costs.len());
        let mut warnings = Vec::new();
        for cost in &costs {
            let mut values = Vec::with_capacity(CLASS_GRID + 1);
            for k in 0..=CLASS_GRID {
                let x = k as f64 / CLASS_GRID as f64;
                let y = cost.curve.eval(x).map_err(|e| {
                    CoreError::invalid(format!("provider `{}`: {e}", cost.provider))
                })?;
                if !y.is_finite() {
                    return Err(CoreError::invalid(format!(
                        "provider `{}`: cost not finite at x = {x}",
                        cost.provider
                    )));
                }
                if y < -1e-12 {
                    return Err(CoreError::invalid(format!(
                        "provider `{}`: cost negative at x = {x} ({y})",
                        cost.provider
                    )));
                }
                values.push(y);
            }
            let scale = values.iter().cloned().fold(0.0f64, f64::max) + 1.0;
            let spread = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let spread = values.iter().cloned().fold(0.0f64, f64::max) - spread;
            if spread <= 1e-12 * scale {
                return Err(CoreError::invalid(format!(
                    "provider `{}`: cost curve is constant on [0,1]",
                    cost.provider
                )));
            }
            let mut nonincreasing = true;
            for w in values.windows(2) {
                if w[1] > w[0] + 1e-10 * scale {
                    nonincreasing = false;
                    break;
                }
            }
            if !nonincreasing {
                warnings.push(format!(
                    "provider `{}`: cost curve is not nonincreasing on [0,1]; \
                     the running-minimum envelope will be minimized instead",
                    cost.provider
                ));
            }
            let mut concave = true;
            let mut convex = true;
            for w in values.windows(3) {
                let d2 = w[2] - 2.0 * w[1] + w[0];
                if d2 > 1e-9 * scale {
                    concave = false;
                }
                if d2 < -1e-9 * scale {
                    convex = false;
                }
            }
            let envelope = if nonincreasing {
                None
            } else {
                let mut env = Vec::with_capacity(values.len());
                let mut run = f64::INFINITY;
                for &v in &values {
                    run = run.min(v);
                    env.push(run);
                }
                Some(env)
            };
            classes.push(CurveClass {
                nonincreasing,
                concave,
                convex,
                omega0: values[0],
                envelope,
            });
        }
        Ok(FluidSystem {
            costs,
            classes,
            warnings,
        })
    }

    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    pub fn provider_ids(&self) -> Vec<&str> {
        self.costs.iter().map(|c| c.provider.as_str()).collect()
    }

    pub fn index_of(&self, provider: &str) -> Option<usize> {
        self.costs.iter().position(|c| c.provider == provider)
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Raw curve value `Ω̃_i(y)`.
    pub fn omega(&self, i: usize, y: f64) -> Result<f64> {
        self.costs[i].curve.eval(y)
    }

    /// `Ω̃_i(0)` (cached).
    pub fn omega0(&self, i: usize) -> f64 {
        self.classes[i].omega0
    }

    /// Effective cost for minimization: the curve itself when nonincreasing,
    /// else its running-minimum envelope (resolved on the validation grid).
    fn omega_eff(&self, i: usize, y: f64) -> Result<f64> {
        let direct = self.omega(i, y)?;
        match &self.classes[i].envelope {
            None => Ok(direct),
            Some(env) => {
                let idx = ((y * CLASS_GRID as f64).floor() as usize).min(CLASS_GRID);
                Ok(env[idx].min(direct))
            }
        }
    }

    fn all_nonincreasing(&self, s: &[usize]) -> bool {
        s.iter().all(|&i| self.classes[i].nonincreasing)
    }

    fn all_concave(&self, s: &[usize]) -> bool {
        s.iter().all(|&i| self.classes[i].concave)
    }

    fn all_convex(&self, s: &[usize]) -> bool {
        s.iter().all(|&i| self.classes[i].convex)
    }

    fn check_provider(&self, p: usize) -> Result<()> {
        if p >= self.len() {
            return Err(CoreError::invalid(format!(
                "provider index {p} out of range (system has {})",
                self.len()
            )));
        }
        Ok(())
    }
}

/// Quadrature and finite-difference settings.
#[derive(Clone, Copy, Debug)]
pub struct QuadratureConfig {
    /// absolute tolerance for each payoff integral (split across terms)
    pub tol: f64,
    /// maximum adaptive-Simpson bisection depth per panel
    pub max_depth: u32,
    /// central-difference step for dM/dx
    pub fd_step: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            tol: 1e-9,
            max_depth: 32,
            fd_step: 1e-6,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !(self.fd_step > 0.0) {
            return Err(CoreError::invalid(
                "quadrature tolerance and fd step must be positive",
            ));
        }
        Ok(())
    }
}

/// A coalition in the fluid regime: a set of providers `Z̄` (indices into
/// the [`FluidSystem`]) plus the fraction `x ∈ [0,1]` of assisting peers.
#[derive(Clone, Debug)]
pub struct FluidCoalition {
    pub providers: Vec<usize>,
    pub x: f64,
}

impl FluidCoalition {
    pub fn new(providers: Vec<usize>, x: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&x) {
            return Err(CoreError::invalid(format!("x = {x} outside [0,1]")));
        }
        let mut sorted = providers.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != providers.len() {
            return Err(CoreError::invalid("duplicate provider in coalition"));
        }
        Ok(FluidCoalition { providers, x })
    }
}

// ---------------------------------------------------------------------------
// M_Ω: constrained cost minimization
// ---------------------------------------------------------------------------

const GOLDEN_ITERS: u32 = 70;
const GRID_2D: usize = 2001;
const GRID_3D: usize = 201;
const ZOOM_ROUNDS: usize = 3;

/// `M_Ω^S(x) = min { Σ_{i∈S} Ω̃_i(y_i) : Σ y_i ≤ x, y_i ≥ 0 }`.
///
/// `M^∅ ≡ 0`; `M^{p}(x) = Ω̃_p(x)` for nonincreasing costs. Sizes beyond 3
/// are supported only when every curve in `S` is concave and nonincreasing
/// (extreme-point optimum); otherwise they are rejected.
pub fn m_omega(sys: &FluidSystem, s: &[usize], x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(CoreError::invalid(format!("x = {x} outside [0,1]")));
    }
    for &i in s {
        sys.check_provider(i)?;
    }
    match s.len() {
        0 => Ok(0.0),
        1 => sys.omega_eff(s[0], x),
        _ => {
            if sys.all_nonincreasing(s) && sys.all_concave(s) {
                return m_vertex(sys, s, x);
            }
            match s.len() {
                2 => {
                    if sys.all_nonincreasing(s) && sys.all_convex(s) {
                        m_golden_2(sys, s, x)
                    } else {
                        m_grid_2(sys, s, x)
                    }
                }
                3 => {
                    if sys.all_nonincreasing(s) && sys.all_convex(s) {
                        m_golden_3(sys, s, x)
                    } else {
                        m_grid_3(sys, s, x)
                    }
                }
                n => Err(CoreError::invalid(format!(
                    "M_Ω supports at most 3 providers for non-concave costs (got {n})"
                ))),
            }
        }
    }
}

/// Concave nonincreasing costs: the optimum gives the whole budget to one
/// provider (extreme point of the simplex).
fn m_vertex(sys: &FluidSystem, s: &[usize], x: f64) -> Result<f64> {
    let total0: f64 = s.iter().map(|&i| sys.omega0(i)).sum();
    let mut best = f64::INFINITY;
    for &i in s {
        let v = total0 - sys.omega0(i) + sys.omega(i, x)?;
        best = best.min(v);
    }
    Ok(best)
}

/// Golden-section minimum of `f` on `[lo, hi]` (unimodal); endpoints are
/// also evaluated, so a boundary optimum is exact.
fn golden_min(mut f: impl FnMut(f64) -> Result<f64>, lo: f64, hi: f64) -> Result<f64> {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut a = lo;
    let mut b = hi;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..GOLDEN_ITERS {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    Ok(fc.min(fd).min(f(lo)?).min(f(hi)?))
}

/// Convex nonincreasing pair: the budget binds and the 1-D split objective
/// is convex, so golden-section finds the optimum.
fn m_golden_2(sys: &FluidSystem, s: &[usize], x: f64) -> Result<f64> {
    let (i, j) = (s[0], s[1]);
    golden_min(|t| Ok(sys.omega(i, t)? + sys.omega(j, x - t)?), 0.0, x)
}

/// Convex nonincreasing triple: nested golden — the partial minimum over
/// the inner split is convex in the outer variable.
fn m_golden_3(sys: &FluidSystem, s: &[usize], x: f64) -> Result<f64> {
    let (i, j, k) = (s[0], s[1], s[2]);
    golden_min(
        |t1| {
            let rest = x - t1;
            let inner = golden_min(
                |t2| Ok(sys.omega(j, t2)? + sys.omega(k, rest - t2)?),
                0.0,
                rest,
            )?;
            Ok(sys.omega(i, t1)? + inner)
        },
        0.0,
        x,
    )
}

/// General pair: dense grid over the split (envelope costs, budget binding)
/// plus golden refinement inside the winning bracket.
fn m_grid_2(sys: &FluidSystem, s: &[usize], x: f64) -> Result<f64> {
    let (i, j) = (s[0], s[1]);
    let f = |t: f64| -> Result<f64> { Ok(sys.omega_eff(i, t)? + sys.omega_eff(j, x - t)?) };
    if x == 0.0 {
        return f(0.0);
    }
    let mut best = f64::INFINITY;
    let mut best_k = 0usize;
    for k in 0..GRID_2D {
        let t = x * k as f64 / (GRID_2D - 1) as f64;
        let v = f(t)?;
        if v < best {
            best = v;
            best_k = k;
        }
    }
    let step = x / (GRID_2D - 1) as f64;
    let lo = (best_k as f64 - 1.0).max(0.0) * step;
    let hi = ((best_k + 1) as f64 * step).min(x);
    Ok(golden_min(f, lo, hi)?.min(best))
}

/// General triple: coarse simplex grid with zoom rounds around the winner.
fn m_grid_3(sys: &FluidSystem, s: &[usize], x: f64) -> Result<f64> {
    let (i, j, k) = (s[0], s[1], s[2]);
    let f = |t1: f64, t2: f64| -> Result<f64> {
        Ok(sys.omega_eff(i, t1)? + sys.omega_eff(j, t2)? + sys.omega_eff(k, x - t1 - t2)?)
    };
    if x == 0.0 {
        return f(0.0, 0.0);
    }
    let (mut lo1, mut hi1, mut lo2, mut hi2) = (0.0f64, x, 0.0f64, x);
    let mut best = f64::INFINITY;
    for _ in 0..=ZOOM_ROUNDS {
        let mut best_t = (lo1, lo2);
        for a in 0..GRID_3D {
            let t1 = lo1 + (hi1 - lo1) * a as f64 / (GRID_3D - 1) as f64;
            if t1 > x {
                break;
            }
            for b in 0..GRID_3D {
                let t2 = lo2 + (hi2 - lo2) * b as f64 / (GRID_3D - 1) as f64;
                if t1 + t2 > x {
                    break;
                }
                let v = f(t1, t2)?;
                if v < best {
                    best = v;
                    best_t = (t1, t2);
                }
            }
        }
        let c1 = 2.0 * (hi1 - lo1) / (GRID_3D - 1) as f64;
        let c2 = 2.0 * (hi2 - lo2) / (GRID_3D - 1) as f64;
        lo1 = (best_t.0 - c1).max(0.0);
        hi1 = (best_t.0 + c1).min(x);
        lo2 = (best_t.1 - c2).max(0.0);
        hi2 = (best_t.1 + c2).min(x);
    }
    Ok(best)
}

/// One-sided derivative at a boundary anchor by Richardson extrapolation
/// in powers of √h. Cost curves routinely contain half powers (e.g.
/// `1 − x^{3/2}`), whose one-sided difference quotients carry `h^{1/2}`,
/// `h`, `h^{3/2}` error terms; eliminating those three in sequence is exact
/// for any mix of `z^{k/2}` terms up to `z²` and second-order for smooth
/// curves, where a plain one-sided stencil would stall at O(√h).
fn richardson_one_sided(
    mut f: impl FnMut(f64) -> Result<f64>,
    anchor: f64,
    direction: f64,
    h0: f64,
    ratio: f64,
    betas: &[f64],
) -> Result<f64> {
    let f0 = f(anchor)?;
    let mut level: Vec<f64> = Vec::with_capacity(betas.len() + 1);
    let mut h = h0;
    for _ in 0..=betas.len() {
        level.push(direction * (f(anchor + direction * h)? - f0) / h);
        h /= ratio;
    }
    for &beta in betas {
        let w = ratio.powf(-beta);
        level = level
            .windows(2)
            .map(|pair| (pair[1] - w * pair[0]) / (1.0 - w))
            .collect();
    }
    Ok(level[0])
}

fn boundary_derivative(
    f: impl FnMut(f64) -> Result<f64>,
    anchor: f64,
    direction: f64,
) -> Result<f64> {
    richardson_one_sided(f, anchor, direction, 1e-3, 4.0, &[0.5, 1.0, 1.5])
}

/// `dM_Ω^S/dx` at `x` by central finite difference; within `fd_step` of the
/// boundaries of `[0,1]` the one-sided √h-Richardson estimator anchored at
/// the boundary is used instead (half-power cost curves make plain
/// one-sided stencils O(√h)-inaccurate there).
pub fn m_omega_derivative(
    sys: &FluidSystem,
    s: &[usize],
    x: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let h = cfg.fd_step;
    let m = |z: f64| m_omega(sys, s, z);
    if x - h < 0.0 {
        boundary_derivative(m, 0.0, 1.0)
    } else if x + h > 1.0 {
        boundary_derivative(m, 1.0, -1.0)
    } else {
        Ok((m(x + h)? - m(x - h)?) / (2.0 * h))
    }
}

/// Regime-switch points of `M_Ω^S` in `(0, xmax)`: arguments where the
/// winning extreme point changes (concave path only — elsewhere `M` is
/// smooth or the adaptive quadrature subdivides on its own). Used as panel
/// seeds.
pub fn m_omega_kinks(sys: &FluidSystem, s: &[usize], xmax: f64) -> Result<Vec<f64>> {
    if s.len() < 2 || xmax <= 0.0 || !(sys.all_nonincreasing(s) && sys.all_concave(s)) {
        return Ok(Vec::new());
    }
    let total0: f64 = s.iter().map(|&i| sys.omega0(i)).sum();
    let winner = |z: f64| -> Result<usize> {
        let mut best = f64::INFINITY;
        let mut who = 0usize;
        for (pos, &i) in s.iter().enumerate() {
            let v = total0 - sys.omega0(i) + sys.omega(i, z)?;
            if v < best {
                best = v;
                who = pos;
            }
        }
        Ok(who)
    };
    const SCAN: usize = 256;
    let mut kinks = Vec::new();
    // start strictly inside (0, xmax): at 0 every branch ties
    let mut prev_z = xmax / SCAN as f64;
    let mut prev_w = winner(prev_z)?;
    for k in 2..=SCAN {
        let z = xmax * k as f64 / SCAN as f64;
        let w = winner(z)?;
        if w != prev_w {
            // bisect the cost difference of the two branches
            let fi = s[prev_w];
            let fj = s[w];
            let diff = |z: f64| -> Result<f64> {
                Ok(sys.omega(fi, z)? - sys.omega0(fi) - (sys.omega(fj, z)? - sys.omega0(fj)))
            };
            let (mut a, mut b) = (prev_z, z);
            let mut fa = diff(a)?;
            for _ in 0..60 {
                let mid = 0.5 * (a + b);
                let fm = diff(mid)?;
                if (fa <= 0.0) == (fm <= 0.0) {
                    a = mid;
                    fa = fm;
                } else {
                    b = mid;
                }
            }
            kinks.push(0.5 * (a + b));
            prev_w = w;
        }
        prev_z = z;
    }
    Ok(kinks)
}

// ---------------------------------------------------------------------------
// Adaptive Simpson quadrature
// ---------------------------------------------------------------------------

/// Integrate `f` over `[0,1]` to absolute tolerance `tol`. Initial panels:
/// sixteenths of the interval plus any `seeds` (kink locations).
fn integrate(
    f: &mut impl FnMut(f64) -> Result<f64>,
    tol: f64,
    max_depth: u32,
    seeds: &[f64],
) -> Result<f64> {
    let mut cuts: Vec<f64> = (0..=16).map(|k| k as f64 / 16.0).collect();
    cuts.extend(seeds.iter().copied().filter(|u| *u > 0.0 && *u < 1.0));
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let fa = f(a)?;
        let fb = f(b)?;
        let m = 0.5 * (a + b);
        let fm = f(m)?;
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        total += simpson_rec(f, a, fa, m, fm, b, fb, whole, tol * (b - a), max_depth)?;
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &mut impl FnMut(f64) -> Result<f64>,
    a: f64,
    fa: f64,
    m: f64,
    fm: f64,
    b: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(CoreError::Quadrature {
            estimate: left + right,
            error: delta.abs() / 15.0,
            tol,
        });
    }
    Ok(
        simpson_rec(f, a, fa, lm, flm, m, fm, left, 0.5 * tol, depth - 1)?
            + simpson_rec(f, m, fm, rm, frm, b, fb, right, 0.5 * tol, depth - 1)?,
    )
}

// ---------------------------------------------------------------------------
// A-D payoff integrals and specializations
// ---------------------------------------------------------------------------

/// Fluid Aumann-Drèze payoffs of a coalition: per-provider payoffs (aligned
/// with the coalition's provider order) and the common per-peer payoff.
#[derive(Clone, Debug)]
pub struct FluidAdPayoffs {
    pub providers: Vec<(usize, f64)>,
    pub peer: f64,
}

/// Below this `x` the peer integral collapses to its `x → 0⁺` limit
/// `M′(0⁺)·B(a+1, b+1)`; above it, integration by parts applies.
const IBP_MIN_X: f64 = 1e-6;

/// `∫₀¹ u^a (1−u)^b M_S′(ux) du`. For `x ≥ IBP_MIN_X`, integration by
/// parts turns the derivative of `M` into plain `M` evaluations:
/// `(1/x)·[(b=0 ? M(x) : 0) − ∫₀¹ (a u^{a−1}(1−u)^b − b u^a(1−u)^{b−1})
/// M(ux) du]` — machine-precision integrands instead of finite-difference
/// noise. The inner tolerance is scaled by `x` since the 1/x factor
/// amplifies quadrature error. For smaller `x` (including 0), `M′` is
/// constant to `O(√x)` and the integral is `M′(0⁺)·a!b!/(a+b+1)!`, with
/// `M′(0⁺)` from the √h-Richardson boundary stencil.
#[allow(clippy::too_many_arguments)]
fn peer_term(
    sys: &FluidSystem,
    s: &[usize],
    a: i32,
    b: i32,
    x: f64,
    tol: f64,
    cfg: &QuadratureConfig,
    seeds: &[f64],
) -> Result<f64> {
    if x >= IBP_MIN_X {
        let boundary = if b == 0 { m_omega(sys, s, x)? } else { 0.0 };
        let mut g = |u: f64| -> Result<f64> {
            let mut w = a as f64 * u.powi(a - 1) * (1.0 - u).powi(b);
            if b > 0 {
                w -= b as f64 * u.powi(a) * (1.0 - u).powi(b - 1);
            }
            Ok(w * m_omega(sys, s, u * x)?)
        };
        Ok((boundary - integrate(&mut g, tol * x, cfg.max_depth, seeds)?) / x)
    } else {
        let slope = boundary_derivative(|z| m_omega(sys, s, z), 0.0, 1.0)?;
        let fact = |n: i32| (1..=n).map(f64::from).product::<f64>().max(1.0);
        Ok(slope * fact(a) * fact(b) / fact(a + b + 1))
    }
}

/// All subsets of `items`, each as a sorted Vec.
fn subsets(items: &[usize]) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(1 << items.len());
    for mask in 0u32..1 << items.len() {
        out.push(
            items
                .iter()
                .enumerate()
                .filter(|(k, _)| mask & (1 << k) != 0)
                .map(|(_, &i)| i)
                .collect(),
        );
    }
    out
}

/// The A-D payoff integrals for an arbitrary coalition `Z̄ ∪ H̄`:
///
/// `φ̃_p^{Z̄}(x) = Ω̃_p(0) − Σ_{S⊆Z̄∖{p}} ∫₀¹ u^{|S|}(1−u)^{|Z̄|−1−|S|}
///   (M^{S∪{p}}(ux) − M^{S}(ux)) du`
///
/// `φ̃_n^{Z̄}(x) = −Σ_{∅≠S⊆Z̄} ∫₀¹ u^{|S|}(1−u)^{|Z̄|−|S|} M^{S}′(ux) du`
///
/// evaluated by adaptive Simpson, with `dM/dx` by central finite difference
/// and the regime-switch points of each `M^S` planted as panel boundaries.
pub fn fluid_ad(
    sys: &FluidSystem,
    coalition: &FluidCoalition,
    cfg: &QuadratureConfig,
) -> Result<FluidAdPayoffs> {
    cfg.validate()?;
    let zbar = &coalition.providers;
    let x = coalition.x;
    if !(0.0..=1.0).contains(&x) {
        return Err(CoreError::invalid(format!("x = {x} outside [0,1]")));
    }
    for &p in zbar {
        sys.check_provider(p)?;
    }
    if zbar.is_empty() {
        return Ok(FluidAdPayoffs {
            providers: Vec::new(),
            peer: 0.0,
        });
    }
    if zbar.len() > 3 {
        return Err(CoreError::invalid(
            "fluid payoffs support at most 3 providers per coalition",
        ));
    }
    let k = zbar.len();
    let term_tol = cfg.tol / (1u32 << k) as f64;

    let seeds_for = |s: &[usize]| -> Result<Vec<f64>> {
        if x == 0.0 {
            return Ok(Vec::new());
        }
        Ok(m_omega_kinks(sys, s, x)?
            .into_iter()
            .map(|z| z / x)
            .collect())
    };

    let mut providers = Vec::with_capacity(k);
    for &p in zbar {
        let others: Vec<usize> = zbar.iter().copied().filter(|&q| q != p).collect();
        let mut payoff = sys.omega0(p);
        for s in subsets(&others) {
            let mut with_p = s.clone();
            with_p.push(p);
            let a = s.len() as i32;
            let b = (k - 1 - s.len()) as i32;
            let mut seeds = seeds_for(&with_p)?;
            seeds.extend(seeds_for(&s)?);
            let mut integrand = |u: f64| -> Result<f64> {
                let z = u * x;
                Ok(u.powi(a) * (1.0 - u).powi(b) * (m_omega(sys, &with_p, z)? - m_omega(sys, &s, z)?))
            };
            payoff -= integrate(&mut integrand, term_tol, cfg.max_depth, &seeds)?;
        }
        providers.push((p, payoff));
    }

    let mut peer = 0.0;
    for s in subsets(zbar) {
        if s.is_empty() {
            continue; // M^∅ ≡ 0
        }
        let a = s.len() as i32;
        let b = (k - s.len()) as i32;
        let seeds = seeds_for(&s)?;
        peer -= peer_term(sys, &s, a, b, x, term_tol, cfg, &seeds)?;
    }

    Ok(FluidAdPayoffs { providers, peer })
}

/// Single-provider specialization (`|Z̄| = 1`), written directly from the
/// single-provider formulas as a cross-check of the general machinery:
/// `φ̃_p^{p}(x) = Ω̃_p(0) − ∫₀¹ Ω̃_p(ux) du`,
/// `φ̃_n^{p}(x) = −∫₀¹ u·Ω̃_p′(ux) du`. Returns `(φ̃_p, φ̃_n)`.
pub fn fluid_ad_single(
    sys: &FluidSystem,
    p: usize,
    x: f64,
    cfg: &QuadratureConfig,
) -> Result<(f64, f64)> {
    cfg.validate()?;
    sys.check_provider(p)?;
    let s = [p];
    let mut f1 = |u: f64| m_omega(sys, &s, u * x);
    let provider = sys.omega0(p) - integrate(&mut f1, cfg.tol / 2.0, cfg.max_depth, &[])?;
    let peer = -peer_term(sys, &s, 1, 0, x, cfg.tol / 2.0, cfg, &[])?;
    Ok((provider, peer))
}

/// Two-provider specialization (`|Z̄| = 2`), written out term by term as a
/// cross-check. Returns `(φ̃_p, φ̃_q, φ̃_n)`.
pub fn fluid_ad_two(
    sys: &FluidSystem,
    p: usize,
    q: usize,
    x: f64,
    cfg: &QuadratureConfig,
) -> Result<(f64, f64, f64)> {
    cfg.validate()?;
    sys.check_provider(p)?;
    sys.check_provider(q)?;
    let pq = [p, q];
    let seeds: Vec<f64> = if x > 0.0 {
        m_omega_kinks(sys, &pq, x)?.into_iter().map(|z| z / x).collect()
    } else {
        Vec::new()
    };
    let tol = cfg.tol / 4.0;
    let prov = |a: usize, b: usize| -> Result<f64> {
        let mut t1 = |u: f64| Ok((1.0 - u) * m_omega(sys, &[a], u * x)?);
        let mut t2 =
            |u: f64| Ok(u * (m_omega(sys, &pq, u * x)? - m_omega(sys, &[b], u * x)?));
        Ok(sys.omega0(a)
            - integrate(&mut t1, tol, cfg.max_depth, &[])?
            - integrate(&mut t2, tol, cfg.max_depth, &seeds)?)
    };
    let phi_p = prov(p, q)?;
    let phi_q = prov(q, p)?;
    let peer = -peer_term(sys, &[p], 1, 1, x, tol, cfg, &[])?
        - peer_term(sys, &[q], 1, 1, x, tol, cfg, &[])?
        - peer_term(sys, &pq, 2, 0, x, tol, cfg, &seeds)?;
    Ok((phi_p, phi_q, peer))
}

// ---------------------------------------------------------------------------
// Fluid χ
// ---------------------------------------------------------------------------

/// Fluid χ payoffs: per-provider and per-peer.
#[derive(Clone, Debug)]
pub struct FluidChiPayoffs {
    pub providers: Vec<(usize, f64)>,
    pub peer: f64,
}

/// Precomputed grand-coalition fluid Shapley values (`Z` = all providers,
/// `x = 1`) plus provider weights, for repeated χ evaluations.
pub struct FluidChiContext<'a> {
    sys: &'a FluidSystem,
    weights: Vec<f64>,
    grand_providers: Vec<f64>,
    grand_peer: f64,
}

impl<'a> FluidChiContext<'a> {
    /// `weights[i]` is provider `i`'s weight `w_i > 0`; peers carry weight 1.
    pub fn new(sys: &'a FluidSystem, weights: Vec<f64>, cfg: QuadratureConfig) -> Result<Self> {
        cfg.validate()?;
        if weights.len() != sys.len() {
            return Err(CoreError::invalid(format!(
                "{} weights for {} providers",
                weights.len(),
                sys.len()
            )));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(CoreError::invalid("weights must be strictly positive"));
        }
        let all: Vec<usize> = (0..sys.len()).collect();
        let grand = fluid_ad(sys, &FluidCoalition { providers: all, x: 1.0 }, &cfg)?;
        let mut grand_providers = vec![0.0; sys.len()];
        for (p, v) in grand.providers {
            grand_providers[p] = v;
        }
        Ok(FluidChiContext {
            sys,
            weights,
            grand_providers,
            grand_peer: grand.peer,
        })
    }

    pub fn grand_provider(&self, p: usize) -> f64 {
        self.grand_providers[p]
    }

    pub fn grand_peer(&self) -> f64 {
        self.grand_peer
    }

    /// The block surplus `s(x) = Σ_{j∈Z̄} Ω̃_j(0) − M^{Z̄}(x) −
    /// (x·φ̃_n^Z(1) + Σ_{j∈Z̄} φ̃_j^Z(1))` shared by the coalition's members
    /// on top of their grand-coalition fluid Shapley values.
    pub fn surplus(&self, coalition: &FluidCoalition) -> Result<f64> {
        let zbar = &coalition.providers;
        let x = coalition.x;
        let worth: f64 = zbar.iter().map(|&j| self.sys.omega0(j)).sum::<f64>()
            - m_omega(self.sys, zbar, x)?;
        let shapley_mass: f64 =
            x * self.grand_peer + zbar.iter().map(|&j| self.grand_providers[j]).sum::<f64>();
        Ok(worth - shapley_mass)
    }

    /// `χ̃_i^{Z̄}(x) = φ̃_i^Z(1) + w′_i/(x + Σ_{j∈Z̄} w_j) · s(x)`, with
    /// `w′` the provider weights and 1 for peers.
    pub fn chi(&self, coalition: &FluidCoalition) -> Result<FluidChiPayoffs> {
        let zbar = &coalition.providers;
        let x = coalition.x;
        if !(0.0..=1.0).contains(&x) {
            return Err(CoreError::invalid(format!("x = {x} outside [0,1]")));
        }
        for &p in zbar {
            self.sys.check_provider(p)?;
        }
        let surplus = self.surplus(coalition)?;
        let denom = x + zbar.iter().map(|&j| self.weights[j]).sum::<f64>();
        let providers = zbar
            .iter()
            .map(|&j| {
                (
                    j,
                    self.grand_providers[j] + self.weights[j] / denom * surplus,
                )
            })
            .collect();
        Ok(FluidChiPayoffs {
            providers,
            peer: self.grand_peer + surplus / denom,
        })
    }

    /// Per-peer χ in the single-provider block `{p} ∪ H̄` with fraction `x`.
    pub fn peer_payoff(&self, p: usize, x: f64) -> Result<f64> {
        Ok(self
            .chi(&FluidCoalition {
                providers: vec![p],
                x,
            })?
            .peer)
    }
}

/// One-shot χ evaluation (builds the grand-coalition context internally).
pub fn fluid_chi(
    sys: &FluidSystem,
    coalition: &FluidCoalition,
    provider_weights: &[f64],
    cfg: &QuadratureConfig,
) -> Result<FluidChiPayoffs> {
    FluidChiContext::new(sys, provider_weights.to_vec(), *cfg)?.chi(coalition)
}

/// Upcrossing roots of the χ surplus of the single-provider coalition
/// `{p} ∪ H̄` as a function of `x`: past such a root every member of the
/// coalition is paid above its grand-coalition fluid Shapley value.
pub fn chi_surplus_threshold(ctx: &FluidChiContext<'_>, p: usize) -> Result<Vec<f64>> {
    ctx.sys.check_provider(p)?;
    let s = |x: f64| {
        ctx.surplus(&FluidCoalition {
            providers: vec![p],
            x,
        })
    };
    let mut roots = Vec::new();
    const GRID: usize = 200;
    let mut prev_x = 0.0;
    let mut prev = s(0.0)?;
    for k in 1..=GRID {
        let x = k as f64 / GRID as f64;
        let cur = s(x)?;
        if prev < 0.0 && cur >= 0.0 {
            let (mut a, mut b) = (prev_x, x);
            for _ in 0..60 {
                let mid = 0.5 * (a + b);
                if s(mid)? < 0.0 {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            roots.push(0.5 * (a + b));
        }
        prev = cur;
        prev_x = x;
    }
    Ok(roots)
}

// ---------------------------------------------------------------------------
// Noncontributing providers, core violation, FAIR / CE identities
// ---------------------------------------------------------------------------

/// Providers `p` with `|M^Z(1) − M^{Z∖{p}}(1) − Ω̃_p(0)| ≤ tol`: removing
/// `p` costs nothing — the grand coalition can absorb `p`'s full base cost
/// without peer help (the defining property of a noncontributing provider).
pub fn noncontributing_providers(sys: &FluidSystem, tol: f64) -> Result<Vec<usize>> {
    let all: Vec<usize> = (0..sys.len()).collect();
    let m_all = m_omega(sys, &all, 1.0)?;
    let mut out = Vec::new();
    for p in 0..sys.len() {
        let rest: Vec<usize> = all.iter().copied().filter(|&q| q != p).collect();
        let m_rest = m_omega(sys, &rest, 1.0)?;
        if (m_all - m_rest - sys.omega0(p)).abs() <= tol {
            out.push(p);
        }
    }
    Ok(out)
}

/// Core-violation margin: `φ̃_p^Z(1) − [Ω̃_p(0) − (M^Z(1) − M^{Z∖{p}}(1))]`.
/// A strictly positive margin certifies that the grand-coalition fluid
/// Shapley payoff is not in the core (the rest of the players would drop
/// `p`). Requires at least two providers.
pub fn core_violation_margin(sys: &FluidSystem, p: usize, cfg: &QuadratureConfig) -> Result<f64> {
    sys.check_provider(p)?;
    if sys.len() < 2 {
        return Err(CoreError::invalid(
            "core violation margin requires at least two providers",
        ));
    }
    let all: Vec<usize> = (0..sys.len()).collect();
    let rest: Vec<usize> = all.iter().copied().filter(|&q| q != p).collect();
    let grand = fluid_ad(
        sys,
        &FluidCoalition {
            providers: all.clone(),
            x: 1.0,
        },
        cfg,
    )?;
    let phi_p = grand
        .providers
        .iter()
        .find(|(q, _)| *q == p)
        .map(|(_, v)| *v)
        .expect("provider in grand coalition");
    let marginal = sys.omega0(p) - (m_omega(sys, &all, 1.0)? - m_omega(sys, &rest, 1.0)?);
    Ok(phi_p - marginal)
}

/// Finite-difference step for `d/dx φ̃_p` in the FAIR residual. Wider than
/// the `dM/dx` step on purpose: `φ̃_p` carries quadrature noise of order
/// `tol`, and a 1e-4 step keeps that noise amplification (~`tol/step`)
/// below the 1e-4 acceptance budget while truncation stays ~1e-8.
const FAIR_FD_STEP: f64 = 1e-4;

/// FAIR residual `φ̃_n^{Z̄}(x) − φ̃_n^{Z̄∖{p}}(x) − d/dx φ̃_p^{Z̄}(x)`,
/// which should vanish: a provider's marginal payoff for attracting peers
/// equals the peer-payoff gap it must bridge.
pub fn fair_identity_residual(
    sys: &FluidSystem,
    zbar: &[usize],
    p: usize,
    x: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    if !zbar.contains(&p) {
        return Err(CoreError::invalid("provider not in the coalition"));
    }
    let rest: Vec<usize> = zbar.iter().copied().filter(|&q| q != p).collect();
    let peer_with = fluid_ad(
        sys,
        &FluidCoalition {
            providers: zbar.to_vec(),
            x,
        },
        cfg,
    )?
    .peer;
    let peer_without = fluid_ad(
        sys,
        &FluidCoalition {
            providers: rest,
            x,
        },
        cfg,
    )?
    .peer;
    let phi_p_at = |z: f64| -> Result<f64> {
        let pay = fluid_ad(
            sys,
            &FluidCoalition {
                providers: zbar.to_vec(),
                x: z,
            },
            cfg,
        )?;
        Ok(pay
            .providers
            .iter()
            .find(|(q, _)| *q == p)
            .map(|(_, v)| *v)
            .expect("provider present"))
    };
    // At the endpoints, `φ̃_p(·)` can carry half-power expansion terms
    // (cost curves like 1 − x^{3/2}), so a plain one-sided stencil stalls
    // at O(√h); the √h-Richardson ladder below cancels the x^{1/2}..x²
    // terms while its ratio-2 steps keep quadrature noise (~tol per
    // evaluation) from being amplified past ~1e-4.
    let h = FAIR_FD_STEP;
    let dphi = if x - h < 0.0 || x + h > 1.0 {
        let dir = if x - h < 0.0 { 1.0 } else { -1.0 };
        richardson_one_sided(phi_p_at, x, dir, 1e-2, 2.0, &[0.5, 1.0, 1.5, 2.0])?
    } else {
        (phi_p_at(x + h)? - phi_p_at(x - h)?) / (2.0 * h)
    };
    Ok(peer_with - peer_without - dphi)
}

/// Which payoff rule governs a fluid coalition structure.
#[derive(Clone, Debug)]
pub enum FluidValueKind {
    AumannDreze,
    /// χ with the given provider weights (peer weight 1).
    Chi { weights: Vec<f64> },
}

/// Coalition-efficiency residual
/// `Σ_{p∈Z̄} pay_p + x·pay_n − (Σ_{p∈Z̄} Ω̃_p(0) − M^{Z̄}(x))`,
/// which must be ≈ 0 for both payoff rules.
pub fn ce_identity_residual(
    sys: &FluidSystem,
    coalition: &FluidCoalition,
    kind: &FluidValueKind,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let (prov_sum, peer) = match kind {
        FluidValueKind::AumannDreze => {
            let pay = fluid_ad(sys, coalition, cfg)?;
            (
                pay.providers.iter().map(|(_, v)| v).sum::<f64>(),
                pay.peer,
            )
        }
        FluidValueKind::Chi { weights } => {
            let pay = fluid_chi(sys, coalition, weights, cfg)?;
            (
                pay.providers.iter().map(|(_, v)| v).sum::<f64>(),
                pay.peer,
            )
        }
    };
    let worth: f64 = coalition
        .providers
        .iter()
        .map(|&p| sys.omega0(p))
        .sum::<f64>()
        - m_omega(sys, &coalition.providers, coalition.x)?;
    Ok(prov_sum + coalition.x * peer - worth)
}

/// Per-peer payoff in the single-provider block `{p} ∪ H̄` with fraction
/// `x`, under either rule. Builds a χ context per call — for sweeps, hold a
/// [`FluidChiContext`] and call [`FluidChiContext::peer_payoff`].
pub fn peer_payoff_under(
    sys: &FluidSystem,
    p: usize,
    x: f64,
    kind: &FluidValueKind,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    match kind {
        FluidValueKind::AumannDreze => Ok(fluid_ad_single(sys, p, x, cfg)?.1),
        FluidValueKind::Chi { weights } => {
            FluidChiContext::new(sys, weights.clone(), *cfg)?.peer_payoff(p, x)
        }
    }
}

// ---------------------------------------------------------------------------
// Peer-split equilibrium
// ---------------------------------------------------------------------------

/// Sign-change magnitude required at the brackets for an interior root.
const ROOT_SIGNIFICANCE: f64 = 1e-9;

/// A root of the peer-indifference difference `D(x) = pay_p(x) − pay_q(1−x)`.
#[derive(Clone, Copy, Debug)]
pub struct EquilibriumRoot {
    pub x: f64,
    /// `D` crosses downward (+→−) here: the split is dynamically stable
    /// (peers above it drift back, peers below drift up).
    pub stable: bool,
}

/// Where the peers end up.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SplitOutcome {
    /// Interior split: fraction `x` assists `p`, the rest assists `q`.
    Split { x: f64 },
    /// Everyone assists one provider (system index).
    Monopoly { provider: usize },
}

/// Result of the two-provider peer-split analysis.
#[derive(Clone, Debug)]
pub struct EquilibriumReport {
    /// All bracketed roots of `D`, ascending in `x`.
    pub roots: Vec<EquilibriumRoot>,
    pub outcome: SplitOutcome,
    /// No stable interior root: the outcome was decided by comparing the
    /// two monopoly boundaries.
    pub bistable: bool,
    /// Per-peer payoffs at the monopoly boundaries: (all with `p`, all
    /// with `q`).
    pub boundary_peer_payoffs: (f64, f64),
}

/// Find where peers are indifferent between assisting `p` (fraction `x`)
/// and `q` (fraction `1−x`), under the chosen payoff rule.
///
/// `D(x) = pay_p(x) − pay_q(1−x)` is scanned on a grid; every sign change
/// (magnitude > 1e-9 at the brackets) is bisected and classified by
/// crossing direction. Outcome:
///
/// * `D ≈ 0` everywhere (symmetric costs): split at the midpoint;
/// * a unique stable (downward) root: split there;
/// * no root: monopoly by the sign of `D`;
/// * only unstable roots, or several stable ones: compare the monopoly
///   boundaries `pay_p(1)` vs `pay_q(1)` (a tie keeps the root nearest
///   1/2 as the split); `bistable` is set.
pub fn peer_split_equilibrium(
    sys: &FluidSystem,
    p: usize,
    q: usize,
    kind: &FluidValueKind,
    cfg: &QuadratureConfig,
) -> Result<EquilibriumReport> {
    cfg.validate()?;
    sys.check_provider(p)?;
    sys.check_provider(q)?;
    if p == q {
        return Err(CoreError::invalid("the two providers must differ"));
    }
    // hold one χ context for the whole sweep
    let chi_ctx = match kind {
        FluidValueKind::AumannDreze => None,
        FluidValueKind::Chi { weights } => {
            Some(FluidChiContext::new(sys, weights.clone(), *cfg)?)
        }
    };
    let pay = |prov: usize, x: f64| -> Result<f64> {
        match &chi_ctx {
            None => Ok(fluid_ad_single(sys, prov, x, cfg)?.1),
            Some(ctx) => ctx.peer_payoff(prov, x),
        }
    };
    let diff = |x: f64| -> Result<f64> { Ok(pay(p, x)? - pay(q, 1.0 - x)?) };

    const GRID: usize = 40;
    let mut xs = Vec::with_capacity(GRID + 1);
    let mut ds = Vec::with_capacity(GRID + 1);
    for k in 0..=GRID {
        let x = k as f64 / GRID as f64;
        xs.push(x);
        ds.push(diff(x)?);
    }
    let boundary = (pay(p, 1.0)?, pay(q, 1.0)?);

    // flat difference: symmetric costs
    if ds.iter().all(|d| d.abs() <= ROOT_SIGNIFICANCE) {
        return Ok(EquilibriumReport {
            roots: vec![EquilibriumRoot {
                x: 0.5,
                stable: false,
            }],
            outcome: SplitOutcome::Split { x: 0.5 },
            bistable: false,
            boundary_peer_payoffs: boundary,
        });
    }

    // bracket between consecutive *significant* grid values of opposite
    // sign (near-zero samples in between — e.g. a root landing exactly on
    // a grid point — must not break the bracket)
    let significant: Vec<usize> = (0..=GRID)
        .filter(|&k| ds[k].abs() > ROOT_SIGNIFICANCE)
        .collect();
    let mut roots = Vec::new();
    for w in significant.windows(2) {
        let (i, j) = (w[0], w[1]);
        let (d0, d1) = (ds[i], ds[j]);
        if d0.signum() == d1.signum() {
            continue;
        }
        let (mut a, mut b) = (xs[i], xs[j]);
        let mut da = d0;
        for _ in 0..60 {
            let mid = 0.5 * (a + b);
            let dm = diff(mid)?;
            if (da <= 0.0) == (dm <= 0.0) {
                a = mid;
                da = dm;
            } else {
                b = mid;
            }
        }
        roots.push(EquilibriumRoot {
            x: 0.5 * (a + b),
            stable: d0 > 0.0, // + → − : downward crossing
        });
    }

    let stable: Vec<&EquilibriumRoot> = roots.iter().filter(|r| r.stable).collect();
    let (outcome, bistable) = if roots.is_empty() {
        let provider = if ds.iter().sum::<f64>() > 0.0 { p } else { q };
        (SplitOutcome::Monopoly { provider }, false)
    } else if stable.len() == 1 {
        (SplitOutcome::Split { x: stable[0].x }, false)
    } else {
        // all-unstable or multiple stable: the boundaries decide
        let (bp, bq) = boundary;
        if (bp - bq).abs() <= ROOT_SIGNIFICANCE {
            // boundary tie: keep the root nearest the midpoint
            let mid = roots
                .iter()
                .min_by(|a, b| {
                    (a.x - 0.5)
                        .abs()
                        .partial_cmp(&(b.x - 0.5).abs())
                        .unwrap()
                })
                .unwrap();
            (SplitOutcome::Split { x: mid.x }, true)
        } else if bp > bq {
            (SplitOutcome::Monopoly { provider: p }, true)
        } else {
            (SplitOutcome::Monopoly { provider: q }, true)
        }
    };

    Ok(EquilibriumReport {
        roots,
        outcome,
        bistable,
        boundary_peer_payoffs: boundary,
    })
}
