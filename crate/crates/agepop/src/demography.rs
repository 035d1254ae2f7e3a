//! Demographic primitives: mortality, fertility, survival and growth.
//!
//! The survival probability is `π(a) = exp(−∫₀^a μ(s) ds)`. Mortality laws
//! with `∫₀^A μ = ∞` (the usual demographic hypothesis) force `π(A) = 0`, so
//! ratios `π(a)/π(a−t)` are always evaluated in log-space through the
//! cumulative hazard and never by dividing two survival values.
//!
//! The reproduction number `R = ∫₀^A β(a) π(a) da` decides the long-run fate
//! of the uncontrolled population; the real root of Lotka's equation
//! `∫₀^A β(a) e^{−λa} π(a) da = 1` is its growth exponent and has the same
//! sign as `R − 1`.

use crate::error::Error;
use crate::grid::AgeGrid;
use crate::Result;

/// Mortality rate `μ(a)` on `[0, A)`.
#[derive(Debug, Clone)]
pub struct MortalityRate {
    kind: MortalityKind,
    lifespan: f64,
}

#[derive(Debug, Clone)]
enum MortalityKind {
    /// `μ(a) = 1 / (c (A − a))`: hazard inversely proportional to the
    /// remaining lifespan, with divergent cumulative hazard at `a = A`.
    ReciprocalRemaining {
        c: f64,
    },
    Constant {
        rate: f64,
    },
    /// Piecewise-linear table of `(age, rate)` samples.
    Tabulated {
        ages: Vec<f64>,
        rates: Vec<f64>,
        cumulative: Vec<f64>,
    },
}

impl MortalityRate {
    /// The benchmark closed form `μ(a) = 1/(c(A−a))`.
    pub fn reciprocal_remaining(lifespan: f64, c: f64) -> Self {
        assert!(lifespan > 0.0 && c > 0.0);
        MortalityRate {
            kind: MortalityKind::ReciprocalRemaining { c },
            lifespan,
        }
    }

    pub fn constant(lifespan: f64, rate: f64) -> Self {
        assert!(lifespan > 0.0 && rate >= 0.0);
        MortalityRate {
            kind: MortalityKind::Constant { rate },
            lifespan,
        }
    }

    /// Tabulated rate; samples are linearly interpolated and must cover
    /// `[0, A]` with nonnegative values.
    pub fn tabulated(lifespan: f64, ages: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        if ages.len() != rates.len() || ages.len() < 2 {
            return Err(Error::Shape(
                "mortality table needs matching (age, rate) columns".into(),
            ));
        }
        if ages.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain(
                "mortality table ages must be strictly increasing".into(),
            ));
        }
        if rates.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::Domain("mortality rates must be nonnegative".into()));
        }
        if ages[0] > 0.0 || *ages.last().unwrap() < lifespan {
            return Err(Error::Domain("mortality table must cover [0, A]".into()));
        }
        // Cumulative trapezoid of the table, used for the hazard integral.
        let mut cumulative = vec![0.0; ages.len()];
        for i in 1..ages.len() {
            cumulative[i] =
                cumulative[i - 1] + 0.5 * (rates[i] + rates[i - 1]) * (ages[i] - ages[i - 1]);
        }
        Ok(MortalityRate {
            kind: MortalityKind::Tabulated {
                ages,
                rates,
                cumulative,
            },
            lifespan,
        })
    }

    pub fn lifespan(&self) -> f64 {
        self.lifespan
    }

    /// Pointwise rate. Unbounded kinds return `+∞` at `a = A`.
    pub fn rate(&self, a: f64) -> f64 {
        match &self.kind {
            MortalityKind::ReciprocalRemaining { c } => {
                let rem = self.lifespan - a;
                if rem <= 0.0 {
                    f64::INFINITY
                } else {
                    1.0 / (c * rem)
                }
            }
            MortalityKind::Constant { rate } => *rate,
            MortalityKind::Tabulated { ages, rates, .. } => interp_linear(ages, rates, a),
        }
    }

    /// Cumulative hazard `H(a) = ∫₀^a μ(s) ds`; `+∞` where the integral
    /// diverges.
    pub fn cumulative_hazard(&self, a: f64) -> f64 {
        let a = a.clamp(0.0, self.lifespan);
        match &self.kind {
            MortalityKind::ReciprocalRemaining { c } => {
                let rem = self.lifespan - a;
                if rem <= 0.0 {
                    f64::INFINITY
                } else {
                    (self.lifespan / rem).ln() / c
                }
            }
            MortalityKind::Constant { rate } => rate * a,
            MortalityKind::Tabulated {
                ages,
                rates,
                cumulative,
            } => {
                let j = match ages.binary_search_by(|x| x.partial_cmp(&a).unwrap()) {
                    Ok(j) => return cumulative[j],
                    Err(j) => j - 1,
                };
                let mu_a = interp_linear(ages, rates, a);
                cumulative[j] + 0.5 * (rates[j] + mu_a) * (a - ages[j])
            }
        }
    }

    /// Survival probability `π(a) = exp(−H(a))`.
    ///
    /// Errors when `a` lies outside `[0, A]`.
    pub fn survival(&self, a: f64) -> Result<f64> {
        if !(0.0..=self.lifespan * (1.0 + 1e-12)).contains(&a) {
            return Err(Error::Domain(format!(
                "age {a} outside [0, {}] for survival evaluation",
                self.lifespan
            )));
        }
        Ok((-self.cumulative_hazard(a)).exp())
    }

    /// `π(a)/π(a−t)` evaluated as `exp(−(H(a) − H(a−t)))`, so a vanishing
    /// denominator never appears. Requires `0 ≤ t ≤ a ≤ A`.
    pub fn survival_ratio(&self, a: f64, t: f64) -> Result<f64> {
        if t < 0.0 || t > a * (1.0 + 1e-12) || a > self.lifespan * (1.0 + 1e-12) {
            return Err(Error::Domain(format!(
                "survival ratio needs 0 <= t <= a <= A, got a={a}, t={t}"
            )));
        }
        if t == 0.0 {
            return Ok(1.0);
        }
        let delta = self.cumulative_hazard(a) - self.cumulative_hazard(a - t);
        Ok((-delta).exp())
    }
}

fn interp_linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    if x >= *xs.last().unwrap() {
        return *ys.last().unwrap();
    }
    let j = match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
        Ok(j) => return ys[j],
        Err(j) => j - 1,
    };
    let w = (x - xs[j]) / (xs[j + 1] - xs[j]);
    ys[j] * (1.0 - w) + ys[j + 1] * w
}

/// Fertility rate `β(a) ≥ 0`, optionally clamped to zero below a support
/// floor `a_b` (no reproduction before that age) and rescaled by a
/// multiplicative factor.
#[derive(Debug, Clone)]
pub struct FertilityRate {
    kind: FertilityKind,
    lifespan: f64,
    support_floor: f64,
    scale: f64,
}

#[derive(Debug, Clone)]
enum FertilityKind {
    /// `β(a) = amplitude · a²(A−a)² · exp(−3(a − A/2)²)`: a fertile window
    /// centred at mid-life, vanishing at both ends of the age range.
    Hump {
        amplitude: f64,
    },
    Constant {
        value: f64,
    },
    Tabulated {
        ages: Vec<f64>,
        values: Vec<f64>,
    },
}

/// Amplitude of the benchmark hump fertility, `60⁵`.
pub const HUMP_AMPLITUDE: f64 = 60.0 * 60.0 * 60.0 * 60.0 * 60.0;

impl FertilityRate {
    /// The benchmark mid-life fertility window with its literal amplitude
    /// `60⁵ ≈ 7.8·10⁸`. At that amplitude the reproduction number is huge;
    /// see [`FertilityRate::rescaled_to_reproduction`] for normalized runs.
    pub fn hump(lifespan: f64) -> Self {
        Self::hump_with_amplitude(lifespan, HUMP_AMPLITUDE)
    }

    pub fn hump_with_amplitude(lifespan: f64, amplitude: f64) -> Self {
        assert!(lifespan > 0.0 && amplitude >= 0.0);
        FertilityRate {
            kind: FertilityKind::Hump { amplitude },
            lifespan,
            support_floor: 0.0,
            scale: 1.0,
        }
    }

    pub fn constant(lifespan: f64, value: f64) -> Self {
        assert!(lifespan > 0.0 && value >= 0.0);
        FertilityRate {
            kind: FertilityKind::Constant { value },
            lifespan,
            support_floor: 0.0,
            scale: 1.0,
        }
    }

    pub fn tabulated(lifespan: f64, ages: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if ages.len() != values.len() || ages.len() < 2 {
            return Err(Error::Shape(
                "fertility table needs matching (age, value) columns".into(),
            ));
        }
        if ages.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain(
                "fertility table ages must be strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Domain("fertility values must be nonnegative".into()));
        }
        Ok(FertilityRate {
            kind: FertilityKind::Tabulated { ages, values },
            lifespan,
            support_floor: 0.0,
            scale: 1.0,
        })
    }

    /// Restrict reproduction to ages `a ≥ a_b`. Band-distributed null
    /// controls acting on ages `[0, a₀]` require `a₀ ≤ a_b`.
    ///
    /// The hump kind re-anchors its window at `a_b`, so the rate stays
    /// continuously differentiable across the floor; constant and tabulated
    /// kinds are hard-clamped (their rate jumps at `a_b`).
    pub fn with_support_floor(mut self, a_b: f64) -> Self {
        assert!((0.0..self.lifespan).contains(&a_b));
        self.support_floor = a_b;
        self
    }

    pub fn support_floor(&self) -> f64 {
        self.support_floor
    }

    pub fn lifespan(&self) -> f64 {
        self.lifespan
    }

    pub fn rate(&self, a: f64) -> f64 {
        if a < self.support_floor || a < 0.0 || a > self.lifespan {
            return 0.0;
        }
        let raw = match &self.kind {
            FertilityKind::Hump { amplitude } => {
                let lo = self.support_floor;
                let mid = 0.5 * (lo + self.lifespan);
                let poly = (a - lo) * (a - lo) * (self.lifespan - a) * (self.lifespan - a);
                amplitude * poly * (-3.0 * (a - mid) * (a - mid)).exp()
            }
            FertilityKind::Constant { value } => *value,
            FertilityKind::Tabulated { ages, values } => interp_linear(ages, values, a),
        };
        self.scale * raw
    }

    /// Supremum of the rate, estimated on a dense sample (exact for the
    /// constant kind).
    pub fn sup_norm(&self) -> f64 {
        if let FertilityKind::Constant { value } = self.kind {
            return self.scale * value;
        }
        let samples = 8192;
        (0..=samples)
            .map(|i| self.rate(self.lifespan * i as f64 / samples as f64))
            .fold(0.0, f64::max)
    }

    /// Rescale multiplicatively so the reproduction number against `mortality`
    /// equals `target` (linearity of `R` in `β` makes this exact up to the
    /// shared quadrature).
    pub fn rescaled_to_reproduction(
        mut self,
        mortality: &MortalityRate,
        target: f64,
        quadrature: &AgeGrid,
    ) -> Result<Self> {
        let current = reproduction_number(&self, mortality, quadrature)?;
        if current <= 0.0 {
            return Err(Error::Domain(
                "cannot rescale a fertility with R = 0".into(),
            ));
        }
        self.scale *= target / current;
        Ok(self)
    }
}

/// `R = ∫₀^A β(a) π(a) da` by composite trapezoid on `quadrature`.
pub fn reproduction_number(
    fertility: &FertilityRate,
    mortality: &MortalityRate,
    quadrature: &AgeGrid,
) -> Result<f64> {
    check_lifespans(fertility, mortality, quadrature)?;
    Ok(quadrature.integrate(|a| fertility.rate(a) * (-mortality.cumulative_hazard(a)).exp()))
}

/// Discounted reproduction number `β̃(λ) = ∫₀^A β(a) e^{−λa} π(a) da`,
/// strictly decreasing in `λ`.
pub fn discounted_reproduction(
    fertility: &FertilityRate,
    mortality: &MortalityRate,
    lambda: f64,
    quadrature: &AgeGrid,
) -> f64 {
    quadrature
        .integrate(|a| fertility.rate(a) * (-lambda * a - mortality.cumulative_hazard(a)).exp())
}

/// Real root of `β̃(λ) = 1` (Lotka's equation) by bisection on a bracket
/// grown geometrically from `[−1, 1]`. The root exists whenever `R > 0` and
/// carries the sign of `R − 1`.
pub fn lotka_root(
    fertility: &FertilityRate,
    mortality: &MortalityRate,
    quadrature: &AgeGrid,
) -> Result<f64> {
    let r = reproduction_number(fertility, mortality, quadrature)?;
    if r <= 0.0 {
        return Err(Error::Domain(
            "Lotka root undefined: reproduction number is zero".into(),
        ));
    }
    let g = |lambda: f64| discounted_reproduction(fertility, mortality, lambda, quadrature) - 1.0;
    // g(0) = R − 1; g decreases in λ, so the root sits right of 0 iff R > 1.
    let mut width = 1.0;
    let (mut lo, mut hi);
    if r >= 1.0 {
        lo = 0.0;
        hi = width;
        let mut grow = 0;
        while g(hi) > 0.0 {
            width *= 2.0;
            hi = width;
            grow += 1;
            if grow > 60 {
                return Err(Error::Convergence(
                    "Lotka bracket expansion exceeded cap".into(),
                ));
            }
        }
    } else {
        hi = 0.0;
        lo = -width;
        let mut grow = 0;
        while g(lo) < 0.0 {
            width *= 2.0;
            lo = -width;
            grow += 1;
            if grow > 60 {
                return Err(Error::Convergence(
                    "Lotka bracket expansion exceeded cap".into(),
                ));
            }
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 * (1.0 + mid.abs()) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn check_lifespans(
    fertility: &FertilityRate,
    mortality: &MortalityRate,
    quadrature: &AgeGrid,
) -> Result<()> {
    let a = mortality.lifespan();
    if (fertility.lifespan() - a).abs() > 1e-12 * a || (quadrature.lifespan() - a).abs() > 1e-12 * a
    {
        return Err(Error::Shape(
            "fertility, mortality and grid must share the lifespan".into(),
        ));
    }
    Ok(())
}

/// Bundle of the demographic data of one scenario.
#[derive(Debug, Clone)]
pub struct DemographicModel {
    pub mortality: MortalityRate,
    pub fertility: FertilityRate,
}

impl DemographicModel {
    pub fn new(mortality: MortalityRate, fertility: FertilityRate) -> Result<Self> {
        if (mortality.lifespan() - fertility.lifespan()).abs() > 1e-12 * mortality.lifespan() {
            return Err(Error::Shape(
                "mortality and fertility lifespans differ".into(),
            ));
        }
        Ok(DemographicModel {
            mortality,
            fertility,
        })
    }

    /// Benchmark data: `μ(a) = 1/(50(A−a))` and the mid-life fertility hump
    /// rescaled so that `R = target_r`.
    pub fn benchmark(lifespan: f64, target_r: f64) -> Result<Self> {
        let mortality = MortalityRate::reciprocal_remaining(lifespan, 50.0);
        let quad = AgeGrid::new(lifespan, 4096);
        let fertility =
            FertilityRate::hump(lifespan).rescaled_to_reproduction(&mortality, target_r, &quad)?;
        DemographicModel::new(mortality, fertility)
    }

    pub fn lifespan(&self) -> f64 {
        self.mortality.lifespan()
    }

    pub fn survival(&self, a: f64) -> Result<f64> {
        self.mortality.survival(a)
    }

    pub fn survival_ratio(&self, a: f64, t: f64) -> Result<f64> {
        self.mortality.survival_ratio(a, t)
    }

    pub fn beta(&self, a: f64) -> f64 {
        self.fertility.rate(a)
    }

    pub fn reproduction_number(&self, quadrature: &AgeGrid) -> Result<f64> {
        reproduction_number(&self.fertility, &self.mortality, quadrature)
    }

    pub fn lotka_root(&self, quadrature: &AgeGrid) -> Result<f64> {
        lotka_root(&self.fertility, &self.mortality, quadrature)
    }
}
