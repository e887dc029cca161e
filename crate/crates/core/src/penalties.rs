//! Complexity penalties `C_n(k; alpha)`: the VC penalty and the four
//! data-dependent penalties (maximal discrepancy, simulated maximal
//! discrepancy, Rademacher, bootstrap).

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::optimizer::{OptimizerConfig, ScoreProblem};
use crate::sieve::{vc_dimension, PolynomialClass};
use crate::utility::{Dataset, Preference};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PenaltyKind {
    Vc,
    Md,
    Smd,
    Rc,
    Bc,
}

impl PenaltyKind {
    pub const ALL: [PenaltyKind; 5] = [PenaltyKind::Vc, PenaltyKind::Md, PenaltyKind::Smd, PenaltyKind::Rc, PenaltyKind::Bc];

    pub fn name(self) -> &'static str {
        match self {
            PenaltyKind::Vc => "vc",
            PenaltyKind::Md => "md",
            PenaltyKind::Smd => "smd",
            PenaltyKind::Rc => "rc",
            PenaltyKind::Bc => "bc",
        }
    }

    /// Whether the penalty averages over `m` random draws.
    pub fn is_simulated(self) -> bool {
        matches!(self, PenaltyKind::Smd | PenaltyKind::Rc | PenaltyKind::Bc)
    }

    pub fn is_data_dependent(self) -> bool {
        self != PenaltyKind::Vc
    }
}

impl fmt::Display for PenaltyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PenaltyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PenaltyKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| Error::invalid(format!("unknown penalty '{s}' (expected vc, md, smd, rc or bc)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltySpec {
    pub kind: PenaltyKind,
    pub alpha: f64,
    pub m: usize,
    pub technical_term: bool,
}

impl PenaltySpec {
    pub fn new(kind: PenaltyKind, alpha: f64, m: usize, technical_term: bool) -> Result<Self> {
        let spec = PenaltySpec { kind, alpha, m, technical_term };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::invalid(format!("alpha must be nonnegative, got {}", self.alpha)));
        }
        if self.kind.is_simulated() && self.m == 0 {
            return Err(Error::invalid(format!("{} penalty needs m >= 1", self.kind)));
        }
        Ok(())
    }
}

/// A penalty split into its data-dependent (or VC) part and the technical
/// term `coefficient * chi`, so a different `alpha` can be applied without
/// recomputing the inner maxima.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyValue {
    pub kind: PenaltyKind,
    pub value: f64,
    pub complexity: f64,
    pub technical_coefficient: f64,
    pub vc_dim: usize,
    pub n: usize,
    /// Inner maxima: one per draw for SMD/RC/BC, one for MD, none for VC.
    pub diagnostics: Vec<f64>,
}

impl PenaltyValue {
    /// The penalty under another `alpha` and technical-term setting.
    pub fn at(&self, alpha: f64, technical_term: bool) -> Result<f64> {
        if !technical_term {
            return Ok(self.complexity);
        }
        Ok(self.complexity + self.technical_coefficient * chi(self.vc_dim, self.n, alpha)?)
    }

    fn assemble(kind: PenaltyKind, complexity: f64, coefficient: f64, vc_dim: usize, n: usize, spec: &PenaltySpec, diagnostics: Vec<f64>) -> Result<Self> {
        let mut out = PenaltyValue { kind, value: complexity, complexity, technical_coefficient: coefficient, vc_dim, n, diagnostics };
        out.value = out.at(spec.alpha, spec.technical_term)?;
        if !out.value.is_finite() {
            return Err(Error::Numerical(format!("{kind} penalty is not finite")));
        }
        Ok(out)
    }
}

/// `chi_n(k; alpha) = sqrt((1 + alpha) ln V / (2n))`.
pub fn chi(vc_dim: usize, n: usize, alpha: f64) -> Result<f64> {
    chi_real(vc_dim as f64, n, alpha)
}

/// [`chi`] for a real-valued `V`.
pub fn chi_real(vc_dim: f64, n: usize, alpha: f64) -> Result<f64> {
    if !(vc_dim.is_finite() && vc_dim >= 2.0) {
        return Err(Error::invalid(format!("technical term needs V >= 2, got {vc_dim}")));
    }
    if n == 0 {
        return Err(Error::Empty);
    }
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::invalid(format!("alpha must be nonnegative, got {alpha}")));
    }
    Ok(((1.0 + alpha) * vc_dim.ln() / (2.0 * n as f64)).sqrt())
}

/// `log psi_c(k, n)`: `n ln 2` when `n <= V`, else `V (1 + ln n - ln V)`.
pub fn log_psi(vc_dim: usize, n: usize) -> f64 {
    if n <= vc_dim {
        n as f64 * std::f64::consts::LN_2
    } else {
        let v = vc_dim as f64;
        v * (1.0 + (n as f64).ln() - v.ln())
    }
}

/// The `l` with `n/(l+1)^2 <= m < n/l^2`, or `None` when `m >= n`.
pub fn gamma_level(m: usize, n: usize) -> Result<Option<usize>> {
    if m == 0 || n == 0 {
        return Err(Error::invalid("gamma needs m >= 1 and n >= 1"));
    }
    if m >= n {
        return Ok(None);
    }
    let (m, n) = (m as u128, n as u128);
    let limit = (n as f64).sqrt().ceil() as u128 + 1;
    for l in 1..=limit {
        if n <= m * (l + 1) * (l + 1) && m * l * l < n {
            return Ok(Some(l as usize));
        }
    }
    unreachable!("some level brackets every m < n")
}

/// `gamma_{m,n}(M)`: `40M` if `m >= n`, else `(16 l + 40) M`.
pub fn gamma(m: usize, n: usize, bound: f64) -> Result<f64> {
    Ok(match gamma_level(m, n)? {
        None => 40.0 * bound,
        Some(l) => (16.0 * l as f64 + 40.0) * bound,
    })
}

/// `gamma'_{m,n}(M)`: `56M` if `m >= n`, else `(32 l + 56) M`.
pub fn gamma_prime(m: usize, n: usize, bound: f64) -> Result<f64> {
    Ok(match gamma_level(m, n)? {
        None => 56.0 * bound,
        Some(l) => (32.0 * l as f64 + 56.0) * bound,
    })
}

fn check_bound(bound: f64) -> Result<()> {
    if bound.is_finite() && bound > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("utility bound must be positive, got {bound}")))
    }
}

/// `8M sqrt(2 log psi / n)`, plus `8M chi` with the technical term.
pub fn penalty_vc(class: &PolynomialClass, n: usize, spec: &PenaltySpec, bound: f64) -> Result<PenaltyValue> {
    spec.validate()?;
    check_bound(bound)?;
    if n == 0 {
        return Err(Error::Empty);
    }
    let v = vc_dimension(class);
    let complexity = 8.0 * bound * (2.0 * log_psi(v, n) / n as f64).sqrt();
    PenaltyValue::assemble(PenaltyKind::Vc, complexity, 8.0 * bound, v, n, spec, Vec::new())
}

pub fn sample_rademacher<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    (0..len).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
}

/// Multinomial `(n; 1/n, ..., 1/n)` counts from `n` uniform throws.
pub fn sample_multinomial_weights<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<u32> {
    let mut w = vec![0u32; n];
    for _ in 0..n {
        w[rng.random_range(0..n)] += 1;
    }
    w
}

/// Half-sample weights: `n/h1` on the first `h1 = ceil(n/2)` observations and
/// `-n/h2` on the remaining `h2 = floor(n/2)`.
pub fn md_weights(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::invalid("maximal discrepancy needs n >= 2"));
    }
    let h1 = n.div_ceil(2);
    let h2 = n / 2;
    Ok((0..n).map(|i| if i < h1 { n as f64 / h1 as f64 } else { -(n as f64) / h2 as f64 }).collect())
}

/// Pair weights `±2 sigma_i (n / n')` on `(2i-1, 2i)`, with `n' = 2 floor(n/2)`.
/// An odd last observation gets weight zero.
pub fn smd_weights(n: usize, sigma: &[f64]) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::invalid("simulated maximal discrepancy needs n >= 2"));
    }
    let pairs = n / 2;
    if sigma.len() != pairs {
        return Err(Error::DimensionMismatch { expected: pairs, got: sigma.len() });
    }
    let scale = 2.0 * n as f64 / (2 * pairs) as f64;
    let mut w = vec![0.0; n];
    for (i, &s) in sigma.iter().enumerate() {
        w[2 * i] = scale * s;
        w[2 * i + 1] = -scale * s;
    }
    Ok(w)
}

pub fn rc_weights(sigma: &[f64]) -> Vec<f64> {
    sigma.iter().map(|s| 2.0 * s).collect()
}

pub fn bc_weights(counts: &[u32]) -> Vec<f64> {
    counts.iter().map(|&c| c as f64 - 1.0).collect()
}

/// `(n / (n - 1))^n`.
pub fn bootstrap_prefactor(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::invalid("bootstrap penalty needs n >= 2"));
    }
    let n = n as f64;
    Ok((n * (n / (n - 1.0)).ln()).exp())
}

/// The data-dependent penalties on a prepared problem.
pub struct DataPenalty<'p, 'a> {
    pub problem: &'p ScoreProblem<'a>,
    pub bound: f64,
    pub cfg: &'p OptimizerConfig,
}

impl DataPenalty<'_, '_> {
    fn n(&self) -> usize {
        self.problem.len()
    }

    fn inner_max<R: Rng + ?Sized>(&self, weights: &[f64], rng: &mut R) -> Result<f64> {
        Ok(self.problem.maximize(weights, self.cfg, rng)?.value)
    }

    fn finish(&self, kind: PenaltyKind, complexity: f64, coefficient: f64, spec: &PenaltySpec, diagnostics: Vec<f64>) -> Result<PenaltyValue> {
        let v = vc_dimension(self.problem.class());
        PenaltyValue::assemble(kind, complexity, coefficient, v, self.n(), spec, diagnostics)
    }

    pub fn md<R: Rng + ?Sized>(&self, spec: &PenaltySpec, rng: &mut R) -> Result<PenaltyValue> {
        spec.validate()?;
        check_bound(self.bound)?;
        let d = self.inner_max(&md_weights(self.n())?, rng)?;
        self.finish(PenaltyKind::Md, d, 24.0 * self.bound, spec, vec![d])
    }

    /// SMD with the given Rademacher draws, one vector of `floor(n/2)` signs each.
    pub fn smd_with<R: Rng + ?Sized>(&self, spec: &PenaltySpec, sigmas: &[Vec<f64>], rng: &mut R) -> Result<PenaltyValue> {
        spec.validate()?;
        check_bound(self.bound)?;
        let n = self.n();
        let maxima = sigmas.iter().map(|s| self.inner_max(&smd_weights(n, s)?, rng)).collect::<Result<Vec<_>>>()?;
        let gamma = gamma(sigmas.len().max(1), n, self.bound)?;
        self.finish(PenaltyKind::Smd, mean(&maxima)?, gamma, spec, maxima)
    }

    pub fn smd<R: Rng + ?Sized>(&self, spec: &PenaltySpec, rng: &mut R) -> Result<PenaltyValue> {
        if self.n() < 2 {
            return Err(Error::invalid("simulated maximal discrepancy needs n >= 2"));
        }
        let sigmas: Vec<Vec<f64>> = (0..spec.m).map(|_| sample_rademacher(self.n() / 2, rng)).collect();
        self.smd_with(spec, &sigmas, rng)
    }

    pub fn rc_with<R: Rng + ?Sized>(&self, spec: &PenaltySpec, sigmas: &[Vec<f64>], rng: &mut R) -> Result<PenaltyValue> {
        spec.validate()?;
        check_bound(self.bound)?;
        let n = self.n();
        let maxima = sigmas
            .iter()
            .map(|s| {
                if s.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: s.len() });
                }
                self.inner_max(&rc_weights(s), rng)
            })
            .collect::<Result<Vec<_>>>()?;
        let gamma = gamma(sigmas.len().max(1), n, self.bound)?;
        self.finish(PenaltyKind::Rc, mean(&maxima)?, gamma, spec, maxima)
    }

    pub fn rc<R: Rng + ?Sized>(&self, spec: &PenaltySpec, rng: &mut R) -> Result<PenaltyValue> {
        let sigmas: Vec<Vec<f64>> = (0..spec.m).map(|_| sample_rademacher(self.n(), rng)).collect();
        self.rc_with(spec, &sigmas, rng)
    }

    pub fn bc_with<R: Rng + ?Sized>(&self, spec: &PenaltySpec, draws: &[Vec<u32>], rng: &mut R) -> Result<PenaltyValue> {
        spec.validate()?;
        check_bound(self.bound)?;
        let n = self.n();
        let prefactor = bootstrap_prefactor(n)?;
        let maxima = draws
            .iter()
            .map(|w| {
                if w.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: w.len() });
                }
                self.inner_max(&bc_weights(w), rng)
            })
            .collect::<Result<Vec<_>>>()?;
        let gamma = gamma_prime(draws.len().max(1), n, self.bound)?;
        self.finish(PenaltyKind::Bc, prefactor * mean(&maxima)?, gamma, spec, maxima)
    }

    pub fn bc<R: Rng + ?Sized>(&self, spec: &PenaltySpec, rng: &mut R) -> Result<PenaltyValue> {
        let draws: Vec<Vec<u32>> = (0..spec.m).map(|_| sample_multinomial_weights(self.n(), rng)).collect();
        self.bc_with(spec, &draws, rng)
    }

    pub fn compute<R: Rng + ?Sized>(&self, spec: &PenaltySpec, rng: &mut R) -> Result<PenaltyValue> {
        match spec.kind {
            PenaltyKind::Vc => penalty_vc(self.problem.class(), self.n(), spec, self.bound),
            PenaltyKind::Md => self.md(spec, rng),
            PenaltyKind::Smd => self.smd(spec, rng),
            PenaltyKind::Rc => self.rc(spec, rng),
            PenaltyKind::Bc => self.bc(spec, rng),
        }
    }
}

fn mean(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::invalid("penalty needs at least one draw"));
    }
    Ok(xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Any penalty for `class` on `data`. `bound` is the utility bound `M`.
pub fn penalty<R: Rng + ?Sized>(
    class: &PolynomialClass,
    data: &Dataset,
    pref: &Preference,
    spec: &PenaltySpec,
    bound: f64,
    cfg: &OptimizerConfig,
    rng: &mut R,
) -> Result<PenaltyValue> {
    if spec.kind == PenaltyKind::Vc {
        return penalty_vc(class, data.len(), spec, bound);
    }
    let problem = ScoreProblem::new(data, pref, class)?;
    DataPenalty { problem: &problem, bound, cfg }.compute(spec, rng)
}
