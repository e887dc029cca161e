//! Observations, preferences, and the utility kernel
//! `s(y, x, f) = b(x) [y + 1 - 2 c(x)] sign(f(x) - c(x))`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::sieve::PredictionRule;

/// A binary outcome or decision in `{-1, +1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(i8)]
pub enum Label {
    Negative = -1,
    Positive = 1,
}

impl Label {
    /// `sign(z) = 2 * 1[z >= 0] - 1`, so zero maps to `Positive`.
    #[inline]
    pub fn sign_of(z: f64) -> Label {
        if z >= 0.0 {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        match self {
            Label::Negative => -1.0,
            Label::Positive => 1.0,
        }
    }

    pub fn from_i64(v: i64) -> Option<Label> {
        match v {
            -1 => Some(Label::Negative),
            1 => Some(Label::Positive),
            _ => None,
        }
    }

    pub fn flip(self) -> Label {
        match self {
            Label::Negative => Label::Positive,
            Label::Positive => Label::Negative,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", *self as i8)
    }
}

/// Borrowed view of one observation of a [`Dataset`].
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub index: usize,
    pub y: Label,
    pub x: &'a [f64],
}

/// An ordered sample. Row order is significant: the maximal-discrepancy
/// penalties split by index.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    d: usize,
    labels: Vec<Label>,
    x: Vec<f64>,
}

impl Dataset {
    pub fn from_parts(d: usize, labels: Vec<Label>, x: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("covariate dimension must be at least 1"));
        }
        if labels.is_empty() {
            return Err(Error::Empty);
        }
        if x.len() != labels.len() * d {
            return Err(Error::DimensionMismatch { expected: labels.len() * d, got: x.len() });
        }
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: pos / d, what: "covariate" });
        }
        Ok(Dataset { d, labels, x })
    }

    pub fn from_rows<I>(d: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Label, Vec<f64>)>,
    {
        let mut labels = Vec::new();
        let mut x = Vec::new();
        for (y, row) in rows {
            if row.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: row.len() });
            }
            labels.push(y);
            x.extend_from_slice(&row);
        }
        Dataset::from_parts(d, labels, x)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn covariates(&self) -> &[f64] {
        &self.x
    }

    pub fn get(&self, i: usize) -> Observation<'_> {
        Observation { index: i, y: self.labels[i], x: self.row(i) }
    }

    pub fn iter(&self) -> impl Iterator<Item = Observation<'_>> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let mut labels = Vec::with_capacity(indices.len());
        let mut x = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            labels.push(self.labels[i]);
            x.extend_from_slice(self.row(i));
        }
        Dataset::from_parts(self.d, labels, x)
    }
}

type Field = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A decision maker's preference: weight `b(x) > 0`, cutoff `c(x) in (0, 1)`
/// and a bound `M` on the normalized utilities `0.25 b(x) |y + 1 - 2c(x)|`.
#[derive(Clone)]
pub struct Preference {
    name: String,
    weight: Field,
    cutoff: Field,
    bound: f64,
}

impl fmt::Debug for Preference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Preference").field("name", &self.name).field("bound", &self.bound).finish()
    }
}

impl Preference {
    pub fn new<B, C>(name: impl Into<String>, weight: B, cutoff: C, bound: f64) -> Result<Self>
    where
        B: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        C: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if !(bound.is_finite() && bound > 0.0) {
            return Err(Error::invalid(format!("utility bound must be positive, got {bound}")));
        }
        Ok(Preference { name: name.into(), weight: Arc::new(weight), cutoff: Arc::new(cutoff), bound })
    }

    /// Constant weight and cutoff, with the tightest bound.
    pub fn constant(b: f64, c: f64) -> Result<Self> {
        let bound = utility_bound_from_ranges(b, c, c)?;
        Preference::new(format!("b={b},c={c}"), move |_| b, move |_| c, bound)
    }

    /// One of the four preferences of the simulation designs.
    pub fn catalog(entry: CatalogPreference) -> Self {
        let bound = utility_bound(entry).expect("catalog ranges are valid");
        let name = format!("preference{}", entry.id());
        match entry {
            CatalogPreference::Flat => Preference::new(name, |_| 20.0, |_| 0.5, bound),
            CatalogPreference::Sloped => {
                Preference::new(name, |_| 20.0, |x| 0.5 + 0.025 * x[0], bound)
            }
            CatalogPreference::HighCutoff => Preference::new(name, |_| 20.0, |_| 0.75, bound),
            CatalogPreference::Banded => Preference::new(
                name,
                |x| if (x[0] + x[1]).abs() < 1.5 { 60.0 } else { 20.0 },
                |_| 0.75,
                bound,
            ),
        }
        .expect("catalog bound is positive")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn weight(&self, x: &[f64]) -> f64 {
        (self.weight)(x)
    }

    #[inline]
    pub fn cutoff(&self, x: &[f64]) -> f64 {
        (self.cutoff)(x)
    }

    /// The declared `M`.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Checks `b(x) > 0`, `0 < c(x) < 1` and the declared bound at one point.
    pub fn check_at(&self, index: usize, x: &[f64]) -> Result<()> {
        let b = self.weight(x);
        let c = self.cutoff(x);
        if !b.is_finite() {
            return Err(Error::NonFinite { index, what: "b(x)" });
        }
        if !c.is_finite() {
            return Err(Error::NonFinite { index, what: "c(x)" });
        }
        if b <= 0.0 {
            return Err(Error::PreferenceDomain { index, message: format!("b(x) = {b} is not positive") });
        }
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::PreferenceDomain { index, message: format!("c(x) = {c} is outside (0, 1)") });
        }
        let worst = 0.25 * b * (2.0 - 2.0 * c).max(2.0 * c);
        if worst > self.bound * (1.0 + 1e-12) {
            return Err(Error::PreferenceDomain {
                index,
                message: format!("utility {worst} exceeds the declared bound {}", self.bound),
            });
        }
        Ok(())
    }

    pub fn check_dataset(&self, data: &Dataset) -> Result<()> {
        data.iter().try_for_each(|o| self.check_at(o.index, o.x))
    }
}

/// The four preferences used by the simulation designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CatalogPreference {
    /// `b = 20`, `c = 0.5`.
    Flat,
    /// `b = 20`, `c = 0.5 + 0.025 x`.
    Sloped,
    /// `b = 20`, `c = 0.75`.
    HighCutoff,
    /// `b = 20 + 40 * 1[|x1 + x2| < 1.5]`, `c = 0.75`.
    Banded,
}

impl CatalogPreference {
    pub fn from_id(id: u32) -> Option<Self> {
        match id {
            1 => Some(CatalogPreference::Flat),
            2 => Some(CatalogPreference::Sloped),
            3 => Some(CatalogPreference::HighCutoff),
            4 => Some(CatalogPreference::Banded),
            _ => None,
        }
    }

    pub fn id(self) -> u32 {
        match self {
            CatalogPreference::Flat => 1,
            CatalogPreference::Sloped => 2,
            CatalogPreference::HighCutoff => 3,
            CatalogPreference::Banded => 4,
        }
    }

    /// Range of `b` over the support of the associated design.
    pub fn weight_range(self) -> (f64, f64) {
        match self {
            CatalogPreference::Banded => (20.0, 60.0),
            _ => (20.0, 20.0),
        }
    }

    /// Range of `c`; the sloped cutoff is evaluated over `x in [-2.5, 2.5]`.
    pub fn cutoff_range(self) -> (f64, f64) {
        match self {
            CatalogPreference::Flat => (0.5, 0.5),
            CatalogPreference::Sloped => (0.5 - 0.025 * 2.5, 0.5 + 0.025 * 2.5),
            CatalogPreference::HighCutoff | CatalogPreference::Banded => (0.75, 0.75),
        }
    }
}

/// `M = sup_x max_y 0.25 b(x) |y + 1 - 2c(x)|` for a catalog preference.
pub fn utility_bound(entry: CatalogPreference) -> Result<f64> {
    let (_, b_max) = entry.weight_range();
    let (c_min, c_max) = entry.cutoff_range();
    utility_bound_from_ranges(b_max, c_min, c_max)
}

/// Bound for any preference with `b <= b_max` and `c in [c_min, c_max]`.
/// The supremum is attained at `y = 1, c = c_min` or `y = -1, c = c_max`.
pub fn utility_bound_from_ranges(b_max: f64, c_min: f64, c_max: f64) -> Result<f64> {
    if !(b_max.is_finite() && b_max > 0.0) {
        return Err(Error::invalid(format!("weight bound {b_max} must be positive and finite")));
    }
    if !(c_min > 0.0 && c_max < 1.0 && c_min <= c_max) {
        return Err(Error::invalid(format!("cutoff range [{c_min}, {c_max}] is not inside (0, 1)")));
    }
    Ok(0.25 * b_max * (2.0 - 2.0 * c_min).max(2.0 * c_max))
}

/// A utility in the units of `s`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct UtilityValue(pub f64);

impl UtilityValue {
    pub fn get(self) -> f64 {
        self.0
    }
}

/// `s(y, x, f)` for a precomputed decision `sign(f(x) - c(x))`.
pub fn utility_s(obs: Observation<'_>, decision: Label, pref: &Preference) -> Result<UtilityValue> {
    let b = pref.weight(obs.x);
    if !b.is_finite() {
        return Err(Error::NonFinite { index: obs.index, what: "b(x)" });
    }
    let c = pref.cutoff(obs.x);
    if !c.is_finite() {
        return Err(Error::NonFinite { index: obs.index, what: "c(x)" });
    }
    Ok(UtilityValue(b * (obs.y.value() + 1.0 - 2.0 * c) * decision.value()))
}

/// `S_n(f)`: the mean of `s` over the dataset, accumulated in index order.
pub fn empirical_utility(rule: &PredictionRule, data: &Dataset, pref: &Preference) -> Result<UtilityValue> {
    if rule.class().dim() != data.dim() {
        return Err(Error::DimensionMismatch { expected: rule.class().dim(), got: data.dim() });
    }
    let mut total = 0.0;
    for obs in data.iter() {
        let c = pref.cutoff(obs.x);
        let decision = Label::sign_of(rule.evaluate_unchecked(obs.x) - c);
        total += utility_s(obs, decision, pref)?.0;
    }
    Ok(UtilityValue(total / data.len() as f64))
}

/// Per-observation constants: the signed gain `a_i = b_i (y_i + 1 - 2 c_i)`
/// (so `s_i = a_i * decision_i`) and the cutoff `c_i`.
#[derive(Debug, Clone)]
pub struct UtilityTable {
    pub gains: Vec<f64>,
    pub cutoffs: Vec<f64>,
}

impl UtilityTable {
    pub fn new(data: &Dataset, pref: &Preference) -> Result<Self> {
        let n = data.len();
        let mut gains = Vec::with_capacity(n);
        let mut cutoffs = Vec::with_capacity(n);
        for obs in data.iter() {
            let b = pref.weight(obs.x);
            let c = pref.cutoff(obs.x);
            if !b.is_finite() {
                return Err(Error::NonFinite { index: obs.index, what: "b(x)" });
            }
            if !c.is_finite() {
                return Err(Error::NonFinite { index: obs.index, what: "c(x)" });
            }
            gains.push(b * (obs.y.value() + 1.0 - 2.0 * c));
            cutoffs.push(c);
        }
        Ok(UtilityTable { gains, cutoffs })
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    /// Mean utility of a decision vector.
    pub fn mean_utility(&self, decisions: impl IntoIterator<Item = Label>) -> f64 {
        let total: f64 = self.gains.iter().zip(decisions).map(|(a, d)| a * d.value()).sum();
        total / self.len() as f64
    }
}
