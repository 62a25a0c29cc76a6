//! Finite quadratic ODE systems `dX/dt = -D X + G(X, X)`.
//!
//! A [`CircuitSpec`] is a mode list, a list of [`InteractionTerm`]s (each one
//! contributes `coeff * X_in1 * X_in2` to `dX_out/dt`) and per-mode linear
//! dissipation rates. Terms are stored exactly as given; no symmetrization
//! takes place, so a spec built from a coefficient table can be traced back
//! to that table row by row.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::math;

/// Identifier of one scalar mode `X_{i,n}`.
///
/// `component` is the index `i` (1-based) and `scale` the dyadic index `n`;
/// scale-free circuits put every mode at scale 0.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeId {
    pub label: String,
    pub component: usize,
    pub scale: i32,
}

impl ModeId {
    pub fn new(label: impl Into<String>, component: usize, scale: i32) -> Self {
        Self { label: label.into(), component, scale }
    }

    /// Mode of a scale-free circuit (scale 0).
    pub fn simple(label: impl Into<String>, component: usize) -> Self {
        Self::new(label, component, 0)
    }
}

/// One summand `coeff * X_in1 * X_in2` of `dX_out/dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionTerm {
    pub out: ModeId,
    pub in1: ModeId,
    pub in2: ModeId,
    pub coeff: f64,
}

impl InteractionTerm {
    pub fn new(out: ModeId, in1: ModeId, in2: ModeId, coeff: f64) -> Self {
        Self { out, in1, in2, coeff }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct CompiledTerm {
    pub out: usize,
    pub in1: usize,
    pub in2: usize,
    pub coeff: f64,
}

/// A validated quadratic circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitSpec {
    components: usize,
    modes: Vec<ModeId>,
    interactions: Vec<InteractionTerm>,
    dissipation: Vec<f64>,
    compiled: Vec<CompiledTerm>,
    index: BTreeMap<(usize, i32), usize>,
    cancellation_verified: bool,
}

impl CircuitSpec {
    /// Builds a spec, checking that every referenced mode is declared, that
    /// `(component, scale)` pairs and labels are unique, coefficients are finite
    /// and nonzero, and rates are finite and nonnegative.
    ///
    /// `dissipation` lists `(mode, rate)` pairs; undeclared rates are zero.
    pub fn new(
        components: usize,
        modes: Vec<ModeId>,
        interactions: Vec<InteractionTerm>,
        dissipation: &[(ModeId, f64)],
    ) -> Result<Self> {
        let mut index = BTreeMap::new();
        let mut labels = BTreeMap::new();
        for (k, m) in modes.iter().enumerate() {
            if m.component == 0 || m.component > components {
                return Err(Error::InvalidCircuit(format!(
                    "mode `{}` has component {} outside 1..={}",
                    m.label, m.component, components
                )));
            }
            if index.insert((m.component, m.scale), k).is_some() {
                return Err(Error::InvalidCircuit(format!(
                    "duplicate mode (i = {}, n = {})",
                    m.component, m.scale
                )));
            }
            if labels.insert(m.label.clone(), k).is_some() {
                return Err(Error::InvalidCircuit(format!("duplicate label `{}`", m.label)));
            }
        }
        let lookup = |m: &ModeId| -> Result<usize> {
            match index.get(&(m.component, m.scale)) {
                Some(&k) if modes[k].label == m.label => Ok(k),
                _ => Err(Error::InvalidCircuit(format!("undeclared mode `{}`", m.label))),
            }
        };
        let mut compiled = Vec::with_capacity(interactions.len());
        for term in &interactions {
            if !term.coeff.is_finite() || term.coeff == 0.0 {
                return Err(Error::InvalidCircuit(format!(
                    "term into `{}` has coefficient {}; must be finite and nonzero",
                    term.out.label, term.coeff
                )));
            }
            compiled.push(CompiledTerm {
                out: lookup(&term.out)?,
                in1: lookup(&term.in1)?,
                in2: lookup(&term.in2)?,
                coeff: term.coeff,
            });
        }
        let mut rates = vec![0.0; modes.len()];
        for (m, nu) in dissipation {
            if !nu.is_finite() || *nu < 0.0 {
                return Err(Error::InvalidCircuit(format!(
                    "dissipation rate {} of `{}` must be finite and nonnegative",
                    nu, m.label
                )));
            }
            rates[lookup(m)?] = *nu;
        }
        Ok(Self {
            components,
            modes,
            interactions,
            dissipation: rates,
            compiled,
            index,
            cancellation_verified: false,
        })
    }

    /// Runs [`check_cancellation_structural`] and, on success, returns the
    /// spec with its verified flag set.
    pub fn verified(mut self) -> core::result::Result<Self, CancellationReport> {
        let report = check_cancellation_structural(&self);
        if report.pass {
            self.cancellation_verified = true;
            Ok(self)
        } else {
            Err(report)
        }
    }

    pub fn is_cancellation_verified(&self) -> bool {
        self.cancellation_verified
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn modes(&self) -> &[ModeId] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn interactions(&self) -> &[InteractionTerm] {
        &self.interactions
    }

    /// Dissipation rates aligned with [`modes`](Self::modes).
    pub fn dissipation(&self) -> &[f64] {
        &self.dissipation
    }

    pub fn is_inviscid(&self) -> bool {
        self.dissipation.iter().all(|&nu| nu == 0.0)
    }

    /// Position of mode `(component, scale)` in the state vector.
    pub fn index_of(&self, component: usize, scale: i32) -> Option<usize> {
        self.index.get(&(component, scale)).copied()
    }

    pub fn index_of_label(&self, label: &str) -> Option<usize> {
        self.modes.iter().position(|m| m.label == label)
    }

    /// Distinct scales present, ascending.
    pub fn scales(&self) -> Vec<i32> {
        let mut s: Vec<i32> = self.modes.iter().map(|m| m.scale).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.compiled.iter().fold(0.0, |m, t| m.max(t.coeff.abs()))
    }

    /// Same modes and terms with every rate set to zero.
    pub fn inviscid(&self) -> Self {
        let mut s = self.clone();
        s.dissipation.iter_mut().for_each(|nu| *nu = 0.0);
        s
    }

    pub(crate) fn compiled(&self) -> &[CompiledTerm] {
        &self.compiled
    }

    /// `out = G(X, X)` (no dissipation). `out` is overwritten.
    pub fn quadratic_into(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for t in &self.compiled {
            out[t.out] += t.coeff * x[t.in1] * x[t.in2];
        }
    }

    /// `out = -D X + G(X, X)`. `out` is overwritten.
    pub fn rhs_into(&self, x: &[f64], out: &mut [f64]) {
        self.quadratic_into(x, out);
        for ((o, &nu), &xi) in out.iter_mut().zip(&self.dissipation).zip(x) {
            if nu != 0.0 {
                *o -= nu * xi;
            }
        }
    }

    /// Instantaneous dissipation rate `sum_j nu_j X_j^2`.
    pub fn dissipation_rate(&self, x: &[f64]) -> f64 {
        self.dissipation.iter().zip(x).map(|(nu, xi)| nu * xi * xi).sum()
    }

    /// Concatenates two specs over disjoint mode sets.
    pub fn union(&self, other: &CircuitSpec) -> Result<Self> {
        let modes: Vec<ModeId> = self.modes.iter().chain(&other.modes).cloned().collect();
        let terms: Vec<InteractionTerm> =
            self.interactions.iter().chain(&other.interactions).cloned().collect();
        let rates: Vec<(ModeId, f64)> = self
            .modes
            .iter()
            .zip(&self.dissipation)
            .chain(other.modes.iter().zip(&other.dissipation))
            .map(|(m, &nu)| (m.clone(), nu))
            .collect();
        Self::new(self.components.max(other.components), modes, terms, &rates)
    }
}

/// Amplitudes `X` at time `t`, aligned with a spec's mode list.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub t: f64,
    pub x: Vec<f64>,
}

impl StateVector {
    pub fn new(t: f64, x: Vec<f64>) -> Self {
        Self { t, x }
    }

    pub fn zeros(t: f64, len: usize) -> Self {
        Self { t, x: vec![0.0; len] }
    }

    pub fn check_aligned(&self, spec: &CircuitSpec) -> Result<()> {
        if self.x.len() != spec.len() {
            return Err(Error::Misaligned { expected: spec.len(), got: self.x.len() });
        }
        self.check_finite()
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.x.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(Error::NonFiniteAmplitude { index, value: self.x[index] }),
            None => Ok(()),
        }
    }
}

/// Evaluates `dX/dt = -D X + G(X, X)` at `state`.
pub fn assemble_rhs(spec: &CircuitSpec, state: &StateVector) -> Result<StateVector> {
    state.check_aligned(spec)?;
    let mut out = vec![0.0; spec.len()];
    spec.rhs_into(&state.x, &mut out);
    Ok(StateVector::new(state.t, out))
}

/// `½ Σ X_j²`.
pub fn total_energy(state: &StateVector) -> f64 {
    energy_of(&state.x)
}

pub(crate) fn energy_of(x: &[f64]) -> f64 {
    0.5 * x.iter().map(|v| v * v).sum::<f64>()
}

/// Relative tolerance of the structural cancellation test.
pub const CANCELLATION_RTOL: f64 = 1e-12;

/// A mode multiset whose coefficient sum does not vanish.
#[derive(Debug, Clone, PartialEq)]
pub struct ViolatingTriple {
    pub modes: [ModeId; 3],
    /// Sum of the coefficients over every stored ordering.
    pub sum: f64,
    /// `|sum|` divided by the largest `|coeff|` contributing to it.
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CancellationReport {
    pub pass: bool,
    /// Largest relative residual over all multisets.
    pub max_residual: f64,
    pub violating_triples: Vec<ViolatingTriple>,
}

/// Checks `G(X,X)·X ≡ 0` coefficient by coefficient.
///
/// `G(X,X)·X = Σ_terms coeff·X_out·X_in1·X_in2` is a cubic form; it vanishes
/// identically iff, for every multiset `{out, in1, in2}`, the stored
/// coefficients that produce that monomial sum to zero.
pub fn check_cancellation_structural(spec: &CircuitSpec) -> CancellationReport {
    let mut groups: BTreeMap<[usize; 3], (f64, f64)> = BTreeMap::new();
    for t in spec.compiled() {
        let mut key = [t.out, t.in1, t.in2];
        key.sort_unstable();
        let entry = groups.entry(key).or_insert((0.0, 0.0));
        entry.0 += t.coeff;
        entry.1 = entry.1.max(t.coeff.abs());
    }
    let mut max_residual: f64 = 0.0;
    let mut violating = Vec::new();
    for (key, (sum, scale)) in groups {
        let relative = sum.abs() / scale;
        max_residual = max_residual.max(relative);
        if relative > CANCELLATION_RTOL {
            let m = |k: usize| spec.modes()[key[k]].clone();
            violating.push(ViolatingTriple { modes: [m(0), m(1), m(2)], sum, relative });
        }
    }
    CancellationReport { pass: violating.is_empty(), max_residual, violating_triples: violating }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericCancellation {
    /// `max |G(X,X)·X|` over the sampled unit states.
    pub max_residual: f64,
    /// The same maximum divided by `max|coeff|` (unit states, so `‖X‖ = 1`).
    pub max_relative: f64,
}

/// Evaluates `|G(X,X)·X|` on `n_samples` pseudo-random unit-norm states.
///
/// States are drawn from a ChaCha8 stream seeded with `seed`, so the result
/// is reproducible.
pub fn check_cancellation_numeric(
    spec: &CircuitSpec,
    n_samples: usize,
    seed: u64,
) -> Result<NumericCancellation> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter {
            name: "n_samples",
            reason: "must be at least 1".into(),
        });
    }
    let n = spec.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut worst: f64 = 0.0;
    for _ in 0..n_samples {
        let norm = loop {
            for v in x.iter_mut() {
                *v = 2.0 * unit_f64(&mut rng) - 1.0;
            }
            let norm = math::sqrt(x.iter().map(|v| v * v).sum::<f64>());
            if norm > 1e-3 || n == 0 {
                break norm;
            }
        };
        if n > 0 {
            x.iter_mut().for_each(|v| *v /= norm);
        }
        spec.quadratic_into(&x, &mut g);
        let dot: f64 = x.iter().zip(&g).map(|(a, b)| a * b).sum();
        worst = worst.max(dot.abs());
    }
    let scale = spec.max_abs_coeff();
    let max_relative = if scale > 0.0 { worst / scale } else { 0.0 };
    Ok(NumericCancellation { max_residual: worst, max_relative })
}

/// Uniform sample in `[0, 1)` with 53 random bits.
pub(crate) fn unit_f64(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xy() -> (ModeId, ModeId) {
        (ModeId::simple("x", 1), ModeId::simple("y", 2))
    }

    fn pump(alpha: f64) -> CircuitSpec {
        let (x, y) = xy();
        CircuitSpec::new(
            2,
            vec![x.clone(), y.clone()],
            vec![
                InteractionTerm::new(x.clone(), x.clone(), y.clone(), -alpha),
                InteractionTerm::new(y.clone(), x.clone(), x.clone(), alpha),
            ],
            &[],
        )
        .unwrap()
    }

    #[test]
    fn pump_rhs_at_unit_x() {
        let d = assemble_rhs(&pump(1.0), &StateVector::new(0.0, vec![1.0, 0.0])).unwrap();
        assert_eq!(d.x, vec![0.0, 1.0]);
    }

    #[test]
    fn zero_state_has_zero_derivative() {
        let spec = pump(3.0);
        let d = assemble_rhs(&spec, &StateVector::zeros(0.0, 2)).unwrap();
        assert_eq!(d.x, vec![0.0, 0.0]);
    }

    #[test]
    fn rejects_non_finite_amplitude() {
        let err = assemble_rhs(&pump(1.0), &StateVector::new(0.0, vec![f64::NAN, 0.0]));
        assert!(matches!(err, Err(Error::NonFiniteAmplitude { index: 0, .. })));
        let err = assemble_rhs(&pump(1.0), &StateVector::new(0.0, vec![0.0, f64::INFINITY]));
        assert!(matches!(err, Err(Error::NonFiniteAmplitude { index: 1, .. })));
    }

    #[test]
    fn rejects_misaligned_state() {
        let err = assemble_rhs(&pump(1.0), &StateVector::zeros(0.0, 3));
        assert_eq!(err, Err(Error::Misaligned { expected: 2, got: 3 }));
    }

    #[test]
    fn rejects_undeclared_and_duplicate_modes() {
        let (x, y) = xy();
        let z = ModeId::simple("z", 1);
        let undeclared = CircuitSpec::new(
            2,
            vec![x.clone(), y.clone()],
            vec![InteractionTerm::new(x.clone(), z, y.clone(), 1.0)],
            &[],
        );
        assert!(matches!(undeclared, Err(Error::InvalidCircuit(_))));
        let dup = CircuitSpec::new(2, vec![x.clone(), ModeId::simple("x2", 1)], vec![], &[]);
        assert!(matches!(dup, Err(Error::InvalidCircuit(_))));
        let out_of_range = CircuitSpec::new(1, vec![x, y], vec![], &[]);
        assert!(matches!(out_of_range, Err(Error::InvalidCircuit(_))));
    }

    #[test]
    fn rejects_zero_coefficient() {
        let (x, y) = xy();
        let spec = CircuitSpec::new(
            2,
            vec![x.clone(), y.clone()],
            vec![InteractionTerm::new(x.clone(), x, y, 0.0)],
            &[],
        );
        assert!(matches!(spec, Err(Error::InvalidCircuit(_))));
    }

    #[test]
    fn empty_circuit_passes_vacuously() {
        let (x, y) = xy();
        let spec = CircuitSpec::new(2, vec![x, y], vec![], &[]).unwrap();
        let r = check_cancellation_structural(&spec);
        assert!(r.pass);
        assert_eq!(r.max_residual, 0.0);
        assert_eq!(check_cancellation_numeric(&spec, 10, 1).unwrap().max_residual, 0.0);
    }

    #[test]
    fn unbalanced_term_is_reported() {
        let (x, y) = xy();
        let z = ModeId::simple("z", 1);
        let z = ModeId { scale: 1, ..z };
        let spec = CircuitSpec::new(
            2,
            vec![x.clone(), y.clone(), z.clone()],
            vec![InteractionTerm::new(z.clone(), x.clone(), y.clone(), 1.0)],
            &[],
        )
        .unwrap();
        let r = check_cancellation_structural(&spec);
        assert!(!r.pass);
        assert_eq!(r.violating_triples.len(), 1);
        let mut got: Vec<String> =
            r.violating_triples[0].modes.iter().map(|m| m.label.clone()).collect();
        got.sort();
        assert_eq!(got, ["x", "y", "z"]);
        assert_eq!(r.violating_triples[0].sum, 1.0);
    }

    #[test]
    fn pump_numeric_residual_is_roundoff() {
        let r = check_cancellation_numeric(&pump(1.0), 100, 7).unwrap();
        assert!(r.max_residual <= 1e-15, "{}", r.max_residual);
        assert!(check_cancellation_numeric(&pump(1.0), 0, 7).is_err());
    }

    #[test]
    fn dissipation_enters_linearly() {
        let (x, y) = xy();
        let spec = CircuitSpec::new(2, vec![x.clone(), y], vec![], &[(x, 2.5)]).unwrap();
        let d = assemble_rhs(&spec, &StateVector::new(0.0, vec![2.0, 1.0])).unwrap();
        assert_eq!(d.x, vec![-5.0, 0.0]);
        assert_eq!(spec.dissipation_rate(&[2.0, 1.0]), 10.0);
    }

    #[test]
    fn energy_examples() {
        assert_eq!(total_energy(&StateVector::new(0.0, vec![1.0, 0.0, 0.0])), 0.5);
        assert!((total_energy(&StateVector::new(0.0, vec![0.6, 0.8])) - 0.5).abs() < 1e-16);
    }
}
