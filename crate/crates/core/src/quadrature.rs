//! Finite discretizations of a measure space and deterministic integration of
//! algebra-valued samples.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::algebra::AlgebraElement;
use crate::error::{Error, Result};

pub const MAX_GAUSS_NODES: usize = 256;

/// Nodes `w_j` (strictly increasing) with positive weights `μ_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    domain_label: String,
}

impl QuadratureRule {
    pub fn explicit(nodes: Vec<f64>, weights: Vec<f64>, domain_label: impl Into<String>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidRule("at least one node is required".into()));
        }
        if nodes.len() != weights.len() {
            return Err(Error::InvalidRule(format!("{} nodes but {} weights", nodes.len(), weights.len())));
        }
        if nodes.iter().chain(&weights).any(|x| !x.is_finite()) {
            return Err(Error::InvalidRule("nodes and weights must be finite".into()));
        }
        if let Some(j) = weights.iter().position(|&w| w <= 0.0) {
            return Err(Error::InvalidRule(format!("weight {j} is not positive")));
        }
        if let Some(j) = nodes.windows(2).position(|p| p[1] <= p[0]) {
            return Err(Error::InvalidRule(format!("nodes not strictly increasing at {}", j + 1)));
        }
        Ok(Self { nodes, weights, domain_label: domain_label.into() })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn domain_label(&self) -> &str {
        &self.domain_label
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        pairwise_reduce(&self.weights, |a, b| a + b).unwrap_or(0.0)
    }

    /// `Σ_j μ_j g(w_j)` with the fixed pairwise tree.
    pub fn integrate_scalar(&self, g: impl Fn(f64) -> f64) -> f64 {
        let terms: Vec<f64> = self.nodes.iter().zip(&self.weights).map(|(&w, &mu)| mu * g(w)).collect();
        pairwise_reduce(&terms, |a, b| a + b).expect("non-empty rule")
    }
}

fn check_interval(a: f64, b: f64) -> Result<()> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::InvalidRule(format!("invalid interval [{a}, {b}]")));
    }
    Ok(())
}

/// `n` midpoints of `[a, b]` with uniform weights `(b − a)/n`.
pub fn midpoint_rule(n: usize, a: f64, b: f64) -> Result<QuadratureRule> {
    if n == 0 {
        return Err(Error::InvalidRule("midpoint rule needs n ≥ 1".into()));
    }
    check_interval(a, b)?;
    let h = (b - a) / n as f64;
    let nodes = (0..n).map(|j| a + (j as f64 + 0.5) * h).collect();
    QuadratureRule::explicit(nodes, vec![h; n], format!("[{a},{b}]-lebesgue"))
}

/// Gauss–Legendre rule with `n` nodes mapped to `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<QuadratureRule> {
    if n == 0 || n > MAX_GAUSS_NODES {
        return Err(Error::InvalidRule(format!("Gauss–Legendre order must be in 1..={MAX_GAUSS_NODES}, got {n}")));
    }
    check_interval(a, b)?;
    let reference = legendre_reference(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let nodes = reference.0.iter().map(|&x| mid + half * x).collect();
    let weights = reference.1.iter().map(|&w| half * w).collect();
    QuadratureRule::explicit(nodes, weights, format!("[{a},{b}]-lebesgue"))
}

/// Nodes `0, …, n−1` with unit weights.
pub fn counting_measure(n: usize) -> Result<QuadratureRule> {
    if n == 0 {
        return Err(Error::InvalidRule("counting measure needs n ≥ 1".into()));
    }
    QuadratureRule::explicit((0..n).map(|j| j as f64).collect(), vec![1.0; n], format!("counting-{n}"))
}

type Reference = Arc<(Vec<f64>, Vec<f64>)>;

/// Nodes and weights on `[-1, 1]`, ascending, cached per order.
fn legendre_reference(n: usize) -> Reference {
    static CACHE: OnceLock<Mutex<HashMap<usize, Reference>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = cache.lock().expect("cache poisoned").get(&n) {
        return hit.clone();
    }
    let computed = Arc::new(compute_legendre(n));
    cache.lock().expect("cache poisoned").insert(n, computed.clone());
    computed
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = next;
    }
    let dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

fn compute_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess for the i-th largest root
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
        let (_, dp) = legendre_with_derivative(n, 0.0);
        weights[n / 2] = 2.0 / (dp * dp);
    }
    (nodes, weights)
}

/// Reduces `items` along a fixed balanced binary tree indexed by position,
/// so the result does not depend on evaluation order or parallelism.
pub fn pairwise_reduce<T: Clone>(items: &[T], combine: impl Fn(&T, &T) -> T + Copy) -> Option<T> {
    match items.len() {
        0 => None,
        1 => Some(items[0].clone()),
        len => {
            let (left, right) = items.split_at(len / 2);
            let l = pairwise_reduce(left, combine)?;
            let r = pairwise_reduce(right, combine)?;
            Some(combine(&l, &r))
        }
    }
}

/// `Σ_j μ_j · sample_j`.
pub fn integrate_algebra(samples: &[AlgebraElement], rule: &QuadratureRule) -> Result<AlgebraElement> {
    if samples.len() != rule.len() {
        return Err(Error::ShapeMismatch(format!("{} samples for {} nodes", samples.len(), rule.len())));
    }
    let signature = samples[0].signature();
    for s in samples {
        signature.check_same(s.signature())?;
    }
    let weighted: Vec<AlgebraElement> = samples.iter().zip(rule.weights()).map(|(s, &mu)| s.scale_real(mu)).collect();
    Ok(pairwise_reduce(&weighted, |a, b| a + b).expect("non-empty rule"))
}

/// JSON description of a rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum RuleSpec {
    Midpoint {
        n: usize,
        a: f64,
        b: f64,
    },
    Gauss {
        n: usize,
        a: f64,
        b: f64,
    },
    Counting {
        n: usize,
    },
    Explicit {
        nodes: Vec<f64>,
        weights: Vec<f64>,
        #[serde(default = "explicit_label")]
        domain_label: String,
    },
}

fn explicit_label() -> String {
    "explicit".to_string()
}

impl RuleSpec {
    pub fn build(&self) -> Result<QuadratureRule> {
        match self {
            Self::Midpoint { n, a, b } => midpoint_rule(*n, *a, *b),
            Self::Gauss { n, a, b } => gauss_legendre(*n, *a, *b),
            Self::Counting { n } => counting_measure(*n),
            Self::Explicit { nodes, weights, domain_label } => {
                QuadratureRule::explicit(nodes.clone(), weights.clone(), domain_label.clone())
            }
        }
    }
}

impl From<&QuadratureRule> for RuleSpec {
    fn from(rule: &QuadratureRule) -> Self {
        Self::Explicit {
            nodes: rule.nodes.clone(),
            weights: rule.weights.clone(),
            domain_label: rule.domain_label.clone(),
        }
    }
}

impl Serialize for QuadratureRule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RuleSpec::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for QuadratureRule {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let spec = RuleSpec::deserialize(d)?;
        spec.build().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::AlgebraSignature;
    use crate::linalg::C64;
    use crate::sample;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn midpoint_small_cases() {
        let r = midpoint_rule(1, 0.0, 1.0).unwrap();
        assert_eq!(r.nodes(), &[0.5]);
        assert_eq!(r.weights(), &[1.0]);
        let r = midpoint_rule(2, 0.0, 1.0).unwrap();
        assert_eq!(r.nodes(), &[0.25, 0.75]);
        assert_eq!(r.weights(), &[0.5, 0.5]);
        let r = midpoint_rule(10, 0.0, 1.0).unwrap();
        assert!((r.integrate_scalar(|w| w) - 0.5).abs() < 1e-15);
        assert!(midpoint_rule(0, 0.0, 1.0).is_err());
        assert!(midpoint_rule(3, 1.0, 1.0).is_err());
    }

    #[test]
    fn gauss_small_cases() {
        let r = gauss_legendre(1, -1.0, 1.0).unwrap();
        assert_eq!(r.nodes(), &[0.0]);
        assert!((r.weights()[0] - 2.0).abs() < 1e-15);
        let r = gauss_legendre(2, 0.0, 1.0).unwrap();
        assert!((r.integrate_scalar(|w| w * w) - 1.0 / 3.0).abs() <= 1e-14);
        let r = gauss_legendre(3, 0.0, 1.0).unwrap();
        assert!((r.integrate_scalar(|w| w.powi(4)) - 0.2).abs() <= 1e-14);
        assert!(gauss_legendre(0, 0.0, 1.0).is_err());
        assert!(gauss_legendre(257, 0.0, 1.0).is_err());
    }

    #[test]
    fn gauss_exactness_degree() {
        for n in 1..=5usize {
            let r = gauss_legendre(n, 0.0, 1.0).unwrap();
            for k in 0..=9usize.min(2 * n - 1) {
                let exact = 1.0 / (k as f64 + 1.0);
                let got = r.integrate_scalar(|w| w.powi(k as i32));
                assert!((got - exact).abs() <= 1e-14, "n={n} k={k}: {got} vs {exact}");
            }
        }
    }

    #[test]
    fn gauss_high_order_is_sane() {
        for n in [32usize, 64, 128, 256] {
            let r = gauss_legendre(n, -1.0, 1.0).unwrap();
            assert!((r.total_weight() - 2.0).abs() < 1e-13);
            assert!(r.nodes().windows(2).all(|p| p[0] < p[1]));
            assert!((r.integrate_scalar(|x| x.cos()) - 2.0 * 1f64.sin()).abs() < 1e-13);
        }
    }

    #[test]
    fn counting_cases() {
        let r = counting_measure(3).unwrap();
        assert_eq!(r.weights(), &[1.0, 1.0, 1.0]);
        let sig = AlgebraSignature::new(vec![2]).unwrap();
        let r = counting_measure(4).unwrap();
        let unit = AlgebraElement::unit(&sig);
        let total = integrate_algebra(&vec![unit.clone(); 4], &r).unwrap();
        assert_eq!(total, unit.scale_real(4.0));
    }

    #[test]
    fn integrate_edge_cases() {
        let sig = AlgebraSignature::new(vec![2, 1]).unwrap();
        let r = gauss_legendre(5, 0.0, 2.0).unwrap();
        let zero = AlgebraElement::zero(&sig);
        assert_eq!(integrate_algebra(&vec![zero.clone(); 5], &r).unwrap(), zero);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let c = sample::element(&sig, &mut rng);
        let total = integrate_algebra(&vec![c.clone(); 5], &r).unwrap();
        assert!((&total - &c.scale_real(2.0)).max_entry() < 1e-14);
        assert!(integrate_algebra(&vec![c.clone(); 4], &r).is_err());
        let other = AlgebraElement::zero(&AlgebraSignature::scalar());
        let mut mixed = vec![c; 5];
        mixed[2] = other;
        assert!(integrate_algebra(&mixed, &r).is_err());
    }

    #[test]
    fn ramp_integrand_gives_harmonic_weights() {
        // ∫₀¹ α (w/n)² dw = (α/3)/n² entrywise on ℂ^N
        let alpha = 1.7;
        let n_max = 12;
        let r = gauss_legendre(32, 0.0, 1.0).unwrap();
        let samples: Vec<AlgebraElement> = r
            .nodes()
            .iter()
            .map(|&w| {
                let d: Vec<C64> = (1..=n_max).map(|n| C64::new(alpha * (w / n as f64).powi(2), 0.0)).collect();
                AlgebraElement::from_diagonal(&d).unwrap()
            })
            .collect();
        let total = integrate_algebra(&samples, &r).unwrap();
        for n in 1..=n_max {
            let expect = alpha / 3.0 / (n * n) as f64;
            let got = total.block(n - 1)[(0, 0)].re;
            assert!((got - expect).abs() <= 1e-13 * expect);
        }
    }

    #[test]
    fn integration_is_linear_and_positive() {
        let sig = AlgebraSignature::new(vec![2, 1]).unwrap();
        let r = midpoint_rule(7, 0.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let xs: Vec<_> = (0..7).map(|_| sample::element(&sig, &mut rng)).collect();
        let ys: Vec<_> = (0..7).map(|_| sample::element(&sig, &mut rng)).collect();
        let sum: Vec<_> = xs.iter().zip(&ys).map(|(x, y)| &x.scale_real(2.0) + y).collect();
        let lhs = integrate_algebra(&sum, &r).unwrap();
        let rhs = &integrate_algebra(&xs, &r).unwrap().scale_real(2.0) + &integrate_algebra(&ys, &r).unwrap();
        assert!((&lhs - &rhs).max_entry() < 1e-14);
        let ps: Vec<_> = (0..7).map(|_| sample::positive(&sig, &mut rng)).collect();
        assert!(integrate_algebra(&ps, &r).unwrap().is_positive(1e-12));
    }

    #[test]
    fn integration_is_bit_reproducible_across_threads() {
        let sig = AlgebraSignature::new(vec![3]).unwrap();
        let r = gauss_legendre(64, 0.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let xs: Vec<_> = (0..64).map(|_| sample::element(&sig, &mut rng)).collect();
        let reference = serde_json::to_string(&integrate_algebra(&xs, &r).unwrap()).unwrap();
        let handles: Vec<_> = (0..4)
            .map(|_| {
                let xs = xs.clone();
                let r = r.clone();
                std::thread::spawn(move || serde_json::to_string(&integrate_algebra(&xs, &r).unwrap()).unwrap())
            })
            .collect();
        for h in handles {
            assert_eq!(h.join().unwrap(), reference);
        }
    }

    #[test]
    fn rule_spec_json() {
        let r: QuadratureRule = serde_json::from_str(r#"{"type":"gauss","n":2,"a":0,"b":1}"#).unwrap();
        assert_eq!(r.len(), 2);
        let r: QuadratureRule =
            serde_json::from_str(r#"{"type":"explicit","nodes":[0.1,0.4],"weights":[0.5,0.5]}"#).unwrap();
        assert_eq!(r.nodes(), &[0.1, 0.4]);
        assert!(
            serde_json::from_str::<QuadratureRule>(r#"{"type":"explicit","nodes":[0.4,0.1],"weights":[1,1]}"#).is_err()
        );
        assert!(serde_json::from_str::<QuadratureRule>(r#"{"type":"counting","n":0}"#).is_err());
    }
}
