//! Smooth test functions over the flattened (guard, clock) coordinates, with
//! closed-form gradients. These are the observables fed to the semigroup and
//! generator estimators.

use crate::error::{Result, SimError};
use serde::{Deserialize, Serialize};

/// Index layout of the flattened state vector: all guard components first
/// (agent-major), then one clock per agent:
/// `[beta^0_0 .. beta^0_{d-1}, beta^1_0, .., tau^0, tau^1, ..]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub n_agents: usize,
    pub dim: usize,
}

impl Layout {
    pub fn new(n_agents: usize, dim: usize) -> Self {
        Layout { n_agents, dim }
    }

    /// Layout with no guard block: plain R^n, every coordinate its own slot.
    pub fn flat(n: usize) -> Self {
        Layout { n_agents: n, dim: 0 }
    }

    pub fn len(&self) -> usize {
        self.n_agents * (self.dim + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn beta_index(&self, agent: usize, component: usize) -> usize {
        agent * self.dim + component
    }

    pub fn clock_index(&self, agent: usize) -> usize {
        self.n_agents * self.dim + agent
    }
}

/// Observable catalog. Every variant carries a closed-form gradient; see
/// [`TestFunction::gradient`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunction {
    Constant { value: f64 },
    /// One flat coordinate.
    Coordinate { index: usize },
    /// The clock of one agent (sugar for the corresponding coordinate).
    ClockCoordinate { agent: usize },
    /// x' A x with symmetric A over the full flat vector.
    Quadratic { matrix: Vec<Vec<f64>> },
    /// exp(-|x - center|^2 / (2 width^2)).
    GaussianBump { center: Vec<f64>, width: f64 },
    Sum { terms: Vec<TestFunction> },
    Product { factors: Vec<TestFunction> },
}

impl TestFunction {
    pub fn validate(&self, layout: &Layout) -> Result<()> {
        let n = layout.len();
        match self {
            TestFunction::Constant { value } => {
                if !value.is_finite() {
                    return Err(SimError::NonFinite("constant test function"));
                }
            }
            TestFunction::Coordinate { index } => {
                if *index >= n {
                    return Err(SimError::InvalidSpec(format!(
                        "coordinate {index} out of range for layout of length {n}"
                    )));
                }
            }
            TestFunction::ClockCoordinate { agent } => {
                if *agent >= layout.n_agents {
                    return Err(SimError::InvalidSpec(format!(
                        "clock coordinate {agent} out of range for {} agents",
                        layout.n_agents
                    )));
                }
            }
            TestFunction::Quadratic { matrix } => {
                if matrix.len() != n || matrix.iter().any(|row| row.len() != n) {
                    return Err(SimError::DimensionMismatch {
                        what: "quadratic form matrix",
                        expected: n,
                        got: matrix.len(),
                    });
                }
                for i in 0..n {
                    for j in (i + 1)..n {
                        if (matrix[i][j] - matrix[j][i]).abs() > 1e-12 {
                            return Err(SimError::InvalidSpec(
                                "quadratic form matrix must be symmetric".into(),
                            ));
                        }
                    }
                }
            }
            TestFunction::GaussianBump { center, width } => {
                if center.len() != n {
                    return Err(SimError::DimensionMismatch {
                        what: "bump center",
                        expected: n,
                        got: center.len(),
                    });
                }
                if !(*width > 0.0) || !width.is_finite() {
                    return Err(SimError::InvalidSpec("bump width must be > 0".into()));
                }
            }
            TestFunction::Sum { terms } => {
                for t in terms {
                    t.validate(layout)?;
                }
            }
            TestFunction::Product { factors } => {
                for t in factors {
                    t.validate(layout)?;
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, layout: &Layout, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), layout.len());
        match self {
            TestFunction::Constant { value } => *value,
            TestFunction::Coordinate { index } => x[*index],
            TestFunction::ClockCoordinate { agent } => x[layout.clock_index(*agent)],
            TestFunction::Quadratic { matrix } => {
                let mut acc = 0.0;
                for (i, row) in matrix.iter().enumerate() {
                    let mut inner = 0.0;
                    for (j, a) in row.iter().enumerate() {
                        inner += a * x[j];
                    }
                    acc += x[i] * inner;
                }
                acc
            }
            TestFunction::GaussianBump { center, width } => {
                let mut q = 0.0;
                for (xi, ci) in x.iter().zip(center) {
                    q += (xi - ci) * (xi - ci);
                }
                (-q / (2.0 * width * width)).exp()
            }
            TestFunction::Sum { terms } => terms.iter().map(|t| t.eval(layout, x)).sum(),
            TestFunction::Product { factors } => {
                factors.iter().map(|t| t.eval(layout, x)).product()
            }
        }
    }

    /// Closed-form gradient at `x`.
    pub fn gradient(&self, layout: &Layout, x: &[f64]) -> Vec<f64> {
        let n = layout.len();
        match self {
            TestFunction::Constant { .. } => vec![0.0; n],
            TestFunction::Coordinate { index } => {
                let mut g = vec![0.0; n];
                g[*index] = 1.0;
                g
            }
            TestFunction::ClockCoordinate { agent } => {
                let mut g = vec![0.0; n];
                g[layout.clock_index(*agent)] = 1.0;
                g
            }
            TestFunction::Quadratic { matrix } => {
                // 2 A x for symmetric A
                let mut g = vec![0.0; n];
                for (i, row) in matrix.iter().enumerate() {
                    let mut acc = 0.0;
                    for (j, a) in row.iter().enumerate() {
                        acc += a * x[j];
                    }
                    g[i] = 2.0 * acc;
                }
                g
            }
            TestFunction::GaussianBump { center, width } => {
                let f = self.eval(layout, x);
                let w2 = width * width;
                x.iter()
                    .zip(center)
                    .map(|(xi, ci)| -f * (xi - ci) / w2)
                    .collect()
            }
            TestFunction::Sum { terms } => {
                let mut g = vec![0.0; n];
                for t in terms {
                    for (gi, ti) in g.iter_mut().zip(t.gradient(layout, x)) {
                        *gi += ti;
                    }
                }
                g
            }
            TestFunction::Product { factors } => {
                let values: Vec<f64> = factors.iter().map(|t| t.eval(layout, x)).collect();
                let mut g = vec![0.0; n];
                for (k, t) in factors.iter().enumerate() {
                    let mut others = 1.0;
                    for (j, v) in values.iter().enumerate() {
                        if j != k {
                            others *= v;
                        }
                    }
                    for (gi, ti) in g.iter_mut().zip(t.gradient(layout, x)) {
                        *gi += others * ti;
                    }
                }
                g
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fd_gradient(f: &TestFunction, layout: &Layout, x: &[f64]) -> Vec<f64> {
        let h = 1e-5;
        (0..x.len())
            .map(|p| {
                let mut hi = x.to_vec();
                let mut lo = x.to_vec();
                hi[p] += h;
                lo[p] -= h;
                (f.eval(layout, &hi) - f.eval(layout, &lo)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn layout_indexing_is_guards_then_clocks() {
        let layout = Layout::new(3, 2);
        assert_eq!(layout.len(), 9);
        assert_eq!(layout.beta_index(0, 0), 0);
        assert_eq!(layout.beta_index(2, 1), 5);
        assert_eq!(layout.clock_index(0), 6);
        assert_eq!(layout.clock_index(2), 8);
        let flat = Layout::flat(4);
        assert_eq!(flat.len(), 4);
        assert_eq!(flat.clock_index(1), 1);
    }

    #[test]
    fn closed_form_values() {
        let layout = Layout::new(2, 1);
        let x = [1.0, 2.0, 0.5, 0.25]; // beta0, beta1, tau0, tau1
        assert_eq!(
            TestFunction::ClockCoordinate { agent: 1 }.eval(&layout, &x),
            0.25
        );
        assert_eq!(TestFunction::Coordinate { index: 1 }.eval(&layout, &x), 2.0);
        let sum = TestFunction::Sum {
            terms: vec![
                TestFunction::ClockCoordinate { agent: 0 },
                TestFunction::ClockCoordinate { agent: 1 },
            ],
        };
        assert_eq!(sum.eval(&layout, &x), 0.75);
        let prod = TestFunction::Product {
            factors: vec![
                TestFunction::Coordinate { index: 0 },
                TestFunction::Coordinate { index: 1 },
            ],
        };
        assert_eq!(prod.eval(&layout, &x), 2.0);
        // |x|^2 via the identity quadratic form
        let mut eye = vec![vec![0.0; 4]; 4];
        for (i, row) in eye.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        let q = TestFunction::Quadratic { matrix: eye };
        assert!((q.eval(&layout, &x) - (1.0 + 4.0 + 0.25 + 0.0625)).abs() < 1e-12);
        let bump = TestFunction::GaussianBump {
            center: x.to_vec(),
            width: 1.0,
        };
        assert_eq!(bump.eval(&layout, &x), 1.0);
    }

    #[test]
    fn validation_rejects_bad_shapes() {
        let layout = Layout::new(1, 1);
        assert!(TestFunction::Coordinate { index: 2 }.validate(&layout).is_err());
        assert!(TestFunction::ClockCoordinate { agent: 1 }
            .validate(&layout)
            .is_err());
        let asym = TestFunction::Quadratic {
            matrix: vec![vec![1.0, 2.0], vec![0.0, 1.0]],
        };
        assert!(asym.validate(&layout).is_err());
        let bump = TestFunction::GaussianBump {
            center: vec![0.0],
            width: 1.0,
        };
        assert!(bump.validate(&layout).is_err());
        assert!(TestFunction::GaussianBump {
            center: vec![0.0, 0.0],
            width: 0.0,
        }
        .validate(&layout)
        .is_err());
    }

    fn leaf_strategy(len: usize) -> impl Strategy<Value = TestFunction> {
        prop_oneof![
            (-2.0..2.0f64).prop_map(|value| TestFunction::Constant { value }),
            (0..len).prop_map(|index| TestFunction::Coordinate { index }),
            proptest::collection::vec(-1.5..1.5f64, len * len).prop_map(move |flat| {
                // symmetrise a random matrix
                let mut m = vec![vec![0.0; len]; len];
                for i in 0..len {
                    for j in 0..len {
                        let v = (flat[i * len + j] + flat[j * len + i]) / 2.0;
                        m[i][j] = v;
                    }
                }
                TestFunction::Quadratic { matrix: m }
            }),
            (
                proptest::collection::vec(-1.0..1.0f64, len),
                0.6..2.0f64
            )
                .prop_map(|(center, width)| TestFunction::GaussianBump { center, width }),
        ]
    }

    fn function_strategy(len: usize) -> impl Strategy<Value = TestFunction> {
        leaf_strategy(len).prop_recursive(2, 6, 3, move |inner| {
            prop_oneof![
                proptest::collection::vec(inner.clone(), 2..3)
                    .prop_map(|factors| TestFunction::Product { factors }),
                proptest::collection::vec(inner, 2..3)
                    .prop_map(|terms| TestFunction::Sum { terms }),
            ]
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn gradients_match_central_differences(
            (n_agents, dim) in (1usize..3, 1usize..3),
            seed_point in proptest::collection::vec(-2.0..2.0f64, 12),
            f in function_strategy(2),
        ) {
            // reinterpret the function over the actual layout by clamping indices
            let layout = Layout::new(n_agents, dim);
            let len = layout.len();
            let x: Vec<f64> = seed_point.into_iter().take(len).collect();
            prop_assume!(x.len() == len);
            let f = clamp_indices(&f, len);
            prop_assert!(f.validate(&layout).is_ok());
            let grad = f.gradient(&layout, &x);
            let fd = fd_gradient(&f, &layout, &x);
            for (g, d) in grad.iter().zip(&fd) {
                let scale = 1.0f64.max(g.abs());
                prop_assert!(
                    (g - d).abs() <= 1e-6 * scale,
                    "gradient {g} vs finite difference {d}"
                );
            }
        }
    }

    // The strategy draws shapes for a placeholder length; rebuild the
    // function so every index and matrix matches the sampled layout.
    fn clamp_indices(f: &TestFunction, len: usize) -> TestFunction {
        match f {
            TestFunction::Constant { value } => TestFunction::Constant { value: *value },
            TestFunction::Coordinate { index } => TestFunction::Coordinate {
                index: index % len,
            },
            TestFunction::ClockCoordinate { agent } => TestFunction::Coordinate {
                index: agent % len,
            },
            TestFunction::Quadratic { matrix } => {
                let mut m = vec![vec![0.0; len]; len];
                for i in 0..len {
                    for j in 0..len {
                        let src = &matrix[i % matrix.len()];
                        let v = src[j % src.len()];
                        let src2 = &matrix[j % matrix.len()];
                        let w = src2[i % src2.len()];
                        m[i][j] = (v + w) / 2.0;
                    }
                }
                TestFunction::Quadratic { matrix: m }
            }
            TestFunction::GaussianBump { center, width } => TestFunction::GaussianBump {
                center: (0..len).map(|i| center[i % center.len()]).collect(),
                width: *width,
            },
            TestFunction::Sum { terms } => TestFunction::Sum {
                terms: terms.iter().map(|t| clamp_indices(t, len)).collect(),
            },
            TestFunction::Product { factors } => TestFunction::Product {
                factors: factors.iter().map(|t| clamp_indices(t, len)).collect(),
            },
        }
    }
}
