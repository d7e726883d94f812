//! Benchmark measure-preserving flows, their shear splittings and tau-maps.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::partition::Domain;

const TWO_PI: f64 = 2.0 * PI;

/// A benchmark flow and its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowSpec {
    /// `x' = omega` on the unit circle.
    Translation { omega: f64 },
    /// `(x1', x2') = (x2, -sin x1)`.
    Pendulum,
    /// `(x1', x2') = (x2, -b x1 - a x1^3)`.
    Duffing { a: f64, b: f64 },
    /// Time-periodic quadruple gyre, with `x3` playing the role of time.
    QuadrupleGyre { amplitude: f64, epsilon: f64 },
    /// Arnold-Beltrami-Childress flow on the unit 3-torus.
    Abc { a: f64, b: f64, c: f64 },
}

impl fmt::Display for FlowSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FlowSpec {
    /// Parameters used for the gyre experiments: `A = 1/(2 pi)`, `eps = 0.05`.
    pub fn gyre_default() -> Self {
        FlowSpec::QuadrupleGyre { amplitude: 1.0 / TWO_PI, epsilon: 0.05 }
    }

    /// `A = sqrt(3)/(2 pi)`, `B = sqrt(2)/(2 pi)`, `C = 1/(2 pi)`.
    pub fn abc_default() -> Self {
        FlowSpec::Abc { a: 3f64.sqrt() / TWO_PI, b: 2f64.sqrt() / TWO_PI, c: 1.0 / TWO_PI }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FlowSpec::Translation { .. } => "translation",
            FlowSpec::Pendulum => "pendulum",
            FlowSpec::Duffing { .. } => "duffing",
            FlowSpec::QuadrupleGyre { .. } => "quadruple_gyre",
            FlowSpec::Abc { .. } => "abc",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FlowSpec::Translation { .. } => 1,
            FlowSpec::Pendulum | FlowSpec::Duffing { .. } => 2,
            FlowSpec::QuadrupleGyre { .. } | FlowSpec::Abc { .. } => 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let params: &[f64] = match self {
            FlowSpec::Translation { omega } => &[*omega],
            FlowSpec::Pendulum => &[],
            FlowSpec::Duffing { a, b } => &[*a, *b],
            FlowSpec::QuadrupleGyre { amplitude, epsilon } => &[*amplitude, *epsilon],
            FlowSpec::Abc { a, b, c } => &[*a, *b, *c],
        };
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument(format!("{self}: parameters must be finite")));
        }
        match *self {
            FlowSpec::QuadrupleGyre { epsilon, .. } if !(0.0..0.25).contains(&epsilon) => Err(
                Error::InvalidArgument(format!("quadruple_gyre: epsilon {epsilon} not in [0, 0.25)")),
            ),
            FlowSpec::Duffing { a, b } if !(a > 0.0 || (a == 0.0 && b > 0.0)) => {
                Err(Error::InvalidArgument(format!(
                    "duffing: energy sub-level set is unbounded for a = {a}, b = {b}"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Right-hand side of the flow's ODE.
    pub fn vector_field(&self, x: &[f64]) -> Vec<f64> {
        match *self {
            FlowSpec::Translation { omega } => vec![omega],
            FlowSpec::Pendulum => vec![x[1], -x[0].sin()],
            FlowSpec::Duffing { a, b } => vec![x[1], -b * x[0] - a * x[0].powi(3)],
            FlowSpec::QuadrupleGyre { amplitude, epsilon } => {
                let s = (TWO_PI * x[2]).sin();
                let (f1, df1) = gyre_warp(x[0], epsilon, s);
                let (f2, df2) = gyre_warp(x[1], epsilon, s);
                let pa = PI * amplitude;
                // Stream function A sin(pi f1) sin(pi f2).
                vec![
                    pa * (PI * f1).sin() * (PI * f2).cos() * df2,
                    -pa * (PI * f1).cos() * (PI * f2).sin() * df1,
                    1.0,
                ]
            }
            FlowSpec::Abc { a, b, c } => {
                let (s1, c1) = (TWO_PI * x[0]).sin_cos();
                let (s2, c2) = (TWO_PI * x[1]).sin_cos();
                let (s3, c3) = (TWO_PI * x[2]).sin_cos();
                vec![a * s3 + c * c2, b * s1 + a * c3, c * s2 + b * c1]
            }
        }
    }

    /// Hamiltonian for the one degree-of-freedom systems.
    pub fn energy(&self, x: &[f64]) -> Option<f64> {
        match *self {
            FlowSpec::Pendulum => Some(0.5 * x[1] * x[1] - x[0].cos()),
            FlowSpec::Duffing { a, b } => {
                Some(0.5 * x[1] * x[1] + 0.5 * b * x[0] * x[0] + 0.25 * a * x[0].powi(4))
            }
            _ => None,
        }
    }

    /// Energy level bounding the restricted domain of the Hamiltonian examples.
    pub fn energy_level(&self) -> Option<f64> {
        match *self {
            FlowSpec::Pendulum => Some(0.5 * PI * PI + 1.0),
            FlowSpec::Duffing { a, b } => {
                Some(0.5 * PI * PI + 0.5 * b * PI * PI + 0.25 * a * PI.powi(4))
            }
            _ => None,
        }
    }

    /// Tight bounding box of the flow's state space.
    ///
    /// For the Hamiltonian examples this is the box enclosing the energy
    /// sub-level set, without any padding.
    pub fn domain(&self) -> Result<Domain> {
        self.validate()?;
        match *self {
            FlowSpec::Translation { .. } => Ok(Domain::unit_circle()),
            FlowSpec::Pendulum => {
                let c = (PI * PI + 4.0).sqrt();
                Domain::new(vec![0.0, -c], vec![TWO_PI, c], vec![true, false])
            }
            FlowSpec::Duffing { a, b } => {
                let level = self.energy_level().unwrap_or_default();
                let x1 = duffing_x1_extent(a, b, level);
                let vmin = if b >= 0.0 { 0.0 } else { -b * b / (4.0 * a) };
                let x2 = (2.0 * (level - vmin)).sqrt();
                Domain::new(vec![-x1, -x2], vec![x1, x2], vec![false, false])
            }
            FlowSpec::QuadrupleGyre { .. } => {
                Domain::new(vec![0.0; 3], vec![1.0; 3], vec![false, false, true])
            }
            FlowSpec::Abc { .. } => Domain::unit_torus(3),
        }
    }

    /// Decomposes the tau-map into shears when the flow admits one.
    ///
    /// Pendulum and Duffing use the position shear followed by the momentum
    /// shear. The ABC map shears axes 1, 2, 3 in that order with `tau / 3` each.
    pub fn shear_splitting(&self, tau: f64) -> Result<SplittingScheme> {
        let steps = match *self {
            FlowSpec::Translation { omega } => {
                vec![ShearStep::new(0, move |_| omega * tau)]
            }
            FlowSpec::Pendulum => vec![
                ShearStep::new(0, move |x| tau * x[1]),
                ShearStep::new(1, move |x| -tau * x[0].sin()),
            ],
            FlowSpec::Duffing { a, b } => vec![
                ShearStep::new(0, move |x| tau * x[1]),
                ShearStep::new(1, move |x| -tau * (b * x[0] + a * x[0].powi(3))),
            ],
            FlowSpec::Abc { a, b, c } => {
                let h = tau / 3.0;
                vec![
                    ShearStep::new(0, move |x| {
                        h * (a * (TWO_PI * x[2]).sin() + c * (TWO_PI * x[1]).cos())
                    }),
                    ShearStep::new(1, move |x| {
                        h * (b * (TWO_PI * x[0]).sin() + a * (TWO_PI * x[2]).cos())
                    }),
                    ShearStep::new(2, move |x| {
                        h * (c * (TWO_PI * x[1]).sin() + b * (TWO_PI * x[0]).cos())
                    }),
                ]
            }
            FlowSpec::QuadrupleGyre { .. } => {
                return Err(Error::UnsupportedSplitting("quadruple_gyre"))
            }
        };
        let order = if matches!(self, FlowSpec::Translation { .. }) { usize::MAX } else { 1 };
        Ok(SplittingScheme { steps, tau, order })
    }

    /// Approximates the tau-map `S^tau(x)`.
    ///
    /// Translation is exact. Shear-splittable flows compose their splitting
    /// `substeps` times with step `tau / substeps`; the gyre uses classical
    /// RK4 on `(x1, x2)` with `x3` advancing linearly. Periodic axes are wrapped.
    pub fn integrate_tau(&self, tau: f64, x: &[f64], substeps: usize) -> Result<Vec<f64>> {
        if substeps == 0 {
            return Err(Error::InvalidArgument("substeps must be >= 1".into()));
        }
        let domain = self.domain()?;
        let mut y = x.to_vec();
        if tau == 0.0 {
            return Ok(y);
        }
        match *self {
            FlowSpec::Translation { omega } => y[0] += omega * tau,
            FlowSpec::QuadrupleGyre { .. } => {
                let h = tau / substeps as f64;
                for _ in 0..substeps {
                    y = rk4_step(self, &y, h);
                }
            }
            _ => {
                let scheme = self.shear_splitting(tau / substeps as f64)?;
                for _ in 0..substeps {
                    scheme.apply(&mut y);
                }
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalBlowup(format!("{self}: state became {y:?}")));
        }
        domain.wrap(&mut y);
        Ok(y)
    }

    /// Classical RK4 integration of [`FlowSpec::vector_field`], without wrapping.
    pub fn integrate_rk4(&self, tau: f64, x: &[f64], substeps: usize) -> Vec<f64> {
        let h = tau / substeps.max(1) as f64;
        let mut y = x.to_vec();
        for _ in 0..substeps.max(1) {
            y = rk4_step(self, &y, h);
        }
        y
    }
}

fn gyre_warp(x: f64, epsilon: f64, s: f64) -> (f64, f64) {
    let e = 4.0 * epsilon * s;
    (e * x * x + (2.0 - e) * x, 2.0 * e * x + 2.0 - e)
}

fn duffing_x1_extent(a: f64, b: f64, level: f64) -> f64 {
    // Largest root of a/4 y^2 + b/2 y - level = 0 with y = x1^2.
    let y = if a > 0.0 {
        (-b / 2.0 + (b * b / 4.0 + a * level).sqrt()) / (a / 2.0)
    } else {
        2.0 * level / b
    };
    y.sqrt()
}

fn rk4_step(spec: &FlowSpec, y: &[f64], h: f64) -> Vec<f64> {
    let axpy = |a: &[f64], k: &[f64], s: f64| -> Vec<f64> {
        a.iter().zip(k).map(|(a, k)| a + s * k).collect()
    };
    let k1 = spec.vector_field(y);
    let k2 = spec.vector_field(&axpy(y, &k1, 0.5 * h));
    let k3 = spec.vector_field(&axpy(y, &k2, 0.5 * h));
    let k4 = spec.vector_field(&axpy(y, &k3, h));
    (0..y.len())
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

type Displacement = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A shear `x_k += delta(x)` where `delta` ignores `x_k`.
#[derive(Clone)]
pub struct ShearStep {
    axis: usize,
    displacement: Arc<Displacement>,
}

impl fmt::Debug for ShearStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ShearStep").field("axis", &self.axis).finish_non_exhaustive()
    }
}

impl ShearStep {
    pub fn new<F>(axis: usize, displacement: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        ShearStep { axis, displacement: Arc::new(displacement) }
    }

    pub fn axis(&self) -> usize {
        self.axis
    }

    pub fn displacement(&self, x: &[f64]) -> f64 {
        (self.displacement)(x)
    }

    pub fn apply(&self, x: &mut [f64]) {
        x[self.axis] += self.displacement(x);
    }

    /// Spot-checks that the displacement does not depend on the sheared axis.
    pub fn is_independent_of_axis(&self, x: &[f64]) -> bool {
        let base = self.displacement(x);
        let mut y = x.to_vec();
        [0.137, -0.71, 2.3].iter().all(|dk| {
            y[self.axis] = x[self.axis] + dk;
            (self.displacement(&y) - base).abs() <= 1e-14 * (1.0 + base.abs())
        })
    }
}

/// Ordered shears whose composition approximates the tau-map.
#[derive(Debug, Clone)]
pub struct SplittingScheme {
    pub steps: Vec<ShearStep>,
    pub tau: f64,
    /// Formal order of accuracy; `usize::MAX` marks an exact map.
    pub order: usize,
}

impl SplittingScheme {
    /// Applies the steps in list order.
    pub fn apply(&self, x: &mut [f64]) {
        for step in &self.steps {
            step.apply(x);
        }
    }
}
