//! Control and game problem definitions: dynamics, costs, discount, control
//! sets, plus the built-in benchmark instances.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::DomainGeometry;

type DynamicsFn = Arc<dyn Fn([f64; 2], [f64; 2], [f64; 2]) -> [f64; 2] + Send + Sync>;
type ScalarFn = Arc<dyn Fn([f64; 2], [f64; 2], [f64; 2]) -> f64 + Send + Sync>;

/// A compact control set, sampled by `sample_controls`.
#[derive(Debug, Clone)]
pub enum ControlSet {
    /// Closed ball B(0, radius) in the plane.
    Ball { radius: f64 },
    /// Closed interval [lo, hi]; samples embed as (a, 0).
    Interval { lo: f64, hi: f64 },
    /// No adversary / no choice: the single zero control.
    Singleton,
}

impl ControlSet {
    fn sample(&self, n: usize) -> Vec<[f64; 2]> {
        match *self {
            ControlSet::Ball { radius } => {
                let mut out = Vec::with_capacity(n + 1);
                for k in 0..n {
                    let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                    out.push([radius * th.cos(), radius * th.sin()]);
                }
                // the zero control covers stationarity; the max/min of the
                // convex Hamiltonians here is otherwise attained on the circle
                out.push([0.0, 0.0]);
                out
            }
            ControlSet::Interval { lo, hi } => {
                if n == 1 {
                    vec![[0.5 * (lo + hi), 0.0]]
                } else {
                    (0..n)
                        .map(|k| [lo + (hi - lo) * k as f64 / (n - 1) as f64, 0.0])
                        .collect()
                }
            }
            ControlSet::Singleton => vec![[0.0, 0.0]],
        }
    }
}

/// Sampled control sets used for the discrete min/max evaluations.
#[derive(Debug, Clone)]
pub struct ControlGrid {
    pub a: Vec<[f64; 2]>,
    pub b: Vec<[f64; 2]>,
}

/// Dynamics right-hand side f(x, a, b).
#[derive(Clone)]
pub enum Dynamics {
    /// f = a: the control is the velocity.
    ControlIsVelocity,
    /// f = (x2, (1 - x1^2) x2 - x1 + a1): forced oscillator.
    VanDerPol,
    /// f = ((x2 + 1)(a1 - b1), a2 - b2): planar capture game.
    PursuitEvasion,
    /// f = (a1, 0): horizontal motion only.
    Horizontal,
    /// f = 0.
    Stationary,
    Custom(DynamicsFn),
}

impl Dynamics {
    #[inline]
    pub fn eval(&self, x: [f64; 2], a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
        match self {
            Dynamics::ControlIsVelocity => a,
            Dynamics::VanDerPol => [x[1], (1.0 - x[0] * x[0]) * x[1] - x[0] + a[0]],
            Dynamics::PursuitEvasion => [(x[1] + 1.0) * (a[0] - b[0]), a[1] - b[1]],
            Dynamics::Horizontal => [a[0], 0.0],
            Dynamics::Stationary => [0.0, 0.0],
            Dynamics::Custom(f) => f(x, a, b),
        }
    }
}

impl fmt::Debug for Dynamics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Dynamics::ControlIsVelocity => "ControlIsVelocity",
            Dynamics::VanDerPol => "VanDerPol",
            Dynamics::PursuitEvasion => "PursuitEvasion",
            Dynamics::Horizontal => "Horizontal",
            Dynamics::Stationary => "Stationary",
            Dynamics::Custom(_) => "Custom",
        };
        f.write_str(name)
    }
}

/// Running cost l(x, a, b).
#[derive(Clone)]
pub enum RunningCost {
    One,
    /// |x|, the distance to the origin.
    Norm,
    /// x1^2 + 0.1.
    ShiftedSquare,
    Constant(f64),
    Custom(ScalarFn),
}

impl RunningCost {
    #[inline]
    pub fn eval(&self, x: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
        match self {
            RunningCost::One => 1.0,
            RunningCost::Norm => (x[0] * x[0] + x[1] * x[1]).sqrt(),
            RunningCost::ShiftedSquare => x[0] * x[0] + 0.1,
            RunningCost::Constant(c) => *c,
            RunningCost::Custom(f) => f(x, a, b),
        }
    }
}

impl fmt::Debug for RunningCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunningCost::One => f.write_str("One"),
            RunningCost::Norm => f.write_str("Norm"),
            RunningCost::ShiftedSquare => f.write_str("ShiftedSquare"),
            RunningCost::Constant(c) => write!(f, "Constant({c})"),
            RunningCost::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// Exit cost g on the target set.
#[derive(Clone)]
pub enum ExitCost {
    Zero,
    Custom(Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>),
}

impl ExitCost {
    #[inline]
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        match self {
            ExitCost::Zero => 0.0,
            ExitCost::Custom(f) => f(x),
        }
    }
}

impl fmt::Debug for ExitCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExitCost::Zero => f.write_str("Zero"),
            ExitCost::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// A full exit-time problem: dynamics, costs, discount, geometry and control
/// sets. Evaluators are pure; the struct is safe to share across threads.
#[derive(Debug, Clone)]
pub struct ProblemDef {
    pub name: String,
    pub dynamics: Dynamics,
    pub running_cost: RunningCost,
    pub exit_cost: ExitCost,
    pub lambda: f64,
    pub geometry: DomainGeometry,
    pub control_a: ControlSet,
    pub control_b: ControlSet,
}

/// The built-in benchmark instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinName {
    /// |Dv| = 1 on the square, v = 0 on the whole edge (lambda = 0): the box
    /// distance function.
    EikonalSquare,
    /// v + |Dv| = 1 on the square: the transformed distance function
    /// (lambda = 1).
    EikonalKruzkov,
    /// Horizontal exit from a strip with discount delta; the value flattens
    /// near the mid line as delta grows.
    StripFlat,
    /// Forced Van der Pol oscillator steered to a center ball.
    VanDerPol,
    /// Pursuit-evasion capture game on the plane with a center target ball.
    PursuitEvasion,
}

impl BuiltinName {
    pub const ALL: [BuiltinName; 5] = [
        BuiltinName::EikonalSquare,
        BuiltinName::EikonalKruzkov,
        BuiltinName::StripFlat,
        BuiltinName::VanDerPol,
        BuiltinName::PursuitEvasion,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            BuiltinName::EikonalSquare => "eikonal-square",
            BuiltinName::EikonalKruzkov => "eikonal-kruzkov",
            BuiltinName::StripFlat => "strip-flat",
            BuiltinName::VanDerPol => "van-der-pol",
            BuiltinName::PursuitEvasion => "pursuit-evasion",
        }
    }
}

impl FromStr for BuiltinName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_lowercase().replace('_', "-");
        for name in BuiltinName::ALL {
            if norm == name.as_str() {
                return Ok(name);
            }
        }
        Err(Error::UnknownProblem(s.to_string()))
    }
}

impl fmt::Display for BuiltinName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Name-specific parameters for the built-ins.
#[derive(Debug, Clone, Copy)]
pub struct BuiltinParams {
    /// Discount of the strip problem.
    pub delta: f64,
    /// Radius of ball targets.
    pub rho: f64,
}

impl Default for BuiltinParams {
    fn default() -> Self {
        Self {
            delta: 1.0,
            rho: 0.2,
        }
    }
}

/// Instantiates one of the built-in problems.
pub fn make_builtin(name: BuiltinName, params: &BuiltinParams) -> Result<ProblemDef> {
    if params.rho <= 0.0 {
        return Err(Error::InvalidParam(format!(
            "rho must be positive, got {}",
            params.rho
        )));
    }
    if params.delta <= 0.0 {
        return Err(Error::InvalidParam(format!(
            "delta must be positive, got {}",
            params.delta
        )));
    }
    let def = match name {
        BuiltinName::EikonalSquare => ProblemDef {
            name: name.as_str().into(),
            dynamics: Dynamics::ControlIsVelocity,
            running_cost: RunningCost::One,
            exit_cost: ExitCost::Zero,
            lambda: 0.0,
            geometry: DomainGeometry::SquareBoundary,
            control_a: ControlSet::Ball { radius: 1.0 },
            control_b: ControlSet::Singleton,
        },
        BuiltinName::EikonalKruzkov => ProblemDef {
            name: name.as_str().into(),
            dynamics: Dynamics::ControlIsVelocity,
            running_cost: RunningCost::One,
            exit_cost: ExitCost::Zero,
            lambda: 1.0,
            geometry: DomainGeometry::SquareBoundary,
            control_a: ControlSet::Ball { radius: 1.0 },
            control_b: ControlSet::Singleton,
        },
        BuiltinName::StripFlat => ProblemDef {
            name: name.as_str().into(),
            dynamics: Dynamics::Horizontal,
            running_cost: RunningCost::One,
            exit_cost: ExitCost::Zero,
            lambda: params.delta,
            geometry: DomainGeometry::VerticalEdges,
            control_a: ControlSet::Ball { radius: 1.0 },
            control_b: ControlSet::Singleton,
        },
        BuiltinName::VanDerPol => ProblemDef {
            name: name.as_str().into(),
            dynamics: Dynamics::VanDerPol,
            running_cost: RunningCost::Norm,
            exit_cost: ExitCost::Zero,
            lambda: 1.0,
            geometry: DomainGeometry::BallTarget { rho: params.rho },
            control_a: ControlSet::Interval { lo: -1.0, hi: 1.0 },
            control_b: ControlSet::Singleton,
        },
        BuiltinName::PursuitEvasion => ProblemDef {
            name: name.as_str().into(),
            dynamics: Dynamics::PursuitEvasion,
            // the quadratic form from the Hamiltonian display; the linear
            // variant is not strictly positive on the box
            running_cost: RunningCost::ShiftedSquare,
            exit_cost: ExitCost::Zero,
            lambda: 1.0,
            geometry: DomainGeometry::BallTarget { rho: params.rho },
            control_a: ControlSet::Ball { radius: 1.0 },
            control_b: ControlSet::Ball { radius: 0.5 },
        },
    };
    Ok(def)
}

/// Samples the problem's control sets: `n_a` player samples and `n_b`
/// adversary samples (ball sets add the zero control on top).
pub fn sample_controls(problem: &ProblemDef, n_a: usize, n_b: usize) -> Result<ControlGrid> {
    if n_a < 1 || n_b < 1 {
        return Err(Error::InvalidParam(
            "control sample counts must be at least 1".into(),
        ));
    }
    Ok(ControlGrid {
        a: problem.control_a.sample(n_a),
        b: problem.control_b.sample(n_b),
    })
}

/// H(x, p) = min over sampled b of max over sampled a of (-f.p - l).
pub fn hamiltonian(problem: &ProblemDef, controls: &ControlGrid, x: [f64; 2], p: [f64; 2]) -> f64 {
    let mut outer = f64::INFINITY;
    for &b in &controls.b {
        let mut inner = f64::NEG_INFINITY;
        for &a in &controls.a {
            let f = problem.dynamics.eval(x, a, b);
            let l = problem.running_cost.eval(x, a, b);
            let v = -(f[0] * p[0] + f[1] * p[1]) - l;
            if v > inner {
                inner = v;
            }
        }
        if inner < outer {
            outer = inner;
        }
    }
    outer
}
