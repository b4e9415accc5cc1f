//! Abstract convex programs with linear and log-affine inequality constraints.
//!
//! Every constraint is stored as `f(x) ≤ 0` with
//!
//! ```text
//! f(x) = a·x + β − ρ·log2(1 + g·x / γ)
//! ```
//!
//! where the logarithmic term is absent for linear constraints. With `γ > 0`,
//! `g ≥ 0` and `ρ > 0` the function is convex on `x ≥ 0`. All variables carry
//! the implicit bound `x ≥ 0`.

use std::fmt::{self, Write as _};

use crate::error::{Error, Result};
use crate::scenario::SubStreamId;

const LN2: f64 = std::f64::consts::LN_2;

/// What a program variable stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarRole {
    /// Power of an aggregation group on a block.
    Power { group: usize, block: usize },
    /// Rate of a sub-stream on a block.
    Rate { stream: SubStreamId, block: usize },
    /// Auxiliary bound on the undecoded-interference rate at a receiver.
    Aux { receiver: usize, block: usize },
}

impl fmt::Display for VarRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarRole::Power { group, block } => write!(f, "p[g{}][n{}]", group + 1, block),
            VarRole::Rate { stream, block } => write!(f, "b{}[n{}]", stream, block),
            VarRole::Aux { receiver, block } => write!(f, "c[r{}][n{}]", receiver + 1, block),
        }
    }
}

/// Provenance of a constraint inside the relaxation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintTag {
    /// Per-user rate target.
    RateTarget { user: usize },
    /// Suffix-capacity constraint at a chain position.
    Suffix { receiver: usize, block: usize, position: usize },
    /// Upper bound on the auxiliary variable.
    Floor { receiver: usize, block: usize },
    /// Single-position constraint of a linearized exact chain.
    Position { receiver: usize, block: usize, position: usize },
    Other,
}

impl fmt::Display for ConstraintTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintTag::RateTarget { user } => write!(f, "target[u{}]", user + 1),
            ConstraintTag::Suffix { receiver, block, position } => {
                write!(f, "suffix[r{}][n{}][k{}]", receiver + 1, block, position + 1)
            }
            ConstraintTag::Floor { receiver, block } => {
                write!(f, "aux-bound[r{}][n{}]", receiver + 1, block)
            }
            ConstraintTag::Position { receiver, block, position } => {
                write!(f, "position[r{}][n{}][k{}]", receiver + 1, block, position + 1)
            }
            ConstraintTag::Other => write!(f, "aux"),
        }
    }
}

/// `ρ·log2(1 + g·x/γ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogTerm {
    pub gamma: f64,
    pub slope: Vec<(usize, f64)>,
    pub scale: f64,
}

impl LogTerm {
    fn inner(&self, x: &[f64]) -> f64 {
        self.gamma + dot(&self.slope, x)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.scale * (dot(&self.slope, x) / self.gamma).ln_1p() / LN2
    }
}

/// One constraint `a·x + β − [ρ·log2(1 + g·x/γ)] ≤ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub tag: ConstraintTag,
    pub linear: Vec<(usize, f64)>,
    pub offset: f64,
    pub log: Option<LogTerm>,
}

impl Constraint {
    /// `a·x ≤ bound`.
    pub fn linear(tag: ConstraintTag, linear: Vec<(usize, f64)>, bound: f64) -> Self {
        Constraint { tag, linear, offset: -bound, log: None }
    }

    /// `a·x + β ≤ ρ·log2(γ + g·x) − ρ·log2(γ)`.
    pub fn log_affine(
        tag: ConstraintTag,
        linear: Vec<(usize, f64)>,
        offset: f64,
        gamma: f64,
        slope: Vec<(usize, f64)>,
        scale: f64,
    ) -> Self {
        Constraint {
            tag,
            linear,
            offset,
            log: Some(LogTerm { gamma, slope, scale }),
        }
    }

    pub fn is_log_affine(&self) -> bool {
        self.log.is_some()
    }

    /// `f(x)`; the constraint holds when this is `≤ 0`.
    pub fn value(&self, x: &[f64]) -> f64 {
        let mut v = dot(&self.linear, x) + self.offset;
        if let Some(l) = &self.log {
            v -= l.value(x);
        }
        v
    }

    /// Adds `scale·∇f(x)` into `out`.
    pub fn add_gradient(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        for &(j, a) in &self.linear {
            out[j] += scale * a;
        }
        if let Some(l) = &self.log {
            let w = l.scale / (LN2 * l.inner(x));
            for &(j, g) in &l.slope {
                out[j] -= scale * w * g;
            }
        }
    }

    /// Dense gradient.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.add_gradient(x, 1.0, &mut g);
        g
    }

    /// Coefficient `κ` such that `∇²f(x) = κ·g gᵀ` (zero for linear rows).
    pub fn curvature(&self, x: &[f64]) -> f64 {
        match &self.log {
            Some(l) => {
                let d = l.inner(x);
                l.scale / (LN2 * d * d)
            }
            None => 0.0,
        }
    }

    /// Domain of the log term: `γ + g·x > 0`.
    pub fn in_domain(&self, x: &[f64]) -> bool {
        self.log.as_ref().map_or(true, |l| l.inner(x) > 0.0)
    }

    pub fn variables(&self) -> impl Iterator<Item = usize> + '_ {
        self.linear
            .iter()
            .map(|&(j, _)| j)
            .chain(self.log.iter().flat_map(|l| l.slope.iter().map(|&(j, _)| j)))
    }
}

/// Linear objective with convex inequality constraints over `x ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexProgram {
    pub vars: Vec<VarRole>,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

impl ConvexProgram {
    pub fn new(vars: Vec<VarRole>) -> Self {
        let n = vars.len();
        ConvexProgram { vars, objective: vec![0.0; n], constraints: Vec::new() }
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn var_index(&self, role: VarRole) -> Option<usize> {
        self.vars.iter().position(|&v| v == role)
    }

    /// Structural self-check: indices in range, every log term concave with
    /// a valid domain on `x ≥ 0`.
    pub fn audit(&self) -> Result<()> {
        let n = self.num_vars();
        if self.objective.len() != n {
            return Err(Error::Build("objective length differs from variable count".into()));
        }
        for c in &self.constraints {
            if c.variables().any(|j| j >= n) {
                return Err(Error::Build(format!("{}: variable index out of range", c.tag)));
            }
            if !c.offset.is_finite() || c.linear.iter().any(|(_, a)| !a.is_finite()) {
                return Err(Error::Build(format!("{}: non-finite coefficient", c.tag)));
            }
            if let Some(l) = &c.log {
                if !(l.gamma > 0.0) || !l.gamma.is_finite() {
                    return Err(Error::Build(format!("{}: log offset must be positive", c.tag)));
                }
                if !(l.scale > 0.0) {
                    return Err(Error::Build(format!("{}: log scale must be positive", c.tag)));
                }
                if l.slope.iter().any(|&(_, g)| !(g >= 0.0) || !g.is_finite()) {
                    return Err(Error::Build(format!("{}: log slope must be nonnegative", c.tag)));
                }
            }
        }
        Ok(())
    }

    pub fn count_tagged(&self, pred: impl Fn(&ConstraintTag) -> bool) -> usize {
        self.constraints.iter().filter(|c| pred(&c.tag)).count()
    }

    /// Deterministic text dump, one constraint per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "variables {}", self.num_vars());
        for (j, v) in self.vars.iter().enumerate() {
            let _ = writeln!(out, "  x{j} = {v}");
        }
        let _ = write!(out, "minimize");
        for (j, c) in self.objective.iter().enumerate() {
            if *c != 0.0 {
                let _ = write!(out, " {:+.6}*x{j}", c);
            }
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "constraints {}", self.constraints.len());
        for c in &self.constraints {
            let _ = write!(out, "  {}:", c.tag);
            for &(j, a) in &c.linear {
                let _ = write!(out, " {:+.6}*x{j}", a);
            }
            if c.offset != 0.0 {
                let _ = write!(out, " {:+.6}", c.offset);
            }
            match &c.log {
                Some(l) => {
                    let _ = write!(out, " <= {:.6}*log2(1 + (", l.scale);
                    for (k, &(j, g)) in l.slope.iter().enumerate() {
                        if k > 0 {
                            let _ = write!(out, " ");
                        }
                        let _ = write!(out, "{:+.6}*x{j}", g);
                    }
                    let _ = writeln!(out, ")/{:.6})", l.gamma);
                }
                None => {
                    let _ = writeln!(out, " <= 0");
                }
            }
        }
        out
    }
}

pub(crate) fn dot(a: &[(usize, f64)], x: &[f64]) -> f64 {
    a.iter().map(|&(j, v)| v * x[j]).sum()
}
