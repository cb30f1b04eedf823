//! Named test problems with their initial data and source terms.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::oracle;

/// Semilinear source `f(u)` with a declared Lipschitz bound.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Nonlinearity {
    Zero,
    /// `√(1 + u²)`, Lipschitz constant 1.
    #[serde(rename = "sqrt1pu2")]
    SqrtOnePlusSquare,
    Identity,
    #[serde(skip)]
    Custom {
        f: fn(f64) -> f64,
        lipschitz: f64,
    },
}

impl Nonlinearity {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::SqrtOnePlusSquare => u.hypot(1.0),
            Nonlinearity::Identity => u,
            Nonlinearity::Custom { f, .. } => f(u),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::SqrtOnePlusSquare | Nonlinearity::Identity => 1.0,
            Nonlinearity::Custom { lipschitz, .. } => *lipschitz,
        }
    }

    /// True when `f` does not depend on `u`, so one linear solve per step suffices.
    pub fn is_constant(&self) -> bool {
        matches!(self, Nonlinearity::Zero)
    }
}

// Custom variants compare by function address.
impl PartialEq for Nonlinearity {
    fn eq(&self, other: &Self) -> bool {
        use Nonlinearity::*;
        match (self, other) {
            (Zero, Zero) | (SqrtOnePlusSquare, SqrtOnePlusSquare) | (Identity, Identity) => true,
            (Custom { f, lipschitz }, Custom { f: g, lipschitz: l }) => std::ptr::fn_addr_eq(*f, *g) && lipschitz == l,
            _ => false,
        }
    }
}

/// Initial value `u_0`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialData {
    /// `xy(1-x)(1-y)`
    CaseA,
    /// Indicator of the quarter disk `x² + y² ≤ 1`.
    CaseB,
    /// `sin(kπx) sin(lπy)`
    Sine {
        k: u32,
        l: u32,
    },
    Constant(f64),
    #[serde(skip)]
    Custom(fn(Point) -> f64),
}

impl InitialData {
    pub fn eval(&self, p: Point) -> f64 {
        let [x, y] = p;
        match self {
            InitialData::CaseA => x * y * (1.0 - x) * (1.0 - y),
            InitialData::CaseB => {
                if x * x + y * y <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            InitialData::Sine { k, l } => (f64::from(*k) * PI * x).sin() * (f64::from(*l) * PI * y).sin(),
            InitialData::Constant(c) => *c,
            InitialData::Custom(f) => f(p),
        }
    }

    /// Discontinuous data whose projection needs cut-cell quadrature.
    pub fn is_quarter_disk(&self) -> bool {
        matches!(self, InitialData::CaseB)
    }
}

impl PartialEq for InitialData {
    fn eq(&self, other: &Self) -> bool {
        use InitialData::*;
        match (self, other) {
            (CaseA, CaseA) | (CaseB, CaseB) => true,
            (Sine { k, l }, Sine { k: k2, l: l2 }) => k == k2 && l == l2,
            (Constant(a), Constant(b)) => a == b,
            (Custom(f), Custom(g)) => std::ptr::fn_addr_eq(*f, *g),
            _ => false,
        }
    }
}

/// Named problem setups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemCase {
    /// Smooth initial data, `f(u) = √(1+u²)`.
    A,
    /// Quarter-disk indicator initial data, `f(u) = √(1+u²)`.
    B,
    /// Single mode `sin(πx) sin(πy)` with `f ≡ 0`; exact solution known.
    Manufactured,
    /// Case (a) initial data with `f ≡ 0`.
    Linear,
}

impl ProblemCase {
    pub fn initial_data(&self) -> InitialData {
        match self {
            ProblemCase::A | ProblemCase::Linear => InitialData::CaseA,
            ProblemCase::B => InitialData::CaseB,
            ProblemCase::Manufactured => InitialData::Sine { k: 1, l: 1 },
        }
    }

    pub fn nonlinearity(&self) -> Nonlinearity {
        match self {
            ProblemCase::A | ProblemCase::B => Nonlinearity::SqrtOnePlusSquare,
            ProblemCase::Manufactured | ProblemCase::Linear => Nonlinearity::Zero,
        }
    }

    /// Exact solution at time `t`, when one is available.
    pub fn exact_solution(&self, alpha: f64, t: f64) -> Option<impl Fn(Point) -> f64> {
        match self {
            ProblemCase::Manufactured => {
                let amp = oracle::exact_single_mode(alpha, 1, 1, t).ok()?;
                Some(move |p: Point| amp * (PI * p[0]).sin() * (PI * p[1]).sin())
            }
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProblemCase::A => "a",
            ProblemCase::B => "b",
            ProblemCase::Manufactured => "manufactured",
            ProblemCase::Linear => "linear",
        }
    }
}

impl fmt::Display for ProblemCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" => Ok(ProblemCase::A),
            "b" => Ok(ProblemCase::B),
            "manufactured" => Ok(ProblemCase::Manufactured),
            "linear" => Ok(ProblemCase::Linear),
            _ => Err(Error::InvalidConfig(format!("unknown case '{s}' (expected a, b, manufactured or linear)"))),
        }
    }
}
