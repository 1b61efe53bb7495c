use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::LabError;

/// Norms defining the hypothesis ball `K = {‖w‖ ≤ B}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    L2,
    Linf,
}

impl Norm {
    pub fn eval(self, v: &[f64]) -> f64 {
        match self {
            Norm::L1 => v.iter().map(|x| x.abs()).sum(),
            Norm::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Norm::Linf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    pub fn dual(self) -> Norm {
        match self {
            Norm::L1 => Norm::Linf,
            Norm::L2 => Norm::L2,
            Norm::Linf => Norm::L1,
        }
    }

    /// Dual norm `‖u‖_*` of `u`.
    pub fn eval_dual(self, u: &[f64]) -> f64 {
        self.dual().eval(u)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Norm::L1 => "l1",
            Norm::L2 => "l2",
            Norm::Linf => "linf",
        }
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Norm {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Norm::L1),
            "l2" => Ok(Norm::L2),
            "linf" | "l_inf" | "inf" => Ok(Norm::Linf),
            other => Err(LabError::UnsupportedNorm(other.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms_and_duals() {
        let v = [3.0, -4.0];
        assert_eq!(Norm::L1.eval(&v), 7.0);
        assert_eq!(Norm::L2.eval(&v), 5.0);
        assert_eq!(Norm::Linf.eval(&v), 4.0);
        assert_eq!(Norm::L1.eval_dual(&v), 4.0);
        assert_eq!(Norm::Linf.dual(), Norm::L1);
        assert_eq!("LINF".parse::<Norm>().unwrap(), Norm::Linf);
        assert!("l3".parse::<Norm>().is_err());
    }
}
