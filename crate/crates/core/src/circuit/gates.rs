//! Single-qubit gate library for easy cycles.

use crate::error::{Error, Result};
use crate::linalg::{mat2_mul, Mat2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

/// A single-qubit gate: either a named gate with parameters or an explicit matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum GateSpec {
    Named { name: String, params: Vec<f64> },
    Matrix(Mat2<f64>),
}

impl GateSpec {
    pub fn named(name: &str, params: &[f64]) -> Self {
        GateSpec::Named { name: name.to_string(), params: params.to_vec() }
    }

    pub fn identity() -> Self {
        Self::named("i", &[])
    }

    pub fn is_identity_name(&self) -> bool {
        matches!(self, GateSpec::Named { name, .. } if name == "i" || name == "id")
    }

    pub fn matrix(&self) -> Result<Mat2<f64>> {
        match self {
            GateSpec::Matrix(m) => Ok(*m),
            GateSpec::Named { name, params } => named_matrix(name, params),
        }
    }
}

fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn expect_params(name: &str, params: &[f64], k: usize) -> Result<()> {
    if params.len() != k {
        return Err(Error::UnsupportedGate(format!("{name} takes {k} parameter(s), got {}", params.len())));
    }
    Ok(())
}

/// Matrix of a named gate.
pub fn named_matrix(name: &str, params: &[f64]) -> Result<Mat2<f64>> {
    let z = cx(0.0, 0.0);
    let o = cx(1.0, 0.0);
    let h = FRAC_1_SQRT_2;
    let fixed = |m: Mat2<f64>| -> Result<Mat2<f64>> {
        expect_params(name, params, 0)?;
        Ok(m)
    };
    match name {
        "i" | "id" => fixed([[o, z], [z, o]]),
        "x" => fixed([[z, o], [o, z]]),
        "y" => fixed([[z, cx(0.0, -1.0)], [cx(0.0, 1.0), z]]),
        "z" => fixed([[o, z], [z, cx(-1.0, 0.0)]]),
        "h" => fixed([[cx(h, 0.0), cx(h, 0.0)], [cx(h, 0.0), cx(-h, 0.0)]]),
        "s" => fixed([[o, z], [z, cx(0.0, 1.0)]]),
        "sdg" => fixed([[o, z], [z, cx(0.0, -1.0)]]),
        "t" => fixed([[o, z], [z, Complex64::from_polar(1.0, FRAC_PI_4)]]),
        "tdg" => fixed([[o, z], [z, Complex64::from_polar(1.0, -FRAC_PI_4)]]),
        // X_{π/2} = exp(-iπ/4 X)
        "sx" => fixed([[cx(h, 0.0), cx(0.0, -h)], [cx(0.0, -h), cx(h, 0.0)]]),
        "sxdg" => fixed([[cx(h, 0.0), cx(0.0, h)], [cx(0.0, h), cx(h, 0.0)]]),
        "rx" => {
            expect_params(name, params, 1)?;
            let (s, c) = (params[0] / 2.0).sin_cos();
            Ok([[cx(c, 0.0), cx(0.0, -s)], [cx(0.0, -s), cx(c, 0.0)]])
        }
        "ry" => {
            expect_params(name, params, 1)?;
            let (s, c) = (params[0] / 2.0).sin_cos();
            Ok([[cx(c, 0.0), cx(-s, 0.0)], [cx(s, 0.0), cx(c, 0.0)]])
        }
        "rz" => {
            expect_params(name, params, 1)?;
            let a = params[0] / 2.0;
            Ok([[Complex64::from_polar(1.0, -a), z], [z, Complex64::from_polar(1.0, a)]])
        }
        "p" | "phase" => {
            expect_params(name, params, 1)?;
            Ok([[o, z], [z, Complex64::from_polar(1.0, params[0])]])
        }
        "u" | "u3" => {
            expect_params(name, params, 3)?;
            let (theta, phi, lam) = (params[0], params[1], params[2]);
            let (s, c) = (theta / 2.0).sin_cos();
            Ok([
                [cx(c, 0.0), -Complex64::from_polar(s, lam)],
                [Complex64::from_polar(s, phi), Complex64::from_polar(c, phi + lam)],
            ])
        }
        other => Err(Error::UnsupportedGate(other.to_string())),
    }
}

/// Accumulates gates per qubit and emits one easy-cycle slot per qubit.
#[derive(Debug, Clone)]
pub(crate) struct SlotAccumulator {
    slots: Vec<Option<GateSpec>>,
}

impl SlotAccumulator {
    pub fn new(n: usize) -> Self {
        SlotAccumulator { slots: vec![None; n] }
    }

    /// Appends `g` after whatever is already pending on qubit `q`.
    pub fn push(&mut self, q: usize, g: GateSpec) {
        let merged = match self.slots[q].take() {
            None => g,
            Some(prev) => {
                let a = prev.matrix().expect("accumulated gate has a matrix");
                let b = g.matrix().expect("pushed gate has a matrix");
                GateSpec::Matrix(mat2_mul(&b, &a))
            }
        };
        self.slots[q] = Some(merged);
    }

    pub fn drain(&mut self) -> Vec<GateSpec> {
        self.slots.iter_mut().map(|s| s.take().unwrap_or_else(GateSpec::identity)).collect()
    }
}

/// Wire form of an easy-cycle gate.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub(crate) enum EasyGateJson {
    Matrix { q: usize, matrix: [[f64; 2]; 4] },
    Named {
        q: usize,
        name: String,
        #[serde(default)]
        params: Vec<f64>,
    },
}

impl EasyGateJson {
    pub fn from_spec(q: usize, g: &GateSpec) -> Self {
        match g {
            GateSpec::Named { name, params } => EasyGateJson::Named { q, name: name.clone(), params: params.clone() },
            GateSpec::Matrix(m) => EasyGateJson::Matrix {
                q,
                matrix: [
                    [m[0][0].re, m[0][0].im],
                    [m[0][1].re, m[0][1].im],
                    [m[1][0].re, m[1][0].im],
                    [m[1][1].re, m[1][1].im],
                ],
            },
        }
    }

    pub fn qubit(&self) -> usize {
        match self {
            EasyGateJson::Matrix { q, .. } | EasyGateJson::Named { q, .. } => *q,
        }
    }

    pub fn into_spec(self) -> GateSpec {
        match self {
            EasyGateJson::Named { name, params, .. } => GateSpec::Named { name, params },
            EasyGateJson::Matrix { matrix: e, .. } => GateSpec::Matrix([
                [cx(e[0][0], e[0][1]), cx(e[1][0], e[1][1])],
                [cx(e[2][0], e[2][1]), cx(e[3][0], e[3][1])],
            ]),
        }
    }
}
