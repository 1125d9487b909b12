use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::nets::{BirnnParams, FfnnParams, LinParams, RnnCell};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lin,
    Ffnn,
    Birnn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Lin, ModelKind::Ffnn, ModelKind::Birnn];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Lin => "lin",
            ModelKind::Ffnn => "ffnn",
            ModelKind::Birnn => "birnn",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lin" | "linear" => Ok(ModelKind::Lin),
            "ffnn" | "ff" => Ok(ModelKind::Ffnn),
            "birnn" | "rnn" => Ok(ModelKind::Birnn),
            other => Err(Error::Model(format!("unknown model kind {other:?}"))),
        }
    }
}

/// A named parameter array in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: &'static str,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    /// Weights carry the L2 penalty, biases do not.
    pub penalized: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    Lin(LinParams),
    Ffnn(FfnnParams),
    Birnn(BirnnParams),
}

fn t1(name: &'static str, a: &Array1<f64>, penalized: bool) -> Tensor {
    Tensor { name, shape: vec![a.len()], data: a.to_vec(), penalized }
}

fn t2(name: &'static str, a: &Array2<f64>, penalized: bool) -> Tensor {
    Tensor { name, shape: vec![a.nrows(), a.ncols()], data: a.iter().copied().collect(), penalized }
}

fn t0(name: &'static str, v: f64) -> Tensor {
    Tensor { name, shape: vec![], data: vec![v], penalized: false }
}

impl Params {
    pub fn kind(&self) -> ModelKind {
        match self {
            Params::Lin(_) => ModelKind::Lin,
            Params::Ffnn(_) => ModelKind::Ffnn,
            Params::Birnn(_) => ModelKind::Birnn,
        }
    }

    /// Number of input columns K.
    pub fn inputs(&self) -> usize {
        match self {
            Params::Lin(p) => p.w.len(),
            Params::Ffnn(p) => p.w1.ncols(),
            Params::Birnn(p) => p.fw.win.ncols(),
        }
    }

    /// Hidden size H (per direction for the BiRNN), 0 for Lin.
    pub fn hidden(&self) -> usize {
        match self {
            Params::Lin(_) => 0,
            Params::Ffnn(p) => p.b1.len(),
            Params::Birnn(p) => p.fw.b.len(),
        }
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Array1<f64> {
        match self {
            Params::Lin(p) => p.predict(x),
            Params::Ffnn(p) => p.predict(x),
            Params::Birnn(p) => p.predict(x),
        }
    }

    /// Gradient of the loss for one piece given `dy = dL/dy`, flattened.
    pub fn backward(&self, x: ArrayView2<f64>, dy: ArrayView1<f64>) -> Vec<f64> {
        let g = match self {
            Params::Lin(p) => Params::Lin(p.backward(x, dy)),
            Params::Ffnn(p) => Params::Ffnn(p.backward(x, dy)),
            Params::Birnn(p) => Params::Birnn(p.backward(x, dy)),
        };
        g.to_flat()
    }

    /// `∂y_t/∂x_t` for every step, N×K.
    pub fn input_gradients(&self, x: ArrayView2<f64>) -> Array2<f64> {
        match self {
            Params::Lin(p) => p.input_gradients(x),
            Params::Ffnn(p) => p.input_gradients(x),
            Params::Birnn(p) => p.input_gradients(x),
        }
    }

    pub fn tensors(&self) -> Vec<Tensor> {
        match self {
            Params::Lin(p) => vec![t1("w", &p.w, true), t0("b", p.b)],
            Params::Ffnn(p) => vec![
                t2("w1", &p.w1, true),
                t1("b1", &p.b1, false),
                t1("w2", &p.w2, true),
                t0("b2", p.b2),
            ],
            Params::Birnn(p) => vec![
                t2("fw.win", &p.fw.win, true),
                t2("fw.wrec", &p.fw.wrec, true),
                t1("fw.b", &p.fw.b, false),
                t2("bw.win", &p.bw.win, true),
                t2("bw.wrec", &p.bw.wrec, true),
                t1("bw.b", &p.bw.b, false),
                t1("v_f", &p.v_f, true),
                t1("v_b", &p.v_b, true),
                t0("c", p.c),
            ],
        }
    }

    /// Rebuilds parameters of `kind` from named arrays; shapes must agree.
    pub fn from_tensors(kind: ModelKind, tensors: &[(String, Vec<usize>, Vec<f64>)]) -> Result<Params> {
        let get = |name: &str| -> Result<(&Vec<usize>, &Vec<f64>)> {
            let (_, shape, data) = tensors
                .iter()
                .find(|(n, _, _)| n == name)
                .ok_or_else(|| Error::Model(format!("missing parameter {name:?}")))?;
            if shape.iter().product::<usize>() != data.len() {
                return Err(Error::Model(format!("parameter {name:?}: shape {shape:?} does not match {} values", data.len())));
            }
            Ok((shape, data))
        };
        let a0 = |name: &str| -> Result<f64> {
            match get(name)? {
                (s, d) if s.is_empty() => Ok(d[0]),
                (s, _) => Err(Error::Model(format!("parameter {name:?} should be scalar, has shape {s:?}"))),
            }
        };
        let a1 = |name: &str| -> Result<Array1<f64>> {
            match get(name)? {
                (s, d) if s.len() == 1 => Ok(Array1::from(d.clone())),
                (s, _) => Err(Error::Model(format!("parameter {name:?} should be a vector, has shape {s:?}"))),
            }
        };
        let a2 = |name: &str| -> Result<Array2<f64>> {
            match get(name)? {
                (s, d) if s.len() == 2 => Ok(Array2::from_shape_vec((s[0], s[1]), d.clone()).expect("shape checked")),
                (s, _) => Err(Error::Model(format!("parameter {name:?} should be a matrix, has shape {s:?}"))),
            }
        };
        let cell = |prefix: &str| -> Result<RnnCell> {
            Ok(RnnCell {
                win: a2(&format!("{prefix}.win"))?,
                wrec: a2(&format!("{prefix}.wrec"))?,
                b: a1(&format!("{prefix}.b"))?,
            })
        };
        let params = match kind {
            ModelKind::Lin => Params::Lin(LinParams { w: a1("w")?, b: a0("b")? }),
            ModelKind::Ffnn => Params::Ffnn(FfnnParams {
                w1: a2("w1")?,
                b1: a1("b1")?,
                w2: a1("w2")?,
                b2: a0("b2")?,
            }),
            ModelKind::Birnn => Params::Birnn(BirnnParams {
                fw: cell("fw")?,
                bw: cell("bw")?,
                v_f: a1("v_f")?,
                v_b: a1("v_b")?,
                c: a0("c")?,
            }),
        };
        params.check_shapes()?;
        Ok(params)
    }

    fn check_shapes(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Model(format!("inconsistent parameter shapes: {what}")));
        match self {
            Params::Lin(_) => Ok(()),
            Params::Ffnn(p) => {
                let h = p.b1.len();
                if h == 0 || p.w1.nrows() != h || p.w2.len() != h {
                    return bad("ffnn hidden size");
                }
                Ok(())
            }
            Params::Birnn(p) => {
                let h = p.fw.b.len();
                let k = p.fw.win.ncols();
                for cell in [&p.fw, &p.bw] {
                    if h == 0
                        || cell.b.len() != h
                        || cell.win.dim() != (h, k)
                        || cell.wrec.dim() != (h, h)
                    {
                        return bad("birnn cell");
                    }
                }
                if p.v_f.len() != h || p.v_b.len() != h {
                    return bad("birnn output");
                }
                Ok(())
            }
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors().into_iter().flat_map(|t| t.data).collect()
    }

    /// Same structure with values taken from `flat`.
    pub fn with_flat(&self, flat: &[f64]) -> Params {
        let mut offset = 0;
        let named: Vec<(String, Vec<usize>, Vec<f64>)> = self
            .tensors()
            .into_iter()
            .map(|t| {
                let n = t.data.len();
                let data = flat[offset..offset + n].to_vec();
                offset += n;
                (t.name.to_string(), t.shape, data)
            })
            .collect();
        assert_eq!(offset, flat.len(), "flat parameter vector has the wrong length");
        Params::from_tensors(self.kind(), &named).expect("structure preserved")
    }

    /// Per-entry L2 flag matching [`Params::to_flat`].
    pub fn penalty_mask(&self) -> Vec<bool> {
        self.tensors()
            .into_iter()
            .flat_map(|t| std::iter::repeat_n(t.penalized, t.data.len()))
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|v| v.is_finite())
    }

    /// Glorot-uniform weights, zero biases. Input columns flagged inactive
    /// get zero input weights so they never contribute.
    pub fn init(kind: ModelKind, inputs: usize, hidden: usize, active: &[bool], rng: &mut impl Rng) -> Result<Params> {
        assert_eq!(active.len(), inputs);
        if kind != ModelKind::Lin && hidden == 0 {
            return Err(Error::Model("hidden size must be at least 1".into()));
        }
        let mut glorot = |rows: usize, cols: usize, fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            Array2::from_shape_fn((rows, cols), |_| rng.random_range(-limit..=limit))
        };
        let mask_inputs = |mut w: Array2<f64>| {
            for (k, &on) in active.iter().enumerate() {
                if !on {
                    w.column_mut(k).fill(0.0);
                }
            }
            w
        };
        Ok(match kind {
            ModelKind::Lin => {
                let w = mask_inputs(glorot(1, inputs, inputs, 1));
                Params::Lin(LinParams { w: w.row(0).to_owned(), b: 0.0 })
            }
            ModelKind::Ffnn => {
                let w1 = mask_inputs(glorot(hidden, inputs, inputs, hidden));
                let w2 = glorot(1, hidden, hidden, 1).row(0).to_owned();
                Params::Ffnn(FfnnParams { w1, b1: Array1::zeros(hidden), w2, b2: 0.0 })
            }
            ModelKind::Birnn => {
                let cell = |glorot: &mut dyn FnMut(usize, usize, usize, usize) -> Array2<f64>| RnnCell {
                    win: mask_inputs(glorot(hidden, inputs, inputs, hidden)),
                    wrec: glorot(hidden, hidden, hidden, hidden),
                    b: Array1::zeros(hidden),
                };
                let fw = cell(&mut glorot);
                let bw = cell(&mut glorot);
                let v = glorot(1, 2 * hidden, 2 * hidden, 1);
                Params::Birnn(BirnnParams {
                    fw,
                    bw,
                    v_f: v.slice(ndarray::s![0, ..hidden]).to_owned(),
                    v_b: v.slice(ndarray::s![0, hidden..]).to_owned(),
                    c: 0.0,
                })
            }
        })
    }
}
