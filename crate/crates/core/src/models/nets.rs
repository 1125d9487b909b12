//! The three predictors: forward pass, parameter gradients and input gradients.
//!
//! Every `backward` takes `dy = dL/dy` for one piece and returns the
//! gradient in the same shape as the parameters.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

#[derive(Debug, Clone, PartialEq)]
pub struct LinParams {
    pub w: Array1<f64>,
    pub b: f64,
}

impl LinParams {
    pub fn predict(&self, x: ArrayView2<f64>) -> Array1<f64> {
        x.dot(&self.w) + self.b
    }

    pub fn backward(&self, x: ArrayView2<f64>, dy: ArrayView1<f64>) -> LinParams {
        LinParams {
            w: x.t().dot(&dy),
            b: dy.sum(),
        }
    }

    pub fn input_gradients(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut g = Array2::zeros(x.raw_dim());
        g.rows_mut().into_iter().for_each(|mut r| r.assign(&self.w));
        g
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FfnnParams {
    /// H×K
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array1<f64>,
    pub b2: f64,
}

impl FfnnParams {
    fn hidden(&self, x: ArrayView2<f64>) -> Array2<f64> {
        (x.dot(&self.w1.t()) + &self.b1).mapv(f64::tanh)
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Array1<f64> {
        self.hidden(x).dot(&self.w2) + self.b2
    }

    pub fn backward(&self, x: ArrayView2<f64>, dy: ArrayView1<f64>) -> FfnnParams {
        let h = self.hidden(x);
        let w2 = h.t().dot(&dy);
        let b2 = dy.sum();
        // dA[t, j] = dy[t] * w2[j] * (1 - h[t, j]^2)
        let mut da = h.mapv(|v| 1.0 - v * v);
        da *= &self.w2;
        da *= &dy.insert_axis(Axis(1));
        FfnnParams {
            w1: da.t().dot(&x),
            b1: da.sum_axis(Axis(0)),
            w2,
            b2,
        }
    }

    pub fn input_gradients(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut d = self.hidden(x).mapv(|v| 1.0 - v * v);
        d *= &self.w2;
        d.dot(&self.w1)
    }
}

/// One direction of the bidirectional network.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnCell {
    /// H×K
    pub win: Array2<f64>,
    /// H×H
    pub wrec: Array2<f64>,
    pub b: Array1<f64>,
}

impl RnnCell {
    /// Hidden states indexed by time; `reverse` runs from the sequence end.
    fn run(&self, x: ArrayView2<f64>, reverse: bool) -> Array2<f64> {
        let n = x.nrows();
        let hsize = self.b.len();
        let drive = x.dot(&self.win.t()) + &self.b;
        let mut h = Array2::zeros((n, hsize));
        let mut prev = Array1::zeros(hsize);
        for step in 0..n {
            let t = if reverse { n - 1 - step } else { step };
            let a = &drive.row(t) + &self.wrec.dot(&prev);
            let ht = a.mapv(f64::tanh);
            h.row_mut(t).assign(&ht);
            prev = ht;
        }
        h
    }

    /// BPTT for one direction given `dh_out[t] = dL/dh_t` from the output layer.
    fn backward(&self, x: ArrayView2<f64>, h: &Array2<f64>, dh_out: &Array2<f64>, reverse: bool) -> RnnCell {
        let n = x.nrows();
        let hsize = self.b.len();
        let mut g = RnnCell {
            win: Array2::zeros(self.win.raw_dim()),
            wrec: Array2::zeros(self.wrec.raw_dim()),
            b: Array1::zeros(hsize),
        };
        let mut da = Array2::zeros((n, hsize));
        let mut carry: Array1<f64> = Array1::zeros(hsize);
        for step in (0..n).rev() {
            let t = if reverse { n - 1 - step } else { step };
            let dh = &dh_out.row(t) + &carry;
            let dat = dh * &h.row(t).mapv(|v| 1.0 - v * v);
            carry = self.wrec.t().dot(&dat);
            if step > 0 {
                let prev_t = if reverse { t + 1 } else { t - 1 };
                g.wrec += &outer(&dat.view(), &h.row(prev_t));
            }
            da.row_mut(t).assign(&dat);
        }
        g.win = da.t().dot(&x);
        g.b = da.sum_axis(Axis(0));
        g
    }
}

fn outer(a: &ArrayView1<f64>, b: &ArrayView1<f64>) -> Array2<f64> {
    let col = a.view().insert_axis(Axis(1));
    let row = b.view().insert_axis(Axis(0));
    col.dot(&row)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BirnnParams {
    pub fw: RnnCell,
    pub bw: RnnCell,
    pub v_f: Array1<f64>,
    pub v_b: Array1<f64>,
    pub c: f64,
}

impl BirnnParams {
    fn states(&self, x: ArrayView2<f64>) -> (Array2<f64>, Array2<f64>) {
        (self.fw.run(x, false), self.bw.run(x, true))
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Array1<f64> {
        let (hf, hb) = self.states(x);
        hf.dot(&self.v_f) + hb.dot(&self.v_b) + self.c
    }

    pub fn backward(&self, x: ArrayView2<f64>, dy: ArrayView1<f64>) -> BirnnParams {
        let (hf, hb) = self.states(x);
        let dy_col = dy.insert_axis(Axis(1));
        let dhf = &dy_col * &self.v_f.view().insert_axis(Axis(0));
        let dhb = &dy_col * &self.v_b.view().insert_axis(Axis(0));
        BirnnParams {
            fw: self.fw.backward(x, &hf, &dhf, false),
            bw: self.bw.backward(x, &hb, &dhb, true),
            v_f: hf.t().dot(&dy),
            v_b: hb.t().dot(&dy),
            c: dy.sum(),
        }
    }

    /// Same-step partials `∂y_t/∂x_t`. Since `h^fw_t` depends on inputs up to
    /// `t` and `h^bw_t` on inputs from `t`, this is also the total derivative
    /// of `y_t` with respect to `x_t`.
    pub fn input_gradients(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let (hf, hb) = self.states(x);
        let mut df = hf.mapv(|v| 1.0 - v * v);
        df *= &self.v_f;
        let mut db = hb.mapv(|v| 1.0 - v * v);
        db *= &self.v_b;
        df.dot(&self.fw.win) + db.dot(&self.bw.win)
    }
}
