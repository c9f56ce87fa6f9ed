use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pair::{Vector, VectorPair};
use crate::problem::{ProblemConstants, ProblemSpec};
use crate::sets::FeasibleSet;

pub const BUNDLED_TRAIN_CSV: &str = include_str!("../../data/hyperopt_train.csv");
pub const BUNDLED_VAL_CSV: &str = include_str!("../../data/hyperopt_val.csv");

/// Dense labeled samples, features row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<f64>,
    pub labels: Vec<i64>,
    pub n_features: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }
}

/// Parse CSV text: one sample per row, trailing integer label. A first row with any
/// non-numeric field is treated as a header.
pub fn parse_labeled_csv(text: &str, source: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(text.as_bytes());
    let err = |row: usize, message: String| Error::Csv { path: source.to_string(), row, message };
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut n_features: Option<usize> = None;
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| err(row, e.to_string()))?;
        if rec.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        let numeric = rec.iter().all(|f| f.trim().parse::<f64>().is_ok());
        if !numeric {
            if i == 0 {
                continue;
            }
            return Err(err(row, "non-numeric field".into()));
        }
        if rec.len() < 2 {
            return Err(err(row, "need at least one feature and a label".into()));
        }
        let nf = rec.len() - 1;
        match n_features {
            None => n_features = Some(nf),
            Some(n) if n != nf => return Err(err(row, format!("expected {} fields, found {}", n + 1, rec.len()))),
            _ => {}
        }
        for f in rec.iter().take(nf) {
            let v: f64 = f.trim().parse().expect("checked numeric");
            if !v.is_finite() {
                return Err(err(row, "non-finite feature".into()));
            }
            features.push(v);
        }
        let raw = rec[nf].trim();
        let label = raw.parse::<i64>().or_else(|_| {
            let v: f64 = raw.parse().expect("checked numeric");
            if v.fract() == 0.0 && v.abs() < 1e15 {
                Ok(v as i64)
            } else {
                Err(err(row, format!("label {raw} is not an integer")))
            }
        })?;
        labels.push(label);
    }
    let n_features = n_features.ok_or_else(|| err(0, "no data rows".into()))?;
    Ok(Dataset { features, labels, n_features })
}

fn read_csv(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
    parse_labeled_csv(&text, &path.display().to_string())
}

/// Box bounds for the per-weight log-regularizers and the weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperOptOptions {
    pub reg_lo: f64,
    pub reg_hi: f64,
    pub weight_bound: f64,
}

impl Default for HyperOptOptions {
    fn default() -> Self {
        HyperOptOptions { reg_lo: -6.0, reg_hi: 1.0, weight_bound: 10.0 }
    }
}

/// Softmax regression data with class indices already mapped to 0..C.
#[derive(Debug)]
struct Split {
    x: Vec<f64>,
    y: Vec<usize>,
    n: usize,
}

#[derive(Debug)]
struct Model {
    train: Split,
    val: Split,
    n_features: usize,
    n_classes: usize,
}

impl Model {
    fn logits(&self, w: &[f64], row: &[f64], out: &mut [f64]) {
        let f = self.n_features;
        for (c, o) in out.iter_mut().enumerate() {
            *o = w[c * f..(c + 1) * f].iter().zip(row).map(|(a, b)| a * b).sum();
        }
    }

    fn softmax(logits: &mut [f64]) -> f64 {
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for l in logits.iter_mut() {
            *l = (*l - m).exp();
            s += *l;
        }
        for l in logits.iter_mut() {
            *l /= s;
        }
        m + s.ln()
    }

    /// Mean cross-entropy.
    fn loss(&self, split: &Split, w: &[f64]) -> f64 {
        let f = self.n_features;
        let mut buf = vec![0.0; self.n_classes];
        let mut total = 0.0;
        for i in 0..split.n {
            let row = &split.x[i * f..(i + 1) * f];
            self.logits(w, row, &mut buf);
            let target = buf[split.y[i]];
            let lse = Self::softmax(&mut buf);
            total += lse - target;
        }
        total / split.n as f64
    }

    fn loss_grad(&self, split: &Split, w: &[f64]) -> Vec<f64> {
        let f = self.n_features;
        let mut buf = vec![0.0; self.n_classes];
        let mut g = vec![0.0; w.len()];
        let inv = 1.0 / split.n as f64;
        for i in 0..split.n {
            let row = &split.x[i * f..(i + 1) * f];
            self.logits(w, row, &mut buf);
            Self::softmax(&mut buf);
            buf[split.y[i]] -= 1.0;
            for c in 0..self.n_classes {
                let s = buf[c] * inv;
                for (gj, xj) in g[c * f..(c + 1) * f].iter_mut().zip(row) {
                    *gj += s * xj;
                }
            }
        }
        g
    }

    fn loss_hvp(&self, split: &Split, w: &[f64], v: &[f64]) -> Vec<f64> {
        let f = self.n_features;
        let k = self.n_classes;
        let mut p = vec![0.0; k];
        let mut u = vec![0.0; k];
        let mut out = vec![0.0; w.len()];
        let inv = 1.0 / split.n as f64;
        for i in 0..split.n {
            let row = &split.x[i * f..(i + 1) * f];
            self.logits(w, row, &mut p);
            Self::softmax(&mut p);
            self.logits(v, row, &mut u);
            let pu: f64 = p.iter().zip(&u).map(|(a, b)| a * b).sum();
            for c in 0..k {
                let s = p[c] * (u[c] - pu) * inv;
                for (oj, xj) in out[c * f..(c + 1) * f].iter_mut().zip(row) {
                    *oj += s * xj;
                }
            }
        }
        out
    }

    fn accuracy(&self, split: &Split, w: &[f64]) -> f64 {
        let f = self.n_features;
        let mut buf = vec![0.0; self.n_classes];
        let mut hits = 0usize;
        for i in 0..split.n {
            self.logits(w, &split.x[i * f..(i + 1) * f], &mut buf);
            let mut best = 0;
            for c in 1..self.n_classes {
                if buf[c] > buf[best] {
                    best = c;
                }
            }
            hits += usize::from(best == split.y[i]);
        }
        hits as f64 / split.n as f64
    }
}

/// Per-weight ℓ2 hyperparameter optimization for softmax regression.
///
/// Outer variable: log-regularizers λ (one per weight); inner variable: weights w,
/// both laid out class-major (`c * n_features + j`). Inner objective is training
/// cross-entropy + Σ exp(λ_i) w_i²; outer objective is validation cross-entropy.
#[derive(Debug, Clone)]
pub struct HyperOpt {
    pub spec: ProblemSpec,
    pub classes: Vec<i64>,
    model: Arc<Model>,
}

impl HyperOpt {
    pub fn n_features(&self) -> usize {
        self.model.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.model.n_classes
    }

    pub fn val_accuracy(&self, w: &Vector) -> f64 {
        self.model.accuracy(&self.model.val, w.as_slice())
    }

    pub fn train_accuracy(&self, w: &Vector) -> f64 {
        self.model.accuracy(&self.model.train, w.as_slice())
    }

    pub fn val_loss(&self, w: &Vector) -> f64 {
        self.model.loss(&self.model.val, w.as_slice())
    }

    /// Starting point: λ at `reg`, w = 0.
    pub fn initial_point(&self, reg: f64) -> VectorPair {
        let d = self.model.n_classes * self.model.n_features;
        VectorPair::new(Vector::from_element(d, reg), Vector::zeros(d))
    }

    pub fn from_datasets(train: Dataset, val: Dataset, opts: HyperOptOptions) -> Result<Self> {
        if train.n_features != val.n_features {
            return Err(Error::InvalidConfig(format!(
                "feature count mismatch: train {} vs val {}",
                train.n_features, val.n_features
            )));
        }
        if !(opts.reg_lo < opts.reg_hi) || !(opts.weight_bound > 0.0) {
            return Err(Error::InvalidConfig(format!("bad hyperopt bounds {opts:?}")));
        }
        let mut classes: Vec<i64> = train.labels.clone();
        classes.sort_unstable();
        classes.dedup();
        let index = |l: i64, which: &str| {
            classes
                .binary_search(&l)
                .map_err(|_| Error::InvalidConfig(format!("{which} label {l} does not occur in the training set")))
        };
        let ty = train.labels.iter().map(|&l| index(l, "train")).collect::<Result<Vec<_>>>()?;
        let vy = val.labels.iter().map(|&l| index(l, "validation")).collect::<Result<Vec<_>>>()?;
        let nf = train.n_features;
        let k = classes.len();
        let d = k * nf;

        let mean_sq = |ds: &Dataset| (0..ds.len()).map(|i| ds.row(i).iter().map(|v| v * v).sum::<f64>()).sum::<f64>() / ds.len() as f64;
        let max_norm = |ds: &Dataset| {
            (0..ds.len()).map(|i| ds.row(i).iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max)
        };
        let max_l1 = |ds: &Dataset| (0..ds.len()).map(|i| ds.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
        let e_hi = opts.reg_hi.exp();
        let wb = opts.weight_bound;
        let sqrt_d = (d as f64).sqrt();
        let constants = ProblemConstants {
            rho_f: 0.5 * mean_sq(&val),
            // y-block bound: the inner stepsize only needs curvature in w
            rho_g: 0.5 * mean_sq(&train) + 2.0 * e_hi,
            l_g: ((2f64.sqrt() * max_norm(&train) + 2.0 * e_hi * wb * sqrt_d).powi(2)
                + (e_hi * wb * wb * sqrt_d).powi(2))
            .sqrt(),
            d_z: 0.0,
            d_f: (k as f64).ln() + 2.0 * wb * max_l1(&val),
            mu: 0.0,
        };

        let model = Arc::new(Model {
            train: Split { n: train.len(), x: train.features, y: ty },
            val: Split { n: val.len(), x: val.features, y: vy },
            n_features: nf,
            n_classes: k,
        });
        let set_x = FeasibleSet::cube(d, opts.reg_lo, opts.reg_hi)?;
        let set_y = FeasibleSet::cube(d, -wb, wb)?;
        let constants = ProblemConstants {
            d_z: (set_x.diameter().powi(2) + set_y.diameter().powi(2)).sqrt(),
            ..constants
        };

        let (m1, m2, m3, m4, m5, m6) =
            (model.clone(), model.clone(), model.clone(), model.clone(), model.clone(), model.clone());
        let spec = ProblemSpec::new(
            "hyperopt",
            set_x,
            set_y,
            move |_, w| m1.loss(&m1.val, w.as_slice()),
            move |l, w| VectorPair::new(Vector::zeros(l.len()), Vector::from_vec(m2.loss_grad(&m2.val, w.as_slice()))),
            move |l, w| {
                let reg: f64 = l.iter().zip(w.iter()).map(|(li, wi)| li.exp() * wi * wi).sum();
                m3.loss(&m3.train, w.as_slice()) + reg
            },
            move |l, w| {
                let mut gy = m4.loss_grad(&m4.train, w.as_slice());
                let mut gx = vec![0.0; l.len()];
                for i in 0..l.len() {
                    let e = l[i].exp();
                    gx[i] = e * w[i] * w[i];
                    gy[i] += 2.0 * e * w[i];
                }
                VectorPair::new(Vector::from_vec(gx), Vector::from_vec(gy))
            },
            constants,
        )
        .with_hvp_g(
            move |l, w, v| {
                let mut out = m5.loss_hvp(&m5.train, w.as_slice(), v.as_slice());
                for i in 0..l.len() {
                    out[i] += 2.0 * l[i].exp() * v[i];
                }
                Vector::from_vec(out)
            },
            |l, w, v| Vector::from_iterator(l.len(), (0..l.len()).map(|i| 2.0 * l[i].exp() * w[i] * v[i])),
        )
        .with_hvp_f(
            move |_, w, v| Vector::from_vec(m6.loss_hvp(&m6.val, w.as_slice(), v.as_slice())),
            |l, _, _| Vector::zeros(l.len()),
        );
        Ok(HyperOpt { spec, classes, model })
    }

    /// The shipped synthetic 2-class, 40-feature, 500-sample dataset.
    pub fn bundled(opts: HyperOptOptions) -> Result<Self> {
        let train = parse_labeled_csv(BUNDLED_TRAIN_CSV, "bundled train")?;
        let val = parse_labeled_csv(BUNDLED_VAL_CSV, "bundled val")?;
        Self::from_datasets(train, val, opts)
    }
}

/// Build the hyperparameter-optimization problem from two CSV files.
pub fn load_hyperopt(train_csv: &Path, val_csv: &Path, reg_box: (f64, f64)) -> Result<HyperOpt> {
    let opts = HyperOptOptions { reg_lo: reg_box.0, reg_hi: reg_box.1, ..HyperOptOptions::default() };
    HyperOpt::from_datasets(read_csv(train_csv)?, read_csv(val_csv)?, opts)
}
