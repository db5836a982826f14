//! Diagonal channels and monotone channel paths `H(t)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{loewner_leq, SymMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalChannel {
    pub gains: Vec<f64>,
}

impl DiagonalChannel {
    pub fn new(gains: Vec<f64>) -> Result<Self> {
        if gains.is_empty() {
            return Err(Error::InvalidInput("channel needs at least one gain".into()));
        }
        if let Some(g) = gains.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return Err(Error::InvalidInput(format!("gain {g} is not a finite nonnegative number")));
        }
        Ok(Self { gains })
    }

    pub fn scalar(n: usize, g: f64) -> Self {
        Self { gains: vec![g; n] }
    }

    pub fn dim(&self) -> usize {
        self.gains.len()
    }

    /// `diag(gains²)`, i.e. `H·Hᵀ` as a symmetric matrix.
    pub fn gram(&self) -> SymMatrix {
        SymMatrix::from_diagonal(&self.gains.iter().map(|g| g * g).collect::<Vec<_>>())
    }

    pub fn as_sym(&self) -> SymMatrix {
        SymMatrix::from_diagonal(&self.gains)
    }

    pub fn is_invertible(&self) -> bool {
        self.gains.iter().all(|&g| g > 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    /// Piecewise-linear through `(0, 0)` and each anchor; linear past the last anchor.
    Linear {
        times: Vec<f64>,
        anchors: Vec<DiagonalChannel>,
        tail_slopes: Vec<f64>,
    },
    /// `g_i(t) = √t` for every coordinate.
    Sqrt { t_max: f64 },
}

/// A monotone diagonal path with `H(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPath {
    dim: usize,
    shape: Shape,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AnchorDoc {
    t: f64,
    gains: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PathDoc {
    dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    anchors: Option<Vec<AnchorDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    snr_max: Option<f64>,
}

/// Path through `anchors` at times `1, 2, …, M`.
pub fn make_path(anchors: &[DiagonalChannel]) -> Result<ChannelPath> {
    let times: Vec<f64> = (1..=anchors.len()).map(|k| k as f64).collect();
    make_path_with_times(anchors, &times)
}

pub fn make_path_with_times(anchors: &[DiagonalChannel], times: &[f64]) -> Result<ChannelPath> {
    if anchors.is_empty() {
        return Err(Error::InvalidInput("path needs at least one anchor".into()));
    }
    if anchors.len() != times.len() {
        return Err(Error::InvalidInput(format!(
            "{} anchors but {} anchor times",
            anchors.len(),
            times.len()
        )));
    }
    let dim = anchors[0].dim();
    for a in anchors {
        if a.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: a.dim(),
            });
        }
        DiagonalChannel::new(a.gains.clone())?;
    }
    let mut prev_t = 0.0;
    for &t in times {
        if !(t.is_finite() && t > prev_t) {
            return Err(Error::Ordering(format!(
                "anchor times must be positive and strictly increasing (got {t} after {prev_t})"
            )));
        }
        prev_t = t;
    }
    for (k, pair) in anchors.windows(2).enumerate() {
        if !loewner_leq(&pair[0].as_sym(), &pair[1].as_sym(), 0.0)? {
            return Err(Error::Ordering(format!(
                "anchor {} is not below anchor {} in the Loewner order",
                k,
                k + 1
            )));
        }
    }
    let m = anchors.len();
    let (t_prev, g_prev) = if m >= 2 {
        (times[m - 2], anchors[m - 2].gains.clone())
    } else {
        (0.0, vec![0.0; dim])
    };
    let tail_slopes = (0..dim)
        .map(|i| {
            let s = (anchors[m - 1].gains[i] - g_prev[i]) / (times[m - 1] - t_prev);
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    Ok(ChannelPath {
        dim,
        shape: Shape::Linear {
            times: times.to_vec(),
            anchors: anchors.to_vec(),
            tail_slopes,
        },
    })
}

/// `H(t) = √t·I`, so the path parameter is the SNR.
pub fn snr_path(dim: usize, snr_max: f64) -> Result<ChannelPath> {
    if dim == 0 {
        return Err(Error::InvalidInput("dimension must be at least 1".into()));
    }
    if !(snr_max.is_finite() && snr_max > 0.0) {
        return Err(Error::InvalidInput(format!("snr_max must be positive, got {snr_max}")));
    }
    Ok(ChannelPath {
        dim,
        shape: Shape::Sqrt { t_max: snr_max },
    })
}

impl ChannelPath {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_snr_path(&self) -> bool {
        matches!(self.shape, Shape::Sqrt { .. })
    }

    /// Anchor times for piecewise paths (empty for the SNR path).
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.shape {
            Shape::Linear { times, .. } => times.clone(),
            Shape::Sqrt { .. } => Vec::new(),
        }
    }

    /// Time after which every gain grows linearly.
    pub fn plateau_from(&self) -> f64 {
        match &self.shape {
            Shape::Linear { times, .. } => *times.last().expect("nonempty"),
            Shape::Sqrt { t_max } => *t_max,
        }
    }

    fn segment(times: &[f64], t: f64) -> usize {
        // index k such that t lies in [times[k-1], times[k]), with times[-1] = 0;
        // k == times.len() means the tail.
        times.partition_point(|&tk| tk <= t)
    }

    fn gain_and_slope(&self, i: usize, t: f64) -> (f64, f64) {
        match &self.shape {
            Shape::Sqrt { .. } => {
                let g = t.sqrt();
                let slope = if t > 0.0 { 0.5 / g } else { f64::INFINITY };
                (g, slope)
            }
            Shape::Linear {
                times,
                anchors,
                tail_slopes,
            } => {
                let k = Self::segment(times, t);
                if k == times.len() {
                    let last = times.len() - 1;
                    let t0 = times[last];
                    let g0 = anchors[last].gains[i];
                    let s = tail_slopes[i];
                    (g0 + s * (t - t0), s)
                } else {
                    let (t0, g0) = if k == 0 {
                        (0.0, 0.0)
                    } else {
                        (times[k - 1], anchors[k - 1].gains[i])
                    };
                    let (t1, g1) = (times[k], anchors[k].gains[i]);
                    let s = (g1 - g0) / (t1 - t0);
                    if t == t0 && k > 0 {
                        (g0, s)
                    } else {
                        (g0 + s * (t - t0), s)
                    }
                }
            }
        }
    }

    /// `H(t)`; reproduces anchor gains exactly at anchor times.
    pub fn gains(&self, t: f64) -> DiagonalChannel {
        DiagonalChannel {
            gains: (0..self.dim).map(|i| self.gain_and_slope(i, t.max(0.0)).0).collect(),
        }
    }

    /// Right derivative of each gain.
    pub fn derivative(&self, t: f64) -> Vec<f64> {
        (0..self.dim).map(|i| self.gain_and_slope(i, t.max(0.0)).1).collect()
    }

    /// Diagonal of `B(t) = H(t)·(D_t H(t))ᵀ`. On the SNR path this is `½`
    /// everywhere, including the limit at `t = 0`.
    pub fn b_diag(&self, t: f64) -> Vec<f64> {
        if self.is_snr_path() {
            return vec![0.5; self.dim];
        }
        (0..self.dim)
            .map(|i| {
                let (g, s) = self.gain_and_slope(i, t.max(0.0));
                g * s
            })
            .collect()
    }

    pub fn b_matrix(&self, t: f64) -> SymMatrix {
        SymMatrix::from_diagonal(&self.b_diag(t))
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let doc = match &self.shape {
            Shape::Linear { times, anchors, .. } => PathDoc {
                dim: self.dim,
                anchors: Some(
                    times
                        .iter()
                        .zip(anchors)
                        .map(|(&t, a)| AnchorDoc {
                            t,
                            gains: a.gains.clone(),
                        })
                        .collect(),
                ),
                snr_max: None,
            },
            Shape::Sqrt { t_max } => PathDoc {
                dim: self.dim,
                anchors: None,
                snr_max: Some(*t_max),
            },
        };
        serde_json::to_value(doc).expect("path document serializes")
    }
}

impl Serialize for ChannelPath {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json_value().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ChannelPath {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = PathDoc::deserialize(d)?;
        let path = match (doc.anchors, doc.snr_max) {
            (Some(anchors), None) => {
                let times: Vec<f64> = anchors.iter().map(|a| a.t).collect();
                let chans = anchors
                    .into_iter()
                    .map(|a| DiagonalChannel::new(a.gains))
                    .collect::<Result<Vec<_>>>()
                    .map_err(D::Error::custom)?;
                make_path_with_times(&chans, &times).map_err(D::Error::custom)?
            }
            (None, Some(s)) => snr_path(doc.dim, s).map_err(D::Error::custom)?,
            _ => return Err(D::Error::custom("path needs exactly one of `anchors` or `snr_max`")),
        };
        if path.dim != doc.dim {
            return Err(D::Error::custom(format!(
                "path dim {} does not match anchors of dim {}",
                doc.dim, path.dim
            )));
        }
        Ok(path)
    }
}

/// Strictly increasing set of nonnegative scan points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainScanGrid {
    pub t_values: Vec<f64>,
    #[serde(default)]
    pub includes_anchors: bool,
}

impl GainScanGrid {
    pub fn new(t_values: Vec<f64>) -> Result<Self> {
        if t_values.is_empty() {
            return Err(Error::InvalidInput("grid is empty".into()));
        }
        if t_values.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::InvalidInput("grid values must be finite and nonnegative".into()));
        }
        if t_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Ordering("grid must be strictly increasing".into()));
        }
        Ok(Self {
            t_values,
            includes_anchors: false,
        })
    }

    /// `n` equispaced points on `[lo, hi]`.
    pub fn linear(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Self::new(vec![lo]);
        }
        Self::new((0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect())
    }

    /// `0` followed by `n − 1` log-spaced points on `[lo, hi]`.
    pub fn log_with_zero(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo > 0.0 && hi > lo) || n < 2 {
            return Err(Error::InvalidInput("log grid needs 0 < lo < hi and n >= 2".into()));
        }
        let m = n - 1;
        let mut v = vec![0.0];
        let (a, b) = (lo.ln(), hi.ln());
        for k in 0..m {
            let frac = if m == 1 { 0.0 } else { k as f64 / (m - 1) as f64 };
            v.push((a + (b - a) * frac).exp());
        }
        Self::new(v)
    }

    /// Adds the path's anchor times that fall inside the grid range.
    pub fn with_anchors(mut self, path: &ChannelPath) -> Self {
        let (lo, hi) = (self.t_values[0], *self.t_values.last().expect("nonempty"));
        for t in path.breakpoints() {
            if t >= lo && t <= hi && !self.t_values.contains(&t) {
                self.t_values.push(t);
            }
        }
        self.t_values.sort_by(f64::total_cmp);
        self.includes_anchors = true;
        self
    }

    pub fn len(&self) -> usize {
        self.t_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_values.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ch(g: &[f64]) -> DiagonalChannel {
        DiagonalChannel::new(g.to_vec()).unwrap()
    }

    #[test]
    fn two_anchor_scalar_path() {
        let p = make_path(&[ch(&[1.0]), ch(&[2.0])]).unwrap();
        assert_eq!(p.gains(0.0).gains, vec![0.0]);
        assert_eq!(p.gains(1.0).gains, vec![1.0]);
        assert_eq!(p.gains(2.0).gains, vec![2.0]);
        assert!((p.gains(1.5).gains[0] - 1.5).abs() < 1e-15);
        assert!((p.gains(3.0).gains[0] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_anchor_then_linear_growth() {
        let p = make_path(&[ch(&[0.0])]).unwrap();
        assert_eq!(p.gains(0.5).gains, vec![0.0]);
        assert_eq!(p.gains(1.0).gains, vec![0.0]);
        assert!((p.gains(3.0).gains[0] - 2.0).abs() < 1e-15);
        assert_eq!(p.derivative(1.0), vec![1.0]);
    }

    #[test]
    fn flat_coordinate_allowed() {
        let p = make_path(&[ch(&[1.0, 2.0]), ch(&[2.0, 2.0])]).unwrap();
        assert_eq!(p.gains(1.5).gains[1], 2.0);
        assert_eq!(p.derivative(1.5)[1], 0.0);
        assert_eq!(p.b_diag(1.5)[1], 0.0);
    }

    #[test]
    fn non_monotone_chain_rejected() {
        assert!(matches!(
            make_path(&[ch(&[2.0, 1.0]), ch(&[1.0, 2.0])]),
            Err(Error::Ordering(_))
        ));
    }

    #[test]
    fn b_matrix_examples() {
        let p = make_path(&[ch(&[1.0])]).unwrap();
        assert_eq!(p.b_diag(0.0), vec![0.0]);
        assert!((p.b_diag(0.5)[0] - 0.5).abs() < 1e-15);
        let s = snr_path(3, 10.0).unwrap();
        assert_eq!(s.b_diag(2.0), vec![0.5; 3]);
        assert_eq!(s.gains(4.0).gains, vec![2.0; 3]);
        assert_eq!(snr_path(1, 1.0).unwrap().gains(1.0).gains, vec![1.0]);
    }

    #[test]
    fn kink_uses_right_derivative() {
        let p = make_path(&[ch(&[1.0]), ch(&[3.0])]).unwrap();
        assert_eq!(p.derivative(1.0), vec![2.0]);
        assert_eq!(p.derivative(0.999), vec![1.0]);
    }

    #[test]
    fn json_round_trip() {
        let p = make_path_with_times(&[ch(&[0.5, 1.0]), ch(&[1.0, 1.5])], &[0.5, 2.0]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        let back: ChannelPath = serde_json::from_str(&s).unwrap();
        assert_eq!(p, back);
        let s: ChannelPath = serde_json::from_str(r#"{"dim":2,"snr_max":5.0}"#).unwrap();
        assert!(s.is_snr_path());
        assert!(serde_json::from_str::<ChannelPath>(r#"{"dim":3,"anchors":[{"t":1,"gains":[1,2]}]}"#).is_err());
    }

    #[test]
    fn grids() {
        let g = GainScanGrid::log_with_zero(1e-3, 1e3, 50).unwrap();
        assert_eq!(g.len(), 50);
        assert_eq!(g.t_values[0], 0.0);
        assert!((g.t_values[49] - 1e3).abs() < 1e-9);
        assert!(GainScanGrid::new(vec![0.0, 0.0]).is_err());
        let p = make_path(&[ch(&[1.0]), ch(&[2.0])]).unwrap();
        let g = GainScanGrid::linear(0.0, 3.0, 4).unwrap().with_anchors(&p);
        assert_eq!(g.t_values, vec![0.0, 1.0, 2.0, 3.0]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn chain() -> impl Strategy<Value = Vec<DiagonalChannel>> {
            (1usize..4, 1usize..4).prop_flat_map(|(n, m)| {
                prop::collection::vec(prop::collection::vec(0.0f64..1.0, n), m).prop_map(
                    move |incs| {
                        let mut acc = vec![0.0; n];
                        incs.into_iter()
                            .map(|inc| {
                                for (a, d) in acc.iter_mut().zip(inc) {
                                    *a += d;
                                }
                                DiagonalChannel { gains: acc.clone() }
                            })
                            .collect()
                    },
                )
            })
        }

        proptest! {
            #[test]
            fn monotone_and_exact_at_anchors(anchors in chain(), s in 0.0f64..6.0, ds in 0.0f64..3.0) {
                let p = make_path(&anchors).unwrap();
                let (hs, ht) = (p.gains(s), p.gains(s + ds));
                prop_assert!(loewner_leq(&hs.as_sym(), &ht.as_sym(), 1e-12).unwrap());
                for (k, a) in anchors.iter().enumerate() {
                    prop_assert_eq!(&p.gains((k + 1) as f64).gains, &a.gains);
                }
                prop_assert!(p.b_diag(s).iter().all(|&b| b >= 0.0));
            }
        }
    }
}
