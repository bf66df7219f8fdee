//! Channel generation, CSI models, coupling-input matrices and precoder assembly.

use std::fmt;

use nalgebra::{Complex, DMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::IntegerMatrix;
use crate::linalg::{spd_inverse, MAX_CONDITION};
use crate::optimizer::PowerVector;

/// Real `K×N` channel: row `k` holds the gains from the `N` base-station
/// antennas to user `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    h: DMatrix<f64>,
}

impl Channel {
    pub fn new(h: DMatrix<f64>) -> Result<Self> {
        if h.nrows() == 0 || h.ncols() == 0 {
            return Err(Error::DimensionMismatch("channel must be non-empty".into()));
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "channel has non-finite entries".into(),
            ));
        }
        Ok(Channel { h })
    }

    pub fn from_row_slice(k: usize, n: usize, entries: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_row_slice(k, n, entries))
    }

    pub fn users(&self) -> usize {
        self.h.nrows()
    }

    pub fn antennas(&self) -> usize {
        self.h.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.h
    }

    /// `H·Hᵀ`.
    pub fn gram(&self) -> DMatrix<f64> {
        &self.h * self.h.transpose()
    }
}

/// 3×3 channel used to illustrate the fixed-`A` geometry at 15 dB.
pub fn geometry_demo_channel() -> Channel {
    Channel::from_row_slice(
        3,
        3,
        &[
            0.7826, 0.6097, 0.7154, //
            1.8776, 1.8774, 0.1899, //
            1.8507, 0.0694, 0.3630,
        ],
    )
    .expect("static channel")
}

/// 3×3 channel used to illustrate how the reciprocal iteration behaves
/// across SNR (oscillating at 0 dB, converging from 10 dB).
pub fn convergence_demo_channel() -> Channel {
    Channel::from_row_slice(
        3,
        3,
        &[
            0.5472, 0.1643, 0.4058, //
            1.2850, 0.6481, 1.1394, //
            0.5685, 1.1173, 0.7982,
        ],
    )
    .expect("static channel")
}

/// Channel-state information available at the transmitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", deny_unknown_fields)]
pub enum CsiModel {
    Perfect,
    /// `H = Ĥ + E`, `E ~ N(0, σ_e²)`.
    #[serde(rename = "MMSE")]
    Mmse {
        sigma_e2: f64,
    },
    /// `Ĥ = H + E`, with `H` of variance `σ_h²`.
    #[serde(rename = "ML")]
    Ml {
        sigma_h2: f64,
        sigma_e2: f64,
    },
}

impl CsiModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CsiModel::Perfect => Ok(()),
            CsiModel::Mmse { sigma_e2 } if sigma_e2 >= 0.0 => Ok(()),
            CsiModel::Ml { sigma_h2, sigma_e2 } if sigma_e2 >= 0.0 && sigma_h2 > 0.0 => Ok(()),
            other => Err(Error::InvalidArgument(format!(
                "invalid CSI variances in {other}"
            ))),
        }
    }

    pub fn error_variance(&self) -> f64 {
        match *self {
            CsiModel::Perfect => 0.0,
            CsiModel::Mmse { sigma_e2 } | CsiModel::Ml { sigma_e2, .. } => sigma_e2,
        }
    }

    pub fn is_perfect(&self) -> bool {
        matches!(self, CsiModel::Perfect)
    }
}

impl fmt::Display for CsiModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CsiModel::Perfect => write!(f, "perfect"),
            CsiModel::Mmse { sigma_e2 } => write!(f, "mmse:{sigma_e2}"),
            CsiModel::Ml { sigma_h2, sigma_e2 } => write!(f, "ml:{sigma_h2}:{sigma_e2}"),
        }
    }
}

impl std::str::FromStr for CsiModel {
    type Err = Error;

    /// Parses the `Display` form: `perfect`, `mmse:<σe²>` or `ml:<σh²>:<σe²>`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |t: &str| {
            t.parse::<f64>().map_err(|_| {
                Error::InvalidArgument(format!("bad variance '{t}' in CSI spec '{s}'"))
            })
        };
        let model = match (parts[0].to_ascii_lowercase().as_str(), parts.len()) {
            ("perfect", 1) => CsiModel::Perfect,
            ("mmse", 2) => CsiModel::Mmse {
                sigma_e2: num(parts[1])?,
            },
            ("ml", 3) => CsiModel::Ml {
                sigma_h2: num(parts[1])?,
                sigma_e2: num(parts[2])?,
            },
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "CSI spec '{s}' is not one of perfect, mmse:<se2>, ml:<sh2>:<se2>"
                )))
            }
        };
        model.validate()?;
        Ok(model)
    }
}

/// Diagonally-scaled exact IF or regularized IF.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecoderKind {
    Dif,
    Rif,
}

impl fmt::Display for PrecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrecoderKind::Dif => write!(f, "dif"),
            PrecoderKind::Rif => write!(f, "rif"),
        }
    }
}

impl std::str::FromStr for PrecoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dif" => Ok(PrecoderKind::Dif),
            "rif" => Ok(PrecoderKind::Rif),
            other => Err(Error::InvalidArgument(format!(
                "unknown precoder kind '{other}'"
            ))),
        }
    }
}

/// Linear SNR from decibels.
pub fn snr_from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// I.i.d. Rayleigh-magnitude gains `|x + iy| / √2` with `x, y ~ N(0, 1)`:
/// nonnegative with unit mean square. Deterministic in `seed`.
pub fn sample_rayleigh(k: usize, n: usize, seed: u64) -> Channel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = DMatrix::from_fn(k, n, |_, _| {
        let x: f64 = StandardNormal.sample(&mut rng);
        let y: f64 = StandardNormal.sample(&mut rng);
        x.hypot(y) / std::f64::consts::SQRT_2
    });
    Channel { h }
}

/// Real-valued model of a complex channel: `[[Re, −Im], [Im, Re]]`.
pub fn complex_to_real_embedding(hc: &DMatrix<Complex<f64>>) -> Result<Channel> {
    let (k, n) = hc.shape();
    let h = DMatrix::from_fn(2 * k, 2 * n, |i, j| {
        let z = hc[(i % k, j % n)];
        match (i < k, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    Channel::new(h)
}

/// Estimation-error variance `Kσ_z² / (N_train·E_train)`.
pub fn estimation_error_variance(
    k: usize,
    sigma_z2: f64,
    n_train: f64,
    e_train: f64,
) -> Result<f64> {
    if k == 0 || !(sigma_z2 > 0.0) || !(n_train > 0.0) || !(e_train > 0.0) {
        return Err(Error::InvalidArgument(
            "estimation_error_variance requires positive arguments".into(),
        ));
    }
    Ok(k as f64 * sigma_z2 / (n_train * e_train))
}

/// Draws the transmitter's channel estimate: `Ĥ = H − E` under MMSE and
/// `Ĥ = H + E` under ML, `E ~ N(0, σ_e²)` i.i.d.
pub fn estimate_channel(h_true: &Channel, csi: CsiModel, seed: u64) -> Result<Channel> {
    csi.validate()?;
    let sign = match csi {
        CsiModel::Perfect => return Err(Error::PerfectCsiNoOp),
        CsiModel::Mmse { .. } => -1.0,
        CsiModel::Ml { .. } => 1.0,
    };
    let sigma = csi.error_variance().sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal =
        Normal::new(0.0, sigma.max(0.0)).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let e = DMatrix::from_fn(h_true.users(), h_true.antennas(), |_, _| {
        normal.sample(&mut rng)
    });
    Channel::new(&h_true.h + e * sign)
}

/// The matrix whose inverse is `M` (and which the precoder inverts), per
/// precoder kind and CSI model.
pub fn coupling_inner_matrix(
    h: &Channel,
    kind: PrecoderKind,
    rho: f64,
    csi: CsiModel,
) -> Result<DMatrix<f64>> {
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "SNR must be positive, got {rho}"
        )));
    }
    csi.validate()?;
    let k = h.users() as f64;
    let gram = h.gram();
    let (gram_scale, extra) = match csi {
        CsiModel::Perfect => (1.0, 0.0),
        CsiModel::Mmse { sigma_e2 } => (1.0, k * sigma_e2),
        CsiModel::Ml { sigma_h2, sigma_e2 } => (sigma_h2 / (sigma_h2 + sigma_e2), k * sigma_e2),
    };
    let regularizer = match kind {
        PrecoderKind::Dif => 0.0,
        // K/(ρβ); β = 1 outside the ML model
        PrecoderKind::Rif => k / (rho * gram_scale),
    };
    let mut inner = gram * gram_scale;
    for i in 0..h.users() {
        inner[(i, i)] += extra + regularizer;
    }
    Ok(inner)
}

/// Coupling input `M` feeding the trace objective (symmetric positive definite).
pub fn coupling_input_matrix(
    h: &Channel,
    kind: PrecoderKind,
    rho: f64,
    csi: CsiModel,
) -> Result<DMatrix<f64>> {
    let inner = coupling_inner_matrix(h, kind, rho, csi)?;
    spd_inverse(&inner, MAX_CONDITION)
}

/// Precoder `P = (1/η)·Hᵀ·M_inner⁻¹·D·A`, with `η` chosen so that
/// `Tr(PPᵀ) = ρ`.
pub fn build_precoder(
    h: &Channel,
    d: &PowerVector,
    a: &IntegerMatrix,
    kind: PrecoderKind,
    csi: CsiModel,
    rho: f64,
) -> Result<DMatrix<f64>> {
    let k = h.users();
    if d.dim() != k || a.dim() != k {
        return Err(Error::DimensionMismatch(format!(
            "channel has {k} users, d has {}, A is {}x{}",
            d.dim(),
            a.dim(),
            a.dim()
        )));
    }
    let m = coupling_input_matrix(h, kind, rho, csi)?;
    let da = DMatrix::from_diagonal(d.as_vector()) * a.as_f64();
    if da.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroPrecoder);
    }
    let raw = h.matrix().transpose() * m * da;
    let power = raw.norm_squared();
    if !(power > 0.0) {
        return Err(Error::ZeroPrecoder);
    }
    let eta = (power / rho).sqrt();
    Ok(raw / eta)
}
