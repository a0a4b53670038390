//! Prototype filter construction and perfect-reconstruction certification.
//!
//! The ELT filter bank is generated from a single real window `p[n]` of
//! length `2*kappa*M`. Perfect reconstruction of the transmultiplexer is
//! equivalent to a power-complementarity condition on the window's
//! polyphase components, which this module enforces structurally: windows
//! are synthesized from a two-channel lattice whose output satisfies the
//! condition for any choice of rotation angles. The angle schedules below
//! were chosen for stopband attenuation and are evaluated as fixed
//! polynomials in `(j + 1/2) / M`, so construction is deterministic.
//!
//! `check_pr` is the ground truth: it measures the end-to-end ideal-channel
//! transmultiplexer response against the identity and reports the worst
//! deviation.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::filterbank;
use crate::kernel;

/// Residual threshold under which a window is considered PR-certified.
pub const PR_TOLERANCE: f64 = 1e-10;

/// An ELT prototype window `p[n]`, `n = 0..2*kappa*M`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeFilter {
    coeffs: Vec<f64>,
    num_subbands: usize,
    overlap: usize,
    certified: bool,
}

impl PrototypeFilter {
    /// Window samples, length `2 * kappa * M`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Number of subbands `M`.
    pub fn num_subbands(&self) -> usize {
        self.num_subbands
    }

    /// Overlap factor `kappa`.
    pub fn overlap(&self) -> usize {
        self.overlap
    }

    /// Filter order `N`; the support is `0..=N` with `N + 1 = 2*kappa*M`.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Whether this window was PR-certified at construction or import.
    pub fn certified(&self) -> bool {
        self.certified
    }

    /// Build a prototype from raw coefficients. The window is checked for
    /// shape only; `certified` is set by running [`check_pr`].
    pub fn from_coeffs(coeffs: Vec<f64>, num_subbands: usize, overlap: usize) -> Result<Self> {
        if num_subbands == 0 {
            return Err(Error::param("num_subbands", "must be positive"));
        }
        if overlap == 0 {
            return Err(Error::param("overlap", "must be positive"));
        }
        let expect = 2 * overlap * num_subbands;
        if coeffs.len() != expect {
            return Err(Error::param(
                "coeffs",
                format!("length {} but 2*kappa*M = {}", coeffs.len(), expect),
            ));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::param("coeffs", "non-finite sample"));
        }
        let mut p = PrototypeFilter {
            coeffs,
            num_subbands,
            overlap,
            certified: false,
        };
        p.certified = check_pr(&p) < PR_TOLERANCE;
        Ok(p)
    }

    /// Max deviation from even symmetry `p[2kM-1-n] == p[n]`.
    pub fn symmetry_error(&self) -> f64 {
        let n = self.coeffs.len();
        (0..n / 2)
            .map(|i| (self.coeffs[i] - self.coeffs[n - 1 - i]).abs())
            .fold(0.0, f64::max)
    }

    /// Write the window as plain text: first line `M kappa`, then one
    /// coefficient per line with 17 significant digits.
    pub fn write_text(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str(&format!("{} {}\n", self.num_subbands, self.overlap));
        for c in &self.coeffs {
            out.push_str(&format!("{:.17e}\n", c));
        }
        let mut f = fs::File::create(path)?;
        f.write_all(out.as_bytes())?;
        Ok(())
    }

    /// Read a window written by [`PrototypeFilter::write_text`]. Imported
    /// windows are re-certified; non-PR windows load fine but are flagged.
    pub fn read_text(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            what: "prototype file",
            line: 1,
            reason: "empty file".into(),
        })?;
        let mut it = header.split_whitespace();
        let m: usize = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or(Error::Parse {
                what: "prototype file",
                line: 1,
                reason: "expected `M kappa`".into(),
            })?;
        let kappa: usize = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or(Error::Parse {
                what: "prototype file",
                line: 1,
                reason: "expected `M kappa`".into(),
            })?;
        let mut coeffs = Vec::with_capacity(2 * kappa * m);
        for (idx, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let v: f64 = line.parse().map_err(|_| Error::Parse {
                what: "prototype file",
                line: idx + 1,
                reason: format!("bad coefficient `{line}`"),
            })?;
            coeffs.push(v);
        }
        Self::from_coeffs(coeffs, m, kappa)
    }
}

/// Lattice angle schedules, one polynomial per stage, evaluated at
/// `x = (j + 1/2) / M`. Coefficients are listed highest power first.
const ANGLE_POLY_K2: [[f64; 7]; 2] = [
    [
        K2_T0[0], K2_T0[1], K2_T0[2], K2_T0[3], K2_T0[4], K2_T0[5], K2_T0[6],
    ],
    [
        K2_T1[0], K2_T1[1], K2_T1[2], K2_T1[3], K2_T1[4], K2_T1[5], K2_T1[6],
    ],
];

// Placeholders; frozen schedules are defined at the bottom of the file.
use schedules::{K2_T0, K2_T1, K3_T0, K3_T1, K3_T2};

const ANGLE_POLY_K3: [[f64; 7]; 3] = [
    [
        K3_T0[0], K3_T0[1], K3_T0[2], K3_T0[3], K3_T0[4], K3_T0[5], K3_T0[6],
    ],
    [
        K3_T1[0], K3_T1[1], K3_T1[2], K3_T1[3], K3_T1[4], K3_T1[5], K3_T1[6],
    ],
    [
        K3_T2[0], K3_T2[1], K3_T2[2], K3_T2[3], K3_T2[4], K3_T2[5], K3_T2[6],
    ],
];

fn polyval(c: &[f64; 7], x: f64) -> f64 {
    c.iter().fold(0.0, |acc, &ci| acc * x + ci)
}

/// One power-complementary branch pair from a cascade of rotations.
/// Returns `(a, b)` tap vectors of length `kappa`.
fn lattice_pair(thetas: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let kappa = thetas.len();
    let mut a = vec![0.0; kappa];
    let mut b = vec![0.0; kappa];
    a[0] = thetas[0].cos();
    b[0] = thetas[0].sin();
    for (i, &th) in thetas.iter().enumerate().skip(1) {
        let (s, c) = th.sin_cos();
        let mut a2 = vec![0.0; kappa];
        let mut b2 = vec![0.0; kappa];
        for l in 0..i {
            a2[l] += c * a[l];
            a2[l + 1] -= s * b[l];
            b2[l] += s * a[l];
            b2[l + 1] += c * b[l];
        }
        a = a2;
        b = b2;
    }
    (a, b)
}

/// Construct the certified ELT window for `M` subbands and overlap `kappa`.
///
/// `M` must be a power of two >= 4 and `kappa` one of {2, 3}. The result is
/// deterministic: identical arguments give bit-identical coefficients.
pub fn make_prototype(num_subbands: usize, overlap: usize) -> Result<PrototypeFilter> {
    let m = num_subbands;
    if m < 4 || !m.is_power_of_two() {
        return Err(Error::param(
            "num_subbands",
            format!("must be a power of two >= 4, got {m}"),
        ));
    }
    if !(overlap == 2 || overlap == 3) {
        return Err(Error::param(
            "overlap",
            format!("must be 2 or 3, got {overlap}"),
        ));
    }
    let kappa = overlap;
    let two_m = 2 * m;
    // Polyphase taps g[j][l] with p[j + 2*M*l] = g[j][l].
    let mut g = vec![vec![0.0; kappa]; two_m];
    for j in 0..m / 2 {
        let x = (j as f64 + 0.5) / m as f64;
        let thetas: Vec<f64> = match kappa {
            2 => ANGLE_POLY_K2.iter().map(|c| polyval(c, x)).collect(),
            _ => ANGLE_POLY_K3.iter().map(|c| polyval(c, x)).collect(),
        };
        let (a, b) = lattice_pair(&thetas);
        // Window symmetry p[2kM-1-n] = p[n] ties branch M-1-j to the
        // reversal of branch j's partner and vice versa.
        for l in 0..kappa {
            g[j][l] = a[l];
            g[j + m][l] = b[l];
            g[m - 1 - j][l] = b[kappa - 1 - l];
            g[two_m - 1 - j][l] = a[kappa - 1 - l];
        }
    }
    let mut coeffs = vec![0.0; 2 * kappa * m];
    for (j, taps) in g.iter().enumerate() {
        for (l, &v) in taps.iter().enumerate() {
            coeffs[j + two_m * l] = v;
        }
    }
    let mut p = PrototypeFilter {
        coeffs,
        num_subbands: m,
        overlap: kappa,
        certified: false,
    };
    let residual = check_pr(&p);
    if residual >= PR_TOLERANCE {
        return Err(Error::InvalidValue(format!(
            "constructed window failed PR certification: residual {residual:.3e}"
        )));
    }
    p.certified = true;
    Ok(p)
}

/// Measure the perfect-reconstruction residual of a window.
///
/// Builds the modulated bank, runs the transmultiplexer kernel through an
/// ideal unit channel at the optimal alignment delay with the identity
/// 0-tap equalizer, and returns the worst absolute deviation of the
/// cosine-branch response from identity-with-delay, over the full tone set
/// and all symbol offsets.
pub fn check_pr(p: &PrototypeFilter) -> f64 {
    let bank = filterbank::build_bank_unchecked(p, None);
    kernel::ideal_channel_residual(&bank)
}

mod schedules {
    //! Frozen lattice angle schedules (see module docs).
    pub const K2_T0: [f64; 7] = [
        0.0,
        0.0,
        0.0,
        -21.4939433862,
        16.2914119299,
        -2.580008396,
        -1.0724955611,
    ];
    pub const K2_T1: [f64; 7] = [
        0.0,
        0.0,
        0.0,
        17.9718878974,
        -10.7655934519,
        0.7059755805,
        -1.2341852265,
    ];
    pub const K3_T0: [f64; 7] = [0.0, 0.0, 0.0, 0.0, 0.0, 0.35, 1.33];
    pub const K3_T1: [f64; 7] = [0.0, 0.0, 0.0, 0.0, 0.0, 0.60, 1.21];
    pub const K3_T2: [f64; 7] = [0.0, 0.0, 0.0, 0.0, 0.0, -1.10, -1.76];
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            make_prototype(6, 2),
            Err(Error::InvalidParameter { name: "num_subbands", .. })
        ));
        assert!(matches!(
            make_prototype(2, 2),
            Err(Error::InvalidParameter { name: "num_subbands", .. })
        ));
        assert!(matches!(
            make_prototype(8, 4),
            Err(Error::InvalidParameter { name: "overlap", .. })
        ));
    }

    #[test]
    fn lengths_follow_2km() {
        assert_eq!(make_prototype(512, 2).unwrap().coeffs().len(), 2048);
        assert_eq!(make_prototype(512, 3).unwrap().coeffs().len(), 3072);
    }

    #[test]
    fn window_is_symmetric_and_certified() {
        for kappa in [2, 3] {
            let p = make_prototype(8, kappa).unwrap();
            assert!(p.symmetry_error() < 1e-15);
            assert!(p.certified());
            assert!(check_pr(&p) < 1e-10);
        }
    }

    #[test]
    fn deterministic_construction() {
        let a = make_prototype(16, 2).unwrap();
        let b = make_prototype(16, 2).unwrap();
        assert_eq!(a.coeffs(), b.coeffs());
    }

    #[test]
    fn rectangular_window_fails_pr() {
        let m = 8;
        let p = PrototypeFilter::from_coeffs(vec![1.0; 32], m, 2).unwrap();
        assert!(!p.certified());
        assert!(check_pr(&p) > 1e-2);
    }

    #[test]
    fn perturbed_window_loses_certification() {
        let p = make_prototype(8, 2).unwrap();
        let mut c = p.coeffs().to_vec();
        c[5] += 1e-3;
        let q = PrototypeFilter::from_coeffs(c, 8, 2).unwrap();
        let res = check_pr(&q);
        assert!(res > 1e-5, "residual {res}");
        assert!(!q.certified());
    }

    #[test]
    fn pr_invariant_under_sign_flip() {
        let p = make_prototype(8, 2).unwrap();
        let flipped: Vec<f64> = p.coeffs().iter().map(|c| -c).collect();
        let q = PrototypeFilter::from_coeffs(flipped, 8, 2).unwrap();
        assert!(check_pr(&q) < 1e-10);
        assert!(q.certified());
    }

    #[test]
    fn text_round_trip() {
        let dir = std::env::temp_dir();
        let path = dir.join("eltmcm_proto_rt.txt");
        let p = make_prototype(8, 3).unwrap();
        p.write_text(&path).unwrap();
        let q = PrototypeFilter::read_text(&path).unwrap();
        assert_eq!(p.coeffs(), q.coeffs());
        assert!(q.certified());
        std::fs::remove_file(&path).ok();
    }
}
