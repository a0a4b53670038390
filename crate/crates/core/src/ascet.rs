//! Per-subcarrier equalizer taps and their zero-forcing design.
//!
//! An order-`L_A` equalizer holds `2 L_A + 1` taps per branch. The design
//! samples the aligned channel response at equispaced frequencies across
//! the subband (center only for `L_A = 0`, out to the subband edges
//! otherwise), inverts it, and interpolates the complex inverse with the
//! tap polynomial. The real part lands on the cosine branch, the
//! imaginary part on the sine branch. Subcarriers whose response falls
//! below the clamp threshold are inverted at the clamp and flagged.

use std::f64::consts::PI;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use rustfft::num_complex::Complex;

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::filterbank::{ModulatedBank, ToneMask};
use crate::kernel;

/// Magnitude below which the channel inverse is clamped.
pub const ZF_CLAMP: f64 = 1e-12;

/// Span of the design frequencies: outermost sample sits at
/// `+/- pi/2` on the symbol-rate circle, i.e. at the subband edges.
const DESIGN_EDGE: f64 = PI / 2.0;

#[derive(Debug, Clone)]
struct Taps {
    c: Vec<f64>,
    s: Vec<f64>,
    clamped: bool,
}

/// ASCET coefficients `c_{k,mu}`, `s_{k,mu}` for `mu in [-L_A, L_A]`.
#[derive(Debug, Clone)]
pub struct EqualizerTaps {
    order: usize,
    entries: Vec<Option<Taps>>,
}

impl EqualizerTaps {
    /// All-pass equalizer: order 0, `c = 1`, `s = 0` on the active tones.
    pub fn identity(mask: &ToneMask) -> Self {
        let mut e = Self::zeros(mask, 0);
        for &k in mask.active() {
            e.entries[k] = Some(Taps {
                c: vec![1.0],
                s: vec![0.0],
                clamped: false,
            });
        }
        e
    }

    /// Zero taps of the given order on the active tones.
    pub fn zeros(mask: &ToneMask, order: usize) -> Self {
        let mut entries = vec![None; mask.num_subbands()];
        for &k in mask.active() {
            entries[k] = Some(Taps {
                c: vec![0.0; 2 * order + 1],
                s: vec![0.0; 2 * order + 1],
                clamped: false,
            });
        }
        EqualizerTaps { order, entries }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Total subband count covered (entries may be None off-mask).
    pub fn num_entries(&self) -> usize {
        self.entries.len()
    }

    /// Branch taps for subcarrier `k`, `mu` ascending from `-L_A`.
    pub fn taps(&self, k: usize) -> Option<(&[f64], &[f64])> {
        self.entries[k].as_ref().map(|t| (&t.c[..], &t.s[..]))
    }

    /// Whether the design clamped a near-zero channel response at `k`.
    pub fn clamped(&self, k: usize) -> bool {
        self.entries[k].as_ref().is_some_and(|t| t.clamped)
    }

    pub fn set_taps(&mut self, k: usize, c: Vec<f64>, s: Vec<f64>) -> Result<()> {
        let want = 2 * self.order + 1;
        if c.len() != want || s.len() != want {
            return Err(Error::DimensionMismatch(format!(
                "order {} needs {want} taps per branch, got {}/{}",
                self.order,
                c.len(),
                s.len()
            )));
        }
        if c.iter().chain(&s).any(|v| !v.is_finite()) {
            return Err(Error::InvalidValue("non-finite tap".into()));
        }
        self.entries[k] = Some(Taps { c, s, clamped: false });
        Ok(())
    }

    /// Text export: header `L_A M`, then `k c_-LA..c_LA s_-LA..s_LA`.
    pub fn write_text(&self, path: &Path) -> Result<()> {
        let mut out = format!("{} {}\n", self.order, self.entries.len());
        for (k, e) in self.entries.iter().enumerate() {
            if let Some(t) = e {
                out.push_str(&format!("{k}"));
                for v in t.c.iter().chain(&t.s) {
                    out.push_str(&format!(" {:.17e}", v));
                }
                out.push('\n');
            }
        }
        fs::File::create(path)?.write_all(out.as_bytes())?;
        Ok(())
    }

    pub fn read_text(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            what: "taps file",
            line: 1,
            reason: "empty file".into(),
        })?;
        let mut it = header.split_whitespace();
        let order: usize = it.next().and_then(|s| s.parse().ok()).ok_or(Error::Parse {
            what: "taps file",
            line: 1,
            reason: "expected `L_A M`".into(),
        })?;
        let m: usize = it.next().and_then(|s| s.parse().ok()).ok_or(Error::Parse {
            what: "taps file",
            line: 1,
            reason: "expected `L_A M`".into(),
        })?;
        let ntaps = 2 * order + 1;
        let mut entries = vec![None; m];
        for (idx, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Parse {
                    what: "taps file",
                    line: idx + 1,
                    reason: "bad number".into(),
                })?;
            if vals.len() != 1 + 2 * ntaps {
                return Err(Error::Parse {
                    what: "taps file",
                    line: idx + 1,
                    reason: format!("expected {} values, got {}", 1 + 2 * ntaps, vals.len()),
                });
            }
            let k = vals[0] as usize;
            if k >= m {
                return Err(Error::Parse {
                    what: "taps file",
                    line: idx + 1,
                    reason: format!("subcarrier {k} out of range"),
                });
            }
            entries[k] = Some(Taps {
                c: vals[1..=ntaps].to_vec(),
                s: vals[ntaps + 1..].to_vec(),
                clamped: false,
            });
        }
        Ok(EqualizerTaps { order, entries })
    }
}

/// Solve a small complex linear system by Gaussian elimination with
/// partial pivoting. `a` is row-major `n x n`.
fn solve_complex(mut a: Vec<Complex<f64>>, mut b: Vec<Complex<f64>>) -> Vec<Complex<f64>> {
    let n = b.len();
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if a[r * n + col].norm_sqr() > a[piv * n + col].norm_sqr() {
                piv = r;
            }
        }
        if piv != col {
            for c in 0..n {
                a.swap(col * n + c, piv * n + c);
            }
            b.swap(col, piv);
        }
        let diag = a[col * n + col];
        for r in col + 1..n {
            let factor = a[r * n + col] / diag;
            for c in col..n {
                let v = a[col * n + c];
                a[r * n + c] -= factor * v;
            }
            let bv = b[col];
            b[r] -= factor * bv;
        }
    }
    let mut x = vec![Complex::new(0.0, 0.0); n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for c in row + 1..n {
            acc -= a[row * n + c] * x[c];
        }
        x[row] = acc / a[row * n + row];
    }
    x
}

/// Frequency-sampling zero-forcing design at a known alignment.
///
/// `beta` and `delay_symbols` must come from the same alignment rule the
/// kernel table uses (see [`kernel::choose_beta`] and
/// [`KernelTable::delay_symbols`](crate::kernel::KernelTable::delay_symbols)).
pub fn design_ascet_aligned(
    bank: &ModulatedBank,
    ch: &ChannelRealization,
    mask: &ToneMask,
    order: usize,
    beta: usize,
    delay_symbols: usize,
) -> Result<EqualizerTaps> {
    let m = bank.num_subbands();
    if mask.num_subbands() != m {
        return Err(Error::DimensionMismatch(format!(
            "mask over {} subbands, bank has {m}",
            mask.num_subbands()
        )));
    }
    let kappa = bank.overlap();
    // Residual bulk delay compensated by the alignment.
    let d_comp = (delay_symbols as isize - 2 * kappa as isize) * m as isize + 1 - beta as isize;
    let la = order as isize;
    let ntaps = 2 * order + 1;
    let mut taps = EqualizerTaps::zeros(mask, order);
    for &k in mask.active() {
        let omega_k = (k as f64 + 0.5) * PI / m as f64;
        let mut clamped = false;
        let thetas: Vec<f64> = (-la..=la)
            .map(|i| {
                if order == 0 {
                    0.0
                } else {
                    DESIGN_EDGE * i as f64 / la as f64
                }
            })
            .collect();
        let w: Vec<Complex<f64>> = thetas
            .iter()
            .map(|&th| {
                let omega = omega_k - th / m as f64;
                let mut h = ch.response(omega);
                // undo the delay the alignment already absorbs
                let ph = omega * d_comp as f64;
                h *= Complex::new(ph.cos(), ph.sin());
                if h.norm() < ZF_CLAMP {
                    clamped = true;
                    let phase = if h.norm() == 0.0 { 0.0 } else { h.arg() };
                    h = Complex::from_polar(ZF_CLAMP, phase);
                }
                1.0 / h
            })
            .collect();
        let sol = if order == 0 {
            w
        } else {
            // sum_mu w_mu e^{-j theta_i mu} = W_i
            let mut a = Vec::with_capacity(ntaps * ntaps);
            for &th in &thetas {
                for mu in -la..=la {
                    let ph = -th * mu as f64;
                    a.push(Complex::new(ph.cos(), ph.sin()));
                }
            }
            solve_complex(a, w)
        };
        let c: Vec<f64> = sol.iter().map(|z| z.re).collect();
        let s: Vec<f64> = sol.iter().map(|z| z.im).collect();
        taps.set_taps(k, c, s)?;
        if clamped {
            if let Some(t) = taps.entries[k].as_mut() {
                t.clamped = true;
            }
        }
    }
    Ok(taps)
}

/// Zero-forcing design with the alignment derived from the channel.
pub fn design_ascet(
    bank: &ModulatedBank,
    ch: &ChannelRealization,
    mask: &ToneMask,
    order: usize,
) -> Result<EqualizerTaps> {
    let beta = kernel::choose_beta(bank, ch, mask);
    let q = kernel::kernel_q(bank, ch, beta, mask)?;
    design_ascet_aligned(bank, ch, mask, order, beta, q.delay_symbols())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filterbank::build_bank;
    use crate::prototype::make_prototype;

    fn toy() -> (ModulatedBank, ToneMask) {
        let p = make_prototype(8, 2).unwrap();
        (build_bank(&p, None).unwrap(), ToneMask::full(8))
    }

    #[test]
    fn ideal_channel_designs_to_identity() {
        let (bank, mask) = toy();
        let ch = ChannelRealization::ideal(1.0);
        for order in [0, 1, 2] {
            let taps = design_ascet(&bank, &ch, &mask, order).unwrap();
            for &k in mask.active() {
                let (c, s) = taps.taps(k).unwrap();
                for (i, mu) in (-(order as isize)..=order as isize).enumerate() {
                    let want = if mu == 0 { 1.0 } else { 0.0 };
                    assert!((c[i] - want).abs() < 1e-12, "c[{mu}] = {}", c[i]);
                    assert!(s[i].abs() < 1e-12, "s[{mu}] = {}", s[i]);
                }
                assert!(!taps.clamped(k));
            }
        }
    }

    #[test]
    fn flat_gain_inverts_scalar() {
        let (bank, mask) = toy();
        let ch = ChannelRealization::from_taps(vec![2.0], 1.0).unwrap();
        for order in [0, 1, 2] {
            let taps = design_ascet(&bank, &ch, &mask, order).unwrap();
            for &k in mask.active() {
                let (c, s) = taps.taps(k).unwrap();
                assert!((c[order] - 0.5).abs() < 1e-12);
                for (i, v) in c.iter().enumerate() {
                    if i != order {
                        assert!(v.abs() < 1e-12);
                    }
                }
                assert!(s.iter().all(|v| v.abs() < 1e-12));
            }
        }
    }

    #[test]
    fn pure_delay_designs_to_identity() {
        let (bank, mask) = toy();
        let mut t = vec![0.0; 4];
        t[3] = 1.0;
        let ch = ChannelRealization::from_taps(t, 1.0).unwrap();
        let taps = design_ascet(&bank, &ch, &mask, 1).unwrap();
        for &k in mask.active() {
            let (c, s) = taps.taps(k).unwrap();
            assert!((c[1] - 1.0).abs() < 1e-10, "c0={}", c[1]);
            assert!(c[0].abs() < 1e-10 && c[2].abs() < 1e-10);
            assert!(s.iter().all(|v| v.abs() < 1e-10), "s={s:?}");
        }
    }

    #[test]
    fn near_null_channel_is_clamped_and_flagged() {
        let (bank, mask) = toy();
        let ch = ChannelRealization::from_taps(vec![1e-15], 1.0).unwrap();
        let taps = design_ascet(&bank, &ch, &mask, 0).unwrap();
        for &k in mask.active() {
            assert!(taps.clamped(k));
            let (c, s) = taps.taps(k).unwrap();
            assert!(c[0].is_finite() && s[0].is_finite());
        }
    }

    #[test]
    fn taps_file_round_trip() {
        let (bank, mask) = toy();
        let ch = ChannelRealization::from_taps(vec![1.0, -0.4, 0.2], 1.0).unwrap();
        let taps = design_ascet(&bank, &ch, &mask, 2).unwrap();
        let path = std::env::temp_dir().join("eltmcm_taps_rt.txt");
        taps.write_text(&path).unwrap();
        let back = EqualizerTaps::read_text(&path).unwrap();
        assert_eq!(back.order(), 2);
        for &k in mask.active() {
            let (c0, s0) = taps.taps(k).unwrap();
            let (c1, s1) = back.taps(k).unwrap();
            assert_eq!(c0, c1);
            assert_eq!(s0, s1);
        }
        std::fs::remove_file(&path).ok();
    }
}
