//! Closed-form signal, interference and noise powers at the equalized
//! output, and the per-subcarrier SINR built from them.
//!
//! With the kernel table centered on the detected symbol, the equalized
//! response to the symbol `nu` slots away is
//! `A(k0,k,nu) = sum_mu c_mu Q^c[k0][k][nu+mu] + s_mu Q^s[k0][k][nu+mu]`.
//! The useful power takes the coherent sum over taps at `nu = 0`; each
//! interfering symbol contributes the square of its own coherent sum
//! (symbols are i.i.d., so cross-symbol terms vanish in expectation).

use crate::ascet::EqualizerTaps;
use crate::channel::NoiseModel;
use crate::error::{Error, Result};
use crate::filterbank::{ModulatedBank, ToneMask};
use crate::kernel::KernelTable;

/// Equalized response to the symbol `nu` slots from the detected one.
fn combined(q: &KernelTable, taps: &EqualizerTaps, ik0: usize, ik: usize, nu: isize) -> f64 {
    let k0 = q.mask().active()[ik0];
    let (c, s) = match taps.taps(k0) {
        Some(t) => t,
        None => return 0.0,
    };
    let la = taps.order() as isize;
    let mut acc = 0.0;
    for (i, mu) in (-la..=la).enumerate() {
        acc += c[i] * q.qc(ik0, ik, nu + mu) + s[i] * q.qs(ik0, ik, nu + mu);
    }
    acc
}

/// Useful signal power `P_psi` per active subcarrier.
pub fn power_signal(q: &KernelTable, taps: &EqualizerTaps, sigma_x2: f64) -> Vec<f64> {
    (0..q.mask().len())
        .map(|i| sigma_x2 * combined(q, taps, i, i, 0).powi(2))
        .collect()
}

/// Intersymbol interference power per active subcarrier: same tone,
/// every other symbol offset.
pub fn power_isi(q: &KernelTable, taps: &EqualizerTaps, sigma_x2: f64) -> Vec<f64> {
    let reach = (q.w_half() + taps.order()) as isize;
    (0..q.mask().len())
        .map(|i| {
            let mut acc = 0.0;
            for nu in -reach..=reach {
                if nu == 0 {
                    continue;
                }
                acc += combined(q, taps, i, i, nu).powi(2);
            }
            sigma_x2 * acc
        })
        .collect()
}

/// Intercarrier interference power per active subcarrier: every other
/// active tone, every symbol offset (the detected slot included).
pub fn power_ici(q: &KernelTable, taps: &EqualizerTaps, sigma_x2: f64) -> Vec<f64> {
    let reach = (q.w_half() + taps.order()) as isize;
    let nk = q.mask().len();
    (0..nk)
        .map(|i0| {
            let mut acc = 0.0;
            for ik in 0..nk {
                if ik == i0 {
                    continue;
                }
                for nu in -reach..=reach {
                    acc += combined(q, taps, i0, ik, nu).powi(2);
                }
            }
            sigma_x2 * acc
        })
        .collect()
}

/// Effective noise filter of subcarrier `k`: the analysis pair convolved
/// with the symbol-spaced equalizer taps (taps `M` samples apart).
fn effective_noise_filter(bank: &ModulatedBank, taps: &EqualizerTaps, k: usize) -> Vec<f64> {
    let m = bank.num_subbands();
    let n1 = bank.order() + 1;
    let la = taps.order();
    let (c, s) = taps.taps(k).expect("taps for active subcarrier");
    let mut g = vec![0.0; n1 + 2 * la * m];
    let h = bank.analysis_cos(k);
    let hs = bank.analysis_sin(k);
    for (i, (&ci, &si)) in c.iter().zip(s).enumerate() {
        let off = i * m;
        if ci == 0.0 && si == 0.0 {
            continue;
        }
        for t in 0..n1 {
            g[off + t] += ci * h[t] + si * hs[t];
        }
    }
    g
}

/// Noise power `P_r` per active subcarrier at the equalized output.
///
/// White noise gives `variance * ||g_k||^2`; colored noise the quadratic
/// form of `g_k` with the shaping filter's autocorrelation.
pub fn power_noise(
    bank: &ModulatedBank,
    mask: &ToneMask,
    taps: &EqualizerTaps,
    noise: &NoiseModel,
    sample_rate_hz: f64,
) -> Result<Vec<f64>> {
    noise.validate()?;
    match noise {
        NoiseModel::Awgn { variance } => Ok(mask
            .active()
            .iter()
            .map(|&k| {
                let g = effective_noise_filter(bank, taps, k);
                variance * g.iter().map(|x| x * x).sum::<f64>()
            })
            .collect()),
        NoiseModel::Psd { table, shaping_len } => {
            let sh = crate::channel::psd_to_shaping(table, sample_rate_hz, *shaping_len)?;
            // autocorrelation of the shaping taps
            let rmax = sh.len();
            let mut rr = vec![0.0; rmax];
            for (tau, r) in rr.iter_mut().enumerate() {
                for u in 0..sh.len() - tau {
                    *r += sh[u] * sh[u + tau];
                }
            }
            Ok(mask
                .active()
                .iter()
                .map(|&k| {
                    let g = effective_noise_filter(bank, taps, k);
                    let mut p = 0.0;
                    for (tau, &rrt) in rr.iter().enumerate() {
                        if rrt == 0.0 || tau >= g.len() {
                            continue;
                        }
                        let mut rg = 0.0;
                        for u in 0..g.len() - tau {
                            rg += g[u] * g[u + tau];
                        }
                        p += if tau == 0 { rg * rrt } else { 2.0 * rg * rrt };
                    }
                    p
                })
                .collect())
        }
    }
}

/// Per-subcarrier power breakdown and SINR.
#[derive(Debug, Clone)]
pub struct SinrProfile {
    pub mask: ToneMask,
    pub p_signal: Vec<f64>,
    pub p_isi: Vec<f64>,
    pub p_ici: Vec<f64>,
    pub p_noise: Vec<f64>,
    pub sinr: Vec<f64>,
    /// true where the SINR was 0/0 and reported as zero
    pub degenerate: Vec<bool>,
    pub sigma_x2: f64,
    pub beta: usize,
    pub equalizer_order: usize,
}

impl SinrProfile {
    /// CSV rows `k,p_signal,p_isi,p_ici,p_noise,sinr_db`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,p_signal,p_isi,p_ici,p_noise,sinr_db\n");
        for (i, &k) in self.mask.active().iter().enumerate() {
            let db = if self.sinr[i] > 0.0 {
                10.0 * self.sinr[i].log10()
            } else {
                f64::NEG_INFINITY
            };
            out.push_str(&format!(
                "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.6}\n",
                k, self.p_signal[i], self.p_isi[i], self.p_ici[i], self.p_noise[i], db
            ));
        }
        out
    }
}

/// Combine the four power vectors into the per-subcarrier SINR.
pub fn sinr(
    mask: &ToneMask,
    p_signal: Vec<f64>,
    p_isi: Vec<f64>,
    p_ici: Vec<f64>,
    p_noise: Vec<f64>,
    sigma_x2: f64,
    beta: usize,
    equalizer_order: usize,
) -> Result<SinrProfile> {
    let n = mask.len();
    for (name, v) in [
        ("p_signal", &p_signal),
        ("p_isi", &p_isi),
        ("p_ici", &p_ici),
        ("p_noise", &p_noise),
    ] {
        if v.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{name} has {} entries for {n} active subcarriers",
                v.len()
            )));
        }
        if v.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(Error::InvalidValue(format!("negative or non-finite {name}")));
        }
    }
    let mut out = Vec::with_capacity(n);
    let mut degenerate = vec![false; n];
    for i in 0..n {
        let denom = p_isi[i] + p_ici[i] + p_noise[i];
        let v = if denom > 0.0 {
            p_signal[i] / denom
        } else if p_signal[i] > 0.0 {
            f64::INFINITY
        } else {
            degenerate[i] = true;
            0.0
        };
        out.push(v);
    }
    Ok(SinrProfile {
        mask: mask.clone(),
        p_signal,
        p_isi,
        p_ici,
        p_noise,
        sinr: out,
        degenerate,
        sigma_x2,
        beta,
        equalizer_order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelRealization;
    use crate::filterbank::build_bank;
    use crate::kernel::{choose_beta, kernel_q};
    use crate::prototype::make_prototype;

    fn toy() -> (ModulatedBank, ToneMask) {
        let p = make_prototype(8, 2).unwrap();
        (build_bank(&p, None).unwrap(), ToneMask::full(8))
    }

    #[test]
    fn ideal_channel_identity_taps_powers() {
        let (bank, mask) = toy();
        let ch = ChannelRealization::ideal(1.0);
        let beta = choose_beta(&bank, &ch, &mask);
        let q = kernel_q(&bank, &ch, beta, &mask).unwrap();
        let taps = EqualizerTaps::identity(&mask);
        let sigx2 = 1.7;
        let ps = power_signal(&q, &taps, sigx2);
        let pi = power_isi(&q, &taps, sigx2);
        let pj = power_ici(&q, &taps, sigx2);
        for i in 0..mask.len() {
            assert!((ps[i] - sigx2).abs() < 1e-9);
            assert!(pi[i] < 1e-18, "isi {}", pi[i]);
            assert!(pj[i] < 1e-18, "ici {}", pj[i]);
        }
        // zero symbol variance kills the signal
        assert!(power_signal(&q, &taps, 0.0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_active_tone_has_no_ici() {
        let (bank, _) = toy();
        let mask = ToneMask::new(vec![3], 8).unwrap();
        let ch = ChannelRealization::from_taps(vec![1.0, -0.6, 0.3], 1.0).unwrap();
        let beta = choose_beta(&bank, &ch, &mask);
        let q = kernel_q(&bank, &ch, beta, &mask).unwrap();
        let taps = EqualizerTaps::identity(&mask);
        let pj = power_ici(&q, &taps, 1.0);
        assert_eq!(pj, vec![0.0]);
    }

    #[test]
    fn isi_scales_with_symbol_variance() {
        let (bank, mask) = toy();
        let ch = ChannelRealization::from_taps(vec![1.0, 0.5], 1.0).unwrap();
        let beta = choose_beta(&bank, &ch, &mask);
        let q = kernel_q(&bank, &ch, beta, &mask).unwrap();
        let taps = EqualizerTaps::identity(&mask);
        let p1 = power_isi(&q, &taps, 1.0);
        let p4 = power_isi(&q, &taps, 4.0);
        for (a, b) in p1.iter().zip(&p4) {
            assert!((4.0 * a - b).abs() < 1e-12 * b.abs().max(1.0));
        }
        assert!(p1.iter().any(|&v| v > 1e-6), "two-tap channel must leak ISI");
    }

    #[test]
    fn white_noise_power_identity_taps() {
        let (bank, mask) = toy();
        let taps = EqualizerTaps::identity(&mask);
        let pr = power_noise(&bank, &mask, &taps, &NoiseModel::Awgn { variance: 0.3 }, 1.0).unwrap();
        // c = 1, s = 0, unit-norm h: P_r = variance
        for &v in &pr {
            assert!((v - 0.3).abs() < 1e-9, "pr = {v}");
        }
        let z = power_noise(&bank, &mask, &taps, &NoiseModel::Awgn { variance: 0.0 }, 1.0).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sinr_ratio_and_sentinels() {
        let mask = ToneMask::new(vec![0, 1], 4).unwrap();
        let prof = sinr(
            &mask,
            vec![2.0, 0.0],
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![0.5, 0.0],
            1.0,
            1,
            0,
        )
        .unwrap();
        assert!((prof.sinr[0] - 4.0).abs() < 1e-15);
        assert_eq!(prof.sinr[1], 0.0);
        assert!(prof.degenerate[1]);
        // infinity sentinel
        let p2 = sinr(&mask, vec![1.0, 1.0], vec![0.0; 2], vec![0.0; 2], vec![0.0; 2], 1.0, 1, 0)
            .unwrap();
        assert!(p2.sinr[0].is_infinite());
        // negative power rejected
        assert!(sinr(&mask, vec![-1.0, 0.0], vec![0.0; 2], vec![0.0; 2], vec![0.0; 2], 1.0, 1, 0)
            .is_err());
    }
}
