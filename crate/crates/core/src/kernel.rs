//! Deterministic transmultiplexer interference kernels.
//!
//! For a fixed bank, channel and alignment, the response of analysis
//! output `(k0, n)` to the transmitted symbol `x_{k, n - d + j}` is a
//! constant `Q[k0][k][j]` (time-invariant channel, so only the symbol
//! offset `j` matters). `j = 0` is the detected symbol; `d` is the total
//! transmultiplexer delay in symbols, chosen so the signal kernel peaks at
//! `j = 0`.
//!
//! Direct evaluation of the defining sums costs `|K|^2 * W * N` products;
//! the builder instead folds the windowed product sequence modulo `2M` and
//! takes one FFT per `(k, j)` column, which yields the response at every
//! `k0` of both analysis branches at once. The reorganization is exact up
//! to rounding and is checked against the brute-force transmultiplexer
//! measurement in the tests and the validation suite.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::filterbank::{ModulatedBank, ToneMask};

/// Cosine- and sine-branch kernels over the active mask.
#[derive(Debug, Clone)]
pub struct KernelTable {
    mask: ToneMask,
    qc: Vec<f64>,
    qs: Vec<f64>,
    w_half: usize,
    beta: usize,
    delay_symbols: usize,
    num_subbands: usize,
}

impl KernelTable {
    pub fn mask(&self) -> &ToneMask {
        &self.mask
    }

    /// Symmetric window half-width: entries exist for `|j| <= w_half`.
    pub fn w_half(&self) -> usize {
        self.w_half
    }

    pub fn beta(&self) -> usize {
        self.beta
    }

    /// Total transmultiplexer delay in symbols (the `j = 0` alignment).
    pub fn delay_symbols(&self) -> usize {
        self.delay_symbols
    }

    pub fn num_subbands(&self) -> usize {
        self.num_subbands
    }

    #[inline]
    fn idx(&self, ik0: usize, ik: usize, j: isize) -> usize {
        let nw = 2 * self.w_half + 1;
        (ik0 * self.mask.len() + ik) * nw + (j + self.w_half as isize) as usize
    }

    /// Cosine kernel for mask positions `ik0`, `ik` at symbol offset `j`;
    /// zero outside the stored window.
    #[inline]
    pub fn qc(&self, ik0: usize, ik: usize, j: isize) -> f64 {
        if j.unsigned_abs() > self.w_half {
            0.0
        } else {
            self.qc[self.idx(ik0, ik, j)]
        }
    }

    /// Sine kernel, indexed like [`KernelTable::qc`].
    #[inline]
    pub fn qs(&self, ik0: usize, ik: usize, j: isize) -> f64 {
        if j.unsigned_abs() > self.w_half {
            0.0
        } else {
            self.qs[self.idx(ik0, ik, j)]
        }
    }

    /// Write both kernels as CSV rows `k0,k,j,qc,qs`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k0,k,j,qc,qs\n");
        let w = self.w_half as isize;
        for (i0, &k0) in self.mask.active().iter().enumerate() {
            for (i, &k) in self.mask.active().iter().enumerate() {
                for j in -w..=w {
                    out.push_str(&format!(
                        "{},{},{},{:.17e},{:.17e}\n",
                        k0,
                        k,
                        j,
                        self.qc(i0, i, j),
                        self.qs(i0, i, j)
                    ));
                }
            }
        }
        out
    }
}

/// FFT-backed convolution of a channel with each synthesis filter.
fn channel_synth_conv(bank: &ModulatedBank, ch: &ChannelRealization, mask: &ToneMask) -> Vec<Vec<f64>> {
    let n1 = bank.order() + 1;
    let la = ch.len();
    let out_len = n1 + la - 1;
    if la <= 32 {
        // short channels: direct convolution
        return mask
            .active()
            .iter()
            .map(|&k| {
                let f = bank.synth(k);
                let mut out = vec![0.0; out_len];
                for (l, &a) in ch.taps.iter().enumerate() {
                    if a == 0.0 {
                        continue;
                    }
                    for (t, &fv) in f.iter().enumerate() {
                        out[t + l] += a * fv;
                    }
                }
                out
            })
            .collect();
    }
    let nfft = out_len.next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(nfft);
    let inv = planner.plan_fft_inverse(nfft);
    let mut ch_spec = vec![Complex::new(0.0, 0.0); nfft];
    for (i, &a) in ch.taps.iter().enumerate() {
        ch_spec[i] = Complex::new(a, 0.0);
    }
    fwd.process(&mut ch_spec);
    mask.active()
        .par_iter()
        .map_init(
            || (fwd.clone(), inv.clone()),
            |(fwd, inv), &k| {
                let mut buf = vec![Complex::new(0.0, 0.0); nfft];
                for (i, &fv) in bank.synth(k).iter().enumerate() {
                    buf[i] = Complex::new(fv, 0.0);
                }
                fwd.process(&mut buf);
                for (b, c) in buf.iter_mut().zip(&ch_spec) {
                    *b *= c;
                }
                inv.process(&mut buf);
                buf[..out_len].iter().map(|c| c.re / nfft as f64).collect()
            },
        )
        .collect()
}

/// Diagonal cosine response `sum_t h_k[t] psi_k[sigma - t]` at one shift.
fn diag_at(bank: &ModulatedBank, psi_k: &[f64], k: usize, sigma: isize) -> f64 {
    let h = bank.analysis_cos(k);
    let n = bank.order() as isize;
    let len = psi_k.len() as isize;
    let t_lo = (sigma - (len - 1)).max(0);
    let t_hi = sigma.min(n);
    let mut acc = 0.0;
    let mut t = t_lo;
    while t <= t_hi {
        acc += h[t as usize] * psi_k[(sigma - t) as usize];
        t += 1;
    }
    acc
}

/// Pick the receiver alignment delay `beta` in `[0, M)` maximizing the
/// total squared signal kernel over the mask, absorbing whole symbols into
/// the delay. Ties break to the smallest `beta`.
pub fn choose_beta(bank: &ModulatedBank, ch: &ChannelRealization, mask: &ToneMask) -> usize {
    let m = bank.num_subbands();
    let psi = channel_synth_conv(bank, ch, mask);
    let n1 = bank.order() + 1;
    let conv_len = n1 + psi[0].len() - 1;
    // full diagonal correlation via FFT per subcarrier
    let nfft = conv_len.next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(nfft);
    let inv = planner.plan_fft_inverse(nfft);
    let score: Vec<f64> = mask
        .active()
        .par_iter()
        .zip(&psi)
        .map_init(
            || (fwd.clone(), inv.clone()),
            |(fwd, inv), (&k, psi_k)| {
                let mut a = vec![Complex::new(0.0, 0.0); nfft];
                let mut b = vec![Complex::new(0.0, 0.0); nfft];
                for (i, &h) in bank.analysis_cos(k).iter().enumerate() {
                    a[i] = Complex::new(h, 0.0);
                }
                for (i, &p) in psi_k.iter().enumerate() {
                    b[i] = Complex::new(p, 0.0);
                }
                fwd.process(&mut a);
                fwd.process(&mut b);
                for (x, y) in a.iter_mut().zip(&b) {
                    *x *= y;
                }
                inv.process(&mut a);
                a[..conv_len].iter().map(|c| (c.re / nfft as f64).powi(2)).collect::<Vec<f64>>()
            },
        )
        .reduce(
            || vec![0.0; conv_len],
            |mut acc, v| {
                for (a, b) in acc.iter_mut().zip(&v) {
                    *a += b;
                }
                acc
            },
        );
    // best beta: for each beta, the best score over d with sigma = d*M - beta
    let mut best_beta = 0;
    let mut best = f64::NEG_INFINITY;
    for beta in 0..m {
        let mut s_beta = f64::NEG_INFINITY;
        let mut sigma = (m - beta) % m; // smallest non-negative sigma with sigma = -beta (mod M)
        if sigma == 0 && beta != 0 {
            sigma = m;
        }
        let mut sig = sigma;
        while sig < conv_len {
            if score[sig] > s_beta {
                s_beta = score[sig];
            }
            sig += m;
        }
        if s_beta > best + 1e-12 * best.abs().max(1.0) {
            best = s_beta;
            best_beta = beta;
        }
    }
    best_beta
}

/// Build the kernel table by direct analytical summation, organized as a
/// fold-and-FFT per transmit column. The symbol delay `d` is chosen to
/// center the signal peak at `j = 0` for the given `beta`.
pub fn kernel_q(
    bank: &ModulatedBank,
    ch: &ChannelRealization,
    beta: usize,
    mask: &ToneMask,
) -> Result<KernelTable> {
    let m = bank.num_subbands();
    if mask.num_subbands() != m {
        return Err(Error::DimensionMismatch(format!(
            "mask over {} subbands, bank has {m}",
            mask.num_subbands()
        )));
    }
    let n = bank.order();
    let n1 = n + 1;
    let psi = channel_synth_conv(bank, ch, mask);
    let conv_len = n1 + psi[0].len() - 1;

    // center the table: d maximizing the total squared diagonal
    let d_lo = beta.div_ceil(m).max(1);
    let d_hi = (conv_len - 1 + beta) / m;
    let mut d_best = d_lo;
    let mut best = f64::NEG_INFINITY;
    for d in d_lo..=d_hi {
        let sigma = (d * m) as isize - beta as isize;
        let s: f64 = mask
            .active()
            .iter()
            .enumerate()
            .map(|(i, &k)| diag_at(bank, &psi[i], k, sigma).powi(2))
            .sum();
        if s > best {
            best = s;
            d_best = d;
        }
    }
    let d = d_best;

    // symmetric window covering the full support
    let j_lo = -(d as isize) + (beta as isize) / m as isize;
    let j_hi = ((conv_len - 1 + beta) / m) as isize - d as isize;
    let w_half = j_lo.unsigned_abs().max(j_hi.unsigned_abs());
    let nw = 2 * w_half + 1;

    // per-k0 assembly constants
    let n0 = (m as f64 + 1.0) / 2.0;
    let scale = (2.0 / m as f64).sqrt();
    let two_m = 2 * m;
    let p = bank.prototype().coeffs();
    let quad = bank.quadrature_phases();
    let th_signs: Vec<f64> = bank.phases().iter().map(|t| t.cos()).collect();
    // twiddle e^{-j pi t / (2M)} for all t in the window support
    let twiddle: Vec<Complex<f64>> = (0..n1)
        .map(|t| {
            let ph = -PI * t as f64 / two_m as f64;
            Complex::new(ph.cos(), ph.sin())
        })
        .collect();
    // e^{+j alpha_k0 (N + n0)} and branch mixers
    let post: Vec<Complex<f64>> = (0..m)
        .map(|k0| {
            let alpha = (k0 as f64 + 0.5) * PI / m as f64;
            let ph = alpha * (n as f64 + n0);
            Complex::new(ph.cos(), ph.sin())
        })
        .collect();

    let mut planner = FftPlanner::new();
    let fft: Arc<dyn Fft<f64>> = planner.plan_fft_forward(two_m);

    let nk = mask.len();
    let twiddle = &twiddle;
    let post = &post;
    let th_signs = &th_signs;
    let cols: Vec<(usize, Vec<f64>, Vec<f64>)> = (0..nk)
        .into_par_iter()
        .flat_map(|ik| {
            let psi_k = &psi[ik];
            let fft = fft.clone();
            (0..nw).into_par_iter().map(move |jw| {
                let j = jw as isize - w_half as isize;
                let sigma = (j + d as isize) * m as isize - beta as isize;
                let mut col_c = vec![0.0; nk];
                let mut col_s = vec![0.0; nk];
                let len = psi_k.len() as isize;
                let t_lo = (sigma - (len - 1)).max(0);
                let t_hi = sigma.min(n as isize);
                if t_lo <= t_hi {
                    let mut buf = vec![Complex::new(0.0, 0.0); two_m];
                    let mut t = t_lo;
                    while t <= t_hi {
                        let tu = t as usize;
                        let z = p[tu] * psi_k[(sigma - t) as usize];
                        buf[tu % two_m] += z * twiddle[tu];
                        t += 1;
                    }
                    fft.process(&mut buf);
                    for (i0, &k0) in mask.active().iter().enumerate() {
                        let c = post[k0] * buf[k0];
                        let (s_psi, c_psi) = quad[k0].sin_cos();
                        let sgn = th_signs[k0];
                        col_c[i0] = scale * c.re * sgn;
                        col_s[i0] = scale * (c_psi * c.im + s_psi * c.re) * sgn;
                    }
                }
                (ik * nw + jw, col_c, col_s)
            })
        })
        .collect();

    // the transmit-side theta sign is already inside psi_k via f_k
    let mut qc = vec![0.0; nk * nk * nw];
    let mut qs = vec![0.0; nk * nk * nw];
    for (colkey, col_c, col_s) in cols {
        let ik = colkey / nw;
        let jw = colkey % nw;
        for i0 in 0..nk {
            qc[(i0 * nk + ik) * nw + jw] = col_c[i0];
            qs[(i0 * nk + ik) * nw + jw] = col_s[i0];
        }
    }
    Ok(KernelTable {
        mask: mask.clone(),
        qc,
        qs,
        w_half,
        beta,
        delay_symbols: d,
        num_subbands: m,
    })
}

/// Worst deviation of the ideal-channel cosine kernel from
/// identity-with-delay, over the full tone set: the PR residual.
pub fn ideal_channel_residual(bank: &ModulatedBank) -> f64 {
    let mask = ToneMask::full(bank.num_subbands());
    let ch = ChannelRealization::ideal(1.0);
    let beta = choose_beta(bank, &ch, &mask);
    let q = match kernel_q(bank, &ch, beta, &mask) {
        Ok(q) => q,
        Err(_) => return f64::INFINITY,
    };
    let w = q.w_half() as isize;
    let nk = mask.len();
    let mut worst = 0.0_f64;
    for i0 in 0..nk {
        for i in 0..nk {
            for j in -w..=w {
                let target = if i0 == i && j == 0 { 1.0 } else { 0.0 };
                worst = worst.max((q.qc(i0, i, j) - target).abs());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filterbank::build_bank;
    use crate::prototype::make_prototype;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy() -> (ModulatedBank, ToneMask) {
        let p = make_prototype(8, 2).unwrap();
        (build_bank(&p, None).unwrap(), ToneMask::full(8))
    }

    #[test]
    fn ideal_channel_gives_identity_kernel() {
        let (bank, mask) = toy();
        let ch = ChannelRealization::ideal(1.0);
        let beta = choose_beta(&bank, &ch, &mask);
        assert_eq!(beta, 1);
        let q = kernel_q(&bank, &ch, beta, &mask).unwrap();
        assert_eq!(q.delay_symbols(), 4);
        for i0 in 0..8 {
            for i in 0..8 {
                for j in -(q.w_half() as isize)..=(q.w_half() as isize) {
                    let target = if i0 == i && j == 0 { 1.0 } else { 0.0 };
                    assert!(
                        (q.qc(i0, i, j) - target).abs() < 1e-10,
                        "qc[{i0}][{i}][{j}] = {}",
                        q.qc(i0, i, j)
                    );
                }
            }
        }
    }

    #[test]
    fn zero_channel_gives_zero_table() {
        let (bank, mask) = toy();
        let ch = ChannelRealization::from_taps(vec![0.0], 1.0).unwrap();
        let q = kernel_q(&bank, &ch, 1, &mask).unwrap();
        assert!(q.qc.iter().chain(&q.qs).all(|&v| v == 0.0));
    }

    #[test]
    fn pure_delay_shifts_beta() {
        let (bank, mask) = toy();
        let m = 8;
        let ideal_beta = choose_beta(&bank, &ChannelRealization::ideal(1.0), &mask);
        for delay in [1usize, 3, 7] {
            let mut taps = vec![0.0; delay + 1];
            taps[delay] = 1.0;
            let ch = ChannelRealization::from_taps(taps, 1.0).unwrap();
            let beta = choose_beta(&bank, &ch, &mask);
            assert_eq!(
                beta,
                (ideal_beta + m - delay % m) % m,
                "delay {delay}"
            );
            // kernel at its own alignment is again the identity
            let q = kernel_q(&bank, &ch, beta, &mask).unwrap();
            for i0 in 0..8 {
                assert!((q.qc(i0, i0, 0) - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn delay_by_full_symbol_changes_only_the_delay_count() {
        let (bank, mask) = toy();
        let m = 8;
        let mut taps = vec![0.0; m + 1];
        taps[m] = 1.0;
        let ch = ChannelRealization::from_taps(taps, 1.0).unwrap();
        let beta = choose_beta(&bank, &ch, &mask);
        assert_eq!(beta, 1);
        let q = kernel_q(&bank, &ch, beta, &mask).unwrap();
        assert_eq!(q.delay_symbols(), 5); // one extra symbol absorbed
        for i0 in 0..8 {
            assert!((q.qc(i0, i0, 0) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn kernel_columns_scale_linearly_with_channel_gain() {
        let (bank, mask) = toy();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let taps: Vec<f64> = (0..5).map(|_| rng.random::<f64>() - 0.5).collect();
        let ch1 = ChannelRealization::from_taps(taps.clone(), 1.0).unwrap();
        let ch2 =
            ChannelRealization::from_taps(taps.iter().map(|t| 2.0 * t).collect(), 1.0).unwrap();
        let beta = choose_beta(&bank, &ch1, &mask);
        let q1 = kernel_q(&bank, &ch1, beta, &mask).unwrap();
        let q2 = kernel_q(&bank, &ch2, beta, &mask).unwrap();
        assert_eq!(q1.delay_symbols(), q2.delay_symbols());
        for (a, b) in q1.qc.iter().zip(&q2.qc) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
    }
}
