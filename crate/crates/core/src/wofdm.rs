//! Windowed-OFDM baseline: CP(+taper) transmultiplexer, one-tap
//! zero-forcing equalization, and its per-subcarrier SINR computed with
//! the same transmultiplexer-kernel method as the ELT side.
//!
//! Loading is Hermitian so the transmitted stream is real: the complex
//! symbol on subcarrier `k` is mirrored conjugated onto `M - k`. The
//! interference kernel therefore carries two columns per transmit tone
//! (the tone and its image); proper complex symbols make their powers
//! add.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::channel::{ChannelRealization, NoiseModel};
use crate::error::{Error, Result};
use crate::filterbank::ToneMask;

/// Windowed-OFDM system parameters. `active` must stay below `fft_size/2`
/// (Hermitian loading); the sample rate is `fft_size * subcarrier_spacing`.
#[derive(Debug, Clone)]
pub struct WofdmConfig {
    pub fft_size: usize,
    pub guard_samples: usize,
    pub rolloff_samples: usize,
    pub active: ToneMask,
    pub subcarrier_spacing_hz: f64,
}

impl WofdmConfig {
    pub fn new(
        fft_size: usize,
        guard_samples: usize,
        rolloff_samples: usize,
        active: ToneMask,
        subcarrier_spacing_hz: f64,
    ) -> Result<Self> {
        if fft_size < 4 || !fft_size.is_power_of_two() {
            return Err(Error::param("fft_size", "must be a power of two >= 4"));
        }
        if rolloff_samples > guard_samples {
            return Err(Error::param("rolloff_samples", "RO must not exceed GI"));
        }
        if active.num_subbands() != fft_size {
            return Err(Error::DimensionMismatch(format!(
                "mask over {} bins, fft_size {}",
                active.num_subbands(),
                fft_size
            )));
        }
        let lo = active.active()[0];
        let hi = *active.active().last().unwrap();
        if lo == 0 || hi >= fft_size / 2 {
            return Err(Error::param(
                "active",
                format!("Hermitian loading needs 1 <= k < M/2, got {lo}..={hi}"),
            ));
        }
        Ok(WofdmConfig {
            fft_size,
            guard_samples,
            rolloff_samples,
            active,
            subcarrier_spacing_hz,
        })
    }

    /// Samples per multicarrier symbol (stride).
    pub fn stride(&self) -> usize {
        self.fft_size + self.guard_samples
    }

    /// Synthesis pulse length `M + GI + RO`.
    pub fn pulse_len(&self) -> usize {
        self.fft_size + self.guard_samples + self.rolloff_samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.fft_size as f64 * self.subcarrier_spacing_hz
    }
}

/// QAM symbols for the active tones; row order follows `active`.
#[derive(Debug, Clone)]
pub struct WofdmFrame {
    pub symbols: Vec<Vec<Complex<f64>>>,
}

impl WofdmFrame {
    pub fn zeros(cfg: &WofdmConfig, num_symbols: usize) -> Self {
        WofdmFrame {
            symbols: vec![vec![Complex::new(0.0, 0.0); num_symbols]; cfg.active.len()],
        }
    }

    /// Unit-variance QPSK on every active tone.
    pub fn random_qpsk<R: rand::Rng>(cfg: &WofdmConfig, num_symbols: usize, rng: &mut R) -> Self {
        let a = std::f64::consts::FRAC_1_SQRT_2;
        let mut f = Self::zeros(cfg, num_symbols);
        for row in &mut f.symbols {
            for v in row.iter_mut() {
                let re = if rng.random::<bool>() { a } else { -a };
                let im = if rng.random::<bool>() { a } else { -a };
                *v = Complex::new(re, im);
            }
        }
        f
    }

    pub fn num_symbols(&self) -> usize {
        self.symbols.first().map_or(0, Vec::len)
    }
}

/// Raised-cosine edge weight for the synthesis pulse.
fn pulse_window(cfg: &WofdmConfig, i: usize) -> f64 {
    let ro = cfg.rolloff_samples;
    let plen = cfg.pulse_len();
    if ro == 0 {
        return 1.0;
    }
    if i < ro {
        let x = (i as f64 + 0.5) / ro as f64;
        0.5 * (1.0 - (std::f64::consts::PI * x).cos())
    } else if i >= plen - ro {
        let x = ((plen - 1 - i) as f64 + 0.5) / ro as f64;
        0.5 * (1.0 - (std::f64::consts::PI * x).cos())
    } else {
        1.0
    }
}

/// Real transmit stream: per symbol, Hermitian-loaded IDFT, cyclic
/// extension by `GI + RO`, tapered edges, symbols at stride `M + GI`.
pub fn wofdm_modulate(frame: &WofdmFrame, cfg: &WofdmConfig) -> Result<Vec<f64>> {
    if frame.symbols.len() != cfg.active.len() {
        return Err(Error::DimensionMismatch(format!(
            "frame rows {} != active tones {}",
            frame.symbols.len(),
            cfg.active.len()
        )));
    }
    let m = cfg.fft_size;
    let nsym = frame.num_symbols();
    if nsym == 0 {
        return Err(Error::DimensionMismatch("frame has no symbols".into()));
    }
    let stride = cfg.stride();
    let plen = cfg.pulse_len();
    let ext = cfg.guard_samples + cfg.rolloff_samples;
    let mut planner = FftPlanner::new();
    let inv = planner.plan_fft_inverse(m);
    let mut out = vec![0.0; (nsym - 1) * stride + plen];
    let mut spec = vec![Complex::new(0.0, 0.0); m];
    for s in 0..nsym {
        for v in spec.iter_mut() {
            *v = Complex::new(0.0, 0.0);
        }
        for (row, &k) in cfg.active.active().iter().enumerate() {
            let x = frame.symbols[row][s];
            spec[k] = x;
            spec[m - k] = x.conj();
        }
        inv.process(&mut spec);
        // spec now holds M * IDFT(X); time base is spec/M, real by symmetry
        let base = s * stride;
        for i in 0..plen {
            let t = (i + m - (ext % m)) % m;
            out[base + i] += spec[t].re / m as f64 * pulse_window(cfg, i);
        }
    }
    Ok(out)
}

/// Strip the guard, DFT, and one-tap ZF against the channel response.
/// Returns rows in `active` order; `num_symbols` are taken from the
/// stream length.
pub fn wofdm_demodulate(
    y: &[f64],
    cfg: &WofdmConfig,
    ch: &ChannelRealization,
    beta: usize,
) -> Result<WofdmFrame> {
    let m = cfg.fft_size;
    let stride = cfg.stride();
    let off = cfg.guard_samples + cfg.rolloff_samples + beta;
    if y.len() < off + m {
        return Err(Error::StreamTooShort {
            needed: off + m,
            got: y.len(),
        });
    }
    let nsym = (y.len() - off - m) / stride + 1;
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(m);
    let mut frame = WofdmFrame {
        symbols: vec![vec![Complex::new(0.0, 0.0); nsym]; cfg.active.len()],
    };
    let mut buf = vec![Complex::new(0.0, 0.0); m];
    for s in 0..nsym {
        let base = s * stride + off;
        for (i, b) in buf.iter_mut().enumerate() {
            *b = Complex::new(y[base + i], 0.0);
        }
        fwd.process(&mut buf);
        for (row, &k) in cfg.active.active().iter().enumerate() {
            let h = ch.response(2.0 * std::f64::consts::PI * k as f64 / m as f64);
            frame.symbols[row][s] = if h.norm() < 1e-12 {
                Complex::new(0.0, 0.0)
            } else {
                buf[k] / h
            };
        }
    }
    Ok(frame)
}

/// Kernel-domain view of a windowed-OFDM link over one channel: the
/// useful gains, the interference power per unit symbol variance, the
/// per-bin noise quadratic forms, and the received power per unit symbol
/// variance (for SNR normalization).
#[derive(Debug, Clone)]
pub struct WofdmAnalysis {
    cfg: WofdmConfig,
    /// useful complex gain per active tone (ZF target)
    pub useful: Vec<Complex<f64>>,
    /// channel DFT at each active tone
    pub h: Vec<Complex<f64>>,
    /// interference power per unit sigma_x^2
    pub interf_unit: Vec<f64>,
    /// received signal power per sample per unit sigma_x^2
    pub rx_power_unit: f64,
}

/// Per-subcarrier windowed-OFDM SINR and its power pieces.
#[derive(Debug, Clone)]
pub struct WofdmSinrProfile {
    pub active: ToneMask,
    pub h_mag2: Vec<f64>,
    pub noise_var: Vec<f64>,
    pub p_interf: Vec<f64>,
    pub sinr: Vec<f64>,
    pub usable: Vec<bool>,
    pub sigma_x2: f64,
}

/// Build the interference kernel for the configured link.
pub fn wofdm_analysis(cfg: &WofdmConfig, ch: &ChannelRealization) -> Result<WofdmAnalysis> {
    let fs = cfg.sample_rate_hz();
    if (ch.sample_rate_hz - fs).abs() > 1e-6 * fs.max(1.0) {
        return Err(Error::SampleRateMismatch {
            left_hz: ch.sample_rate_hz,
            right_hz: fs,
        });
    }
    let m = cfg.fft_size;
    let stride = cfg.stride() as isize;
    let plen = cfg.pulse_len();
    let la = ch.len();
    let ext = cfg.guard_samples + cfg.rolloff_samples;
    let mut planner = FftPlanner::new();
    let fwd_m = planner.plan_fft_forward(m);
    let inv_m = planner.plan_fft_inverse(m);

    // psi_k = channel * pulse_k, via FFT convolution
    let conv_len = plen + la - 1;
    let nfft = conv_len.next_power_of_two();
    let fwd_big = planner.plan_fft_forward(nfft);
    let inv_big = planner.plan_fft_inverse(nfft);
    let mut ch_spec = vec![Complex::new(0.0, 0.0); nfft];
    for (i, &a) in ch.taps.iter().enumerate() {
        ch_spec[i] = Complex::new(a, 0.0);
    }
    fwd_big.process(&mut ch_spec);

    // base pulse spectrum -> time for each tone
    let j_lo = -(((plen + la) as isize + stride - 1) / stride);
    let j_hi = ((ext + m - 1) as isize) / stride;
    let nw = (j_hi - j_lo + 1) as usize;
    let nk = cfg.active.len();

    let mut interf = vec![0.0; nk];
    let mut useful = vec![Complex::new(0.0, 0.0); nk];
    let mut rx_power = 0.0;
    let mut base = vec![Complex::new(0.0, 0.0); m];
    let mut psi = vec![Complex::new(0.0, 0.0); nfft];
    let mut seg = vec![Complex::new(0.0, 0.0); m];
    for (col, &k) in cfg.active.active().iter().enumerate() {
        // pulse_k: windowed cyclic extension of the k-th exponential / M
        for v in base.iter_mut() {
            *v = Complex::new(0.0, 0.0);
        }
        base[k] = Complex::new(1.0, 0.0);
        inv_m.process(&mut base);
        for v in psi.iter_mut() {
            *v = Complex::new(0.0, 0.0);
        }
        for i in 0..plen {
            let t = (i + m - (ext % m)) % m;
            psi[i] = base[t] / m as f64 * pulse_window(cfg, i);
        }
        fwd_big.process(&mut psi);
        for (p, c) in psi.iter_mut().zip(&ch_spec) {
            *p *= c;
        }
        inv_big.process(&mut psi);
        for v in psi.iter_mut() {
            *v /= nfft as f64;
        }
        rx_power += 2.0 / cfg.stride() as f64
            * psi[..conv_len].iter().map(Complex::norm_sqr).sum::<f64>();

        for j in j_lo..=j_hi {
            let shift = j * stride;
            let mut any = false;
            for (t, sv) in seg.iter_mut().enumerate() {
                let idx = ext as isize + t as isize - shift;
                *sv = if idx >= 0 && (idx as usize) < conv_len {
                    any = true;
                    psi[idx as usize]
                } else {
                    Complex::new(0.0, 0.0)
                };
            }
            if !any {
                continue;
            }
            fwd_m.process(&mut seg);
            for (i0, &k0) in cfg.active.active().iter().enumerate() {
                let direct = seg[k0];
                let image = seg[(m - k0) % m].conj();
                if j == 0 && i0 == col {
                    useful[i0] = direct;
                    // the image of the detected symbol still interferes
                    interf[i0] += image.norm_sqr();
                } else {
                    interf[i0] += direct.norm_sqr() + image.norm_sqr();
                }
            }
        }
    }
    let h: Vec<Complex<f64>> = cfg
        .active
        .active()
        .iter()
        .map(|&k| ch.response(2.0 * std::f64::consts::PI * k as f64 / m as f64))
        .collect();
    Ok(WofdmAnalysis {
        cfg: cfg.clone(),
        useful,
        h,
        interf_unit: interf,
        rx_power_unit: rx_power,
    })
}

impl WofdmAnalysis {
    /// Noise variance at each active DFT output for the given model,
    /// scaled by `noise_scale`.
    pub fn noise_at_bins(&self, noise: &NoiseModel, noise_scale: f64) -> Result<Vec<f64>> {
        let m = self.cfg.fft_size;
        match noise {
            NoiseModel::Awgn { variance } => {
                Ok(vec![noise_scale * variance * m as f64; self.cfg.active.len()])
            }
            NoiseModel::Psd { table, shaping_len } => {
                let sh = crate::channel::psd_to_shaping(table, self.cfg.sample_rate_hz(), *shaping_len)?;
                let rmax = sh.len().min(m);
                let mut rr = vec![0.0; rmax];
                for (tau, r) in rr.iter_mut().enumerate() {
                    for u in 0..sh.len() - tau {
                        *r += sh[u] * sh[u + tau];
                    }
                }
                Ok(self
                    .cfg
                    .active
                    .active()
                    .iter()
                    .map(|&k| {
                        let th = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
                        let mut acc = (m as f64) * rr[0];
                        for (tau, &r) in rr.iter().enumerate().skip(1) {
                            acc += 2.0 * (m - tau) as f64 * r * (th * tau as f64).cos();
                        }
                        noise_scale * acc
                    })
                    .collect())
            }
        }
    }

    /// Assemble the SINR profile for a noise model and symbol variance.
    pub fn profile(
        &self,
        noise: &NoiseModel,
        sigma_x2: f64,
        noise_scale: f64,
    ) -> Result<WofdmSinrProfile> {
        noise.validate()?;
        let nv = self.noise_at_bins(noise, noise_scale)?;
        let nk = self.cfg.active.len();
        let mut sinr = Vec::with_capacity(nk);
        let mut usable = Vec::with_capacity(nk);
        let mut p_interf = Vec::with_capacity(nk);
        let mut h_mag2 = Vec::with_capacity(nk);
        for i in 0..nk {
            let u2 = self.useful[i].norm_sqr();
            h_mag2.push(self.h[i].norm_sqr());
            let pint = sigma_x2 * self.interf_unit[i];
            p_interf.push(pint);
            if self.h[i].norm() < 1e-12 {
                usable.push(false);
                sinr.push(0.0);
            } else {
                usable.push(true);
                sinr.push(sigma_x2 * u2 / (nv[i] + pint));
            }
        }
        Ok(WofdmSinrProfile {
            active: self.cfg.active.clone(),
            h_mag2,
            noise_var: nv,
            p_interf,
            sinr,
            usable,
            sigma_x2,
        })
    }
}

/// One-call SINR profile per the configured link.
pub fn wofdm_sinr(
    cfg: &WofdmConfig,
    ch: &ChannelRealization,
    noise: &NoiseModel,
    sigma_x2: f64,
) -> Result<WofdmSinrProfile> {
    wofdm_analysis(cfg, ch)?.profile(noise, sigma_x2, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_cfg(gi: usize, ro: usize) -> WofdmConfig {
        WofdmConfig::new(
            16,
            gi,
            ro,
            ToneMask::new(vec![1, 2, 3, 4, 5, 6], 16).unwrap(),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn transmit_stream_is_real_and_round_trips() {
        let cfg = toy_cfg(2, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let frame = WofdmFrame::random_qpsk(&cfg, 8, &mut rng);
        let x = wofdm_modulate(&frame, &cfg).unwrap();
        let ch = ChannelRealization::ideal(16.0);
        let back = wofdm_demodulate(&x, &cfg, &ch, 0).unwrap();
        for (r0, r1) in frame.symbols.iter().zip(&back.symbols) {
            for (a, b) in r0.iter().zip(r1) {
                assert!((a - b).norm() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn delay_within_guard_is_corrected_by_zf() {
        let cfg = toy_cfg(4, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let frame = WofdmFrame::random_qpsk(&cfg, 6, &mut rng);
        let x = wofdm_modulate(&frame, &cfg).unwrap();
        let mut taps = vec![0.0; 3];
        taps[2] = 1.0;
        let ch = ChannelRealization::from_taps(taps, 16.0).unwrap();
        let y: Vec<f64> = {
            let mut y = vec![0.0; x.len() + 2];
            for (i, &v) in x.iter().enumerate() {
                y[i + 2] += v;
            }
            y
        };
        let back = wofdm_demodulate(&y, &cfg, &ch, 0).unwrap();
        for (r0, r1) in frame.symbols.iter().zip(&back.symbols) {
            for (a, b) in r0.iter().zip(r1.iter().take(frame.num_symbols())) {
                assert!((a - b).norm() < 1e-10, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn cp_absorbs_short_channel() {
        let cfg = toy_cfg(4, 0);
        let ch = ChannelRealization::from_taps(vec![1.0, -0.5, 0.25], 16.0).unwrap();
        let an = wofdm_analysis(&cfg, &ch).unwrap();
        for (i, &k) in cfg.active.active().iter().enumerate() {
            let h = ch.response(2.0 * std::f64::consts::PI * k as f64 / 16.0);
            assert!((an.useful[i] - h).norm() < 1e-12);
            assert!(
                an.interf_unit[i] < 1e-12 * h.norm_sqr(),
                "interference {} at tone {k}",
                an.interf_unit[i]
            );
        }
    }

    #[test]
    fn ideal_channel_sinr_is_snr() {
        let cfg = toy_cfg(2, 0);
        let ch = ChannelRealization::ideal(16.0);
        let prof = wofdm_sinr(&cfg, &ch, &NoiseModel::Awgn { variance: 0.01 }, 1.0).unwrap();
        // useful gain 1, noise M*sigma^2
        for &s in &prof.sinr {
            let expect = 1.0 / (16.0 * 0.01);
            assert!((s - expect).abs() < 1e-9 * expect);
        }
    }

    #[test]
    fn sample_rate_mismatch_rejected() {
        let cfg = toy_cfg(2, 0);
        let ch = ChannelRealization::ideal(17.0);
        assert!(matches!(
            wofdm_analysis(&cfg, &ch),
            Err(Error::SampleRateMismatch { .. })
        ));
    }

    #[test]
    fn rolloff_taper_round_trips_too() {
        let cfg = toy_cfg(4, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let frame = WofdmFrame::random_qpsk(&cfg, 6, &mut rng);
        let x = wofdm_modulate(&frame, &cfg).unwrap();
        let ch = ChannelRealization::ideal(16.0);
        let back = wofdm_demodulate(&x, &cfg, &ch, 0).unwrap();
        for (r0, r1) in frame.symbols.iter().zip(&back.symbols) {
            for (a, b) in r0.iter().zip(r1.iter().take(frame.num_symbols())) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }
}
