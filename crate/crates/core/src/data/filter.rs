//! Butterworth band-pass design in second-order sections and zero-phase
//! forward-backward filtering.

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix};

use super::{DataError, Result};
use crate::covariance::Epoch;

/// Prototype order of the band-pass filter (each band edge gets this order).
pub const BANDPASS_ORDER: usize = 4;

/// Cascade of second-order sections `[b0, b1, b2, 1, a1, a2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    sections: Vec<[f64; 6]>,
}

/// Digital Butterworth band-pass of prototype order `order` (even), designed by
/// the bilinear transform with pre-warped band edges.
///
/// Gain is normalized to exactly 1 at the pre-warped geometric center.
pub fn butterworth_bandpass(order: usize, low: f64, high: f64, sample_rate: f64) -> Result<Sos> {
    if !(low > 0.0 && low < high && high < sample_rate / 2.0) || order == 0 || order % 2 == 1 {
        return Err(DataError::InvalidBand {
            low,
            high,
            sample_rate,
        });
    }
    let fs2 = 2.0 * sample_rate;
    let w1 = fs2 * (PI * low / sample_rate).tan();
    let w2 = fs2 * (PI * high / sample_rate).tan();
    let bw = w2 - w1;
    let w0 = (w1 * w2).sqrt();

    let n = order as f64;
    let mut sections = Vec::with_capacity(order);
    for k in 1..=order / 2 {
        let proto = Complex::from_polar(1.0, PI * (2.0 * k as f64 + n - 1.0) / (2.0 * n));
        let a = proto * (bw / 2.0);
        let disc = (a * a - Complex::new(w0 * w0, 0.0)).sqrt();
        for s in [a + disc, a - disc] {
            let z = (Complex::new(fs2, 0.0) + s) / (Complex::new(fs2, 0.0) - s);
            sections.push([1.0, 0.0, -1.0, 1.0, -2.0 * z.re, z.norm_sqr()]);
        }
    }
    let mut sos = Sos { sections };
    let center = 2.0 * (w0 / fs2).atan();
    let gain = sos.response(center).norm();
    for b in &mut sos.sections[0][..3] {
        *b /= gain;
    }
    Ok(sos)
}

impl Sos {
    pub fn sections(&self) -> &[[f64; 6]] {
        &self.sections
    }

    /// Filter order (twice the number of sections).
    pub fn order(&self) -> usize {
        2 * self.sections.len()
    }

    /// Complex response at normalized angular frequency `omega` (rad/sample).
    pub fn response(&self, omega: f64) -> Complex<f64> {
        let z1 = Complex::from_polar(1.0, -omega);
        let z2 = z1 * z1;
        self.sections.iter().fold(Complex::new(1.0, 0.0), |acc, s| {
            let num = z2 * s[2] + z1 * s[1] + s[0];
            let den = z2 * s[5] + z1 * s[4] + s[3];
            acc * num / den
        })
    }

    /// Steady-state section states for a unit step input.
    fn step_state(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let g = (s[0] + s[1] + s[2]) / (s[3] + s[4] + s[5]);
                let z1 = s[2] - s[5] * g;
                let z0 = s[1] - s[4] * g + z1;
                let state = [z0 * scale, z1 * scale];
                scale *= g;
                state
            })
            .collect()
    }

    /// Transposed direct-form II filtering from the given section states.
    fn run(&self, x: &mut [f64], mut state: Vec<[f64; 2]>) {
        for (s, z) in self.sections.iter().zip(state.iter_mut()) {
            for v in x.iter_mut() {
                let input = *v;
                let y = s[0] * input + z[0];
                z[0] = s[1] * input - s[4] * y + z[1];
                z[1] = s[2] * input - s[5] * y;
                *v = y;
            }
        }
    }

    /// Causal filtering with zero initial state.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        self.run(&mut y, vec![[0.0; 2]; self.sections.len()]);
        y
    }

    /// Forward-backward filtering with odd reflection padding of three times
    /// the filter order and step-response initial states.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n < 2 {
            return x.to_vec();
        }
        let pad = (3 * self.order()).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        let zi = self.step_state();
        let scaled = |v: f64| zi.iter().map(|z| [z[0] * v, z[1] * v]).collect::<Vec<_>>();

        let first = ext[0];
        self.run(&mut ext, scaled(first));
        ext.reverse();
        let first = ext[0];
        self.run(&mut ext, scaled(first));
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }

    pub fn filter_epoch(&self, x: &Epoch) -> std::result::Result<Epoch, crate::covariance::CovarianceError> {
        let d = x.channels();
        let t = x.samples();
        let mut out = DMatrix::zeros(d, t);
        for c in 0..d {
            let y = self.filtfilt(&x.channel(c));
            out.row_mut(c).iter_mut().zip(y).for_each(|(o, v)| *o = v);
        }
        Epoch::new(out, x.sample_rate())
    }
}

/// Zero-phase Butterworth band-pass of every channel.
pub fn bandpass(x: &Epoch, low: f64, high: f64) -> Result<Epoch> {
    let sos = butterworth_bandpass(BANDPASS_ORDER, low, high, x.sample_rate())?;
    Ok(sos.filter_epoch(x)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * freq * i as f64 / fs).sin()).collect()
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    #[test]
    fn invalid_bands() {
        assert!(butterworth_bandpass(4, 0.0, 10.0, 100.0).is_err());
        assert!(butterworth_bandpass(4, 20.0, 10.0, 100.0).is_err());
        assert!(butterworth_bandpass(4, 10.0, 50.0, 100.0).is_err());
        assert!(butterworth_bandpass(3, 10.0, 20.0, 100.0).is_err());
    }

    #[test]
    fn unit_gain_at_center_and_zero_at_edges() {
        let sos = butterworth_bandpass(4, 8.0, 35.0, 250.0).unwrap();
        assert_eq!(sos.order(), 8);
        let fs2 = 500.0;
        let w0 = (fs2 * (PI * 8.0 / 250.0).tan() * fs2 * (PI * 35.0 / 250.0).tan()).sqrt();
        assert!((sos.response(2.0 * (w0 / fs2).atan()).norm() - 1.0).abs() < 1e-12);
        assert!(sos.response(0.0).norm() < 1e-12);
        assert!(sos.response(PI).norm() < 1e-12);
        // -3 dB at the band edges
        for f in [8.0, 35.0] {
            let g = sos.response(2.0 * PI * f / 250.0).norm();
            assert!((g - 0.5f64.sqrt()).abs() < 1e-9, "{f} Hz: {g}");
        }
    }

    #[test]
    fn passband_and_stopband_amplitude() {
        let n = 2500;
        let sos = butterworth_bandpass(4, 8.0, 35.0, 250.0).unwrap();
        let inner = 500..2000;
        let x = sine(20.0, 250.0, n);
        let y = sos.filtfilt(&x);
        let ratio = rms(&y[inner.clone()]) / rms(&x[inner.clone()]);
        assert!((ratio - 1.0).abs() < 0.05, "passband ratio {ratio}");

        let x = sine(2.0, 250.0, n);
        let y = sos.filtfilt(&x);
        let ratio = rms(&y[inner.clone()]) / rms(&x[inner]);
        assert!(ratio <= 0.1, "stopband ratio {ratio}");
    }

    #[test]
    fn zero_in_zero_out() {
        let sos = butterworth_bandpass(4, 8.0, 35.0, 250.0).unwrap();
        assert!(sos.filtfilt(&vec![0.0; 300]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn removes_dc_offset() {
        let sos = butterworth_bandpass(4, 8.0, 35.0, 250.0).unwrap();
        assert!(sos.filtfilt(&vec![3.0; 2500]).iter().all(|&v| v == 0.0));
        // The offset contributes nothing to the output mean; what remains is
        // the edge transient of the in-band component.
        let s = sine(20.0, 250.0, 2500);
        let shifted: Vec<f64> = s.iter().map(|v| v + 3.0).collect();
        let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
        let y = sos.filtfilt(&shifted);
        let y0 = sos.filtfilt(&s);
        assert!((mean(&y) - mean(&y0)).abs() < 1e-6 * rms(&y));
    }

    #[test]
    fn symmetric_pulse_stays_symmetric() {
        let sos = butterworth_bandpass(4, 8.0, 35.0, 250.0).unwrap();
        let n = 1001;
        let x: Vec<f64> = (0..n)
            .map(|i| {
                let t = (i as f64 - 500.0) / 6.0;
                (-t * t).exp()
            })
            .collect();
        let y = sos.filtfilt(&x);
        let asym: Vec<f64> = (0..n).map(|i| y[i] - y[n - 1 - i]).collect();
        assert!(rms(&asym) < 1e-9, "asymmetry {}", rms(&asym));
    }

    #[test]
    fn causal_filter_matches_response_in_steady_state() {
        let sos = butterworth_bandpass(4, 8.0, 35.0, 250.0).unwrap();
        let x = sine(20.0, 250.0, 3000);
        let y = sos.filter(&x);
        let g = sos.response(2.0 * PI * 20.0 / 250.0).norm();
        let ratio = rms(&y[2000..]) / rms(&x[2000..]);
        assert!((ratio - g).abs() < 1e-3);
    }
}
