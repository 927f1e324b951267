//! Frequency split of the net load between gensets and storage.
//!
//! The sampled profile is taken to the frequency domain with an unnormalized
//! DFT. Bins at or below the cut-off (the DC bin always) go to the gensets,
//! everything above to the battery. The genset share is clamped at zero
//! because gensets cannot absorb power, and the battery share is defined by
//! subtraction so the two always add back to the net load.

use std::io::Write;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

#[derive(Debug, Clone)]
pub struct FrequencySpectrum {
    coefficients: Vec<Complex64>,
    interval_hours: f64,
}

impl FrequencySpectrum {
    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Width of one bin in cycles per hour, `1 / (N·T)`.
    pub fn resolution(&self) -> f64 {
        1.0 / (self.coefficients.len() as f64 * self.interval_hours)
    }

    pub fn nyquist(&self) -> f64 {
        0.5 / self.interval_hours
    }

    /// Signed frequency of bin `k` in cycles per hour.
    pub fn frequency(&self, k: usize) -> f64 {
        let n = self.coefficients.len();
        let signed = if k <= n / 2 {
            k as f64
        } else {
            k as f64 - n as f64
        };
        signed * self.resolution()
    }

    /// `bin,frequency_cph,re,im,magnitude`, one row per bin.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["bin", "frequency_cph", "re", "im", "magnitude"])?;
        for (k, c) in self.coefficients.iter().enumerate() {
            wtr.write_record([
                k.to_string(),
                self.frequency(k).to_string(),
                c.re.to_string(),
                c.im.to_string(),
                c.norm().to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn forward_transform(series: &TimeSeries) -> Result<FrequencySpectrum> {
    if series.len() < 2 {
        return Err(Error::domain("need at least two samples to transform"));
    }
    let mut buf: Vec<Complex64> = series
        .samples()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    FftPlanner::new()
        .plan_fft_forward(buf.len())
        .process(&mut buf);
    Ok(FrequencySpectrum {
        coefficients: buf,
        interval_hours: series.interval_hours(),
    })
}

/// Real part of the normalized inverse DFT.
pub fn inverse_transform(spectrum: &FrequencySpectrum) -> Result<TimeSeries> {
    if spectrum.is_empty() {
        return Err(Error::Empty("spectrum"));
    }
    let mut buf = spectrum.coefficients.clone();
    FftPlanner::new()
        .plan_fft_inverse(buf.len())
        .process(&mut buf);
    let scale = 1.0 / buf.len() as f64;
    TimeSeries::new(
        buf.iter().map(|c| c.re * scale).collect(),
        spectrum.interval_hours,
    )
}

#[derive(Debug, Clone)]
pub struct SplitResult {
    /// Clamped low-frequency share, ≥ 0 everywhere.
    pub genset_share: TimeSeries,
    /// Net load minus genset share; positive means discharging.
    pub bess_share_ac: TimeSeries,
    /// Cut-off after snapping to a bin edge, cycles per hour.
    pub cutoff_frequency: f64,
    /// Highest retained bin index.
    pub cutoff_bin: usize,
}

/// Low-pass splitter that keeps the forward spectrum of one series so
/// repeated splits at different cut-offs only pay for the inverse transform.
pub struct Splitter {
    series: TimeSeries,
    spectrum: FrequencySpectrum,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Splitter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Splitter")
            .field("len", &self.series.len())
            .field("interval_hours", &self.series.interval_hours())
            .finish()
    }
}

impl Splitter {
    pub fn new(series: &TimeSeries) -> Result<Self> {
        let spectrum = forward_transform(series)?;
        let inverse = FftPlanner::new().plan_fft_inverse(series.len());
        Ok(Self {
            series: series.clone(),
            spectrum,
            inverse,
        })
    }

    pub fn series(&self) -> &TimeSeries {
        &self.series
    }

    pub fn spectrum(&self) -> &FrequencySpectrum {
        &self.spectrum
    }

    /// Highest bin index that has a distinct frequency, `⌊N/2⌋`.
    pub fn max_bin(&self) -> usize {
        self.series.len() / 2
    }

    pub fn nyquist(&self) -> f64 {
        self.spectrum.nyquist()
    }

    /// Nearest bin edge to `cutoff`.
    pub fn cutoff_to_bin(&self, cutoff: f64) -> Result<usize> {
        let nyq = self.nyquist();
        if !(0.0..=nyq * (1.0 + 1e-12)).contains(&cutoff) {
            return Err(Error::domain(format!(
                "cut-off {cutoff} cycles/h outside [0, {nyq}]"
            )));
        }
        let bin = (cutoff / self.spectrum.resolution()).round() as usize;
        Ok(bin.min(self.max_bin()))
    }

    pub fn bin_to_cutoff(&self, bin: usize) -> f64 {
        if bin >= self.max_bin() {
            self.nyquist().min(bin as f64 * self.spectrum.resolution())
        } else {
            bin as f64 * self.spectrum.resolution()
        }
    }

    /// Inverse transform of bins with `|k| <= bin`, before clamping.
    pub fn lowpass_raw(&self, bin: usize) -> Vec<f64> {
        let n = self.series.len();
        let bin = bin.min(self.max_bin());
        let mut buf: Vec<Complex64> = self
            .spectrum
            .coefficients
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                if k.min(n - k) <= bin {
                    c
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        self.inverse.process(&mut buf);
        let scale = 1.0 / n as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }

    pub fn split_bin(&self, bin: usize) -> Result<SplitResult> {
        let bin = bin.min(self.max_bin());
        let genset: Vec<f64> = if bin == self.max_bin() {
            // full band: the inverse would only add round-off
            self.series.samples().iter().map(|&v| v.max(0.0)).collect()
        } else {
            self.lowpass_raw(bin)
                .into_iter()
                .map(|v| v.max(0.0))
                .collect()
        };
        let bess: Vec<f64> = self
            .series
            .samples()
            .iter()
            .zip(&genset)
            .map(|(&net, &g)| net - g)
            .collect();
        Ok(SplitResult {
            genset_share: self.series.with_samples(genset)?,
            bess_share_ac: self.series.with_samples(bess)?,
            cutoff_frequency: self.bin_to_cutoff(bin),
            cutoff_bin: bin,
        })
    }

    pub fn split(&self, cutoff: f64) -> Result<SplitResult> {
        self.split_bin(self.cutoff_to_bin(cutoff)?)
    }
}

/// Genset / battery split at `cutoff` cycles per hour.
pub fn lowpass_split(series: &TimeSeries, cutoff: f64) -> Result<SplitResult> {
    Splitter::new(series)?.split(cutoff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    use proptest::prelude::*;

    #[test]
    fn constant_series_is_dc_only() {
        let s = TimeSeries::constant(3.0, 24, 1.0).unwrap();
        let spec = forward_transform(&s).unwrap();
        assert!((spec.coefficients()[0].re - 72.0).abs() < 1e-12);
        for c in &spec.coefficients()[1..] {
            assert!(c.norm() < 1e-9);
        }
    }

    #[test]
    fn sinusoid_occupies_two_bins() {
        let n = 64;
        let m = 5;
        let s = TimeSeries::new(
            (0..n)
                .map(|i| (2.0 * PI * m as f64 * i as f64 / n as f64).cos())
                .collect(),
            1.0,
        )
        .unwrap();
        let spec = forward_transform(&s).unwrap();
        let nonzero: Vec<usize> = spec
            .coefficients()
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm() > 1e-9)
            .map(|(k, _)| k)
            .collect();
        assert_eq!(nonzero, vec![m, n - m]);
        let (a, b) = (spec.coefficients()[m], spec.coefficients()[n - m]);
        assert!((a - b.conj()).norm() < 1e-9);
    }

    #[test]
    fn rejects_short_series_and_bad_cutoff() {
        let one = TimeSeries::constant(1.0, 1, 1.0).unwrap();
        assert!(forward_transform(&one).is_err());
        let s = TimeSeries::constant(1.0, 24, 1.0).unwrap();
        assert!(lowpass_split(&s, -0.1).is_err());
        assert!(lowpass_split(&s, 0.51).is_err());
    }

    #[test]
    fn full_band_passes_everything_to_gensets() {
        let s = TimeSeries::new((0..48).map(|i| 100.0 + (i % 7) as f64).collect(), 1.0).unwrap();
        let r = lowpass_split(&s, 0.5).unwrap();
        assert_eq!(r.genset_share.samples(), s.samples());
        assert!(r.bess_share_ac.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dc_only_on_zero_mean_signal() {
        let s = TimeSeries::new(
            (0..24)
                .map(|i| if i % 2 == 0 { 5.0 } else { -5.0 })
                .collect(),
            1.0,
        )
        .unwrap();
        let splitter = Splitter::new(&s).unwrap();
        let raw = splitter.lowpass_raw(0);
        assert!(raw.iter().all(|v| v.abs() < 1e-12));
        let r = splitter.split(0.0).unwrap();
        for (b, x) in r.bess_share_ac.samples().iter().zip(s.samples()) {
            assert!((b - x).abs() < 1e-12);
        }
    }

    #[test]
    fn clamp_at_full_band() {
        let s = TimeSeries::new(vec![3.0, -2.0, 0.0, 7.5, -0.5, 1.0], 1.0).unwrap();
        let r = lowpass_split(&s, 0.5).unwrap();
        for ((g, b), x) in r
            .genset_share
            .samples()
            .iter()
            .zip(r.bess_share_ac.samples())
            .zip(s.samples())
        {
            assert_eq!(*g, x.max(0.0));
            assert_eq!(*b, x.min(0.0));
        }
    }

    #[test]
    fn cutoff_snaps_to_nearest_bin() {
        let s = TimeSeries::constant(1.0, 168, 1.0).unwrap();
        let sp = Splitter::new(&s).unwrap();
        let df = 1.0 / 168.0;
        assert_eq!(sp.cutoff_to_bin(0.0).unwrap(), 0);
        assert_eq!(sp.cutoff_to_bin(7.4 * df).unwrap(), 7);
        assert_eq!(sp.cutoff_to_bin(7.6 * df).unwrap(), 8);
        assert_eq!(sp.cutoff_to_bin(0.5).unwrap(), 84);
        assert_eq!(sp.bin_to_cutoff(84), 0.5);
    }

    fn arb_series() -> impl Strategy<Value = Vec<f64>> {
        (2usize..200).prop_flat_map(|n| proptest::collection::vec(-1000.0f64..1000.0, n))
    }

    proptest! {
        #[test]
        fn partition_and_clamp_hold(xs in arb_series(), frac in 0.0f64..=1.0) {
            let s = TimeSeries::new(xs, 1.0).unwrap();
            let r = lowpass_split(&s, frac * 0.5).unwrap();
            let scale = s.samples().iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for ((g, b), x) in r.genset_share.samples().iter().zip(r.bess_share_ac.samples()).zip(s.samples()) {
                prop_assert!(*g >= 0.0);
                prop_assert!((g + b - x).abs() <= 1e-9 * scale);
            }
        }

        #[test]
        fn transform_round_trips(xs in arb_series()) {
            let s = TimeSeries::new(xs, 0.5).unwrap();
            let back = inverse_transform(&forward_transform(&s).unwrap()).unwrap();
            let scale = s.samples().iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (a, b) in back.samples().iter().zip(s.samples()) {
                prop_assert!((a - b).abs() <= 1e-9 * scale);
            }
        }

        #[test]
        fn spectra_of_real_series_are_conjugate_symmetric(xs in arb_series()) {
            let s = TimeSeries::new(xs, 1.0).unwrap();
            let spec = forward_transform(&s).unwrap();
            let n = spec.len();
            let c = spec.coefficients();
            let scale = c.iter().fold(1.0f64, |m, v| m.max(v.norm()));
            for k in 1..n {
                prop_assert!((c[k] - c[n - k].conj()).norm() <= 1e-9 * scale);
            }
        }

        /// Residual energy carried by storage can only shrink as more of the
        /// band is handed to the gensets.
        #[test]
        fn storage_energy_shrinks_with_cutoff(xs in proptest::collection::vec(0.0f64..1000.0, 16..120)) {
            let s = TimeSeries::new(xs, 1.0).unwrap();
            let sp = Splitter::new(&s).unwrap();
            let mut prev = f64::INFINITY;
            for bin in 0..=sp.max_bin() {
                let raw = sp.lowpass_raw(bin);
                let e: f64 = raw.iter().zip(s.samples()).map(|(l, x)| (x - l).powi(2)).sum();
                prop_assert!(e <= prev * (1.0 + 1e-9) + 1e-9);
                prev = e;
            }
        }
    }
}
