//! Fourier spectra of site-occupation traces, peak detection, and energy
//! ladder reconstruction from assigned splittings.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::dynamics::TimeSeries;
use crate::error::{Error, Result};
use crate::units::inverse_fs_to_cm1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    #[default]
    Rectangular,
    Hann,
}

impl Window {
    fn weights(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|k| {
                    let x = std::f64::consts::PI * k as f64 / (n - 1).max(1) as f64;
                    x.sin().powi(2)
                })
                .collect(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Window::Rectangular => "rectangular",
            Window::Hann => "hann",
        }
    }
}

/// One-sided magnitude spectrum on bins `0..=N/2`.
///
/// Magnitudes use the unitary DFT normalization `|X_k|/√N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub frequencies_cm1: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub window: Window,
    pub source: String,
}

impl Spectrum {
    pub fn bin_width(&self) -> f64 {
        self.frequencies_cm1.get(1).map_or(0.0, |f| f - self.frequencies_cm1[0])
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    /// Index of the largest non-DC bin.
    pub fn argmax(&self) -> Option<usize> {
        (1..self.len()).max_by(|&a, &b| self.amplitudes[a].total_cmp(&self.amplitudes[b]))
    }

    /// CSV `freq_cm1,amplitude`.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "freq_cm1,amplitude")?;
        for (f, a) in self.frequencies_cm1.iter().zip(&self.amplitudes) {
            writeln!(w, "{f:.12e},{a:.12e}")?;
        }
        Ok(())
    }

    pub fn read_csv(r: impl Read) -> Result<Self> {
        let rows = read_table(r, &["freq_cm1", "amplitude"])?;
        Ok(Self {
            frequencies_cm1: rows.iter().map(|r| r[0]).collect(),
            amplitudes: rows.iter().map(|r| r[1]).collect(),
            window: Window::Rectangular,
            source: String::new(),
        })
    }
}

fn read_table(r: impl Read, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::Reader::from_reader(r);
    let found = reader.headers().map_err(|e| Error::parse(1, e.to_string()))?;
    if found.iter().map(str::trim).ne(header.iter().copied()) {
        return Err(Error::parse(1, format!("expected header {}", header.join(","))));
    }
    let mut rows = Vec::new();
    for (idx, rec) in reader.records().enumerate() {
        let line = idx + 2;
        let rec = rec.map_err(|e| Error::parse(line, e.to_string()))?;
        let vals = rec
            .iter()
            .map(|f| f.trim().parse::<f64>().map_err(|e| Error::parse(line, format!("{f}: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        if vals.len() != header.len() {
            return Err(Error::parse(line, "wrong number of fields"));
        }
        rows.push(vals);
    }
    Ok(rows)
}

fn uniform_step(times_fs: &[f64]) -> Result<f64> {
    if times_fs.len() < 4 {
        return Err(Error::invalid("need at least 4 samples for a spectrum"));
    }
    let dt = times_fs[1] - times_fs[0];
    if dt <= 0.0 {
        return Err(Error::invalid("time grid must be increasing"));
    }
    for (k, t) in times_fs.iter().enumerate() {
        let expected = times_fs[0] + k as f64 * dt;
        if (t - expected).abs() > 1e-9 * dt.max(expected.abs()) {
            return Err(Error::invalid(format!("non-uniform time grid at sample {k}")));
        }
    }
    Ok(dt)
}

fn magnitude_spectrum(samples: &[f64], window: Window) -> Vec<f64> {
    let n = samples.len();
    let w = window.weights(n);
    let mut buf: Vec<Complex64> = samples.iter().zip(&w).map(|(x, w)| Complex64::new(x * w, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let norm = (n as f64).sqrt();
    buf[..=n / 2].iter().map(|z| z.norm() / norm).collect()
}

fn axis(n: usize, dt_fs: f64) -> Vec<f64> {
    (0..=n / 2).map(|k| inverse_fs_to_cm1(k as f64 / (n as f64 * dt_fs))).collect()
}

/// Spectrum of a list of uniformly sampled traces, magnitudes summed.
pub fn spectrum_of_traces(traces: &[Vec<f64>], dt_fs: f64, window: Window, source: &str) -> Result<Spectrum> {
    let n = traces.first().map_or(0, Vec::len);
    if n < 4 || traces.iter().any(|t| t.len() != n) {
        return Err(Error::invalid("traces must share a length of at least 4"));
    }
    let mut amplitudes = vec![0.0; n / 2 + 1];
    for trace in traces {
        for (acc, a) in amplitudes.iter_mut().zip(magnitude_spectrum(trace, window)) {
            *acc += a;
        }
    }
    Ok(Spectrum {
        frequencies_cm1: axis(n, dt_fs),
        amplitudes,
        window,
        source: source.to_string(),
    })
}

/// Fourier spectrum of the selected site traces (all sites when `sites`
/// is empty).
pub fn fourier_spectrum(series: &TimeSeries, sites: &[usize], window: Window) -> Result<Spectrum> {
    let dt = uniform_step(&series.times_fs)?;
    let n_sites = series.n_sites();
    let selected: Vec<usize> = if sites.is_empty() { (0..n_sites).collect() } else { sites.to_vec() };
    if let Some(&s) = selected.iter().find(|&&s| s >= n_sites) {
        return Err(Error::invalid(format!("site {s} outside {n_sites}-site series")));
    }
    let traces: Vec<Vec<f64>> = selected.iter().map(|&s| series.site_trace(s)).collect();
    spectrum_of_traces(&traces, dt, window, &format!("{} sites {:?}", series.backend.name(), selected))
}

/// Amplitude-wise sum of spectra on a shared axis.
pub fn combine_spectra(spectra: &[Spectrum]) -> Result<Spectrum> {
    let first = spectra.first().ok_or_else(|| Error::invalid("no spectra to combine"))?;
    let mut out = first.clone();
    for s in &spectra[1..] {
        let same = s.len() == first.len()
            && s.frequencies_cm1
                .iter()
                .zip(&first.frequencies_cm1)
                .all(|(a, b)| (a - b).abs() <= 1e-9 * b.abs().max(1.0));
        if !same {
            return Err(Error::invalid("spectra have different frequency axes"));
        }
        for (acc, a) in out.amplitudes.iter_mut().zip(&s.amplitudes) {
            *acc += a;
        }
    }
    out.source = spectra.iter().map(|s| s.source.as_str()).collect::<Vec<_>>().join(" + ");
    Ok(out)
}

/// Relative mismatch between `Σ|X_k|²` of the unitary DFT and `Σx²`.
pub fn parseval_defect(samples: &[f64]) -> f64 {
    let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    let n = samples.len() as f64;
    let freq: f64 = buf.iter().map(|z| z.norm_sqr()).sum::<f64>() / n;
    let time: f64 = samples.iter().map(|x| x * x).sum();
    (freq - time).abs() / time.max(f64::MIN_POSITIVE)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub frequency_cm1: f64,
    pub amplitude: f64,
    pub uncertainty_cm1: f64,
    /// Bin of the local maximum.
    pub bin: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PeakSet {
    pub peaks: Vec<Peak>,
}

impl PeakSet {
    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.peaks.iter().map(|p| p.frequency_cm1).collect()
    }

    /// CSV `freq_cm1,amplitude,uncertainty_cm1`.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "freq_cm1,amplitude,uncertainty_cm1")?;
        for p in &self.peaks {
            writeln!(w, "{:.12e},{:.12e},{:.12e}", p.frequency_cm1, p.amplitude, p.uncertainty_cm1)?;
        }
        Ok(())
    }

    /// Bins are not stored in the file and read back as 0.
    pub fn read_csv(r: impl Read) -> Result<Self> {
        let rows = read_table(r, &["freq_cm1", "amplitude", "uncertainty_cm1"])?;
        Ok(Self {
            peaks: rows
                .into_iter()
                .map(|r| Peak {
                    frequency_cm1: r[0],
                    amplitude: r[1],
                    uncertainty_cm1: r[2],
                    bin: 0,
                })
                .collect(),
        })
    }
}

pub const DEFAULT_THRESHOLD_FACTOR: f64 = 5.0;

/// Bins below this fraction of the largest bin (DC included) are treated as
/// round-off and never reported.
const ROUNDOFF_FLOOR: f64 = 1e-9;

/// A local maximum must rise this fraction of its height above the higher
/// of its two flanking minima; smaller bumps are ripple on a shoulder.
const MIN_RELATIVE_PROMINENCE: f64 = 0.01;

/// Height of `a[k]` above the higher of the lowest points reached walking
/// each way until the spectrum climbs above `a[k]`.
fn prominence(a: &[f64], k: usize) -> f64 {
    let walk = |range: &mut dyn Iterator<Item = usize>| {
        let mut low = a[k];
        for i in range {
            if a[i] > a[k] {
                break;
            }
            low = low.min(a[i]);
        }
        low
    };
    let left = walk(&mut (0..k).rev());
    let right = walk(&mut (k + 1..a.len()));
    a[k] - left.max(right)
}

/// Local maxima above `threshold_factor × median` (DC bin excluded) and
/// with relative prominence of at least 1%, refined by a three-point
/// parabola.
///
/// Uncertainty is half the magnitude of the interpolation correction plus
/// `bin/√12`.
pub fn detect_peaks(spectrum: &Spectrum, threshold_factor: f64) -> Result<PeakSet> {
    if threshold_factor.is_nan() || threshold_factor <= 0.0 {
        return Err(Error::invalid("threshold factor must be positive"));
    }
    let a = &spectrum.amplitudes;
    if a.len() < 3 {
        return Ok(PeakSet::default());
    }
    let mut rest: Vec<f64> = a[1..].to_vec();
    rest.sort_by(f64::total_cmp);
    let median = rest[rest.len() / 2];
    let floor = ROUNDOFF_FLOOR * a.iter().copied().fold(0.0, f64::max);
    let threshold = (threshold_factor * median).max(floor);
    let bin = spectrum.bin_width();
    let peaks = (1..a.len() - 1)
        .filter(|&k| a[k] > a[k - 1] && a[k] >= a[k + 1] && a[k] > threshold)
        .filter(|&k| prominence(a, k) >= MIN_RELATIVE_PROMINENCE * a[k])
        .map(|k| {
            let (l, c, r) = (a[k - 1], a[k], a[k + 1]);
            let denom = l - 2.0 * c + r;
            let delta = if denom.abs() > 0.0 { 0.5 * (l - r) / denom } else { 0.0 };
            Peak {
                frequency_cm1: spectrum.frequencies_cm1[k] + delta * bin,
                amplitude: c - 0.25 * (l - r) * delta,
                uncertainty_cm1: 0.5 * (delta * bin).abs() + bin / 12f64.sqrt(),
                bin: k,
            }
        })
        .collect();
    Ok(PeakSet { peaks })
}

/// Splitting `E_j − E_i` between levels `i < j`, cm⁻¹.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Splitting {
    pub lower: usize,
    pub upper: usize,
    pub frequency_cm1: f64,
}

impl From<(usize, usize, f64)> for Splitting {
    fn from((lower, upper, frequency_cm1): (usize, usize, f64)) -> Self {
        Self {
            lower,
            upper,
            frequency_cm1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assignment {
    pub peak: Peak,
    pub splitting: Splitting,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLadder {
    /// Relative energies, cm⁻¹, level 0 anchored at 0.
    pub levels: Vec<f64>,
    pub uncertainties: Vec<f64>,
    /// RMS of `E_j − E_i − f` over assigned peaks, cm⁻¹.
    pub residual_rms: f64,
    pub assignments: Vec<Assignment>,
}

impl EnergyLadder {
    /// CSV `level_index,energy_cm1,uncertainty_cm1`.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "level_index,energy_cm1,uncertainty_cm1")?;
        for (i, (e, u)) in self.levels.iter().zip(&self.uncertainties).enumerate() {
            writeln!(w, "{i},{e:.12e},{u:.12e}")?;
        }
        Ok(())
    }

    pub fn read_csv(r: impl Read) -> Result<(Vec<f64>, Vec<f64>)> {
        let rows = read_table(r, &["level_index", "energy_cm1", "uncertainty_cm1"])?;
        for (k, row) in rows.iter().enumerate() {
            if row[0] != k as f64 {
                return Err(Error::parse(k + 2, "level indices must count up from 0"));
            }
        }
        Ok((rows.iter().map(|r| r[1]).collect(), rows.iter().map(|r| r[2]).collect()))
    }

    /// RMS deviation from reference relative energies.
    pub fn rms_against(&self, reference: &[f64]) -> f64 {
        let n = self.levels.len().min(reference.len()).max(1);
        let ss: f64 = self.levels.iter().zip(reference).map(|(a, b)| (a - b).powi(2)).sum();
        (ss / n as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderOptions {
    /// Peaks farther than this from every unassigned splitting stay
    /// unassigned, cm⁻¹.
    pub max_deviation_cm1: f64,
}

impl Default for LadderOptions {
    fn default() -> Self {
        Self {
            max_deviation_cm1: 25.0,
        }
    }
}

/// Greedy nearest-splitting assignment: candidate (peak, splitting) pairs
/// are taken in order of increasing deviation, each peak and each
/// splitting at most once.
pub fn assign_peaks(peaks: &PeakSet, predicted: &[Splitting], max_deviation_cm1: f64) -> Vec<Assignment> {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (p, peak) in peaks.peaks.iter().enumerate() {
        for (s, sp) in predicted.iter().enumerate() {
            let d = (peak.frequency_cm1 - sp.frequency_cm1).abs();
            if d <= max_deviation_cm1 {
                candidates.push((d, p, s));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut peak_used = vec![false; peaks.len()];
    let mut split_used = vec![false; predicted.len()];
    let mut out = Vec::new();
    for (_, p, s) in candidates {
        if !peak_used[p] && !split_used[s] {
            peak_used[p] = true;
            split_used[s] = true;
            out.push(Assignment {
                peak: peaks.peaks[p],
                splitting: predicted[s],
            });
        }
    }
    out
}

pub fn reconstruct_ladder(peaks: &PeakSet, predicted: &[Splitting]) -> Result<EnergyLadder> {
    reconstruct_ladder_from(std::slice::from_ref(peaks), predicted, LadderOptions::default())
}

/// Ladder from several independent peak sets; every set is assigned
/// separately, so one splitting may be measured once per set.
pub fn reconstruct_ladder_from(
    sets: &[PeakSet],
    predicted: &[Splitting],
    options: LadderOptions,
) -> Result<EnergyLadder> {
    let n_levels = predicted.iter().map(|s| s.upper.max(s.lower) + 1).max().unwrap_or(0);
    if n_levels < 2 {
        return Err(Error::invalid("predicted splittings must cover at least two levels"));
    }
    let assignments: Vec<Assignment> = sets
        .iter()
        .flat_map(|s| assign_peaks(s, predicted, options.max_deviation_cm1))
        .collect();
    fit_ladder(n_levels, assignments)
}

/// Weighted least squares for `E_j − E_i = f` with `E_0 = 0`; weights are
/// inverse squared peak uncertainties.
pub fn fit_ladder(n_levels: usize, assignments: Vec<Assignment>) -> Result<EnergyLadder> {
    let missing = unreachable_levels(n_levels, &assignments);
    if !missing.is_empty() {
        return Err(Error::UnderConstrained { missing });
    }
    let m = assignments.len();
    let n = n_levels - 1;
    let mut a = DMatrix::<f64>::zeros(m, n);
    let mut b = DVector::<f64>::zeros(m);
    for (row, asg) in assignments.iter().enumerate() {
        let w = 1.0 / asg.peak.uncertainty_cm1.max(1e-12);
        let (i, j) = (asg.splitting.lower, asg.splitting.upper);
        if j > 0 {
            a[(row, j - 1)] += w;
        }
        if i > 0 {
            a[(row, i - 1)] -= w;
        }
        b[row] = w * asg.peak.frequency_cm1;
    }
    let normal = a.transpose() * &a;
    let cov = normal
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::numeric("ladder normal equations are singular"))?;
    let x = &cov * (a.transpose() * &b);
    let mut levels = vec![0.0];
    levels.extend(x.iter().copied());
    let mut uncertainties = vec![0.0];
    uncertainties.extend((0..n).map(|k| cov[(k, k)].max(0.0).sqrt()));
    let ss: f64 = assignments
        .iter()
        .map(|asg| {
            let fit = levels[asg.splitting.upper] - levels[asg.splitting.lower];
            (fit - asg.peak.frequency_cm1).powi(2)
        })
        .sum();
    Ok(EnergyLadder {
        levels,
        uncertainties,
        residual_rms: (ss / m as f64).sqrt(),
        assignments,
    })
}

fn unreachable_levels(n_levels: usize, assignments: &[Assignment]) -> Vec<usize> {
    let mut reached = vec![false; n_levels];
    reached[0] = true;
    let mut changed = true;
    while changed {
        changed = false;
        for asg in assignments {
            let (i, j) = (asg.splitting.lower, asg.splitting.upper);
            if reached[i] != reached[j] {
                reached[i] = true;
                reached[j] = true;
                changed = true;
            }
        }
    }
    (0..n_levels).filter(|&k| !reached[k]).collect()
}

/// Spectrum of `Tr[ρ(0)ρ(t)] = |⟨ψ(0)|ψ(t)⟩|²` from stored amplitudes.
pub fn autocorrelation_spectrum(series: &TimeSeries, window: Window) -> Result<Spectrum> {
    let amps = series
        .amplitudes
        .as_ref()
        .ok_or_else(|| Error::invalid("autocorrelation needs amplitude data; this series holds probabilities only"))?;
    let dt = uniform_step(&series.times_fs)?;
    let psi0 = amps.first().ok_or_else(|| Error::invalid("empty series"))?;
    let trace: Vec<f64> = amps.iter().map(|psi| psi0.dotc(psi).norm_sqr()).collect();
    spectrum_of_traces(&[trace], dt, window, "autocorrelation")
}
