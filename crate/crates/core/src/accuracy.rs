//! Accuracy sweeps over synthetic operand corpora.
//!
//! Corpus values are drawn in binary64, quantized to the input formats and
//! pushed through the engine; the reference is the exact dot product of the
//! unquantized binary64 values.

use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal};
use rayon::prelude::*;
use thiserror::Error;

use crate::engine::{pdpu_dot, ConfigError, DotError, Mode, PdpuConfig};
use crate::exact::ExactValue;
use crate::oracle::exact_dot;
use crate::posit::{PositBits, PositError, PositFormat};

/// Default cap on [`decimal_accuracy`] for exact matches.
pub const DEFAULT_CEILING: f64 = 17.0;

/// `-log10 |log10(xhat / x)|`, capped at `DEFAULT_CEILING`.
/// Sign mismatch or zero against nonzero gives negative infinity.
pub fn decimal_accuracy(x: f64, xhat: f64) -> f64 {
    decimal_accuracy_exact(&ExactValue::from_f64(x), &ExactValue::from_f64(xhat), DEFAULT_CEILING)
}

/// [`decimal_accuracy`] on exact values with an explicit ceiling.
pub fn decimal_accuracy_exact(x: &ExactValue, xhat: &ExactValue, ceiling: f64) -> f64 {
    if x.is_nar() || xhat.is_nar() {
        return f64::NEG_INFINITY;
    }
    if x == xhat {
        return ceiling;
    }
    if x.is_zero() || xhat.is_zero() || x.sign() != xhat.sign() {
        return f64::NEG_INFINITY;
    }
    // xhat / x = 1 + rel, with rel computed exactly before going to binary64.
    let diff = xhat - x;
    let mut rel = diff.abs_ratio(x);
    if diff.sign() != x.sign() {
        rel = -rel;
    }
    let log_ratio = rel.ln_1p() / std::f64::consts::LN_10;
    (-log_ratio.abs().log10()).min(ceiling)
}

/// `|out - exact| / |exact|`; when `exact` is zero, 0 for a zero result and 1
/// otherwise.
pub fn relative_error(exact: &ExactValue, out: &ExactValue) -> f64 {
    if exact.is_zero() {
        return if out.is_zero() { 0.0 } else { 1.0 };
    }
    (out - exact).abs_ratio(exact)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distribution {
    Gaussian { mu: f64, sigma: f64 },
    /// Magnitude log-uniform in `[lo, hi]`, sign uniform.
    LogUniform { lo: f64, hi: f64 },
}

impl Distribution {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Distribution::Gaussian { mu, sigma } => Normal::new(mu, sigma)
                .expect("finite non-negative sigma")
                .sample(rng),
            Distribution::LogUniform { lo, hi } => {
                let mag = rng.random_range(lo.ln()..=hi.ln()).exp();
                if rng.random() {
                    -mag
                } else {
                    mag
                }
            }
        }
    }

    fn is_valid(&self) -> bool {
        match *self {
            Distribution::Gaussian { mu, sigma } => mu.is_finite() && sigma.is_finite() && sigma >= 0.0,
            Distribution::LogUniform { lo, hi } => lo > 0.0 && hi.is_finite() && lo <= hi,
        }
    }
}

/// One dot-product problem in binary64.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub acc: f64,
}

/// Seeded synthetic corpus. Vector `i` is drawn from its own ChaCha stream,
/// so regeneration is bit-identical regardless of thread count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corpus {
    pub seed: u64,
    pub activations: Distribution,
    pub weights: Distribution,
    pub acc: Distribution,
    pub n_vectors: usize,
    pub n_terms: usize,
}

impl Corpus {
    /// Every operand drawn from `distribution`.
    pub fn new(seed: u64, distribution: Distribution, n_vectors: usize, n_terms: usize) -> Self {
        Corpus {
            seed,
            activations: distribution,
            weights: distribution,
            acc: distribution,
            n_vectors,
            n_terms,
        }
    }

    /// Gaussian(0, 1) activations, Gaussian(0, 0.1) weights and accumulator,
    /// 10^5 vectors.
    pub fn default_gaussian(seed: u64, n_terms: usize) -> Self {
        Corpus {
            seed,
            activations: Distribution::Gaussian { mu: 0.0, sigma: 1.0 },
            weights: Distribution::Gaussian { mu: 0.0, sigma: 0.1 },
            acc: Distribution::Gaussian { mu: 0.0, sigma: 0.1 },
            n_vectors: 100_000,
            n_terms,
        }
    }

    /// Parses `default`, `gaussian:MU:SIGMA` or `loguniform:LO:HI`; the
    /// named distributions apply to every operand.
    pub fn from_spec(spec: &str, seed: u64, n_vectors: usize) -> Result<Self, SweepError> {
        let bad = || SweepError::CorpusSpec(spec.to_string());
        let parts: Vec<&str> = spec.trim().split(':').collect();
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
        let dist = match parts[..] {
            ["default"] => return Ok(Self::default_gaussian(seed, 1).with_vectors(n_vectors)),
            ["gaussian", mu, sigma] => Distribution::Gaussian { mu: num(mu)?, sigma: num(sigma)? },
            ["loguniform", lo, hi] => Distribution::LogUniform { lo: num(lo)?, hi: num(hi)? },
            _ => return Err(bad()),
        };
        if !dist.is_valid() {
            return Err(SweepError::BadDistribution);
        }
        Ok(Self::new(seed, dist, n_vectors, 1))
    }

    pub fn with_terms(self, n_terms: usize) -> Self {
        Corpus { n_terms, ..self }
    }

    pub fn with_vectors(self, n_vectors: usize) -> Self {
        Corpus { n_vectors, ..self }
    }

    pub fn sample(&self, index: usize) -> Sample {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        let a = (0..self.n_terms).map(|_| self.activations.sample(&mut rng)).collect();
        let b = (0..self.n_terms).map(|_| self.weights.sample(&mut rng)).collect();
        let acc = self.acc.sample(&mut rng);
        Sample { a, b, acc }
    }

    fn validate(&self) -> Result<(), SweepError> {
        if self.n_vectors == 0 || self.n_terms == 0 {
            return Err(SweepError::EmptyCorpus);
        }
        if ![self.activations, self.weights, self.acc].iter().all(Distribution::is_valid) {
            return Err(SweepError::BadDistribution);
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SweepError {
    #[error("corpus must contain at least one vector of at least one term")]
    EmptyCorpus,
    #[error("distribution parameters out of range")]
    BadDistribution,
    #[error("unknown corpus {0:?} (expected default, gaussian:MU:SIGMA or loguniform:LO:HI)")]
    CorpusSpec(String),
    #[error("no configurations to sweep")]
    NoConfigs,
    #[error(transparent)]
    Dot(#[from] DotError),
    #[error("line {line}: {message}")]
    ConfigLine { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyReport {
    pub config: PdpuConfig,
    pub cases: usize,
    pub mean_rel_err: f64,
    pub max_rel_err: f64,
    /// Fraction of results within `tolerance` relative error of exact.
    pub match_rate: f64,
    pub tolerance: f64,
    /// Mean over cases with a finite decimal accuracy.
    pub mean_decimal_accuracy: f64,
}

/// Match tolerance for an output format: `2^-frac_width`.
pub fn match_tolerance(out_fmt: PositFormat) -> f64 {
    0.5f64.powi(out_fmt.frac_width() as i32)
}

struct CaseResult {
    rel_err: f64,
    dec_acc: f64,
}

/// Ground truth a sweep compares against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SweepReference {
    /// Exact dot product of the binary64 corpus values, so input
    /// quantization counts as error.
    #[default]
    Source,
    /// Exact dot product of the quantized posit operands, isolating the
    /// error added by the datapath.
    Quantized,
}

impl std::str::FromStr for SweepReference {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "source" => Ok(SweepReference::Source),
            "quantized" => Ok(SweepReference::Quantized),
            other => Err(format!("unknown reference {other:?} (expected source or quantized)")),
        }
    }
}

fn evaluate(cfg: &PdpuConfig, s: &Sample, reference: SweepReference) -> Result<CaseResult, DotError> {
    let quantize = |fmt, xs: &[f64]| -> Vec<PositBits> {
        xs.iter().map(|&x| PositBits::from_f64(fmt, x)).collect()
    };
    let va = quantize(cfg.in_fmt(), &s.a);
    let vb = quantize(cfg.in_fmt(), &s.b);
    let acc = PositBits::from_f64(cfg.out_fmt(), s.acc);
    let out = pdpu_dot(cfg, &va, &vb, acc)?.to_exact();
    let exact = match reference {
        SweepReference::Source => s
            .a
            .iter()
            .zip(&s.b)
            .map(|(&x, &y)| &ExactValue::from_f64(x) * &ExactValue::from_f64(y))
            .fold(ExactValue::from_f64(s.acc), |t, p| &t + &p),
        SweepReference::Quantized => exact_dot(&va, &vb, acc),
    };
    Ok(CaseResult {
        rel_err: relative_error(&exact, &out),
        dec_acc: decimal_accuracy_exact(&exact, &out, DEFAULT_CEILING),
    })
}

/// Evaluates one configuration on `corpus` drawn at the configuration's N.
pub fn evaluate_config(
    corpus: &Corpus,
    cfg: &PdpuConfig,
    reference: SweepReference,
) -> Result<AccuracyReport, SweepError> {
    let corpus = corpus.with_terms(cfg.n_terms());
    corpus.validate()?;
    let results: Vec<CaseResult> = (0..corpus.n_vectors)
        .into_par_iter()
        .map(|i| evaluate(cfg, &corpus.sample(i), reference))
        .collect::<Result<_, _>>()?;
    let tolerance = match_tolerance(cfg.out_fmt());
    let n = results.len() as f64;
    let mut sum = 0.0;
    let mut max = 0.0f64;
    let mut matches = 0usize;
    let mut acc_sum = 0.0;
    let mut acc_count = 0usize;
    for r in &results {
        sum += r.rel_err;
        max = max.max(r.rel_err);
        matches += (r.rel_err <= tolerance) as usize;
        if r.dec_acc.is_finite() {
            acc_sum += r.dec_acc;
            acc_count += 1;
        }
    }
    Ok(AccuracyReport {
        config: *cfg,
        cases: results.len(),
        mean_rel_err: sum / n,
        max_rel_err: max,
        match_rate: matches as f64 / n,
        tolerance,
        mean_decimal_accuracy: if acc_count == 0 {
            f64::NEG_INFINITY
        } else {
            acc_sum / acc_count as f64
        },
    })
}

/// One report per configuration, in input order, against the exact dot
/// product of the unquantized corpus values.
pub fn run_sweep(corpus: &Corpus, configs: &[PdpuConfig]) -> Result<Vec<AccuracyReport>, SweepError> {
    run_sweep_with(corpus, configs, SweepReference::Source)
}

pub fn run_sweep_with(
    corpus: &Corpus,
    configs: &[PdpuConfig],
    reference: SweepReference,
) -> Result<Vec<AccuracyReport>, SweepError> {
    if configs.is_empty() {
        return Err(SweepError::NoConfigs);
    }
    configs.iter().map(|c| evaluate_config(corpus, c, reference)).collect()
}

pub const REPORT_HEADER: &str =
    "config,mode,n,es_in,n_out,N,wm,mean_rel_err,max_rel_err,match_rate,mean_dec_acc";

/// CSV with [`REPORT_HEADER`]; the config label is quoted since it holds a
/// comma.
pub fn reports_to_csv(reports: &[AccuracyReport]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in reports {
        let c = &r.config;
        writeln!(
            out,
            "\"{}\",{},{},{},{},{},{},{:.6e},{:.6e},{:.6},{:.4}",
            c.format_label(),
            c.mode(),
            c.in_fmt().n(),
            c.in_fmt().es(),
            c.out_fmt().n(),
            c.n_terms(),
            c.wm(),
            r.mean_rel_err,
            r.max_rel_err,
            r.match_rate,
            r.mean_decimal_accuracy
        )
        .expect("writing to a String");
    }
    out
}

/// Parses sweep configurations, one per line as
/// `fmt_in fmt_out N wm mode` (formats as `n,es`); `#` starts a comment.
pub fn parse_configs(text: &str) -> Result<Vec<PdpuConfig>, SweepError> {
    let mut configs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| SweepError::ConfigLine { line: i + 1, message };
        let f: Vec<&str> = line.split_whitespace().collect();
        let [fi, fo, n, wm, mode] = f[..] else {
            return Err(err(format!("expected 5 fields, found {}", f.len())));
        };
        let fi: PositFormat = fi.parse().map_err(|e: PositError| err(e.to_string()))?;
        let fo: PositFormat = fo.parse().map_err(|e: PositError| err(e.to_string()))?;
        let n: usize = n.parse().map_err(|_| err(format!("bad N {n:?}")))?;
        let wm: u32 = if wm == "quire" {
            crate::posit::quire_width(fo)
        } else {
            wm.parse().map_err(|_| err(format!("bad wm {wm:?}")))?
        };
        let mode: Mode = mode.parse().map_err(|e: ConfigError| err(e.to_string()))?;
        configs.push(PdpuConfig::new(fi, fo, n, wm, mode).map_err(|e| err(e.to_string()))?);
    }
    if configs.is_empty() {
        return Err(SweepError::NoConfigs);
    }
    Ok(configs)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Per-sample representation accuracy of a format.
#[derive(Debug, Clone, PartialEq)]
pub struct TaperedProfile {
    pub accuracies: Vec<f64>,
    /// Half-open bins `[lo, hi)` from the lowest finite accuracy up to the
    /// bin holding the ceiling; infinite values are not binned.
    pub histogram: Vec<HistogramBin>,
    /// Mean over finite accuracies.
    pub mean: f64,
}

pub const HISTOGRAM_BIN_WIDTH: f64 = 0.5;

/// Decimal accuracy of each sample against its rounding into `fmt`.
pub fn tapered_accuracy_profile(fmt: PositFormat, samples: &[f64]) -> TaperedProfile {
    let accuracies: Vec<f64> = samples
        .iter()
        .map(|&x| {
            let exact = ExactValue::from_f64(x);
            decimal_accuracy_exact(&exact, &exact.round_to(fmt).to_exact(), DEFAULT_CEILING)
        })
        .collect();
    let finite: Vec<f64> = accuracies.iter().copied().filter(|a| a.is_finite()).collect();
    let mean = if finite.is_empty() {
        f64::NAN
    } else {
        finite.iter().sum::<f64>() / finite.len() as f64
    };
    TaperedProfile { histogram: histogram(&finite, HISTOGRAM_BIN_WIDTH), accuracies, mean }
}

fn histogram(values: &[f64], width: f64) -> Vec<HistogramBin> {
    let index = |v: f64| (v / width).floor() as i64;
    let (Some(lo), Some(hi)) = (
        values.iter().map(|&v| index(v)).min(),
        values.iter().map(|&v| index(v)).max(),
    ) else {
        return Vec::new();
    };
    let mut bins: Vec<HistogramBin> = (lo..=hi)
        .map(|i| HistogramBin { lo: i as f64 * width, hi: (i + 1) as f64 * width, count: 0 })
        .collect();
    for &v in values {
        bins[(index(v) - lo) as usize].count += 1;
    }
    bins
}

pub const HISTOGRAM_HEADER: &str = "bin_lo,bin_hi,count";

pub fn histogram_to_csv(bins: &[HistogramBin]) -> String {
    let mut out = String::from(HISTOGRAM_HEADER);
    out.push('\n');
    for b in bins {
        writeln!(out, "{:.2},{:.2},{}", b.lo, b.hi, b.count).expect("writing to a String");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(n: u32, es: u32) -> PositFormat {
        PositFormat::new(n, es).unwrap()
    }

    #[test]
    fn decimal_accuracy_examples() {
        assert_eq!(decimal_accuracy(1.5, 1.5), DEFAULT_CEILING);
        assert!((decimal_accuracy(1.0, 10.0) - 0.0).abs() < 1e-12);
        assert_eq!(decimal_accuracy(1.0, -1.0), f64::NEG_INFINITY);
        assert_eq!(decimal_accuracy(0.0, 1.0), f64::NEG_INFINITY);
        // 1 + 2^-20: log10 ratio = ln(1 + 2^-20) / ln 10
        let want = -((2f64.powi(-20)).ln_1p() / std::f64::consts::LN_10).log10();
        assert!((decimal_accuracy(1.0, 1.0 + 2f64.powi(-20)) - want).abs() < 1e-9);
        // symmetric in the sense of a ratio and its inverse
        assert!((decimal_accuracy(2.0, 3.0) - decimal_accuracy(3.0, 2.0)).abs() < 1e-12);
    }

    #[test]
    fn relative_error_examples() {
        let e = |x: f64| ExactValue::from_f64(x);
        assert_eq!(relative_error(&e(4.0), &e(5.0)), 0.25);
        assert_eq!(relative_error(&e(0.0), &e(0.0)), 0.0);
        assert_eq!(relative_error(&e(0.0), &e(1e-9)), 1.0);
    }

    #[test]
    fn corpus_is_deterministic() {
        let c = Corpus::default_gaussian(5, 4).with_vectors(10);
        assert_eq!(c.sample(3), c.sample(3));
        assert_ne!(c.sample(3), c.sample(4));
        assert_eq!(c.sample(3).a.len(), 4);
        let lu = Corpus::new(1, Distribution::LogUniform { lo: 1e-3, hi: 1e3 }, 10, 8);
        assert!(lu.sample(0).a.iter().all(|x| (1e-3..=1e3).contains(&x.abs())));
    }

    #[test]
    fn corpus_specs() {
        let d = Corpus::from_spec("default", 4, 10).unwrap();
        assert_eq!(d, Corpus::default_gaussian(4, 1).with_vectors(10));
        let g = Corpus::from_spec("gaussian:0:2.5", 4, 10).unwrap();
        assert_eq!(g.weights, Distribution::Gaussian { mu: 0.0, sigma: 2.5 });
        assert!(matches!(Corpus::from_spec("uniform", 1, 1), Err(SweepError::CorpusSpec(_))));
        assert_eq!(Corpus::from_spec("loguniform:2:1", 1, 1), Err(SweepError::BadDistribution));
    }

    #[test]
    fn csv_layout_is_fixed() {
        let corpus = Corpus::default_gaussian(1, 2).with_vectors(50);
        let cfg = PdpuConfig::new(p(13, 2), p(16, 2), 2, 14, Mode::Fused).unwrap();
        let reports = run_sweep(&corpus, &[cfg]).unwrap();
        let csv = reports_to_csv(&reports);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(REPORT_HEADER));
        let row = lines.next().unwrap();
        assert!(row.starts_with("\"P(13/16,2)\",fused,13,2,16,2,14,"), "{row}");
        assert_eq!(csv, reports_to_csv(&run_sweep(&corpus, &[cfg]).unwrap()));
    }

    #[test]
    fn sweep_rejects_empty_input() {
        let corpus = Corpus::default_gaussian(1, 2).with_vectors(0);
        let cfg = PdpuConfig::new(p(8, 2), p(8, 2), 2, 14, Mode::Fused).unwrap();
        assert_eq!(run_sweep(&corpus, &[cfg]), Err(SweepError::EmptyCorpus));
        assert_eq!(run_sweep(&corpus.with_vectors(5), &[]), Err(SweepError::NoConfigs));
    }

    #[test]
    fn config_file_parsing() {
        let text = "# formats N wm mode\n13,2 16,2 8 14 fused\n\n10,2 16,2 8 quire quire # full width\n";
        let cfgs = parse_configs(text).unwrap();
        assert_eq!(cfgs.len(), 2);
        assert_eq!(cfgs[1].wm(), 256);
        assert_eq!(cfgs[1].mode(), Mode::Quire);
        assert!(matches!(
            parse_configs("13,2 16,2 8 fused"),
            Err(SweepError::ConfigLine { line: 1, .. })
        ));
        assert!(matches!(
            parse_configs("ok\n13,2 16,1 8 14 fused"),
            Err(SweepError::ConfigLine { line: 1, .. })
        ));
    }

    #[test]
    fn quire_beats_narrow_width_and_fused_beats_discrete() {
        let corpus = Corpus::default_gaussian(3, 8).with_vectors(2000);
        let mk = |wm, mode| PdpuConfig::new(p(13, 2), p(16, 2), 8, wm, mode).unwrap();
        let reports =
            run_sweep(&corpus, &[mk(8, Mode::Fused), mk(0, Mode::Quire), mk(256, Mode::Fused), mk(14, Mode::DiscreteMulAdd)])
                .unwrap();
        assert!(reports[1].mean_rel_err <= reports[0].mean_rel_err);
        assert!(reports[2].mean_rel_err <= reports[3].mean_rel_err);
        assert!(reports.iter().all(|r| (0.0..=1.0).contains(&r.match_rate)));
    }

    #[test]
    fn tapered_profile_examples() {
        let one = tapered_accuracy_profile(p(8, 2), &[1.0]);
        assert_eq!(one.accuracies, vec![DEFAULT_CEILING]);
        assert_eq!(one.histogram.len(), 1);
        assert!(one.histogram[0].lo <= DEFAULT_CEILING && DEFAULT_CEILING < one.histogram[0].hi);

        let f = p(8, 2);
        let edge = 2.0 * f.maxpos().to_f64() * 1.37;
        let prof = tapered_accuracy_profile(f, &[edge, 1.5 + 1.0 / 64.0]);
        assert!(prof.accuracies[0] < prof.accuracies[1]);

        let corpus = Corpus::new(9, Distribution::Gaussian { mu: 0.0, sigma: 1.0 }, 2000, 1);
        let xs: Vec<f64> = (0..corpus.n_vectors).map(|i| corpus.sample(i).a[0]).collect();
        let wide = tapered_accuracy_profile(p(16, 2), &xs);
        let narrow = tapered_accuracy_profile(p(8, 2), &xs);
        assert!(wide.mean > narrow.mean);
        assert_eq!(narrow.histogram.iter().map(|b| b.count).sum::<usize>(), xs.len());
        assert!(histogram_to_csv(&narrow.histogram).starts_with("bin_lo,bin_hi,count\n"));
    }
}
