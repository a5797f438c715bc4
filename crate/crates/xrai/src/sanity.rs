//! Sanity checks for attribution methods.
//!
//! Two independent checks live here. The perturbation axiom check samples
//! seeded two-feature grid functions, computes each method's attribution
//! at the peak input, and tests the inequality `attr(x_i) >= eps * dy_i`,
//! where `dy_i` is the output drop when feature `i` is zeroed. The model
//! randomization check compares a method's maps under a trained and a
//! freshly re-initialized network via Spearman rank correlation: low
//! correlation means the maps actually depend on the learned weights.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::attribution::{path_integral_attributions, PixelMethod};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::model::{GradientOracle, GridFunction};
use crate::svg;

/// Output change when feature `i` (1 or 2) of the peak input is set to 0.
pub fn delta_y(g: &GridFunction, feature: usize) -> Result<f64> {
    let peak = GridFunction::peak_coord();
    let at_peak = g.eval(peak, peak)?;
    let removed = match feature {
        1 => g.eval(0.0, peak)?,
        2 => g.eval(peak, 0.0)?,
        other => return Err(Error::Parameter(format!("feature index {other} not in {{1, 2}}"))),
    };
    Ok(at_peak - removed)
}

/// Baseline for IG on the two-feature grid domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridBaseline {
    /// (0, 0)
    Black,
    /// (255, 255)
    White,
    /// Mean of both.
    BlackWhite,
}

impl GridBaseline {
    fn points(self) -> Vec<[f64; 2]> {
        match self {
            GridBaseline::Black => vec![[0.0, 0.0]],
            GridBaseline::White => vec![[255.0, 255.0]],
            GridBaseline::BlackWhite => vec![[0.0, 0.0], [255.0, 255.0]],
        }
    }
}

/// Attribution method under the axiom check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxiomMethod {
    Gradient,
    GradTimesInput,
    Ig(GridBaseline),
}

impl AxiomMethod {
    pub fn name(&self) -> &'static str {
        match self {
            AxiomMethod::Gradient => "gradient",
            AxiomMethod::GradTimesInput => "grad-input",
            AxiomMethod::Ig(GridBaseline::Black) => "ig-black",
            AxiomMethod::Ig(GridBaseline::White) => "ig-white",
            AxiomMethod::Ig(GridBaseline::BlackWhite) => "ig-bw",
        }
    }
}

/// Per-seed record of the axiom evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct SeedRecord {
    pub seed: u64,
    pub attr_x1: f64,
    pub attr_x2: f64,
    pub dy_x1: f64,
    pub dy_x2: f64,
    pub pass: bool,
    /// `|attr_x1 + attr_x2 - (f(peak) - mean_b f(b))|` for IG methods.
    pub completeness_residual: Option<f64>,
}

/// All seeds of one method at one epsilon.
#[derive(Debug, Clone)]
pub struct AxiomResult {
    pub method: AxiomMethod,
    pub epsilon: f64,
    pub steps: usize,
    pub records: Vec<SeedRecord>,
}

impl AxiomResult {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| !r.pass).count()
    }

    pub fn failure_rate(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.failures() as f64 / self.records.len() as f64
    }
}

/// Attribution of the two peak features under `method`.
///
/// IG runs the same midpoint path integral as the image pipeline,
/// specialized to two features, so the checker exercises the production
/// integrator.
pub fn grid_attribution(
    g: &GridFunction,
    method: AxiomMethod,
    steps: usize,
) -> Result<(f64, f64)> {
    let p = GridFunction::peak_coord();
    match method {
        AxiomMethod::Gradient => g.gradient(p, p),
        AxiomMethod::GradTimesInput => {
            let (gx, gy) = g.gradient(p, p)?;
            Ok((gx * p, gy * p))
        }
        AxiomMethod::Ig(baseline) => {
            let input = [p, p];
            let points = baseline.points();
            let mut acc = [0.0f64; 2];
            for b in &points {
                let attr = path_integral_attributions(&input, b, steps, |point| {
                    let (gx, gy) = g.gradient(point[0].clamp(0.0, 255.0), point[1].clamp(0.0, 255.0))?;
                    Ok(vec![gx, gy])
                })?;
                acc[0] += attr[0];
                acc[1] += attr[1];
            }
            let inv = 1.0 / points.len() as f64;
            Ok((acc[0] * inv, acc[1] * inv))
        }
    }
}

/// Run the perturbation axiom over a fixed seed list.
pub fn run_axiom_check(
    method: AxiomMethod,
    seeds: &[u64],
    epsilon: f64,
    steps: usize,
) -> Result<AxiomResult> {
    if seeds.is_empty() {
        return Err(Error::Parameter("need at least one seed".into()));
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::Parameter(format!("epsilon {epsilon} outside (0, 1]")));
    }
    let mut records = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let g = GridFunction::seeded(seed);
        let (a1, a2) = grid_attribution(&g, method, steps)?;
        let dy1 = delta_y(&g, 1)?;
        let dy2 = delta_y(&g, 2)?;
        let pass = a1 >= epsilon * dy1 && a2 >= epsilon * dy2;
        let completeness_residual = match method {
            AxiomMethod::Ig(baseline) => {
                let p = GridFunction::peak_coord();
                let f_peak = g.eval(p, p)?;
                let points = baseline.points();
                let mean_base: f64 = points
                    .iter()
                    .map(|b| g.eval(b[0], b[1]))
                    .collect::<Result<Vec<f64>>>()?
                    .iter()
                    .sum::<f64>()
                    / points.len() as f64;
                Some((a1 + a2 - (f_peak - mean_base)).abs())
            }
            _ => None,
        };
        records.push(SeedRecord {
            seed,
            attr_x1: a1,
            attr_x2: a2,
            dy_x1: dy1,
            dy_x2: dy2,
            pass,
            completeness_residual,
        });
    }
    Ok(AxiomResult { method, epsilon, steps, records })
}

/// One axiom CSV row per seed.
pub fn write_axiom_csv(path: &Path, result: &AxiomResult) -> Result<()> {
    let mut out = String::from("seed,attr_x1,attr_x2,dy_x1,dy_x2,pass\n");
    for r in &result.records {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.seed, r.attr_x1, r.attr_x2, r.dy_x1, r.dy_x2, r.pass
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

#[derive(Serialize)]
struct AxiomSummary<'a> {
    method: &'a str,
    epsilon: f64,
    steps: usize,
    n_seeds: usize,
    n_failures: usize,
    failure_rate: f64,
    max_completeness_residual: Option<f64>,
}

pub fn write_axiom_summary(path: &Path, result: &AxiomResult) -> Result<()> {
    let max_res = result
        .records
        .iter()
        .filter_map(|r| r.completeness_residual)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
    let summary = AxiomSummary {
        method: result.method.name(),
        epsilon: result.epsilon,
        steps: result.steps,
        n_seeds: result.records.len(),
        n_failures: result.failures(),
        failure_rate: result.failure_rate(),
        max_completeness_residual: max_res,
    };
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::Format(format!("summary json: {e}")))?;
    fs::write(path, json + "\n")?;
    Ok(())
}

/// Scatter of `(attr_x1, attr_x2)` pairs, failures in red.
pub fn write_axiom_scatter_svg(path: &Path, result: &AxiomResult) -> Result<()> {
    let lo = result
        .records
        .iter()
        .flat_map(|r| [r.attr_x1, r.attr_x2])
        .fold(0.0f64, f64::min)
        .min(-0.05);
    let hi = result
        .records
        .iter()
        .flat_map(|r| [r.attr_x1, r.attr_x2])
        .fold(0.0f64, f64::max)
        .max(1.0);
    let points: Vec<(f64, f64, &str)> = result
        .records
        .iter()
        .map(|r| (r.attr_x1, r.attr_x2, if r.pass { "#1f77b4" } else { "#d62728" }))
        .collect();
    let title = format!(
        "{} attributions at the peak (eps = {}, fail rate {:.2})",
        result.method.name(),
        result.epsilon,
        result.failure_rate()
    );
    let s = svg::scatter(&title, "attr(x1)", "attr(x2)", (lo, hi), (lo, hi), &points);
    fs::write(path, s)?;
    Ok(())
}

/// Spearman rank correlation with average ranks for ties. `None` when
/// either side has zero variance.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    pearson(&ra, &rb)
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("finite values"));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return None;
    }
    Some(cov / (va * vb).sqrt())
}

/// Per-image correlation between attributions under two oracles.
#[derive(Debug, Clone, Serialize)]
pub struct ImageCorrelation {
    pub index: usize,
    pub rho: Option<f64>,
    pub degenerate: bool,
}

/// Randomization-check report. `pass` means the maps decorrelate: mean
/// absolute correlation below the threshold, with no degenerate maps.
#[derive(Debug, Clone, Serialize)]
pub struct RandomizationReport {
    pub method: String,
    pub threshold: f64,
    pub per_image: Vec<ImageCorrelation>,
    pub mean_abs_rho: f64,
    pub degenerate_count: usize,
    pub pass: bool,
}

/// Compare a method's attributions under a trained oracle and a randomized
/// one. The class index is the trained oracle's prediction, for both maps.
pub fn randomization_check(
    trained: &dyn GradientOracle,
    randomized: &dyn GradientOracle,
    images: &[Image],
    method: &PixelMethod,
    threshold: f64,
) -> Result<RandomizationReport> {
    if trained.input_dims() != randomized.input_dims() {
        return Err(Error::DimensionMismatch("oracles expect different input shapes".into()));
    }
    if images.is_empty() {
        return Err(Error::Parameter("need at least one image".into()));
    }
    let mut per_image = Vec::with_capacity(images.len());
    let mut abs_sum = 0.0;
    let mut counted = 0usize;
    let mut degenerate_count = 0usize;
    for (index, img) in images.iter().enumerate() {
        let probs = trained.forward(img)?;
        let class = crate::model::argmax(&probs);
        let map_t = method.compute(trained, img, class)?;
        let map_r = method.compute(randomized, img, class)?;
        let rho = spearman(map_t.values(), map_r.values());
        match rho {
            Some(r) => {
                abs_sum += r.abs();
                counted += 1;
            }
            None => degenerate_count += 1,
        }
        per_image.push(ImageCorrelation { index, rho, degenerate: rho.is_none() });
    }
    let mean_abs_rho = if counted > 0 { abs_sum / counted as f64 } else { f64::NAN };
    let pass = degenerate_count == 0 && counted > 0 && mean_abs_rho < threshold;
    Ok(RandomizationReport {
        method: format!("{method:?}"),
        threshold,
        per_image,
        mean_abs_rho,
        degenerate_count,
        pass,
    })
}

pub fn write_randomization_report(path: &Path, report: &RandomizationReport) -> Result<()> {
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| Error::Format(format!("randomization json: {e}")))?;
    fs::write(path, json + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::grid::{GRID_N, PEAK_NODE};

    #[test]
    fn delta_y_is_a_two_point_difference() {
        // Craft a grid where f(0, peak) is known exactly.
        let mut values = vec![0.1; GRID_N * GRID_N];
        values[PEAK_NODE * GRID_N + PEAK_NODE] = 1.0;
        values[PEAK_NODE * GRID_N] = 0.2; // (ix=0, iy=PEAK) -> f(0, peak)
        let g = GridFunction::from_values(values).unwrap();
        assert!((delta_y(&g, 1).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn delta_y_of_constant_function_is_zero() {
        let g = GridFunction::from_values(vec![1.0; GRID_N * GRID_N]).unwrap();
        assert_eq!(delta_y(&g, 1).unwrap(), 0.0);
        assert_eq!(delta_y(&g, 2).unwrap(), 0.0);
    }

    #[test]
    fn delta_y_matches_direct_two_evaluation_oracle() {
        for seed in [3u64, 99, 1234] {
            let g = GridFunction::seeded(seed);
            let p = GridFunction::peak_coord();
            let want1 = g.eval(p, p).unwrap() - g.eval(0.0, p).unwrap();
            assert_eq!(delta_y(&g, 1).unwrap(), want1);
            let want2 = g.eval(p, p).unwrap() - g.eval(p, 0.0).unwrap();
            assert_eq!(delta_y(&g, 2).unwrap(), want2);
        }
    }

    #[test]
    fn gradient_methods_fail_on_every_seed() {
        let seeds: Vec<u64> = (0..50).collect();
        for method in [AxiomMethod::Gradient, AxiomMethod::GradTimesInput] {
            let result = run_axiom_check(method, &seeds, 0.3, 1).unwrap();
            assert_eq!(result.failures(), seeds.len());
            for r in &result.records {
                assert_eq!(r.attr_x1, 0.0);
                assert_eq!(r.attr_x2, 0.0);
                assert!(r.dy_x1 > 0.0 && r.dy_x2 > 0.0);
            }
        }
    }

    #[test]
    fn ig_black_completeness_holds_and_failures_exist() {
        let seeds: Vec<u64> = (0..200).collect();
        let result = run_axiom_check(AxiomMethod::Ig(GridBaseline::Black), &seeds, 0.3, 500).unwrap();
        for r in &result.records {
            let res = r.completeness_residual.unwrap();
            assert!(res < 1e-2, "seed {}: residual {res:.3e}", r.seed);
        }
        assert!(result.failures() >= 1, "expected at least one failing seed");
        assert!(result.failures() < seeds.len(), "IG should also pass sometimes");
    }

    #[test]
    fn axiom_results_are_deterministic() {
        let seeds: Vec<u64> = (0..20).collect();
        let a = run_axiom_check(AxiomMethod::Ig(GridBaseline::Black), &seeds, 0.3, 100).unwrap();
        let b = run_axiom_check(AxiomMethod::Ig(GridBaseline::Black), &seeds, 0.3, 100).unwrap();
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!(x.attr_x1, y.attr_x1);
            assert_eq!(x.attr_x2, y.attr_x2);
        }
    }

    #[test]
    fn spearman_handles_monotone_ties_and_degenerate() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let up = [10.0, 20.0, 30.0, 40.0];
        let down = [4.0, 3.0, 2.0, 1.0];
        assert!((spearman(&a, &up).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&a, &down).unwrap() + 1.0).abs() < 1e-12);
        let flat = [5.0, 5.0, 5.0, 5.0];
        assert!(spearman(&a, &flat).is_none());
        // Ties get average ranks; correlation stays defined and exact.
        let tied = [1.0, 1.0, 2.0, 2.0];
        let r = spearman(&tied, &a).unwrap();
        assert!(r > 0.0 && r < 1.0);
    }

    #[test]
    fn self_comparison_yields_perfect_correlation() {
        use crate::model::TinyNet;
        let net = TinyNet::seeded(6, 6, 1, 8, 2, 3);
        let mut images = Vec::new();
        for seed in 0..4 {
            let mut rng = crate::rng::substream(seed, "sanity-img");
            let data: Vec<f64> = (0..36).map(|_| crate::rng::unit_f64(&mut rng)).collect();
            images.push(Image::from_data(6, 6, 1, data).unwrap());
        }
        let method = PixelMethod::Ig {
            baseline: crate::attribution::BaselineSpec::BlackWhite,
            steps: 16,
        };
        let report = randomization_check(&net, &net, &images, &method, 0.3).unwrap();
        assert!(!report.pass, "self-comparison must fail the check");
        for c in &report.per_image {
            let rho = c.rho.unwrap();
            assert!((rho - 1.0).abs() < 1e-12, "rho {rho}");
        }
    }

    #[test]
    fn constant_method_reports_degenerate_not_pass() {
        struct Flat;
        impl GradientOracle for Flat {
            fn input_dims(&self) -> (usize, usize, usize) {
                (4, 4, 1)
            }
            fn num_classes(&self) -> usize {
                2
            }
            fn forward_flat(&self, _d: &[f64]) -> Result<Vec<f64>> {
                Ok(vec![0.6, 0.4])
            }
            fn gradient_flat(&self, d: &[f64], _c: usize) -> Result<Vec<f64>> {
                Ok(vec![0.0; d.len()])
            }
        }
        let images = vec![Image::constant(4, 4, 1, 0.5).unwrap()];
        let report =
            randomization_check(&Flat, &Flat, &images, &PixelMethod::Gradient, 0.3).unwrap();
        assert_eq!(report.degenerate_count, 1);
        assert!(!report.pass);
    }
}
