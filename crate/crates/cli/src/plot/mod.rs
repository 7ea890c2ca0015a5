//! Plot kinds, looked up by name.

mod svg;

use std::sync::OnceLock;

use mdsclt::harness::{ellipse_points, McReport, SizeReport};
use mdsclt::registry::{params, Registry};
use mdsclt::serde_rows::from_rows;
use mdsclt::{Error, Result};
use nalgebra::DMatrix;
use serde::Deserialize;

use svg::{Axis, Canvas, PALETTE};

pub trait PlotKind: Send + Sync {
    /// Renders an SVG document; `n` selects the size for per-size plots.
    fn render(&self, report: &McReport, n: Option<usize>) -> Result<String>;
}

pub fn plot_registry() -> &'static Registry<dyn PlotKind> {
    static REGISTRY: OnceLock<Registry<dyn PlotKind>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let mut r: Registry<dyn PlotKind> = Registry::new("plot kind");
        r.register("ellipses", |p| Ok(Box::new(params::<Ellipses>(p)?)));
        r.register("scree", |_| Ok(Box::new(Scree)));
        r.register("bias-trend", |_| Ok(Box::new(BiasTrend)));
        r.register("bound-ratios", |_| Ok(Box::new(BoundRatios)));
        r
    })
}

fn missing(section: &str, flag: &str) -> Error {
    Error::InvalidInput(format!(
        "report has no {section}; rerun mc-run with checks.{flag} enabled"
    ))
}

fn pick_size(report: &McReport, n: Option<usize>) -> Result<&SizeReport> {
    match n {
        Some(n) => report.size(n).ok_or_else(|| {
            let have: Vec<String> = report.per_n.iter().map(|s| s.n.to_string()).collect();
            Error::InvalidInput(format!("report has no n = {n}; available: {}", have.join(", ")))
        }),
        None => report
            .per_n
            .last()
            .ok_or_else(|| Error::InvalidInput("report has no sizes".into())),
    }
}

fn model_tag(report: &McReport) -> &str {
    &report.config.noise.model
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Ellipses {
    #[serde(default = "default_level")]
    level: f64,
}

fn default_level() -> f64 {
    0.95
}

fn to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    from_rows(rows).map_err(Error::InvalidInput)
}

impl PlotKind for Ellipses {
    fn render(&self, report: &McReport, n: Option<usize>) -> Result<String> {
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidInput(format!("level must be in (0, 1), got {}", self.level)));
        }
        let size = pick_size(report, n)?;
        if size.per_class.is_empty() {
            return Err(missing(&format!("per-class results at n = {}", size.n), "clt"));
        }
        if report.config.d != 2 {
            return Err(Error::Unsupported("ellipse plots need d = 2".into()));
        }
        let nf = size.n as f64;
        let mut curves = Vec::new();
        for c in &size.per_class {
            let theory = c
                .theoretical_cov
                .as_ref()
                .ok_or_else(|| missing("theoretical covariances", "clt"))?;
            let emp = ellipse_points(
                [c.empirical_mean[0], c.empirical_mean[1]],
                &(to_matrix(&c.pooled_cov)? / nf),
                self.level,
            )?;
            let th = ellipse_points([c.location[0], c.location[1]], &(to_matrix(theory)? / nf), self.level)?;
            curves.push((c, emp, th));
        }
        let xs = curves.iter().flat_map(|(_, e, t)| e.iter().chain(t).map(|p| p[0]));
        let ys = curves.iter().flat_map(|(_, e, t)| e.iter().chain(t).map(|p| p[1]));
        let (mut x, mut y) = (Axis::linear(xs, "x1", false), Axis::linear(ys, "x2", false));
        equalize(&mut x, &mut y);
        let title = format!(
            "{}% level curves | n = {} | {}",
            svg::num(100.0 * self.level),
            size.n,
            model_tag(report)
        );
        let mut canvas = Canvas::new(640.0, 645.0, &title, x, y);
        for (c, emp, th) in &curves {
            let color = PALETTE[c.class % PALETTE.len()];
            canvas.path("ellipse empirical", emp, true, color, false);
            canvas.path("ellipse theoretical", th, true, color, true);
        }
        for (c, _, _) in &curves {
            let color = PALETTE[c.class % PALETTE.len()];
            canvas.circle("mean-marker", [c.empirical_mean[0], c.empirical_mean[1]], 3.0, color);
            canvas.square("location-marker", [c.location[0], c.location[1]], 4.0, color);
        }
        canvas.legend("empirical", "#000", false);
        canvas.legend("theoretical", "#000", true);
        Ok(canvas.finish())
    }
}

/// Widens the narrower axis so both share a scale.
fn equalize(x: &mut Axis, y: &mut Axis) {
    let (wx, wy) = (x.hi - x.lo, y.hi - y.lo);
    let grow = |a: &mut Axis, to: f64| {
        let mid = (a.lo + a.hi) / 2.0;
        *a = Axis::linear([mid - to / 2.0, mid + to / 2.0], &a.label, false);
    };
    if wx > wy {
        grow(y, wx);
        grow(x, wx);
    } else {
        grow(x, wy);
        grow(y, wy);
    }
}

struct Scree;

impl PlotKind for Scree {
    fn render(&self, report: &McReport, n: Option<usize>) -> Result<String> {
        let size = pick_size(report, n)?;
        let values = size.scree.as_ref().ok_or_else(|| {
            Error::InvalidInput(format!(
                "report has no scree at n = {}; scree values come from the cmds estimator",
                size.n
            ))
        })?;
        let threshold = mdsclt::cmds::dim_threshold(size.n);
        let x = Axis::linear((1..=values.len()).map(|i| i as f64).chain([0.4, values.len() as f64 + 0.6]), "index", false);
        let mut x = x;
        x.ticks = (1..=values.len()).map(|i| i as f64).collect();
        let y = Axis::linear(values.iter().copied().chain([threshold]), "eigenvalue", true);
        let title = format!("scree | n = {} | {}", size.n, model_tag(report));
        let mut canvas = Canvas::new(640.0, 480.0, &title, x, y);
        for (i, &v) in values.iter().enumerate() {
            let color = if v >= threshold { PALETTE[0] } else { PALETTE[7] };
            canvas.bar("scree-bar", i as f64 + 1.0, 0.6, 0.0, v, color);
        }
        canvas.path(
            "threshold",
            &[[0.4, threshold], [values.len() as f64 + 0.6, threshold]],
            false,
            PALETTE[1],
            true,
        );
        canvas.legend("n^(2/3) threshold", PALETTE[1], true);
        Ok(canvas.finish())
    }
}

struct BiasTrend;

impl PlotKind for BiasTrend {
    fn render(&self, report: &McReport, _n: Option<usize>) -> Result<String> {
        let bias = report
            .hetero_bias
            .as_ref()
            .ok_or_else(|| missing("hetero_bias section", "hetero_bias"))?;
        if bias.per_n.is_empty() {
            return Err(missing("hetero_bias rows", "hetero_bias"));
        }
        let ns: Vec<f64> = bias.per_n.iter().map(|r| r.n as f64).collect();
        let x = Axis::log(ns.iter().copied(), "n", Some(ns.clone()));
        let y = Axis::linear(
            bias.per_n.iter().flat_map(|r| r.biases.iter().copied()),
            "|class mean - location|",
            true,
        );
        let title = format!(
            "class-mean bias | n = {}..{} | {}",
            bias.per_n[0].n,
            bias.per_n[bias.per_n.len() - 1].n,
            model_tag(report)
        );
        let mut canvas = Canvas::new(640.0, 480.0, &title, x, y);
        let classes = bias.per_n[0].biases.len();
        for k in 0..classes {
            let color = PALETTE[k % PALETTE.len()];
            let pts: Vec<[f64; 2]> = bias.per_n.iter().map(|r| [r.n as f64, r.biases[k]]).collect();
            canvas.path("bias-series", &pts, false, color, false);
            for p in &pts {
                canvas.circle("bias-point", *p, 3.0, color);
            }
            canvas.legend(&format!("class {}", k + 1), color, false);
        }
        let mean: Vec<[f64; 2]> = bias.per_n.iter().map(|r| [r.n as f64, r.mean_bias]).collect();
        canvas.path("bias-mean", &mean, false, "#000", true);
        canvas.legend("class average", "#000", true);
        Ok(canvas.finish())
    }
}

struct BoundRatios;

impl PlotKind for BoundRatios {
    fn render(&self, report: &McReport, _n: Option<usize>) -> Result<String> {
        let table = report
            .bounds
            .as_ref()
            .ok_or_else(|| missing("bounds section", "bounds"))?;
        if table.rows.is_empty() {
            return Err(missing("bound rows", "bounds"));
        }
        let ns: Vec<f64> = table.rows.iter().map(|r| r.n as f64).collect();
        let series: Vec<(&str, Vec<[f64; 2]>)> = mdsclt::clt::RATIO_NAMES
            .iter()
            .enumerate()
            .map(|(k, name)| {
                let pts = table
                    .rows
                    .iter()
                    .map(|r| [r.n as f64, r.medians.to_array()[k]])
                    .collect();
                (*name, pts)
            })
            .filter(|(_, pts): &(&str, Vec<[f64; 2]>)| pts.iter().all(|p| p[1] > 0.0))
            .collect();
        let x = Axis::log(ns.iter().copied(), "n", Some(ns.clone()));
        let y = Axis::log(
            series.iter().flat_map(|(_, p)| p.iter().map(|q| q[1])),
            "median rate-normalized ratio",
            None,
        );
        let title = format!(
            "bound ratios | n = {}..{} | {}",
            table.rows[0].n,
            table.rows[table.rows.len() - 1].n,
            model_tag(report)
        );
        let mut canvas = Canvas::new(640.0, 480.0, &title, x, y);
        for (k, (name, pts)) in series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            canvas.path("ratio-series", pts, false, color, false);
            canvas.legend(name, color, false);
        }
        Ok(canvas.finish())
    }
}
