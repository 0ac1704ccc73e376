use std::collections::BTreeMap;

use super::svg::{decade_label, decades, escape, Scale, Svg, PALETTE};
use crate::bench::{pareto_runs, recall_histogram, recall_vs_lid_bins, RunResult, RECALL_BINS};
use crate::error::{Error, Result};
use crate::lid::{lid_summary, LidProfile};
use crate::stats::Histogram;

const W: f64 = 760.0;
const H: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

fn x_recall_axis(svg: &mut Svg, x: &Scale, y_base: f64) {
    svg.line(x.p0, y_base, x.p1, y_base, "black", 1.0, "axis");
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let px = x.map(v);
        svg.line(px, y_base, px, y_base + 5.0, "black", 1.0, "tick");
        svg.text(px, y_base + 18.0, "middle", 11.0, "xtick", &format!("{v:.1}"));
    }
}

fn log_y_axis(svg: &mut Svg, y: &Scale, lo: i32, hi: i32, x_base: f64, label: &str) {
    svg.line(x_base, y.p0, x_base, y.p1, "black", 1.0, "axis");
    for e in lo..=hi {
        let py = y.map(e as f64);
        svg.line(x_base - 5.0, py, x_base, py, "black", 1.0, "tick");
        svg.line(x_base, py, W - RIGHT, py, "#e0e0e0", 0.5, "grid");
        svg.text(x_base - 8.0, py + 4.0, "end", 11.0, "ytick", &decade_label(e));
    }
    svg.raw(&format!(
        r#"<text class="ylabel" x="18" y="{:.2}" text-anchor="middle" font-size="12" font-family="sans-serif" transform="rotate(-90 18 {:.2})">{}</text>"#,
        (y.p0 + y.p1) / 2.0,
        (y.p0 + y.p1) / 2.0,
        escape(label)
    ));
}

/// Recall (linear) against QPS (log), one polyline per algorithm through
/// its Pareto frontier.
pub fn plot_tradeoff(runs: &[RunResult]) -> Result<String> {
    if runs.is_empty() {
        return Err(Error::invalid("no runs to plot"));
    }
    let mut groups: BTreeMap<String, Vec<RunResult>> = BTreeMap::new();
    for r in runs {
        groups.entry(r.spec.algorithm.to_string()).or_default().push(r.clone());
    }
    let frontiers: Vec<(String, Vec<(f64, f64)>)> = groups
        .iter()
        .map(|(algo, rs)| {
            let pts = pareto_runs(rs).iter().map(|r| (r.summary.avg_recall, r.summary.qps)).collect();
            (algo.clone(), pts)
        })
        .collect();
    let (lo, hi) = decades(frontiers.iter().flat_map(|(_, p)| p.iter().map(|q| q.1)));
    let x = Scale::new(0.0, 1.0, LEFT, W - RIGHT);
    let y = Scale::new(lo as f64, hi as f64, H - BOTTOM, TOP);

    let mut svg = Svg::new(W, H);
    let first = &runs[0];
    svg.text(
        (LEFT + W - RIGHT) / 2.0,
        22.0,
        "middle",
        14.0,
        "title",
        &format!("Recall vs. QPS ({}, {} queries, k = {})", first.dataset, first.difficulty, first.query_k),
    );
    x_recall_axis(&mut svg, &x, H - BOTTOM);
    svg.text((x.p0 + x.p1) / 2.0, H - 12.0, "middle", 12.0, "xlabel", "average recall");
    log_y_axis(&mut svg, &y, lo, hi, LEFT, "queries per second (1/s)");

    for (i, (algo, pts)) in frontiers.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let px: Vec<(f64, f64)> = pts.iter().map(|&(r, q)| (x.map(r), y.map(q.log10()))).collect();
        svg.polyline(
            &px,
            &format!(r#"class="frontier" data-algorithm="{}" stroke="{color}" stroke-width="2""#, escape(algo)),
        );
        for &(cx, cy) in &px {
            svg.circle(cx, cy, 3.0, &format!(r#"class="point" fill="{color}""#));
        }
        let ly = TOP + 10.0 + 20.0 * i as f64;
        svg.rect(W - RIGHT + 20.0, ly - 8.0, 14.0, 10.0, &format!(r#"class="legend-swatch" fill="{color}""#));
        svg.text(W - RIGHT + 40.0, ly + 1.0, "start", 12.0, "legend", algo);
    }
    Ok(svg.finish())
}

/// One ridge of the LID figure.
#[derive(Debug, Clone)]
pub struct RidgeRow<'a> {
    pub name: String,
    pub profile: &'a LidProfile,
    /// Hard-set threshold, drawn as a red marker.
    pub hard_threshold: Option<f64>,
}

const RIDGE_BINS: usize = 100;
const TRIANGLE: [f64; 5] = [1.0, 2.0, 3.0, 2.0, 1.0];

fn smooth(counts: &[u64]) -> Vec<f64> {
    let half = TRIANGLE.len() / 2;
    (0..counts.len())
        .map(|i| {
            let mut acc = 0.0;
            let mut wsum = 0.0;
            for (j, w) in TRIANGLE.iter().enumerate() {
                let idx = i as isize + j as isize - half as isize;
                if idx >= 0 && (idx as usize) < counts.len() {
                    acc += w * counts[idx as usize] as f64;
                    wsum += w;
                }
            }
            acc / wsum
        })
        .collect()
}

/// One smoothed LID density per dataset on a shared axis, with quartile
/// ticks and the hard-set threshold.
pub fn plot_lid_ridgeline(rows: &[RidgeRow<'_>]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::invalid("no profiles to plot"));
    }
    let summaries = rows.iter().map(|r| lid_summary(r.profile)).collect::<Result<Vec<_>>>()?;
    let lo = summaries.iter().map(|s| s.min).fold(f64::INFINITY, f64::min);
    let hi = summaries.iter().map(|s| s.max).fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    let row_h = 70.0;
    let height = TOP + BOTTOM + row_h * rows.len() as f64 + 20.0;
    let x = Scale::new(lo, hi, LEFT + 60.0, W - 40.0);
    let mut svg = Svg::new(W, height);
    svg.text(W / 2.0, 22.0, "middle", 14.0, "title", &format!("LID distribution (k = {})", rows[0].profile.k));

    for (i, (row, s)) in rows.iter().zip(&summaries).enumerate() {
        let base = TOP + 20.0 + row_h * (i as f64 + 1.0);
        let finite = row.profile.values.iter().copied().filter(|v| v.is_finite());
        let hist = Histogram::from_values(finite, lo, hi, RIDGE_BINS);
        let dens = smooth(&hist.counts);
        let peak = dens.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let color = PALETTE[i % PALETTE.len()];
        let mut poly = vec![(x.p0, base)];
        for (b, v) in dens.iter().enumerate() {
            let cx = x.map(lo + (b as f64 + 0.5) * hist.width());
            poly.push((cx, base - v / peak * (row_h * 0.9)));
        }
        poly.push((x.p1, base));
        svg.polygon(
            &poly,
            &format!(r#"class="density" data-dataset="{}" fill="{color}" fill-opacity="0.6" stroke="black" stroke-width="0.5""#, escape(&row.name)),
        );
        svg.line(x.p0, base, x.p1, base, "black", 0.5, "baseline");
        for (q, v) in [("25", s.p25), ("50", s.median), ("75", s.p75)] {
            let px = x.map(v);
            svg.raw(&format!(
                r#"<line class="percentile" data-q="{q}" x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{base:.2}" stroke="black" stroke-width="1"/>"#,
                base - row_h * 0.9
            ));
        }
        if let Some(t) = row.hard_threshold {
            let px = x.map(t);
            svg.line(px, base - row_h * 0.95, px, base, "red", 2.0, "threshold");
        }
        svg.text(LEFT + 50.0, base - 4.0, "end", 12.0, "row-label", &row.name);
    }
    let axis_y = height - BOTTOM;
    svg.line(x.p0, axis_y, x.p1, axis_y, "black", 1.0, "axis");
    for t in 0..=5 {
        let v = lo + (hi - lo) * t as f64 / 5.0;
        let px = x.map(v);
        svg.line(px, axis_y, px, axis_y + 5.0, "black", 1.0, "tick");
        svg.text(px, axis_y + 18.0, "middle", 11.0, "xtick", &format!("{v:.1}"));
    }
    svg.text((x.p0 + x.p1) / 2.0, height - 12.0, "middle", 12.0, "xlabel", "estimated LID");
    Ok(svg.finish())
}

/// Per configuration, the recall histogram drawn as a ridge whose baseline
/// sits at the configuration's QPS on a log axis, with a marker at
/// (average recall, QPS).
pub fn plot_recall_distribution(runs: &[RunResult]) -> Result<String> {
    if runs.is_empty() {
        return Err(Error::invalid("no runs to plot"));
    }
    let mut order: Vec<&RunResult> = runs.iter().collect();
    order.sort_by(|a, b| a.summary.qps.total_cmp(&b.summary.qps).then_with(|| a.label().cmp(&b.label())));
    let (lo, hi) = decades(order.iter().map(|r| r.summary.qps));
    let x = Scale::new(0.0, 1.0, LEFT, W - RIGHT);
    let y = Scale::new(lo as f64, hi as f64, H - BOTTOM, TOP);
    let band = (y.map(lo as f64) - y.map(lo as f64 + 1.0)) * 0.6;

    let mut svg = Svg::new(W, H);
    svg.text((LEFT + W - RIGHT) / 2.0, 22.0, "middle", 14.0, "title", "Per-query recall distribution by configuration");
    x_recall_axis(&mut svg, &x, H - BOTTOM);
    svg.text((x.p0 + x.p1) / 2.0, H - 12.0, "middle", 12.0, "xlabel", "recall");
    log_y_axis(&mut svg, &y, lo, hi, LEFT, "queries per second (1/s)");

    let mut algos: Vec<String> = order.iter().map(|r| r.spec.algorithm.to_string()).collect();
    algos.sort();
    algos.dedup();
    for r in &order {
        let ai = algos.iter().position(|a| *a == r.spec.algorithm.to_string()).unwrap();
        let color = PALETTE[ai % PALETTE.len()];
        let base = y.map(r.summary.qps.log10());
        let hist = recall_histogram(r, RECALL_BINS);
        let peak = hist.counts.iter().copied().max().unwrap_or(1).max(1) as f64;
        let mut poly = vec![(x.p0, base)];
        for (b, &c) in hist.counts.iter().enumerate() {
            let cx = x.map((b as f64 + 0.5) / RECALL_BINS as f64);
            poly.push((cx, base - c as f64 / peak * band));
        }
        poly.push((x.p1, base));
        svg.polygon(
            &poly,
            &format!(
                r#"class="recall-curve" data-config="{}" data-qps="{:.6e}" fill="{color}" fill-opacity="0.35" stroke="{color}" stroke-width="1""#,
                escape(&r.label()),
                r.summary.qps
            ),
        );
        svg.circle(
            x.map(r.summary.avg_recall),
            base,
            3.5,
            &format!(r#"class="avg-marker" fill="{color}" stroke="black" stroke-width="0.5""#),
        );
    }
    for (i, a) in algos.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let ly = TOP + 10.0 + 20.0 * i as f64;
        svg.rect(W - RIGHT + 20.0, ly - 8.0, 14.0, 10.0, &format!(r#"class="legend-swatch" fill="{color}""#));
        svg.text(W - RIGHT + 40.0, ly + 1.0, "start", 12.0, "legend", a);
    }
    Ok(svg.finish())
}

pub const LID_X_BINS: usize = 30;
pub const LID_Y_BINS: usize = 20;

/// 2-D density of (LID, recall) with marginal histograms on top (LID) and
/// right (recall).
pub fn plot_recall_vs_lid(run: &RunResult, profile: &LidProfile) -> Result<String> {
    let bins = recall_vs_lid_bins(run, profile, LID_X_BINS, LID_Y_BINS)?;
    let marg = 70.0;
    let (x0, x1) = (LEFT, W - RIGHT);
    let (y0, y1) = (TOP + marg + 10.0, H - BOTTOM);
    let cw = (x1 - x0) / bins.x_bins() as f64;
    let ch = (y1 - y0) / bins.y_bins() as f64;
    let peak = bins.max_count().max(1) as f64;

    let mut svg = Svg::new(W, H);
    svg.text(
        (x0 + x1) / 2.0,
        22.0,
        "middle",
        14.0,
        "title",
        &format!("Recall vs. LID ({} queries, {})", run.records.len(), run.label()),
    );
    for (xi, col) in bins.counts.iter().enumerate() {
        for (yi, &c) in col.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let px = x0 + xi as f64 * cw;
            let py = y1 - (yi as f64 + 1.0) * ch;
            svg.rect(
                px,
                py,
                cw,
                ch,
                &format!(r##"class="cell" data-count="{c}" fill="#08306b" fill-opacity="{:.4}""##, 0.1 + 0.9 * c as f64 / peak),
            );
        }
    }
    svg.rect(x0, y0, x1 - x0, y1 - y0, r#"class="frame" fill="none" stroke="black" stroke-width="1""#);

    let mx = bins.lid_marginal.counts.iter().copied().max().unwrap_or(1).max(1) as f64;
    for (xi, &c) in bins.lid_marginal.counts.iter().enumerate() {
        let h = c as f64 / mx * marg;
        svg.rect(
            x0 + xi as f64 * cw,
            y0 - 5.0 - h,
            cw,
            h,
            &format!(r##"class="marginal-x" data-count="{c}" fill="#6baed6""##),
        );
    }
    let my = bins.recall_marginal.counts.iter().copied().max().unwrap_or(1).max(1) as f64;
    for (yi, &c) in bins.recall_marginal.counts.iter().enumerate() {
        let w = c as f64 / my * marg;
        svg.rect(
            x1 + 5.0,
            y1 - (yi as f64 + 1.0) * ch,
            w,
            ch,
            &format!(r##"class="marginal-y" data-count="{c}" fill="#6baed6""##),
        );
    }

    for t in 0..=5 {
        let v = bins.lid_lo + (bins.lid_hi - bins.lid_lo) * t as f64 / 5.0;
        let px = x0 + (x1 - x0) * t as f64 / 5.0;
        svg.line(px, y1, px, y1 + 5.0, "black", 1.0, "tick");
        svg.text(px, y1 + 18.0, "middle", 11.0, "xtick", &format!("{v:.1}"));
    }
    for t in 0..=5 {
        let v = t as f64 / 5.0;
        let py = y1 - (y1 - y0) * v;
        svg.line(x0 - 5.0, py, x0, py, "black", 1.0, "tick");
        svg.text(x0 - 8.0, py + 4.0, "end", 11.0, "ytick", &format!("{v:.1}"));
    }
    svg.text((x0 + x1) / 2.0, H - 12.0, "middle", 12.0, "xlabel", "estimated LID");
    svg.raw(&format!(
        r#"<text class="ylabel" x="18" y="{:.2}" text-anchor="middle" font-size="12" font-family="sans-serif" transform="rotate(-90 18 {:.2})">recall</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    ));
    Ok(svg.finish())
}
