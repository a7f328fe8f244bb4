//! Minimal SVG charts: servo paths and per-stage shares.

use std::fmt::Write;

use fuzzyhri_core::geometry::FrameSize;
use fuzzyhri_core::orchestrator::{AggregateReport, Stage, TrialOutcome};

const PALETTE: [&str; 6] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
];

fn header(out: &mut String, w: f64, h: f64) {
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Observed effector paths, one polyline per trial, in frame pixels.
pub fn trajectory_svg(trials: &[TrialOutcome], frame: FrameSize) -> String {
    let mut out = String::new();
    header(&mut out, frame.width, frame.height);
    writeln!(
        out,
        r##"<rect x="0" y="0" width="{}" height="{}" fill="none" stroke="#999"/>"##,
        frame.width, frame.height
    )
    .unwrap();
    for (i, t) in trials
        .iter()
        .filter(|t| !t.trajectory.is_empty())
        .enumerate()
    {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = t
            .trajectory
            .iter()
            .map(|r| format!("{:.1},{:.1}", r.pose.x, r.pose.y))
            .collect();
        writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"><title>{}</title></polyline>"#,
            pts.join(" "),
            escape(&t.record.id)
        )
        .unwrap();
        if let Some(last) = t.trajectory.last() {
            writeln!(
                out,
                r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#,
                last.pose.x, last.pose.y
            )
            .unwrap();
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Two bar groups: share of mean total time and share of failures.
pub fn contribution_svg(report: &AggregateReport) -> String {
    let (w, h) = (520.0, 300.0);
    let mut out = String::new();
    header(&mut out, w, h);
    let groups: [(&str, Vec<(String, f64)>); 2] = [
        (
            "time share (%)",
            Stage::ALL
                .iter()
                .map(|s| (s.name().to_string(), report.time_contribution[s]))
                .chain([("C".to_string(), report.overhead_share)])
                .collect(),
        ),
        (
            "error share (%)",
            Stage::ALL
                .iter()
                .map(|s| (s.name().to_string(), report.errors.percent[s]))
                .collect(),
        ),
    ];
    let base = h - 40.0;
    let scale = (base - 40.0) / 100.0;
    let bar = 32.0;
    let mut x = 20.0;
    for (title, bars) in &groups {
        let x0 = x;
        for (i, (name, v)) in bars.iter().enumerate() {
            let bh = v * scale;
            writeln!(
                out,
                r#"<rect x="{x:.1}" y="{:.1}" width="{bar}" height="{bh:.1}" fill="{}"/>"#,
                base - bh,
                PALETTE[i % PALETTE.len()]
            )
            .unwrap();
            writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{v:.1}</text>"#,
                x + bar / 2.0,
                base - bh - 4.0
            )
            .unwrap();
            writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{name}</text>"#,
                x + bar / 2.0,
                base + 14.0
            )
            .unwrap();
            x += bar + 8.0;
        }
        writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-weight="bold">{title}</text>"#,
            (x0 + x - 8.0) / 2.0,
            base + 32.0
        )
        .unwrap();
        x += 30.0;
    }
    out.push_str("</svg>\n");
    out
}
