//! Result emission: a fixed-header CSV that round-trips losslessly, and a
//! self-contained SVG accuracy plot.

use std::io::{BufRead, Write};
use std::path::Path;

use super::experiment::{Method, ResultRow};
use super::HarnessError;

/// The exact CSV header, byte for byte.
pub const RESULTS_HEADER: &str = "method,map_size,observability,eps_prime,accuracy,n,seed";

/// Write result rows as CSV. Floats use formats that survive a parse and
/// re-write unchanged: `eps_prime` as the shortest round-trip
/// representation, `accuracy` fixed to six decimals.
pub fn write_results_csv<W: Write>(w: &mut W, rows: &[ResultRow]) -> Result<(), HarnessError> {
    writeln!(w, "{RESULTS_HEADER}")?;
    for r in rows {
        if r.map_size.contains(',') || r.map_size.contains(char::is_whitespace) {
            return Err(HarnessError::Config(format!("map size {:?} breaks CSV", r.map_size)));
        }
        writeln!(
            w,
            "{},{},{},{:?},{:.6},{},{}",
            r.method, r.map_size, r.observability, r.eps_prime, r.accuracy, r.n, r.seed
        )?;
    }
    Ok(())
}

/// Read rows written by [`write_results_csv`]. The header must match
/// [`RESULTS_HEADER`] exactly.
pub fn read_results_csv<R: BufRead>(r: R) -> Result<Vec<ResultRow>, HarnessError> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or(HarnessError::Results { line: 1, msg: "empty file".into() })?;
    if header != RESULTS_HEADER {
        return Err(HarnessError::Results {
            line: 1,
            msg: format!("header {header:?} does not match {RESULTS_HEADER:?}"),
        });
    }
    let mut out = Vec::new();
    for (idx, line) in lines.enumerate() {
        let lineno = idx + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(HarnessError::Results {
                line: lineno,
                msg: format!("expected 7 fields, got {}", f.len()),
            });
        }
        let err = |msg: String| HarnessError::Results { line: lineno, msg };
        let method = Method::parse(f[0]).ok_or_else(|| err(format!("unknown method {:?}", f[0])))?;
        out.push(ResultRow {
            method,
            map_size: f[1].to_string(),
            observability: f[2].parse().map_err(|_| err(format!("bad observability {:?}", f[2])))?,
            eps_prime: f[3].parse().map_err(|_| err(format!("bad eps_prime {:?}", f[3])))?,
            accuracy: f[4].parse().map_err(|_| err(format!("bad accuracy {:?}", f[4])))?,
            n: f[5].parse().map_err(|_| err(format!("bad n {:?}", f[5])))?,
            seed: f[6].parse().map_err(|_| err(format!("bad seed {:?}", f[6])))?,
        });
    }
    Ok(out)
}

/// [`write_results_csv`] to a file path.
pub fn save_results(path: &Path, rows: &[ResultRow]) -> Result<(), HarnessError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_results_csv(&mut w, rows)
}

/// [`read_results_csv`] from a file path.
pub fn load_results(path: &Path) -> Result<Vec<ResultRow>, HarnessError> {
    read_results_csv(std::io::BufReader::new(std::fs::File::open(path)?))
}

const PALETTE: [&str; 7] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2"];

/// Plot accuracy against observability as a standalone SVG: one polyline
/// per (method, eps_prime) series, in first-appearance order.
pub fn write_svg<W: Write>(w: &mut W, rows: &[ResultRow]) -> Result<(), HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::Config("nothing to plot".into()));
    }
    let mut series: Vec<((Method, u64), Vec<(u8, f64)>)> = Vec::new();
    let multi_eps = {
        let mut eps: Vec<u64> = rows.iter().map(|r| r.eps_prime.to_bits()).collect();
        eps.sort_unstable();
        eps.dedup();
        eps.len() > 1
    };
    for r in rows {
        let key = (r.method, r.eps_prime.to_bits());
        match series.iter_mut().find(|(k, _)| *k == key) {
            Some((_, pts)) => pts.push((r.observability, r.accuracy)),
            None => series.push((key, vec![(r.observability, r.accuracy)])),
        }
    }
    for (_, pts) in &mut series {
        pts.sort_by_key(|(rho, _)| *rho);
    }

    let (width, height) = (640.0, 420.0);
    let (x0, y0, pw, ph) = (60.0, 20.0, 430.0, 330.0);
    let x = |rho: f64| x0 + rho / 100.0 * pw;
    let y = |acc: f64| y0 + (1.0 - acc) * ph;

    writeln!(
        w,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">"
    )?;
    writeln!(w, "  <rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>")?;
    writeln!(
        w,
        "  <line x1=\"{x0}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        y0 + ph,
        x0 + pw,
        y0 + ph
    )?;
    writeln!(w, "  <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{}\" stroke=\"black\"/>", y0 + ph)?;
    for tick in [0u8, 25, 50, 75, 100] {
        let tx = x(tick as f64);
        writeln!(
            w,
            "  <line x1=\"{tx:.1}\" y1=\"{}\" x2=\"{tx:.1}\" y2=\"{}\" stroke=\"black\"/>",
            y0 + ph,
            y0 + ph + 5.0
        )?;
        writeln!(
            w,
            "  <text x=\"{tx:.1}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{tick}</text>",
            y0 + ph + 18.0
        )?;
    }
    for i in 0..=4 {
        let acc = i as f64 * 0.25;
        let ty = y(acc);
        writeln!(
            w,
            "  <line x1=\"{}\" y1=\"{ty:.1}\" x2=\"{x0}\" y2=\"{ty:.1}\" stroke=\"black\"/>",
            x0 - 5.0
        )?;
        writeln!(
            w,
            "  <text x=\"{}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\">{acc:.2}</text>",
            x0 - 8.0,
            ty + 4.0
        )?;
    }
    writeln!(
        w,
        "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">observability \
         (%)</text>",
        x0 + pw / 2.0,
        y0 + ph + 35.0
    )?;
    writeln!(
        w,
        "  <text x=\"14\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\" \
         transform=\"rotate(-90 14 {:.1})\">accuracy</text>",
        y0 + ph / 2.0,
        y0 + ph / 2.0
    )?;

    for (si, ((method, eps_bits), pts)) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let coords: Vec<String> =
            pts.iter().map(|(rho, acc)| format!("{:.1},{:.1}", x(*rho as f64), y(*acc))).collect();
        writeln!(
            w,
            "  <polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>",
            coords.join(" ")
        )?;
        for (rho, acc) in pts {
            writeln!(
                w,
                "  <circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"{color}\"/>",
                x(*rho as f64),
                y(*acc)
            )?;
        }
        let label = if multi_eps {
            format!("{method} eps&apos;={:?}", f64::from_bits(*eps_bits))
        } else {
            method.to_string()
        };
        let ly = y0 + 14.0 + si as f64 * 18.0;
        writeln!(
            w,
            "  <rect x=\"{:.1}\" y=\"{:.1}\" width=\"12\" height=\"12\" fill=\"{color}\"/>",
            x0 + pw + 12.0,
            ly - 10.0
        )?;
        writeln!(
            w,
            "  <text x=\"{:.1}\" y=\"{ly:.1}\" font-size=\"11\">{label}</text>",
            x0 + pw + 30.0
        )?;
    }
    writeln!(w, "</svg>")?;
    Ok(())
}

/// [`write_svg`] to a file path.
pub fn save_svg(path: &Path, rows: &[ResultRow]) -> Result<(), HarnessError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_svg(&mut w, rows)
}
