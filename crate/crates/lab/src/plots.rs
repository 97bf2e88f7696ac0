//! gnuplot scripts for the CSV tables. Scripts are written next to each other
//! in one directory and refer to the tables by relative path; nothing is
//! executed.

use std::path::{Component, Path, PathBuf};

use crate::output::{ensure_dir, read_table};
use crate::{LabError, LabResult};

struct PlotKind {
    table: &'static str,
    script: &'static str,
    columns: &'static [&'static str],
    preamble: &'static str,
    /// `{data}` is replaced by the quoted path.
    stanza: &'static str,
}

const KINDS: [PlotKind; 4] = [
    PlotKind {
        table: "sweep",
        script: "d_eps.gp",
        columns: &["eps", "d_median", "d_q1", "d_q3"],
        preamble: "set logscale xy\nset xlabel \"eps\"\nset ylabel \"D(eps)\"\n",
        stanza: "plot {data} using \"eps\":\"d_median\":\"d_q1\":\"d_q3\" with yerrorlines title \"median D, quartiles\"\n",
    },
    PlotKind {
        table: "weyl",
        script: "weyl.gp",
        columns: &["eps", "weyl_mean"],
        preamble: "set logscale xy\nset xlabel \"eps\"\nset ylabel \"|Weyl sum|\"\n",
        stanza: "plot {data} using \"eps\":\"weyl_mean\" with points title \"harmonics\"\n",
    },
    PlotKind {
        table: "equidist",
        script: "equidist.gp",
        columns: &["eps", "weyl_max"],
        preamble: "set logscale xy\nset xlabel \"eps\"\nset ylabel \"max |Weyl sum|\"\n",
        stanza: "plot {data} using \"eps\":\"weyl_max\" with linespoints title \"max over harmonics\"\n",
    },
    PlotKind {
        table: "qi_records",
        script: "qi_a.gp",
        columns: &["n", "member", "tau", "a"],
        preamble: "set xlabel \"tau\"\nset ylabel \"A(tau)\"\n",
        stanza: "plot {data} using \"tau\":\"a\" with dots title \"A(tau), all members\"\n",
    },
];

/// gnuplot double-quoted string literal.
pub fn quote(path: &str) -> String {
    let mut s = String::from("\"");
    for c in path.chars() {
        if c == '"' || c == '\\' {
            s.push('\\');
        }
        s.push(c);
    }
    s.push('"');
    s
}

/// `target` relative to the directory `base` (both made absolute first).
pub fn relative_to(target: &Path, base: &Path) -> PathBuf {
    let abs = |p: &Path| {
        let p = if p.is_absolute() { p.to_path_buf() } else { std::env::current_dir().unwrap_or_default().join(p) };
        p.components().fold(PathBuf::new(), |mut acc, c| {
            match c {
                Component::CurDir => {}
                Component::ParentDir => {
                    acc.pop();
                }
                c => acc.push(c),
            }
            acc
        })
    };
    let (t, b) = (abs(target), abs(base));
    let tc: Vec<_> = t.components().collect();
    let bc: Vec<_> = b.components().collect();
    let common = tc.iter().zip(&bc).take_while(|(a, b)| a == b).count();
    let mut rel = PathBuf::new();
    for _ in common..bc.len() {
        rel.push("..");
    }
    for c in &tc[common..] {
        rel.push(c);
    }
    rel
}

/// Writes one script per report into `out`; returns the script paths.
pub fn emit_plots(reports: &[PathBuf], out: &Path) -> LabResult<Vec<PathBuf>> {
    ensure_dir(out)?;
    let mut written = Vec::new();
    for path in reports {
        let (_, table) = read_table(path)?;
        let kind = KINDS
            .iter()
            .find(|k| k.table == table.name)
            .ok_or_else(|| LabError::config("emit-plots", format!("no plot defined for table `{}`", table.name)))?;
        for c in kind.columns {
            if table.column(c).is_none() {
                return Err(LabError::MissingColumn { path: path.clone(), column: c.to_string() });
            }
        }
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let rel = relative_to(path, out);
        let mut script = format!(
            "# generated by kdvlab from {}\nset datafile separator \",\"\nset datafile commentschars \"#\"\nset key autotitle columnhead\nset terminal pngcairo size 800,600\nset output {}\n{}",
            quote(&rel.to_string_lossy()),
            quote(&format!("{stem}.png")),
            kind.preamble,
        );
        if !table.rows.is_empty() {
            script.push_str(&kind.stanza.replace("{data}", &quote(&rel.to_string_lossy())));
        }
        let target = out.join(kind.script);
        std::fs::write(&target, script).map_err(LabError::io(&target))?;
        written.push(target);
    }
    Ok(written)
}
