use std::fmt::Write as _;
use std::path::Path;

use super::config::ReportFlags;
use super::files::{OrbitsFile, StationaryFile, UNCERTIFIED_BANNER};
use super::manifest::StageWriter;
use super::pipeline::read_result;
use super::problem::ProblemFile;
use super::svg::{LinePlot, Series};
use crate::flow::FlowSystem;
use crate::{Error, Result};

/// Energy samples may rise by this much (relative) and still count as
/// non-increasing; it only absorbs rounding in the energy evaluation.
pub const MONOTONE_SLACK: f64 = 1e-10;

/// Rows of the eigenvalue traces are thinned to about this many.
const TRACE_ROWS: usize = 400;

/// Plot data for every orbit of a finished run: energy curves, phase
/// portraits and eigenvalue traces of `Δ + f_u(u(t))`.
pub fn write_report(dir: &Path, flags: &ReportFlags, w: &mut StageWriter) -> Result<(bool, String)> {
    let problem_file = std::fs::read_to_string(dir.join("problem.json"))
        .map_err(|_| Error::MissingPrerequisite(format!("no problem.json in {}; run the `stationary` stage first", dir.display())))?;
    let problem = ProblemFile::from_json(&problem_file)?.build()?;
    let st: StationaryFile = read_result(dir, "stationary.json")?;
    let of: OrbitsFile = read_result(dir, "orbits.json").map_err(|_| {
        Error::MissingPrerequisite(format!("no orbits.json in {}; run the `orbits` stage first", dir.display()))
    })?;
    let system = FlowSystem::new(&problem, of.modes)?;
    let search = of.to_search(dir)?;
    let n = system.modes();

    let mut summary = String::from("orbit,source,target,samples,t_start,t_end,energy_drop,max_energy_increase,monotone\n");
    let mut energy_plot = LinePlot { title: "Energy along each orbit".into(), x_label: "t".into(), y_label: "E".into(), series: vec![] };
    let mut phase_plot = LinePlot { title: "Phase portrait".into(), x_label: "u".into(), y_label: "u'".into(), series: vec![] };
    let mut all_monotone = true;

    for (i, o) in search.orbits.iter().enumerate() {
        let label = format!("{} → {}", o.source_id, o.target_id);
        let t = o.trajectory.times();
        let e = o.trajectory.energies();
        let scale = 1.0 + e.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let rise = e.windows(2).map(|p| p[1] - p[0]).fold(0.0f64, f64::max);
        let monotone = rise <= MONOTONE_SLACK * scale;
        all_monotone &= monotone;
        writeln!(
            summary,
            "{i},{},{},{},{:e},{:e},{:e},{:e},{monotone}",
            o.source_id,
            o.target_id,
            t.len(),
            t[0],
            t[t.len() - 1],
            o.energy_drop,
            rise.max(0.0)
        )
        .unwrap();

        // phase portrait at the node where the two ends differ most
        let (us, _) = system.state_to_grid(&o.source_state);
        let (ut, _) = system.state_to_grid(&o.target_state);
        let node = (0..us.len()).max_by(|&a, &b| (us[a] - ut[a]).abs().total_cmp(&(us[b] - ut[b]).abs())).unwrap_or(0);
        let grid: Vec<(Vec<f64>, Vec<f64>)> = o.trajectory.states().iter().map(|y| system.state_to_grid(y)).collect();

        if flags.csv {
            let mut csv = String::from("t,E,kinetic\n");
            for (k, &tk) in t.iter().enumerate() {
                writeln!(csv, "{tk:e},{:e},{:e}", e[k], o.trajectory.velocity_norms_sq()[k]).unwrap();
            }
            w.write(&format!("report/energy_{i:03}.csv"), csv.as_bytes())?;
            let mut csv = String::from("t,u,v\n");
            for (k, &tk) in t.iter().enumerate() {
                writeln!(csv, "{tk:e},{:e},{:e}", grid[k].0[node], grid[k].1[node]).unwrap();
            }
            w.write(&format!("report/phase_{i:03}.csv"), csv.as_bytes())?;
        }

        let keep = flags.eigenvalues.clamp(1, n);
        let stride = t.len().div_ceil(TRACE_ROWS).max(1);
        let mut rows: Vec<(f64, Vec<f64>)> = Vec::new();
        for k in (0..t.len()).filter(|k| k % stride == 0 || k + 1 == t.len()) {
            let (eig, _) = system.linearization_spectrum(&o.trajectory.states()[k][..n]);
            rows.push((t[k], eig[..keep].to_vec()));
        }
        if flags.csv {
            let mut csv = String::from("t");
            for j in 1..=keep {
                write!(csv, ",mu{j}").unwrap();
            }
            csv.push('\n');
            for (tk, eig) in &rows {
                write!(csv, "{tk:e}").unwrap();
                for v in eig {
                    write!(csv, ",{v:e}").unwrap();
                }
                csv.push('\n');
            }
            w.write(&format!("report/eigen_{i:03}.csv"), csv.as_bytes())?;
        }
        if flags.svg {
            let series = (0..keep)
                .map(|j| Series { label: format!("μ{}", j + 1), points: rows.iter().map(|(tk, eig)| (*tk, eig[j])).collect() })
                .chain(std::iter::once(Series { label: "0".into(), points: vec![(t[0], 0.0), (t[t.len() - 1], 0.0)] }))
                .collect();
            let plot = LinePlot { title: format!("Eigenvalues of the linearization along {label}"), x_label: "t".into(), y_label: "μ".into(), series };
            w.write(&format!("report/eigen_{i:03}.svg"), plot.render().as_bytes())?;
        }
        energy_plot.series.push(Series { label: label.clone(), points: t.iter().copied().zip(e.iter().copied()).collect() });
        phase_plot.series.push(Series { label, points: grid.iter().map(|(u, v)| (u[node], v[node])).collect() });
    }
    if flags.svg {
        w.write("report/energy.svg", energy_plot.render().as_bytes())?;
        w.write("report/phase.svg", phase_plot.render().as_bytes())?;
    }
    w.write("report/orbits.csv", summary.as_bytes())?;

    let certified = of.certified && all_monotone;
    let mut index = String::new();
    if !of.certified {
        writeln!(index, "{UNCERTIFIED_BANNER}\n").unwrap();
    }
    writeln!(index, "{} stationary points, {} orbits", st.set.points.len(), search.orbits.len()).unwrap();
    writeln!(index, "energy non-increasing along every orbit: {}", if all_monotone { "yes" } else { "NO" }).unwrap();
    w.write("report/index.txt", index.as_bytes())?;
    let summary = format!(
        "plot data for {} orbits, energy {}",
        search.orbits.len(),
        if all_monotone { "non-increasing on all of them" } else { "INCREASES on some orbit" }
    );
    Ok((certified, summary))
}
