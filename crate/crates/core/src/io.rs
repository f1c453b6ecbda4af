//! Text output formats and the key=value configuration file.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::adapt::AdaptStep;
use crate::assembly::AssemblyVariant;
use crate::error::{Error, Result};
use crate::fe_space::{FeFunction, Vec2};
use crate::mesh::{Mesh, Region};
use crate::norms::ErrorRecord;
use crate::problem::BoundaryConditions;
use crate::sparse::CsrMatrix;

/// Create `path` and hand a buffered writer to `body`; I/O failures carry the path.
pub fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn region_code(r: Region) -> u8 {
    match r {
        Region::Omega1 => 1,
        Region::Omega2 => 2,
        Region::Cut => 3,
    }
}

/// Legacy ASCII unstructured grid with region tags as cell data and each
/// named nodal field written as a vector plus a `<name>_magnitude` scalar.
pub fn write_vtk(w: &mut impl Write, mesh: &Mesh, title: &str, fields: &[(&str, &[Vec2])]) -> std::io::Result<()> {
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{}", title.lines().next().unwrap_or(""))?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.num_nodes())?;
    for p in mesh.nodes() {
        writeln!(w, "{:e} {:e} 0", p.x, p.y)?;
    }
    let nel = mesh.num_triangles();
    writeln!(w, "CELLS {} {}", nel, 4 * nel)?;
    for t in mesh.triangles() {
        writeln!(w, "3 {} {} {}", t.nodes[0], t.nodes[1], t.nodes[2])?;
    }
    writeln!(w, "CELL_TYPES {nel}")?;
    for _ in 0..nel {
        writeln!(w, "5")?;
    }
    writeln!(w, "CELL_DATA {nel}")?;
    writeln!(w, "SCALARS region int 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for t in mesh.triangles() {
        writeln!(w, "{}", region_code(t.region))?;
    }
    if fields.is_empty() {
        return Ok(());
    }
    writeln!(w, "POINT_DATA {}", mesh.num_nodes())?;
    for (name, values) in fields {
        writeln!(w, "VECTORS {name} double")?;
        for v in values.iter() {
            writeln!(w, "{:e} {:e} 0", v[0], v[1])?;
        }
        writeln!(w, "SCALARS {name}_magnitude double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for v in values.iter() {
            writeln!(w, "{:e}", v[0].hypot(v[1]))?;
        }
    }
    Ok(())
}

pub fn nodal_values(f: &FeFunction<'_>) -> Vec<Vec2> {
    (0..f.mesh().num_nodes()).map(|i| f.nodal(i)).collect()
}

/// `node,x,y,E1,E2` per mesh node.
pub fn write_field_csv(w: &mut impl Write, f: &FeFunction<'_>) -> std::io::Result<()> {
    writeln!(w, "node,x,y,E1,E2")?;
    for (i, p) in f.mesh().nodes().iter().enumerate() {
        let v = f.nodal(i);
        writeln!(w, "{i},{:e},{:e},{:e},{:e}", p.x, p.y, v[0], v[1])?;
    }
    Ok(())
}

/// Three significant digits in scientific notation.
pub fn fmt_error(v: f64) -> String {
    format!("{v:.2e}")
}

/// Three significant digits in positional notation.
pub fn fmt_rate(v: f64) -> String {
    if v == 0.0 {
        return "0.00".into();
    }
    let digits = v.abs().log10().floor() as i32;
    let decimals = (2 - digits).max(0) as usize;
    format!("{v:.decimals$}")
}

fn opt(v: Option<f64>, f: impl Fn(f64) -> String) -> String {
    v.filter(|x| x.is_finite()).map(f).unwrap_or_default()
}

pub const CONVERGENCE_HEADER: &str = "l,nel,nno,e1,q1,e2,q2";

pub fn write_convergence_csv(w: &mut impl Write, records: &[ErrorRecord]) -> std::io::Result<()> {
    writeln!(w, "{CONVERGENCE_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.level,
            r.nel,
            r.nno,
            fmt_error(r.e1),
            opt(r.q1, fmt_rate),
            fmt_error(r.e2),
            opt(r.q2, fmt_rate)
        )?;
    }
    Ok(())
}

/// Full-precision companion of [`write_convergence_csv`], with the energy error appended.
pub fn write_convergence_raw_csv(w: &mut impl Write, records: &[ErrorRecord]) -> std::io::Result<()> {
    writeln!(w, "{CONVERGENCE_HEADER},triple_norm_error")?;
    let full = |x: f64| format!("{x:e}");
    for r in records {
        writeln!(
            w,
            "{},{},{},{:e},{},{:e},{},{:e}",
            r.level,
            r.nel,
            r.nno,
            r.e1,
            opt(r.q1, full),
            r.e2,
            opt(r.q2, full),
            r.triple_norm_error
        )?;
    }
    Ok(())
}

pub fn write_convergence_markdown(w: &mut impl Write, m: u32, records: &[ErrorRecord]) -> std::io::Result<()> {
    writeln!(w, "### m = {m}")?;
    writeln!(w)?;
    writeln!(w, "| l | nel | nno | e1 | q1 | e2 | q2 |")?;
    writeln!(w, "|---:|---:|---:|---:|---:|---:|---:|")?;
    for r in records {
        writeln!(
            w,
            "| {} | {} | {} | {} | {} | {} | {} |",
            r.level,
            r.nel,
            r.nno,
            fmt_error(r.e1),
            opt(r.q1, fmt_rate),
            fmt_error(r.e2),
            opt(r.q2, fmt_rate)
        )?;
    }
    Ok(())
}

pub const HISTORY_HEADER: &str = "iter,nel,ndof,eta_interior,eta_boundary,data_term,estimate,true_error,effectivity";

pub fn write_history_csv(w: &mut impl Write, steps: &[AdaptStep]) -> std::io::Result<()> {
    writeln!(w, "{HISTORY_HEADER}")?;
    let full = |x: f64| format!("{x:e}");
    for s in steps {
        writeln!(
            w,
            "{},{},{},{:e},{:e},{:e},{:e},{},{}",
            s.iteration,
            s.nel,
            s.ndof,
            s.eta_interior,
            s.eta_boundary,
            s.data_term,
            s.estimate,
            opt(s.true_error, full),
            opt(s.effectivity, full)
        )?;
    }
    Ok(())
}

/// Coordinate format, 1-based, every stored entry.
pub fn write_matrix_market(w: &mut impl Write, a: &CsrMatrix) -> std::io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.dim(), a.dim(), a.nnz())?;
    for i in 0..a.dim() {
        for (j, v) in a.row(i) {
            writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
        }
    }
    Ok(())
}

/// Values read from a key=value configuration file. Unset keys stay `None`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigFile {
    pub m: Option<Vec<u32>>,
    pub s: Option<f64>,
    pub levels: Option<(u32, u32)>,
    pub bc: Option<BoundaryConditions>,
    pub variant: Option<AssemblyVariant>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub theta: Option<f64>,
    pub tol: Option<f64>,
}

pub fn parse_m_list(s: &str) -> std::result::Result<Vec<u32>, String> {
    s.split(',').map(|t| t.trim().parse::<u32>().map_err(|e| format!("bad m value {t:?}: {e}"))).collect()
}

/// `A:B` or a single level `A`.
pub fn parse_levels(s: &str) -> std::result::Result<(u32, u32), String> {
    let (a, b) = s.split_once(':').unwrap_or((s, s));
    let p = |t: &str| t.trim().parse::<u32>().map_err(|e| format!("bad level {t:?}: {e}"));
    let (a, b) = (p(a)?, p(b)?);
    if a > b {
        return Err(format!("empty level range {a}:{b}"));
    }
    Ok((a, b))
}

pub fn parse_bc(s: &str) -> std::result::Result<BoundaryConditions, String> {
    match s.trim() {
        "dirichlet0" | "dirichlet" => Ok(BoundaryConditions::dirichlet()),
        "neumann0" | "neumann" => Ok(BoundaryConditions::neumann()),
        "robin" => Ok(BoundaryConditions::absorbing()),
        "robin-clamped" => Ok(BoundaryConditions::absorbing_clamped()),
        other => Err(format!("unknown boundary mode {other:?} (dirichlet0, neumann0, robin, robin-clamped)")),
    }
}

pub fn parse_variant(s: &str) -> std::result::Result<AssemblyVariant, String> {
    match s.trim() {
        "sym" => Ok(AssemblyVariant::SymmetricStabilized),
        "literal" => Ok(AssemblyVariant::PaperLiteral),
        other => Err(format!("unknown variant {other:?} (sym, literal)")),
    }
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    match s.trim() {
        "inf" | "infinity" => Ok(f64::INFINITY),
        t => t.parse().map_err(|e| format!("bad number {t:?}: {e}")),
    }
}

/// Parse `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<ConfigFile> {
    let mut cfg = ConfigFile::default();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Config { line: n + 1, msg };
        let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
        let value = value.trim();
        match key.trim() {
            "m" => cfg.m = Some(parse_m_list(value).map_err(err)?),
            "s" => cfg.s = Some(parse_f64(value).map_err(err)?),
            "levels" => cfg.levels = Some(parse_levels(value).map_err(err)?),
            "bc" | "bc_mode" => cfg.bc = Some(parse_bc(value).map_err(err)?),
            "variant" => cfg.variant = Some(parse_variant(value).map_err(err)?),
            "alpha" => cfg.alpha = Some(parse_f64(value).map_err(err)?),
            "beta" => cfg.beta = Some(parse_f64(value).map_err(err)?),
            "theta" => cfg.theta = Some(parse_f64(value).map_err(err)?),
            "tol" => cfg.tol = Some(parse_f64(value).map_err(err)?),
            other => return Err(err(format!("unknown key {other:?}"))),
        }
    }
    Ok(cfg)
}

pub fn read_config(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fe_space::interpolate;
    use crate::mesh::build_structured;

    fn text(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> String {
        let mut buf = Vec::new();
        f(&mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn vtk_layout() {
        let m = build_structured(2).unwrap();
        let u = interpolate(&m, |x, y| [x, y]).unwrap();
        let vals = nodal_values(&u);
        let s = text(|w| write_vtk(w, &m, "test", &[("E", &vals)]));
        assert!(s.contains("POINTS 25 double"));
        assert!(s.contains("CELLS 32 128"));
        assert!(s.contains("CELL_TYPES 32"));
        assert_eq!(s.lines().filter(|l| *l == "5").count(), 32);
        assert!(s.contains("POINT_DATA 25"));
        assert!(s.contains("VECTORS E double") && s.contains("SCALARS E_magnitude double 1"));
        let mags: Vec<f64> = s
            .lines()
            .skip_while(|l| !l.starts_with("SCALARS E_magnitude"))
            .skip(2)
            .map(|l| l.parse().unwrap())
            .collect();
        assert_eq!(mags.len(), 25);
        assert_eq!(mags[24], 2f64.sqrt());
    }

    #[test]
    fn field_csv_round_trips() {
        let m = build_structured(1).unwrap();
        let u = interpolate(&m, |x, y| [x + 0.1, -y / 3.0]).unwrap();
        let s = text(|w| write_field_csv(w, &u));
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some("node,x,y,E1,E2"));
        for (i, l) in lines.enumerate() {
            let c: Vec<f64> = l.split(',').map(|t| t.parse().unwrap()).collect();
            assert_eq!(c[0] as usize, i);
            assert_eq!([c[3], c[4]], u.nodal(i));
        }
    }

    #[test]
    fn number_formats() {
        assert_eq!(fmt_error(2.7123e-2), "2.71e-2");
        assert_eq!(fmt_rate(1.9876), "1.99");
        assert_eq!(fmt_rate(0.98765), "0.988");
        assert_eq!(fmt_rate(12.34), "12.3");
    }

    #[test]
    fn convergence_tables() {
        let rec = |level, q: Option<f64>| ErrorRecord {
            level,
            nel: 8,
            nno: 9,
            e1: 0.5,
            e2: 0.25,
            q1: q,
            q2: q,
            triple_norm_error: 1.0,
        };
        let rows = [rec(1, None), rec(2, Some(2.0)), rec(3, Some(f64::NAN))];
        let s = text(|w| write_convergence_csv(w, &rows));
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "l,nel,nno,e1,q1,e2,q2");
        assert_eq!(lines[1], "1,8,9,5.00e-1,,2.50e-1,");
        assert_eq!(lines[2], "2,8,9,5.00e-1,2.00,2.50e-1,2.00");
        assert_eq!(lines[3], "3,8,9,5.00e-1,,2.50e-1,");
        let raw = text(|w| write_convergence_raw_csv(w, &rows));
        assert!(raw.lines().nth(2).unwrap().starts_with("2,8,9,5e-1,2e0,2.5e-1,2e0"));
        let md = text(|w| write_convergence_markdown(w, 2, &rows));
        assert!(md.contains("| 1 | 8 | 9 | 5.00e-1 |  | 2.50e-1 |  |"));
    }

    #[test]
    fn matrix_market_round_trip() {
        let mut a = CsrMatrix::from_pattern(vec![vec![0, 1], vec![0, 1]]);
        a.add(0, 0, 2.0);
        a.add(0, 1, -1.0 / 3.0);
        a.add(1, 0, 0.5);
        a.add(1, 1, 4.0);
        let s = text(|w| write_matrix_market(w, &a));
        let mut lines = s.lines();
        assert!(lines.next().unwrap().starts_with("%%MatrixMarket"));
        assert_eq!(lines.next(), Some("2 2 4"));
        for l in lines {
            let t: Vec<&str> = l.split(' ').collect();
            let (i, j): (usize, usize) = (t[0].parse().unwrap(), t[1].parse().unwrap());
            assert_eq!(t[2].parse::<f64>().unwrap(), a.get(i - 1, j - 1));
        }
    }

    #[test]
    fn config_parsing() {
        let cfg = parse_config(
            "# study\nm = 2,5\ns=2.5\nlevels = 1:4\nbc = robin-clamped\nvariant = literal\n\nalpha=0.5\nbeta = 1\ntheta = 0.3 # bulk\ntol = inf\n",
        )
        .unwrap();
        assert_eq!(cfg.m, Some(vec![2, 5]));
        assert_eq!(cfg.s, Some(2.5));
        assert_eq!(cfg.levels, Some((1, 4)));
        assert_eq!(cfg.bc, Some(BoundaryConditions::absorbing_clamped()));
        assert_eq!(cfg.variant, Some(AssemblyVariant::PaperLiteral));
        assert_eq!((cfg.alpha, cfg.beta, cfg.theta), (Some(0.5), Some(1.0), Some(0.3)));
        assert_eq!(cfg.tol, Some(f64::INFINITY));
        assert_eq!(parse_config("").unwrap(), ConfigFile::default());
    }

    #[test]
    fn config_errors_name_the_line() {
        assert!(matches!(parse_config("m = 2\nfoo = 1"), Err(Error::Config { line: 2, .. })));
        assert!(matches!(parse_config("levels = 4:2"), Err(Error::Config { line: 1, .. })));
        assert!(matches!(parse_config("just words"), Err(Error::Config { line: 1, .. })));
        assert!(matches!(parse_config("bc = periodic"), Err(Error::Config { .. })));
        assert_eq!(parse_levels("3").unwrap(), (3, 3));
    }

    #[test]
    fn unwritable_path_reports_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("missing").join("out.csv");
        let err = write_file(&path, |w| writeln!(w, "x")).unwrap_err();
        assert!(err.to_string().contains("out.csv"), "{err}");
        let ok = dir.path().join("ok.csv");
        write_file(&ok, |w| writeln!(w, "x")).unwrap();
        assert_eq!(std::fs::read_to_string(ok).unwrap(), "x\n");
    }
}
