//! Benchmark problems and the plain-text problem format.
//!
//! ```text
//! # cantilever, 4 x 2
//! nx=4
//! ny=2
//! volfrac=0.5
//! fix=0,xy
//! fix=5,xy
//! fix=10,xy
//! load=9,y,-1
//! ```
//!
//! Optional keys are `elem_w`, `elem_h`, `thickness`, `E0`, `nu`, `penalty`
//! and `tension_k`; unspecified material and geometry values default to a
//! unit element, unit modulus, `nu = 0.3` and `penalty = 3`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid_fe::{BoundaryConditions, StructuredGrid};
use crate::simp_model::{DesignField, SimpMaterial, StructuralModel, DEFAULT_RHO_MIN};
use crate::tension_energy::TensionConfig;

pub const BUILTIN_NAMES: [&str; 3] = ["cantilever", "mbb", "bridge"];

/// Mirror symmetry of the supports and loads about the vertical line through
/// the middle of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    Vertical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemDefinition {
    pub grid: StructuredGrid,
    pub bc: BoundaryConditions,
    pub material: SimpMaterial,
    pub volume_fraction: f64,
    pub tension: Option<TensionConfig>,
    pub symmetry: Option<Symmetry>,
}

impl ProblemDefinition {
    /// Validates the data and detects a vertical symmetry axis.
    pub fn new(
        grid: StructuredGrid,
        bc: BoundaryConditions,
        material: SimpMaterial,
        volume_fraction: f64,
        tension: Option<TensionConfig>,
    ) -> Result<Self> {
        let mut p = Self {
            grid,
            bc,
            material,
            volume_fraction,
            tension,
            symmetry: None,
        };
        p.validate()?;
        p.symmetry = detect_vertical_symmetry(&p.grid, &p.bc).then_some(Symmetry::Vertical);
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.volume_fraction > 0.0 && self.volume_fraction < 1.0) {
            return Err(Error::Validation(format!(
                "volume fraction {} outside (0, 1)",
                self.volume_fraction
            )));
        }
        self.bc.validate(&self.grid)?;
        if self.bc.loads.is_empty() {
            return Err(Error::Validation("problem has no loads".into()));
        }
        let fixed_x = self.bc.fixed_dofs.iter().any(|d| d % 2 == 0);
        let fixed_y = self.bc.fixed_dofs.iter().any(|d| d % 2 == 1);
        if !(fixed_x && fixed_y && self.bc.fixed_dofs.len() >= 3) {
            return Err(Error::Validation(
                "supports cannot remove all rigid-body modes (need x and y fixity and at least 3 fixed dofs)".into(),
            ));
        }
        Ok(())
    }

    pub fn initial_field(&self) -> Result<DesignField> {
        DesignField::uniform(&self.grid, self.volume_fraction, DEFAULT_RHO_MIN)
    }

    pub fn model(&self) -> Result<StructuralModel> {
        StructuralModel::new(self.grid.clone(), self.bc.clone(), self.material)
    }

    /// Element reflected through the symmetry axis, if the problem has one.
    pub fn mirror_element(&self, e: usize) -> Option<usize> {
        self.symmetry.map(|Symmetry::Vertical| {
            let (ex, ey) = self.grid.element_coords(e);
            self.grid.element_index(self.grid.nx() - 1 - ex, ey)
        })
    }

    /// Problem-file text that [`load_problem`] reads back to an equal value.
    pub fn to_problem_file(&self) -> String {
        let g = &self.grid;
        let m = &self.material;
        let mut s = String::new();
        let _ = writeln!(s, "nx={}\nny={}", g.nx(), g.ny());
        let _ = writeln!(s, "elem_w={}\nelem_h={}\nthickness={}", g.elem_w(), g.elem_h(), g.thickness());
        let _ = writeln!(s, "E0={}\nnu={}\npenalty={}", m.e0, m.nu, m.penalty);
        let _ = writeln!(s, "volfrac={}", self.volume_fraction);
        if let Some(t) = &self.tension {
            let _ = writeln!(s, "tension_k={}", t.k());
        }
        let mut fixed: BTreeMap<usize, (bool, bool)> = BTreeMap::new();
        for &d in &self.bc.fixed_dofs {
            let entry = fixed.entry(d / 2).or_default();
            if d % 2 == 0 {
                entry.0 = true;
            } else {
                entry.1 = true;
            }
        }
        for (node, (x, y)) in fixed {
            let dir = match (x, y) {
                (true, true) => "xy",
                (true, false) => "x",
                _ => "y",
            };
            let _ = writeln!(s, "fix={node},{dir}");
        }
        for &(d, mag) in &self.bc.loads {
            let _ = writeln!(s, "load={},{},{}", d / 2, if d % 2 == 0 { "x" } else { "y" }, mag);
        }
        s
    }
}

fn detect_vertical_symmetry(grid: &StructuredGrid, bc: &BoundaryConditions) -> bool {
    let mirror_dof = |d: usize| {
        let (i, j) = grid.node_coords(d / 2);
        2 * grid.node_index(grid.nx() - i, j) + d % 2
    };
    if !bc.fixed_dofs.iter().all(|&d| bc.fixed_dofs.contains(&mirror_dof(d))) {
        return false;
    }
    let p = bc.load_vector(grid.num_dofs());
    (0..grid.num_dofs()).all(|d| {
        let sign = if d % 2 == 0 { -1.0 } else { 1.0 };
        p[mirror_dof(d)] == sign * p[d]
    })
}

/// One of the built-in benchmarks on a unit-element grid with default
/// material.
///
/// * `cantilever`: left edge clamped, unit downward load at the right-edge
///   node `(nx, ny/2)`.
/// * `mbb`: half beam; left-edge x-dofs and the bottom-right y-dof fixed, unit
///   downward load at the top-left node.
/// * `bridge`: pins at both bottom corners, unit downward loads on every
///   bottom-edge node between them.
pub fn builtin_problem(name: &str, nx: usize, ny: usize, volume_fraction: f64) -> Result<ProblemDefinition> {
    if nx < 2 || ny < 2 {
        return Err(Error::param(format!("builtin problems need nx, ny >= 2, got {nx} x {ny}")));
    }
    let grid = StructuredGrid::unit(nx, ny)?;
    let node = |i, j| grid.node_index(i, j);
    let bc = match name {
        "cantilever" => BoundaryConditions::new(
            (0..=ny).flat_map(|j| [2 * node(0, j), 2 * node(0, j) + 1]),
            vec![(2 * node(nx, ny / 2) + 1, -1.0)],
        ),
        "mbb" => BoundaryConditions::new(
            (0..=ny).map(|j| 2 * node(0, j)).chain([2 * node(nx, 0) + 1]),
            vec![(2 * node(0, ny) + 1, -1.0)],
        ),
        "bridge" => BoundaryConditions::new(
            [node(0, 0), node(nx, 0)].into_iter().flat_map(|n| [2 * n, 2 * n + 1]),
            (1..nx).map(|i| (2 * node(i, 0) + 1, -1.0)).collect(),
        ),
        other => {
            return Err(Error::param(format!(
                "unknown problem '{other}' (valid: {})",
                BUILTIN_NAMES.join(", ")
            )))
        }
    };
    ProblemDefinition::new(grid, bc, SimpMaterial::default(), volume_fraction, None)
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| parse_err(line, format!("invalid value '{}' for {key}", v.trim())))
}

/// Parses and validates a problem file.
pub fn load_problem(text: &str) -> Result<ProblemDefinition> {
    let mut scalars: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    let mut fixes: Vec<(usize, usize, &str)> = Vec::new();
    let mut loads: Vec<(usize, usize, &str, f64)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| parse_err(line, format!("expected key=value, got '{content}'")))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "nx" | "ny" | "elem_w" | "elem_h" | "thickness" | "E0" | "nu" | "penalty" | "volfrac" | "tension_k" => {
                if let Some((prev, _)) = scalars.insert(key, (line, value)) {
                    return Err(parse_err(line, format!("{key} already set on line {prev}")));
                }
            }
            "fix" => {
                let (node, dir) = value
                    .split_once(',')
                    .ok_or_else(|| parse_err(line, "expected fix=<node>,<x|y|xy>"))?;
                let dir = dir.trim();
                if !matches!(dir, "x" | "y" | "xy") {
                    return Err(parse_err(line, format!("fix direction must be x, y or xy, got '{dir}'")));
                }
                fixes.push((line, parse_num(line, "fix node", node)?, dir));
            }
            "load" => {
                let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                let [node, dir, mag] = parts[..] else {
                    return Err(parse_err(line, "expected load=<node>,<x|y>,<magnitude>"));
                };
                if !matches!(dir, "x" | "y") {
                    return Err(parse_err(line, format!("load direction must be x or y, got '{dir}'")));
                }
                let mag: f64 = parse_num(line, "load magnitude", mag)?;
                if !mag.is_finite() {
                    return Err(parse_err(line, "load magnitude must be finite"));
                }
                loads.push((line, parse_num(line, "load node", node)?, dir, mag));
            }
            other => return Err(parse_err(line, format!("unknown key '{other}'"))),
        }
    }

    let get = |key: &str| scalars.get(key).copied();
    let required = |key: &str| get(key).ok_or_else(|| Error::Validation(format!("missing required key {key}")));
    let num = |key: &str, default: f64| -> Result<f64> {
        match get(key) {
            Some((line, v)) => parse_num(line, key, v),
            None => Ok(default),
        }
    };

    let (line, v) = required("nx")?;
    let nx: usize = parse_num(line, "nx", v)?;
    let (line, v) = required("ny")?;
    let ny: usize = parse_num(line, "ny", v)?;
    let (line, v) = required("volfrac")?;
    let volume_fraction: f64 = parse_num(line, "volfrac", v)?;

    let grid = StructuredGrid::new(nx, ny, num("elem_w", 1.0)?, num("elem_h", 1.0)?, num("thickness", 1.0)?)?;
    let material = SimpMaterial::new(num("E0", 1.0)?, num("nu", 0.3)?, num("penalty", 3.0)?)?;
    let tension = match get("tension_k") {
        Some((line, v)) => Some(TensionConfig::new(parse_num(line, "tension_k", v)?)?),
        None => None,
    };

    let check_node = |line: usize, node: usize| {
        if node >= grid.num_nodes() {
            Err(Error::Validation(format!(
                "line {line}: node {node} out of range (grid has {} nodes)",
                grid.num_nodes()
            )))
        } else {
            Ok(())
        }
    };
    let mut fixed = Vec::new();
    for &(line, node, dir) in &fixes {
        check_node(line, node)?;
        if dir.contains('x') {
            fixed.push(2 * node);
        }
        if dir.contains('y') {
            fixed.push(2 * node + 1);
        }
    }
    let mut load_list = Vec::new();
    for &(line, node, dir, mag) in &loads {
        check_node(line, node)?;
        load_list.push((2 * node + usize::from(dir == "y"), mag));
    }
    ProblemDefinition::new(grid, BoundaryConditions::new(fixed, load_list), material, volume_fraction, tension)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_counts() {
        let c = builtin_problem("cantilever", 2, 2, 0.5).unwrap();
        assert_eq!(c.bc.fixed_dofs.len(), 6);
        assert_eq!(c.bc.loads, vec![(2 * c.grid.node_index(2, 1) + 1, -1.0)]);
        for (nx, ny) in [(2, 2), (6, 3), (10, 5)] {
            let m = builtin_problem("mbb", nx, ny, 0.4).unwrap();
            let xs = m.bc.fixed_dofs.iter().filter(|d| *d % 2 == 0).count();
            let ys = m.bc.fixed_dofs.iter().filter(|d| *d % 2 == 1).count();
            assert_eq!((xs, ys), (ny + 1, 1));
            let b = builtin_problem("bridge", nx, ny, 0.3).unwrap();
            assert_eq!(b.bc.loads.len(), nx - 1);
            assert!(b.bc.loads.iter().all(|&(d, m)| d % 2 == 1 && m == -1.0));
            assert_eq!(b.symmetry, Some(Symmetry::Vertical));
        }
        assert_eq!(c.symmetry, None);
    }

    #[test]
    fn unknown_name_lists_valid_ones() {
        let err = builtin_problem("truss", 4, 4, 0.5).unwrap_err().to_string();
        assert!(err.contains("cantilever") && err.contains("mbb") && err.contains("bridge"), "{err}");
        assert!(builtin_problem("mbb", 1, 4, 0.5).is_err());
    }

    #[test]
    fn builtins_have_spd_reduced_systems() {
        for name in BUILTIN_NAMES {
            let p = builtin_problem(name, 6, 3, 0.5).unwrap();
            let mut model = p.model().unwrap();
            let a = model.analyze(&p.initial_field().unwrap()).unwrap();
            assert!(a.compliance > 0.0 && a.compliance.is_finite(), "{name}");
        }
    }

    #[test]
    fn round_trip_through_text() {
        for name in BUILTIN_NAMES {
            let p = builtin_problem(name, 5, 3, 0.35).unwrap();
            let q = load_problem(&p.to_problem_file()).unwrap();
            assert_eq!(p, q, "{name}");
        }
        let mut p = builtin_problem("bridge", 4, 2, 0.3).unwrap();
        p.tension = Some(TensionConfig::new(0.25).unwrap());
        assert_eq!(load_problem(&p.to_problem_file()).unwrap(), p);
    }

    #[test]
    fn handwritten_file() {
        let text = "# cantilever\nnx=4\nny=2\nvolfrac=0.5  # half\n\nfix=0,xy\nfix=5,xy\nfix=10,xy\nload=9,y,-1\n";
        let p = load_problem(text).unwrap();
        assert_eq!(p, builtin_problem("cantilever", 4, 2, 0.5).unwrap());
    }

    #[test]
    fn errors_carry_location() {
        let base = "nx=4\nny=2\nvolfrac=0.5\nfix=0,xy\nfix=5,xy\n";
        let err = load_problem(&format!("{base}load=99,y,-1\n")).unwrap_err();
        assert!(matches!(err, Error::Validation(ref m) if m.contains("node 99")), "{err}");
        let err = load_problem(&format!("{base}load=9,z,-1\n")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 6, .. }), "{err}");
        let err = load_problem(&format!("{base}bogus\n")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 6, .. }), "{err}");
        let err = load_problem(&format!("{base}nx=5\n")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 6, .. }), "{err}");
        let err = load_problem("nx=4\nny=2\nvolfrac=1.5\nfix=0,xy\nfix=5,xy\nload=9,y,-1\n").unwrap_err();
        assert!(matches!(err, Error::Validation(ref m) if m.contains("volume fraction")), "{err}");
        let err = load_problem("nx=4\nny=two\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = load_problem("nx=4\nvolfrac=0.5\n").unwrap_err();
        assert!(matches!(err, Error::Validation(ref m) if m.contains("ny")), "{err}");
        let err = load_problem(&format!("{base}load=5,y,-1\n")).unwrap_err();
        assert!(matches!(err, Error::Validation(ref m) if m.contains("fixed and loaded")), "{err}");
    }

    #[test]
    fn mirror_elements() {
        let p = builtin_problem("bridge", 4, 2, 0.3).unwrap();
        let g = &p.grid;
        assert_eq!(p.mirror_element(g.element_index(0, 1)), Some(g.element_index(3, 1)));
        assert_eq!(p.mirror_element(g.element_index(1, 0)), Some(g.element_index(2, 0)));
        let c = builtin_problem("cantilever", 4, 2, 0.3).unwrap();
        assert_eq!(c.mirror_element(0), None);
    }
}
