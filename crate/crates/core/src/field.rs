//! Per-species densities on a uniform periodic grid of `M^d` cells.
//!
//! Cell `c` has multi-index `(c_0, .., c_{d-1})` with `c = sum c_a M^a`
//! (axis 0 fastest) and center `((c_a + 1/2) / M)_a`.

use std::io::{BufRead, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("field shape mismatch: {0}")]
    Shape(String),
    #[error("field is not normalized: total mass {0}")]
    Unnormalized(f64),
    #[error("negative density {value} for species {species} at cell {cell}")]
    Negative { species: usize, cell: usize, value: f64 },
    #[error("field csv line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    dim: usize,
    m: usize,
    n_species: usize,
    pub time: f64,
    data: Vec<f64>,
}

impl DensityField {
    pub fn zeros(dim: usize, m: usize, n_species: usize) -> Self {
        assert!(dim >= 1 && m >= 1 && n_species >= 1);
        let cells = m.pow(dim as u32);
        DensityField { dim, m, n_species, time: 0.0, data: vec![0.0; cells * n_species] }
    }

    /// Samples `f(x, species)` at cell centers (species 0-based).
    pub fn from_fn(dim: usize, m: usize, n_species: usize, f: impl Fn(&[f64], usize) -> f64) -> Self {
        let mut field = Self::zeros(dim, m, n_species);
        let cells = field.cells();
        let mut x = vec![0.0; dim];
        for s in 0..n_species {
            for c in 0..cells {
                field.cell_center_into(c, &mut x);
                field.data[s * cells + c] = f(&x, s);
            }
        }
        field
    }

    /// Spatially constant field with the given per-species values.
    pub fn uniform(dim: usize, m: usize, values: &[f64]) -> Self {
        Self::from_fn(dim, m, values.len(), |_, s| values[s])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid_size(&self) -> usize {
        self.m
    }

    pub fn n_species(&self) -> usize {
        self.n_species
    }

    pub fn cells(&self) -> usize {
        self.m.pow(self.dim as u32)
    }

    pub fn cell_volume(&self) -> f64 {
        (1.0 / self.m as f64).powi(self.dim as i32)
    }

    pub fn same_shape(&self, other: &DensityField) -> bool {
        self.dim == other.dim && self.m == other.m && self.n_species == other.n_species
    }

    pub fn check_shape(&self, other: &DensityField) -> Result<(), FieldError> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(FieldError::Shape(format!(
                "(d={}, M={}, n={}) vs (d={}, M={}, n={})",
                self.dim, self.m, self.n_species, other.dim, other.m, other.n_species
            )))
        }
    }

    pub fn species(&self, s: usize) -> &[f64] {
        let cells = self.cells();
        &self.data[s * cells..(s + 1) * cells]
    }

    pub fn species_mut(&mut self, s: usize) -> &mut [f64] {
        let cells = self.cells();
        &mut self.data[s * cells..(s + 1) * cells]
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, s: usize, cell: usize) -> f64 {
        self.data[s * self.cells() + cell]
    }

    pub fn cell_center_into(&self, cell: usize, x: &mut [f64]) {
        let h = 1.0 / self.m as f64;
        let mut r = cell;
        for xa in x.iter_mut().take(self.dim) {
            *xa = ((r % self.m) as f64 + 0.5) * h;
            r /= self.m;
        }
    }

    pub fn cell_center(&self, cell: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        self.cell_center_into(cell, &mut x);
        x
    }

    /// Integral of one species.
    pub fn species_mass(&self, s: usize) -> f64 {
        self.species(s).iter().sum::<f64>() * self.cell_volume()
    }

    pub fn species_masses(&self) -> Vec<f64> {
        (0..self.n_species).map(|s| self.species_mass(s)).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.data.iter().sum::<f64>() * self.cell_volume()
    }

    pub fn species_min(&self, s: usize) -> f64 {
        self.species(s).iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn species_max(&self, s: usize) -> f64 {
        self.species(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    /// Rescales to unit total mass.
    pub fn normalized(mut self) -> Self {
        let mass = self.total_mass();
        self.scale(1.0 / mass);
        self
    }

    pub fn check_normalized(&self, tol: f64) -> Result<(), FieldError> {
        let mass = self.total_mass();
        if (mass - 1.0).abs() > tol {
            return Err(FieldError::Unnormalized(mass));
        }
        Ok(())
    }

    pub fn check_nonnegative(&self) -> Result<(), FieldError> {
        let cells = self.cells();
        match self.data.iter().position(|&v| v < 0.0 || v.is_nan()) {
            Some(i) => Err(FieldError::Negative { species: i / cells, cell: i % cells, value: self.data[i] }),
            None => Ok(()),
        }
    }

    /// Averages blocks of `M / bins` cells per axis onto a `bins^d` grid.
    /// Mass is preserved exactly up to rounding.
    pub fn coarsen(&self, bins: usize) -> Result<DensityField, FieldError> {
        if bins == 0 || !self.m.is_multiple_of(bins) {
            return Err(FieldError::Shape(format!("cannot coarsen M={} to {} bins", self.m, bins)));
        }
        let ratio = self.m / bins;
        let mut out = DensityField::zeros(self.dim, bins, self.n_species);
        out.time = self.time;
        let coarse_cells = out.cells();
        let weight = (1.0 / ratio as f64).powi(self.dim as i32);
        for s in 0..self.n_species {
            let src = self.species(s);
            let dst = &mut out.data[s * coarse_cells..(s + 1) * coarse_cells];
            for (c, &v) in src.iter().enumerate() {
                let mut r = c;
                let mut coarse = 0;
                let mut stride = 1;
                for _ in 0..self.dim {
                    coarse += ((r % self.m) / ratio) * stride;
                    r /= self.m;
                    stride *= bins;
                }
                dst[coarse] += v * weight;
            }
        }
        Ok(out)
    }

    /// `true` when every species is constant across cells to `tol`.
    pub fn is_spatially_constant(&self, tol: f64) -> bool {
        (0..self.n_species).all(|s| self.species_max(s) - self.species_min(s) <= tol)
    }

    /// Writes the metadata line and header.
    pub fn write_csv_header<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "# M={} d={}", self.m, self.dim)?;
        writeln!(w, "time,species,cell_index,density")
    }

    /// Appends one time block (no header).
    pub fn write_csv_rows<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let cells = self.cells();
        for s in 0..self.n_species {
            for c in 0..cells {
                writeln!(w, "{},{},{},{}", self.time, s + 1, c, self.data[s * cells + c])?;
            }
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        self.write_csv_header(w)?;
        self.write_csv_rows(w)
    }

    /// Reads every time block of a field dump, in file order.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Vec<DensityField>, FieldError> {
        let mut m = None;
        let mut dim = None;
        let mut rows: Vec<(f64, usize, usize, f64)> = Vec::new();
        let mut header_seen = false;
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            if let Some(meta) = t.strip_prefix('#') {
                for tok in meta.split_whitespace() {
                    if let Some(v) = tok.strip_prefix("M=") {
                        m = Some(parse_usize(v, lineno)?);
                    } else if let Some(v) = tok.strip_prefix("d=") {
                        dim = Some(parse_usize(v, lineno)?);
                    }
                }
                continue;
            }
            if !header_seen {
                if t != "time,species,cell_index,density" {
                    return Err(FieldError::Csv { line: lineno, msg: format!("unexpected header {t:?}") });
                }
                header_seen = true;
                continue;
            }
            let parts: Vec<&str> = t.split(',').collect();
            if parts.len() != 4 {
                return Err(FieldError::Csv { line: lineno, msg: "expected 4 columns".into() });
            }
            let time = parse_f64(parts[0], lineno)?;
            let species = parse_usize(parts[1], lineno)?;
            let cell = parse_usize(parts[2], lineno)?;
            let density = parse_f64(parts[3], lineno)?;
            if species == 0 {
                return Err(FieldError::Csv { line: lineno, msg: "species indices are 1-based".into() });
            }
            rows.push((time, species - 1, cell, density));
        }
        let (m, dim) = match (m, dim) {
            (Some(m), Some(d)) if m > 0 && d > 0 => (m, d),
            _ => return Err(FieldError::Csv { line: 1, msg: "missing '# M=<int> d=<int>' metadata".into() }),
        };
        let n_species = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
        if n_species == 0 {
            return Err(FieldError::Csv { line: 1, msg: "no data rows".into() });
        }
        let cells = m.pow(dim as u32);
        let mut out: Vec<DensityField> = Vec::new();
        for (time, s, c, v) in rows {
            if c >= cells {
                return Err(FieldError::Csv { line: 0, msg: format!("cell index {c} out of range for M={m} d={dim}") });
            }
            if out.last().map(|f| f.time.to_bits() != time.to_bits()).unwrap_or(true) {
                let mut f = DensityField::zeros(dim, m, n_species);
                f.time = time;
                out.push(f);
            }
            let f = out.last_mut().expect("pushed above");
            f.data[s * cells + c] = v;
        }
        Ok(out)
    }
}

fn parse_usize(s: &str, line: usize) -> Result<usize, FieldError> {
    s.trim().parse().map_err(|_| FieldError::Csv { line, msg: format!("bad integer {s:?}") })
}

fn parse_f64(s: &str, line: usize) -> Result<f64, FieldError> {
    s.trim().parse().map_err(|_| FieldError::Csv { line, msg: format!("bad number {s:?}") })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masses_and_centers() {
        let f = DensityField::uniform(2, 4, &[0.25, 0.75]);
        assert!((f.total_mass() - 1.0).abs() < 1e-15);
        assert_eq!(f.cell_center(5), vec![0.375, 0.375]);
        assert!((f.species_mass(1) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn coarsen_preserves_mass() {
        let f = DensityField::from_fn(1, 64, 2, |x, s| 1.0 + (s as f64 + 1.0) * x[0]).normalized();
        let c = f.coarsen(16).unwrap();
        assert!((c.total_mass() - 1.0).abs() < 1e-14);
        assert!(f.coarsen(10).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mut f = DensityField::from_fn(2, 3, 2, |x, s| x[0] + 2.0 * x[1] + s as f64);
        f.time = 0.25;
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let mut g = f.clone();
        g.time = 0.5;
        g.write_csv_rows(&mut buf).unwrap();
        let back = DensityField::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, vec![f, g]);
    }

    #[test]
    fn csv_requires_metadata() {
        let text = "time,species,cell_index,density\n0,1,0,1.0\n";
        assert!(DensityField::read_csv(text.as_bytes()).is_err());
    }
}
