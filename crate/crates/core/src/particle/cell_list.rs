/// Uniform bucket grid over `[0,1)^d` with side `>= radius`, so every pair
/// within `radius` lies in adjacent buckets.
#[derive(Debug, Clone)]
pub struct CellList {
    dim: usize,
    per_axis: usize,
    starts: Vec<usize>,
    items: Vec<usize>,
}

impl CellList {
    /// Buckets the listed particles; `positions` is the flat `N * d` array.
    /// `members` must be ascending; each bucket keeps that order.
    pub fn build(positions: &[f64], dim: usize, radius: f64, members: &[usize]) -> Self {
        let mut per_axis = (1.0 / radius).floor() as usize;
        // fewer than three buckets per axis would alias neighbours; one bucket holds everything
        if per_axis < 3 {
            per_axis = 1;
        }
        let n_cells = per_axis.pow(dim as u32);
        let cell_of = |i: usize| -> usize {
            let mut c = 0;
            let mut stride = 1;
            for &x in &positions[i * dim..(i + 1) * dim] {
                let b = ((x * per_axis as f64) as usize).min(per_axis - 1);
                c += b * stride;
                stride *= per_axis;
            }
            c
        };
        let mut counts = vec![0usize; n_cells + 1];
        let cells: Vec<usize> = members.iter().map(|&i| cell_of(i)).collect();
        for &c in &cells {
            counts[c + 1] += 1;
        }
        for c in 0..n_cells {
            counts[c + 1] += counts[c];
        }
        let starts = counts.clone();
        let mut fill = counts;
        let mut items = vec![0; members.len()];
        for (&i, &c) in members.iter().zip(&cells) {
            items[fill[c]] = i;
            fill[c] += 1;
        }
        CellList { dim, per_axis, starts, items }
    }

    pub fn per_axis(&self) -> usize {
        self.per_axis
    }

    /// Calls `f(j)` for every member in the buckets adjacent to `x`
    /// (including its own).
    pub fn for_each_neighbor(&self, x: &[f64], mut f: impl FnMut(usize)) {
        let p = self.per_axis;
        if p == 1 {
            self.items.iter().for_each(|&j| f(j));
            return;
        }
        let mut home = [0usize; 8];
        for (a, &xa) in x.iter().enumerate().take(self.dim) {
            home[a] = ((xa * p as f64) as usize).min(p - 1);
        }
        let combos = 3usize.pow(self.dim as u32);
        for combo in 0..combos {
            let mut r = combo;
            let mut cell = 0;
            let mut stride = 1;
            for &h in home.iter().take(self.dim) {
                let offset = r % 3;
                r /= 3;
                cell += ((h + p + offset - 1) % p) * stride;
                stride *= p;
            }
            for &j in &self.items[self.starts[cell]..self.starts[cell + 1]] {
                f(j);
            }
        }
    }
}
