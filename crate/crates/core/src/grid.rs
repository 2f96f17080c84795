//! Uniform cell-centered grids and the functions sampled on them.
//!
//! A [`GridFunction`] stores one value per cell plus an optional pair of
//! constant tails. With constant tails the function lives on the whole line:
//! the tail value is repeated on every ghost cell to the left and right, which
//! is how profile problems with prescribed behavior at `±∞` are represented.
//!
//! Derivatives are undivided forward differences applied to that (extended)
//! sequence. The `k`-th difference of a sequence sampled at cell centers is a
//! second-order approximation of `u^(k)` at the midpoint of its stencil, so
//! the result lives on a grid shifted by `k h / 2`: `N + k` cells when the
//! tails are constant (the derivative is supported on the core plus `k` ghost
//! cells), `N - k` cells when there are no tails.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible number of cells for a user-facing grid.
pub const MIN_CELLS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileGrid {
    pub a: f64,
    pub b: f64,
    pub n: usize,
}

impl ProfileGrid {
    /// Uniform grid of `n` cells on `(a, b)`.
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        if n < MIN_CELLS {
            return Err(Error::Grid(format!("need at least {MIN_CELLS} cells, got {n}")));
        }
        Self::derived(a, b, n)
    }

    /// Same as [`ProfileGrid::new`] without the minimum cell count; used for
    /// grids produced by differencing.
    pub(crate) fn derived(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || b <= a {
            return Err(Error::Grid(format!("need finite a < b, got ({a}, {b})")));
        }
        if n == 0 {
            return Err(Error::Grid("empty grid".into()));
        }
        Ok(ProfileGrid { a, b, n })
    }

    #[inline]
    pub fn h(&self) -> f64 {
        (self.b - self.a) / self.n as f64
    }

    #[inline]
    pub fn center(&self, i: usize) -> f64 {
        self.a + (i as f64 + 0.5) * self.h()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.center(i)).collect()
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    /// Grid with every coordinate multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::derived(self.a * factor, self.b * factor, self.n)
    }
}

/// Behavior outside the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Tails {
    /// The function lives on the interval only.
    #[default]
    None,
    /// `v = left` on `(-∞, a]` and `v = right` on `[b, ∞)`.
    Constant { left: f64, right: f64 },
}

impl Tails {
    pub fn constant(left: f64, right: f64) -> Self {
        Tails::Constant { left, right }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Tails::Constant { .. })
    }

    /// Mirror image: tails swapped.
    pub fn swapped(&self) -> Self {
        match *self {
            Tails::None => Tails::None,
            Tails::Constant { left, right } => Tails::Constant {
                left: right,
                right: left,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub grid: ProfileGrid,
    pub values: Vec<f64>,
    #[serde(default)]
    pub tails: Tails,
}

impl GridFunction {
    pub fn new(grid: ProfileGrid, values: Vec<f64>, tails: Tails) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::Grid(format!(
                "{} values for a grid of {} cells",
                values.len(),
                grid.n
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("value at cell {bad} is not finite")));
        }
        if let Tails::Constant { left, right } = tails {
            if !(left.is_finite() && right.is_finite()) {
                return Err(Error::Domain("tail values must be finite".into()));
            }
        }
        Ok(GridFunction { grid, values, tails })
    }

    /// Samples `f` at the cell centers.
    pub fn from_fn(grid: ProfileGrid, tails: Tails, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.centers().into_iter().map(f).collect();
        Self::new(grid, values, tails)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same grid and tails, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.grid, values, self.tails)
    }

    /// Values reversed and tails swapped (reflection about the grid midpoint).
    pub fn reflected(&self) -> Self {
        let mut values = self.values.clone();
        values.reverse();
        GridFunction {
            grid: self.grid,
            values,
            tails: self.tails.swapped(),
        }
    }

    /// Negated values and tails.
    pub fn negated(&self) -> Self {
        GridFunction {
            grid: self.grid,
            values: self.values.iter().map(|v| -v).collect(),
            tails: match self.tails {
                Tails::None => Tails::None,
                Tails::Constant { left, right } => Tails::Constant {
                    left: -left,
                    right: -right,
                },
            },
        }
    }

    /// Linear interpolation onto another grid, holding tails (or the end
    /// values when there are none) outside the sampled range.
    pub fn resample(&self, grid: ProfileGrid) -> Result<Self> {
        let h = self.grid.h();
        let n = self.values.len();
        let (left, right) = match self.tails {
            Tails::Constant { left, right } => (left, right),
            Tails::None => (self.values[0], self.values[n - 1]),
        };
        let at = |i: isize| -> f64 {
            if i < 0 {
                left
            } else if i as usize >= n {
                right
            } else {
                self.values[i as usize]
            }
        };
        let values = grid
            .centers()
            .into_iter()
            .map(|x| {
                let t = (x - self.grid.a) / h - 0.5;
                let i = t.floor();
                let frac = t - i;
                let i = i as isize;
                if self.tails == Tails::None && (t < 0.0 || t > (n - 1) as f64) {
                    return if t < 0.0 { left } else { right };
                }
                at(i) * (1.0 - frac) + at(i + 1) * frac
            })
            .collect();
        Self::new(grid, values, self.tails)
    }

    /// Writes `x,value` rows.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        out.write_all(self.to_csv().as_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,value\n");
        for (x, v) in self.grid.centers().into_iter().zip(&self.values) {
            s.push_str(&format!("{},{}\n", crate::cli::export::fmt_float(x), crate::cli::export::fmt_float(*v)));
        }
        s
    }
}

/// Cells whose values are held fixed during minimization.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PinMask {
    pins: Vec<(usize, f64)>,
}

impl PinMask {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn new(mut pins: Vec<(usize, f64)>, n: usize) -> Result<Self> {
        pins.sort_by_key(|p| p.0);
        pins.dedup_by_key(|p| p.0);
        for &(i, v) in &pins {
            if i >= n {
                return Err(Error::Grid(format!("pinned index {i} outside 0..{n}")));
            }
            if !v.is_finite() {
                return Err(Error::Domain(format!("pinned value at {i} is not finite")));
            }
        }
        Ok(PinMask { pins })
    }

    /// `width` cells at the left end fixed to `left`, `width` at the right to `right`.
    pub fn boundary_layers(n: usize, width: usize, left: f64, right: f64) -> Result<Self> {
        if 2 * width >= n {
            return Err(Error::Grid(format!(
                "boundary layers of {width} cells leave nothing free in {n} cells"
            )));
        }
        let pins = (0..width)
            .map(|i| (i, left))
            .chain((n - width..n).map(|i| (i, right)))
            .collect();
        Self::new(pins, n)
    }

    pub fn pins(&self) -> &[(usize, f64)] {
        &self.pins
    }

    pub fn is_empty(&self) -> bool {
        self.pins.is_empty()
    }

    pub fn is_pinned(&self, i: usize) -> bool {
        self.pins.binary_search_by_key(&i, |p| p.0).is_ok()
    }

    /// Indices in `0..n` that are free.
    pub fn free_indices(&self, n: usize) -> Vec<usize> {
        (0..n).filter(|&i| !self.is_pinned(i)).collect()
    }

    /// Overwrites pinned entries of `values`.
    pub fn apply(&self, values: &mut [f64]) {
        for &(i, v) in &self.pins {
            values[i] = v;
        }
    }
}

/// Undivided `k`-th forward differences of the sequence seen by the
/// derivative operator (core values, padded with `k` tail copies per side
/// when the tails are constant).
pub(crate) fn differences(values: &[f64], tails: Tails, k: usize) -> Vec<f64> {
    let mut cur: Vec<f64> = match tails {
        Tails::Constant { left, right } => std::iter::repeat_n(left, k)
            .chain(values.iter().copied())
            .chain(std::iter::repeat_n(right, k))
            .collect(),
        Tails::None => values.to_vec(),
    };
    for _ in 0..k {
        for j in 0..cur.len() - 1 {
            cur[j] = cur[j + 1] - cur[j];
        }
        cur.pop();
    }
    cur
}

/// Adjoint of [`differences`] with respect to the core values.
pub(crate) fn differences_adjoint(g: &[f64], tails: Tails, k: usize, n: usize) -> Vec<f64> {
    let mut cur = g.to_vec();
    for _ in 0..k {
        let m = cur.len();
        let mut next = vec![0.0; m + 1];
        for (j, &gj) in cur.iter().enumerate() {
            next[j] -= gj;
            next[j + 1] += gj;
        }
        cur = next;
    }
    match tails {
        Tails::Constant { .. } => cur[k..k + n].to_vec(),
        Tails::None => cur,
    }
}

/// Grid carrying the `k`-th difference of a function on `grid`.
pub(crate) fn derivative_grid(grid: &ProfileGrid, tails: Tails, k: usize) -> Result<ProfileGrid> {
    let shift = 0.5 * k as f64 * grid.h();
    match tails {
        Tails::Constant { .. } => ProfileGrid::derived(grid.a - shift, grid.b + shift, grid.n + k),
        Tails::None => ProfileGrid::derived(grid.a + shift, grid.b - shift, grid.n - k),
    }
}

/// `k`-th derivative by repeated forward differencing.
///
/// With constant tails the result has `N + k` cells and zero tails; without
/// tails it has `N - k` cells and no tails.
pub fn derivative(v: &GridFunction, k: usize) -> Result<GridFunction> {
    if k == 0 {
        return Ok(v.clone());
    }
    let n = v.grid.n;
    if n <= 2 * k {
        return Err(Error::GridTooCoarse { cells: n, order: k });
    }
    let h = v.grid.h();
    let scale = h.powi(-(k as i32));
    let values: Vec<f64> = differences(&v.values, v.tails, k)
        .into_iter()
        .map(|d| d * scale)
        .collect();
    let grid = derivative_grid(&v.grid, v.tails, k)?;
    let tails = match v.tails {
        Tails::Constant { .. } => Tails::constant(0.0, 0.0),
        Tails::None => Tails::None,
    };
    GridFunction::new(grid, values, tails)
}

/// Blow-up `v(t) = u(eps t)`: same values on the grid `(a/eps, b/eps)`.
pub fn blowup(u: &GridFunction, eps: f64) -> Result<GridFunction> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Domain(format!("blow-up factor must be positive, got {eps}")));
    }
    Ok(GridFunction {
        grid: u.grid.scaled(1.0 / eps)?,
        values: u.values.clone(),
        tails: u.tails,
    })
}
