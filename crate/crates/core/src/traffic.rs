//! User populations and demand for the homogeneous (HT), wide hot-spot (WHS)
//! and population-driven (RT) scenarios.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct User {
    pub position: Point,
    /// Requested rate, Mbps.
    pub demand: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ScenarioKind {
    Ht,
    Whs,
    Rt,
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioKind::Ht => "HT",
            ScenarioKind::Whs => "WHS",
            ScenarioKind::Rt => "RT",
        })
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "HT" => Ok(ScenarioKind::Ht),
            "WHS" => Ok(ScenarioKind::Whs),
            "RT" => Ok(ScenarioKind::Rt),
            other => Err(Error::Config(format!("unknown scenario kind `{other}`"))),
        }
    }
}

/// Beam layout and demand description of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficScenario {
    pub kind: ScenarioKind,
    /// Dirichlet concentration, one entry per beam (HT/WHS only).
    pub alpha: Vec<f64>,
    pub grid_cols: usize,
    pub grid_rows: usize,
    pub beam_radius_km: f64,
    pub demand_per_user: f64,
    pub user_count: usize,
    /// Demand raster for RT.
    pub population: Option<PopulationGrid>,
}

impl TrafficScenario {
    pub fn beam_count(&self) -> usize {
        self.grid_cols * self.grid_rows
    }

    pub fn total_demand(&self) -> f64 {
        self.user_count as f64 * self.demand_per_user
    }

    pub fn homogeneous() -> Self {
        Self {
            kind: ScenarioKind::Ht,
            alpha: vec![1.0; 6],
            grid_cols: 2,
            grid_rows: 3,
            beam_radius_km: 50.0,
            demand_per_user: 25.0,
            user_count: 272,
            population: None,
        }
    }

    pub fn wide_hot_spot() -> Self {
        Self {
            kind: ScenarioKind::Whs,
            alpha: vec![4.0, 4.0, 1.0, 1.0, 1.0, 1.0],
            ..Self::homogeneous()
        }
    }

    pub fn real_traffic(population: PopulationGrid) -> Self {
        Self {
            kind: ScenarioKind::Rt,
            alpha: Vec::new(),
            grid_cols: 8,
            grid_rows: 8,
            beam_radius_km: 50.0,
            demand_per_user: 25.0,
            user_count: 2897,
            population: Some(population),
        }
    }

    /// Beam centers of the uniform layout for this scenario.
    pub fn beam_centers(&self) -> Vec<Point> {
        let pitch = 2.0 * self.beam_radius_km;
        match &self.population {
            Some(grid) if self.kind == ScenarioKind::Rt => {
                let cx = (grid.x_min + grid.x_max) / 2.0;
                let cy = (grid.y_min + grid.y_max) / 2.0;
                beam_grid_centers(self.grid_cols, self.grid_rows, pitch, Point::new(cx, cy))
            }
            _ => {
                let origin = Point::new(
                    (self.grid_cols as f64 - 1.0) * pitch / 2.0,
                    (self.grid_rows as f64 - 1.0) * pitch / 2.0,
                );
                beam_grid_centers(self.grid_cols, self.grid_rows, pitch, origin)
            }
        }
    }
}

/// Row-major grid of beam centers spaced `pitch` apart around `middle`.
/// Index `row * cols + col`; consecutive indices `2j, 2j+1` share a TWTA.
pub fn beam_grid_centers(cols: usize, rows: usize, pitch: f64, middle: Point) -> Vec<Point> {
    let x0 = middle.x - (cols as f64 - 1.0) * pitch / 2.0;
    let y0 = middle.y - (rows as f64 - 1.0) * pitch / 2.0;
    let mut centers = Vec::with_capacity(cols * rows);
    for r in 0..rows {
        for c in 0..cols {
            centers.push(Point::new(x0 + c as f64 * pitch, y0 + r as f64 * pitch));
        }
    }
    centers
}

/// Draw a point of the probability simplex from `Dir(alpha)` by normalizing
/// independent `Gamma(alpha_i, 1)` draws.
pub fn sample_dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    if alpha.is_empty() {
        return Err(Error::Empty("dirichlet alpha"));
    }
    if let Some((index, &value)) = alpha
        .iter()
        .enumerate()
        .find(|(_, a)| !(a.is_finite() && **a > 0.0))
    {
        return Err(Error::InvalidAlpha { index, value });
    }
    loop {
        let draws: Vec<f64> = alpha
            .iter()
            .map(|&a| Gamma::new(a, 1.0).expect("validated shape").sample(rng))
            .collect();
        let sum: f64 = draws.iter().sum();
        // Very small alphas can underflow every draw; redraw in that case.
        if sum > 0.0 && sum.is_finite() {
            return Ok(draws.into_iter().map(|g| g / sum).collect());
        }
    }
}

/// Split `total` into integer parts proportional to `shares` using the
/// largest-remainder rule; ties go to the lower index.
pub fn largest_remainder_counts(shares: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = shares.iter().sum();
    if shares.is_empty() {
        return Vec::new();
    }
    let quotas: Vec<f64> = shares.iter().map(|s| s / sum * total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Uniform point in the disc of radius `radius` around `center`.
pub fn uniform_in_disc<R: Rng + ?Sized>(center: Point, radius: f64, rng: &mut R) -> Point {
    let r = radius * rng.random::<f64>().sqrt();
    let theta = std::f64::consts::TAU * rng.random::<f64>();
    Point::new(center.x + r * theta.cos(), center.y + r * theta.sin())
}

/// Generate the users of one realization.
pub fn generate_users<R: Rng + ?Sized>(
    scenario: &TrafficScenario,
    beam_centers: &[Point],
    rng: &mut R,
) -> Result<Vec<User>> {
    let k = scenario.beam_count();
    if beam_centers.len() != k {
        return Err(Error::BeamCountMismatch {
            expected: k,
            got: beam_centers.len(),
        });
    }
    match scenario.kind {
        ScenarioKind::Ht | ScenarioKind::Whs => {
            if scenario.alpha.len() != k {
                return Err(Error::BeamCountMismatch {
                    expected: k,
                    got: scenario.alpha.len(),
                });
            }
            let shares = sample_dirichlet(&scenario.alpha, rng)?;
            let counts = largest_remainder_counts(&shares, scenario.user_count);
            let mut users = Vec::with_capacity(scenario.user_count);
            for (center, &count) in beam_centers.iter().zip(&counts) {
                for _ in 0..count {
                    users.push(User {
                        position: uniform_in_disc(*center, scenario.beam_radius_km, rng),
                        demand: scenario.demand_per_user,
                    });
                }
            }
            Ok(users)
        }
        ScenarioKind::Rt => {
            let grid = scenario.population.as_ref().ok_or_else(|| {
                Error::PopulationGrid("RT scenario without a population grid".into())
            })?;
            let sampler = grid.sampler()?;
            Ok((0..scenario.user_count)
                .map(|_| User {
                    position: sampler.sample(rng),
                    demand: scenario.demand_per_user,
                })
                .collect())
        }
    }
}

/// Nonnegative demand weights on a rectangular raster mapped to km.
///
/// Row 0 is the northern edge (`y_max`), column 0 the western edge (`x_min`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationGrid {
    pub rows: usize,
    pub cols: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    /// Row-major weights.
    pub weights: Vec<f64>,
}

impl PopulationGrid {
    pub fn new(
        rows: usize,
        cols: usize,
        bounds: (f64, f64, f64, f64),
        weights: Vec<f64>,
    ) -> Result<Self> {
        let (x_min, x_max, y_min, y_max) = bounds;
        let grid = Self {
            rows,
            cols,
            x_min,
            x_max,
            y_min,
            y_max,
            weights,
        };
        grid.validate()?;
        Ok(grid)
    }

    fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::PopulationGrid(
                "grid must have at least one cell".into(),
            ));
        }
        if self.weights.len() != self.rows * self.cols {
            return Err(Error::PopulationGrid(format!(
                "expected {} weights, found {}",
                self.rows * self.cols,
                self.weights.len()
            )));
        }
        let bounds = [self.x_min, self.x_max, self.y_min, self.y_max];
        if bounds.iter().any(|b| !b.is_finite())
            || self.x_max <= self.x_min
            || self.y_max <= self.y_min
        {
            return Err(Error::PopulationGrid("invalid bounds".into()));
        }
        if let Some(i) = self.weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::PopulationGrid(format!(
                "non-finite weight at cell {i}"
            )));
        }
        if let Some(i) = self.weights.iter().position(|&w| w < 0.0) {
            return Err(Error::PopulationGrid(format!(
                "negative weight {} at cell {i}",
                self.weights[i]
            )));
        }
        if !self.weights.iter().any(|&w| w > 0.0) {
            return Err(Error::PopulationGrid("all weights are zero".into()));
        }
        Ok(())
    }

    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.cols + col]
    }

    pub fn cell_width(&self) -> f64 {
        (self.x_max - self.x_min) / self.cols as f64
    }

    pub fn cell_height(&self) -> f64 {
        (self.y_max - self.y_min) / self.rows as f64
    }

    /// (x range, y range) of a cell.
    pub fn cell_bounds(&self, row: usize, col: usize) -> ((f64, f64), (f64, f64)) {
        let x0 = self.x_min + col as f64 * self.cell_width();
        let y1 = self.y_max - row as f64 * self.cell_height();
        ((x0, x0 + self.cell_width()), (y1 - self.cell_height(), y1))
    }

    /// Cell containing `p`, if inside the bounds.
    pub fn cell_of(&self, p: Point) -> Option<(usize, usize)> {
        if p.x < self.x_min || p.x > self.x_max || p.y < self.y_min || p.y > self.y_max {
            return None;
        }
        let col = (((p.x - self.x_min) / self.cell_width()) as usize).min(self.cols - 1);
        let row = (((self.y_max - p.y) / self.cell_height()) as usize).min(self.rows - 1);
        Some((row, col))
    }

    pub fn sampler(&self) -> Result<GridSampler<'_>> {
        self.validate()?;
        let mut cumulative = Vec::with_capacity(self.weights.len());
        let mut acc = 0.0;
        for &w in &self.weights {
            acc += w;
            cumulative.push(acc);
        }
        Ok(GridSampler {
            grid: self,
            cumulative,
        })
    }

    /// Parse the plain-text format: a header line
    /// `rows cols x_min_km x_max_km y_min_km y_max_km` followed by
    /// `rows * cols` whitespace-separated weights in row-major order.
    /// Lines starting with `#` are comments.
    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens = text
            .lines()
            .filter(|l| !l.trim_start().starts_with('#'))
            .flat_map(str::split_whitespace);
        let mut next = |what: &str| {
            tokens
                .next()
                .ok_or_else(|| Error::PopulationGrid(format!("missing {what}")))
        };
        let rows: usize = parse_token(next("rows")?, "rows")?;
        let cols: usize = parse_token(next("cols")?, "cols")?;
        let x_min: f64 = parse_token(next("x_min")?, "x_min")?;
        let x_max: f64 = parse_token(next("x_max")?, "x_max")?;
        let y_min: f64 = parse_token(next("y_min")?, "y_min")?;
        let y_max: f64 = parse_token(next("y_max")?, "y_max")?;
        let mut weights = Vec::with_capacity(rows.saturating_mul(cols).min(1 << 24));
        for i in 0..rows * cols {
            weights.push(parse_token(next(&format!("weight {i}"))?, "weight")?);
        }
        if tokens.next().is_some() {
            return Err(Error::PopulationGrid("trailing data after weights".into()));
        }
        Self::new(rows, cols, (x_min, x_max, y_min, y_max), weights)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{} {} {} {} {} {}\n",
            self.rows, self.cols, self.x_min, self.x_max, self.y_min, self.y_max
        );
        for row in self.weights.chunks(self.cols) {
            let line: Vec<String> = row.iter().map(|w| format!("{w}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(self.to_text().as_bytes())?;
        Ok(())
    }

    /// Synthetic strongly skewed raster: a sparse high plateau in the west,
    /// a dense basin in the east with two large metropolitan peaks and a
    /// handful of towns. Used when no population file is configured.
    pub fn synthetic_skewed(rows: usize, cols: usize, width_km: f64, height_km: f64) -> Self {
        // (x, y, peak weight, spread km) as fractions of the region size.
        const CITIES: [(f64, f64, f64, f64); 8] = [
            (0.58, 0.62, 900.0, 28.0),
            (0.86, 0.36, 1000.0, 32.0),
            (0.70, 0.80, 160.0, 18.0),
            (0.78, 0.18, 140.0, 16.0),
            (0.62, 0.30, 120.0, 20.0),
            (0.92, 0.70, 110.0, 18.0),
            (0.45, 0.48, 60.0, 14.0),
            (0.30, 0.15, 25.0, 12.0),
        ];
        let mut weights = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let x = (c as f64 + 0.5) / cols as f64 * width_km;
                let y = height_km - (r as f64 + 0.5) / rows as f64 * height_km;
                // Background density grows from the western plateau to the
                // eastern basin.
                let fx = x / width_km;
                let mut w = 0.2 + 6.0 * fx.powi(3);
                for &(cx, cy, peak, spread) in &CITIES {
                    let dx = x - cx * width_km;
                    let dy = y - cy * height_km;
                    w += peak * (-(dx * dx + dy * dy) / (2.0 * spread * spread)).exp();
                }
                weights.push((w * 1000.0).round() / 1000.0);
            }
        }
        Self::new(rows, cols, (0.0, width_km, 0.0, height_km), weights)
            .expect("synthetic grid is valid")
    }
}

fn parse_token<T: FromStr>(tok: &str, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::PopulationGrid(format!("cannot parse {what} from `{tok}`")))
}

/// Load a population grid file.
pub fn load_population_grid(path: impl AsRef<Path>) -> Result<PopulationGrid> {
    let text = fs::read_to_string(path.as_ref())?;
    PopulationGrid::parse(&text)
}

/// Inverse-CDF sampler over grid cells, uniform inside the chosen cell.
pub struct GridSampler<'a> {
    grid: &'a PopulationGrid,
    cumulative: Vec<f64>,
}

impl GridSampler<'_> {
    pub fn sample_cell<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("nonempty grid");
        let target = rng.random::<f64>() * total;
        let idx = self.cumulative.partition_point(|&c| c <= target);
        // Skip zero-weight cells that share the same cumulative value.
        idx.min(self.cumulative.len() - 1)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let cell = self.sample_cell(rng);
        let (row, col) = (cell / self.grid.cols, cell % self.grid.cols);
        let ((x0, x1), (y0, y1)) = self.grid.cell_bounds(row, col);
        Point::new(
            x0 + (x1 - x0) * rng.random::<f64>(),
            y0 + (y1 - y0) * rng.random::<f64>(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::distance;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dirichlet_sums_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let s = sample_dirichlet(&[1.0; 6], &mut rng).unwrap();
            let sum: f64 = s.iter().sum();
            assert!((sum - 1.0).abs() <= 1e-12);
            assert!(s.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }

    #[test]
    fn dirichlet_rejects_nonpositive_alpha() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            sample_dirichlet(&[0.0, 1.0], &mut rng),
            Err(Error::InvalidAlpha { index: 0, .. })
        ));
        assert!(sample_dirichlet(&[1.0, -2.0], &mut rng).is_err());
    }

    #[test]
    fn dirichlet_mean_matches_concentration() {
        let alpha = [4.0, 4.0, 1.0, 1.0, 1.0, 1.0];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let mut mean = [0.0; 6];
        for _ in 0..n {
            for (m, s) in mean
                .iter_mut()
                .zip(sample_dirichlet(&alpha, &mut rng).unwrap())
            {
                *m += s / n as f64;
            }
        }
        let expected = [
            1.0 / 3.0,
            1.0 / 3.0,
            1.0 / 12.0,
            1.0 / 12.0,
            1.0 / 12.0,
            1.0 / 12.0,
        ];
        for (m, e) in mean.iter().zip(expected) {
            assert!((m - e).abs() < 0.01, "{m} vs {e}");
        }
    }

    #[test]
    fn largest_remainder_uniform_shares() {
        let counts = largest_remainder_counts(&[1.0 / 6.0; 6], 272);
        assert_eq!(counts.iter().sum::<usize>(), 272);
        let mut sorted = counts.clone();
        sorted.sort();
        assert_eq!(sorted, vec![45, 45, 45, 45, 46, 46]);
    }

    #[test]
    fn ht_users_inside_seed_discs() {
        let scenario = TrafficScenario::homogeneous();
        let centers = scenario.beam_centers();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let users = generate_users(&scenario, &centers, &mut rng).unwrap();
        assert_eq!(users.len(), 272);
        let total: f64 = users.iter().map(|u| u.demand).sum();
        assert_eq!(total, 6800.0);
        for u in &users {
            let nearest = centers
                .iter()
                .map(|c| distance(*c, u.position))
                .fold(f64::INFINITY, f64::min);
            assert!(nearest <= 50.0 + 1e-9);
        }
    }

    #[test]
    fn beam_count_mismatch() {
        let scenario = TrafficScenario::homogeneous();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let centers = vec![Point::new(0.0, 0.0); 4];
        assert!(matches!(
            generate_users(&scenario, &centers, &mut rng),
            Err(Error::BeamCountMismatch {
                expected: 6,
                got: 4
            })
        ));
    }

    #[test]
    fn grid_parse_direct() {
        let g = PopulationGrid::parse("2 2 0 10 0 10\n1 0\n0 0\n").unwrap();
        assert_eq!(g.weight(0, 0), 1.0);
        assert_eq!(g.weights.iter().filter(|&&w| w > 0.0).count(), 1);
    }

    #[test]
    fn grid_rejects_negative_and_zero() {
        assert!(PopulationGrid::parse("1 2 0 1 0 1\n1 -1\n").is_err());
        assert!(PopulationGrid::parse("1 2 0 1 0 1\n0 0\n").is_err());
        assert!(PopulationGrid::parse("1 2 0 1 0 1\n0\n").is_err());
        assert!(PopulationGrid::parse("1 2 0 1 0 1\n1 x\n").is_err());
    }

    #[test]
    fn rt_single_cell_keeps_users_inside() {
        let mut w = vec![0.0; 12];
        w[5] = 3.0;
        let grid = PopulationGrid::new(3, 4, (0.0, 400.0, 0.0, 300.0), w).unwrap();
        let ((x0, x1), (y0, y1)) = grid.cell_bounds(1, 1);
        let mut scenario = TrafficScenario::real_traffic(grid);
        scenario.user_count = 500;
        let centers = scenario.beam_centers();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let users = generate_users(&scenario, &centers, &mut rng).unwrap();
        for u in users {
            assert!(u.position.x >= x0 && u.position.x <= x1);
            assert!(u.position.y >= y0 && u.position.y <= y1);
        }
    }
}
