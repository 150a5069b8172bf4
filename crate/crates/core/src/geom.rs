//! Survey-region geometry: rectangles, polygons, and the integration grid
//! used for spatial quadrature.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Planar point in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Region boundary: an axis-aligned rectangle or a simple polygon.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum RegionShape {
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
    Polygon(Vec<Point>),
}

/// Regular lattice of cell centres with a common cell area, masked to the
/// region. All spatial integrals in the crate are sums over this grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntegrationGrid {
    pub cells: Vec<Point>,
    pub cell_area: f64,
}

/// Survey region with its derived area and integration grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurveyRegion {
    shape: RegionShape,
    area: f64,
    grid: IntegrationGrid,
}

pub const DEFAULT_GRID_RESOLUTION: usize = 64;

/// Tolerance on |grid coverage - true area| relative to the true area.
const GRID_AREA_RTOL: f64 = 0.005;

impl SurveyRegion {
    /// Axis-aligned rectangular region. The grid tiles the rectangle exactly.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64, resolution: usize) -> Result<Self> {
        if ![x0, y0, x1, y1].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidConfig("rectangle bounds must be finite".into()));
        }
        if x1 <= x0 || y1 <= y0 {
            return Err(Error::InvalidConfig(format!(
                "rectangle ({x0}, {y0}, {x1}, {y1}) has non-positive extent"
            )));
        }
        if resolution == 0 {
            return Err(Error::InvalidConfig("grid resolution must be positive".into()));
        }
        let shape = RegionShape::Rect { x0, y0, x1, y1 };
        let area = (x1 - x0) * (y1 - y0);
        let grid = build_grid(&shape, resolution);
        let region = SurveyRegion { shape, area, grid };
        region.check_grid()?;
        Ok(region)
    }

    /// Simple polygon region given by its vertices in order (closed
    /// implicitly). The grid covers the bounding box masked to the polygon.
    pub fn polygon(vertices: Vec<Point>, resolution: usize) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidConfig("polygon needs at least 3 vertices".into()));
        }
        if vertices.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidConfig("polygon vertices must be finite".into()));
        }
        let area = shoelace_area(&vertices);
        if area <= 0.0 {
            return Err(Error::InvalidConfig("polygon area must be positive".into()));
        }
        let shape = RegionShape::Polygon(vertices);
        let grid = build_grid(&shape, resolution);
        let region = SurveyRegion { shape, area, grid };
        region.check_grid()?;
        Ok(region)
    }

    fn check_grid(&self) -> Result<()> {
        let covered = self.grid.cells.len() as f64 * self.grid.cell_area;
        if (covered - self.area).abs() > GRID_AREA_RTOL * self.area {
            return Err(Error::GridAreaMismatch { covered, area: self.area });
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn grid(&self) -> &IntegrationGrid {
        &self.grid
    }

    pub fn shape(&self) -> &RegionShape {
        &self.shape
    }

    pub fn contains(&self, p: Point) -> bool {
        match &self.shape {
            RegionShape::Rect { x0, y0, x1, y1 } => {
                p.x >= *x0 && p.x <= *x1 && p.y >= *y0 && p.y <= *y1
            }
            RegionShape::Polygon(v) => point_in_polygon(p, v),
        }
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        match &self.shape {
            RegionShape::Rect { x0, y0, x1, y1 } => (Point::new(*x0, *y0), Point::new(*x1, *y1)),
            RegionShape::Polygon(v) => {
                let (mut lo, mut hi) = (v[0], v[0]);
                for p in v {
                    lo.x = lo.x.min(p.x);
                    lo.y = lo.y.min(p.y);
                    hi.x = hi.x.max(p.x);
                    hi.y = hi.y.max(p.y);
                }
                (lo, hi)
            }
        }
    }

    /// Uniform draw over the region by rejection from the bounding box.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let (lo, hi) = self.bounding_box();
        loop {
            let p = Point::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
            if self.contains(p) {
                return p;
            }
        }
    }

    /// Rebuild the grid at a different resolution, keeping the shape.
    pub fn with_resolution(&self, resolution: usize) -> Result<Self> {
        match &self.shape {
            RegionShape::Rect { x0, y0, x1, y1 } => {
                Self::rectangle(*x0, *y0, *x1, *y1, resolution)
            }
            RegionShape::Polygon(v) => Self::polygon(v.clone(), resolution),
        }
    }
}

fn build_grid(shape: &RegionShape, resolution: usize) -> IntegrationGrid {
    let (lo, hi) = match shape {
        RegionShape::Rect { x0, y0, x1, y1 } => (Point::new(*x0, *y0), Point::new(*x1, *y1)),
        RegionShape::Polygon(v) => {
            let (mut lo, mut hi) = (v[0], v[0]);
            for p in v {
                lo.x = lo.x.min(p.x);
                lo.y = lo.y.min(p.y);
                hi.x = hi.x.max(p.x);
                hi.y = hi.y.max(p.y);
            }
            (lo, hi)
        }
    };
    let dx = (hi.x - lo.x) / resolution as f64;
    let dy = (hi.y - lo.y) / resolution as f64;
    let mut cells = Vec::with_capacity(resolution * resolution);
    for i in 0..resolution {
        for j in 0..resolution {
            let p = Point::new(lo.x + (i as f64 + 0.5) * dx, lo.y + (j as f64 + 0.5) * dy);
            let inside = match shape {
                RegionShape::Rect { .. } => true,
                RegionShape::Polygon(v) => point_in_polygon(p, v),
            };
            if inside {
                cells.push(p);
            }
        }
    }
    IntegrationGrid { cells, cell_area: dx * dy }
}

fn shoelace_area(vertices: &[Point]) -> f64 {
    let n = vertices.len();
    let mut twice = 0.0;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        twice += a.x * b.y - b.x * a.y;
    }
    twice.abs() / 2.0
}

fn point_in_polygon(p: Point, vertices: &[Point]) -> bool {
    // Ray casting; boundary points count as inside often enough for grid masking.
    let n = vertices.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (vertices[i], vertices[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}
