use crate::geom::{Rect, Vec2};
use std::cmp::Ordering;

/// Regular grid of cell centers over `extents`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub origin: Vec2,
    pub spacing: f64,
    pub extents: Rect,
}

impl GridSpec {
    pub fn over(extents: Rect, spacing: f64) -> Self {
        assert!(spacing > 0.0, "grid spacing must be positive");
        GridSpec {
            origin: Vec2::new(extents.x0, extents.y0),
            spacing,
            extents,
        }
    }

    /// All cell centers `origin + spacing·(i + ½, j + ½)` inside the extents,
    /// in row-major order.
    pub fn points(&self) -> Vec<Vec2> {
        let nx = ((self.extents.x1 - self.origin.x) / self.spacing + 1e-9).floor() as i64;
        let ny = ((self.extents.y1 - self.origin.y) / self.spacing + 1e-9).floor() as i64;
        let mut out = Vec::new();
        for i in 0..nx.max(0) {
            for j in 0..ny.max(0) {
                let p = Vec2::new(
                    self.origin.x + self.spacing * (i as f64 + 0.5),
                    self.origin.y + self.spacing * (j as f64 + 0.5),
                );
                if self.extents.contains(p) {
                    out.push(p);
                }
            }
        }
        out
    }

    /// Points sorted by distance from `query`, ties by x then y.
    pub fn nearest_first(&self, query: Vec2) -> Vec<Vec2> {
        let mut pts = self.points();
        pts.sort_by(|a, b| nearest_cmp(query, *a, *b));
        pts
    }
}

pub(crate) fn nearest_cmp(query: Vec2, a: Vec2, b: Vec2) -> Ordering {
    // distances agreeing to 1e-9 count as ties
    let (da, db) = (a.dist(query), b.dist(query));
    if (da - db).abs() > 1e-9 {
        return da.total_cmp(&db);
    }
    a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_by_ten() {
        let g = GridSpec::over(Rect::new(0.0, 0.0, 2.5, 2.5), 0.25);
        let pts = g.points();
        assert_eq!(pts.len(), 100);
        assert_eq!(pts[0], Vec2::new(0.125, 0.125));
    }

    #[test]
    fn nearest_first_ties() {
        let g = GridSpec::over(Rect::new(0.0, 0.0, 1.0, 1.0), 0.5);
        let order = g.nearest_first(Vec2::new(0.5, 0.5));
        // all four centers are equidistant: x then y
        assert_eq!(
            order,
            vec![
                Vec2::new(0.25, 0.25),
                Vec2::new(0.25, 0.75),
                Vec2::new(0.75, 0.25),
                Vec2::new(0.75, 0.75)
            ]
        );
    }
}
