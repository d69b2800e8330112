//! WebAssembly bindings for the demo page in `www/`. Every export returns a
//! JSON string; the `*_json` functions are the same calls for native use.

use hexperc::bounds::{decomposition_table, q_lower_bound, threshold_upper_bound};
use hexperc::census::border_census;
use hexperc::clusters::{cluster_at, external_border};
use hexperc::connmat::{spectral_summary, theorem4_matrix};
use hexperc::field::{KeyedField, Occupancy, Window};
use hexperc::lattice::{immerse, PlanarPoint};
use hexperc::{ProbabilityMode, Site};
use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Largest window the page may ask for.
pub const MAX_HALF_WIDTH: u32 = 40;
/// Largest census the page may ask for; size 8 takes well under a second.
pub const MAX_CENSUS_SIZE: usize = 8;

#[derive(Serialize)]
struct Point {
    x: f64,
    y: f64,
}

impl From<PlanarPoint> for Point {
    fn from(p: PlanarPoint) -> Self {
        Point { x: p.x, y: p.y }
    }
}

#[derive(Serialize)]
struct SampleView {
    c: f64,
    #[serde(rename = "L")]
    l: u32,
    seed: u32,
    occupied: Vec<Point>,
    vacant: Vec<Point>,
    cluster: Vec<Point>,
    touches_boundary: bool,
    /// External border of a finite origin cluster, as a closed polygon.
    border: Option<Vec<Point>>,
}

fn points(sites: impl IntoIterator<Item = Site>) -> Vec<Point> {
    sites.into_iter().map(|s| immerse(s).into()).collect()
}

/// One sample of the field, the origin cluster and its external border.
pub fn sample_json(c: f64, half_width: u32, seed: u32) -> Result<String, String> {
    if half_width > MAX_HALF_WIDTH {
        return Err(format!("half-width at most {MAX_HALF_WIDTH}"));
    }
    let window = Window::new(half_width).map_err(|e| e.to_string())?;
    let field = KeyedField::new(window, c, seed as u64, 0).map_err(|e| e.to_string())?;
    let (occ, vac): (Vec<Site>, Vec<Site>) = window.sites().partition(|&s| field.is_occupied(s));
    let cluster = cluster_at(&field, Site::ORIGIN);
    let touches_boundary = cluster.as_ref().is_some_and(|w| w.touches_boundary);
    let border = match &cluster {
        // the border depends on W alone, so trace it on a window with room to spare
        Some(w) if !w.touches_boundary => {
            let room = Window::new(w.required_half_width().max(half_width)).map_err(|e| e.to_string())?;
            let b = external_border(w, room).map_err(|e| e.to_string())?;
            Some(points(b.vertices().iter().copied()))
        }
        _ => None,
    };
    let view = SampleView {
        c: field.c,
        l: half_width,
        seed,
        occupied: points(occ),
        vacant: points(vac),
        cluster: cluster.map(|w| points(w.sites().iter().copied())).unwrap_or_default(),
        touches_boundary,
        border,
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

/// The threshold bound and the non-percolation lower bound at `c`.
pub fn bound_json(c: f64, c_constant: f64) -> Result<String, String> {
    let m = theorem4_matrix();
    let summary = spectral_summary(&m).map_err(|e| e.to_string())?;
    let c_star = threshold_upper_bound(summary.lambda0).map_err(|e| e.to_string())?;
    let report = q_lower_bound(c, summary.lambda0, m.n_star(), c_constant, None).map_err(|e| e.to_string())?;
    serde_json::to_string(&json!({
        "lambda0": summary.lambda0,
        "c_star_upper": c_star,
        "report": report,
    }))
    .map_err(|e| e.to_string())
}

/// Border counts and decomposition partial sums for clusters up to size `k`.
pub fn decompose_json(c: f64, k: usize) -> Result<String, String> {
    if k == 0 || k > MAX_CENSUS_SIZE {
        return Err(format!("size must lie in 1..={MAX_CENSUS_SIZE}"));
    }
    let census = border_census(k).map_err(|e| e.to_string())?;
    let exact = decomposition_table(c, ProbabilityMode::Exact, &census).map_err(|e| e.to_string())?;
    let paper = decomposition_table(c, ProbabilityMode::Paper, &census).map_err(|e| e.to_string())?;
    serde_json::to_string(&json!({
        "c": c,
        "k": k,
        "clusters": census.total_clusters(),
        "r_n": census.rn_rows(),
        "exact": exact,
        "paper": paper,
    }))
    .map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn sample(c: f64, half_width: u32, seed: u32) -> Result<String, JsError> {
    sample_json(c, half_width, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn bound(c: f64, c_constant: f64) -> Result<String, JsError> {
    bound_json(c, c_constant).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn decompose(c: f64, k: usize) -> Result<String, JsError> {
    decompose_json(c, k).map_err(|e| JsError::new(&e))
}
