//! wasm exports. Seeds are u32 here so the page can pass plain numbers;
//! the simulator seed space is not meaningfully narrowed by that.

use wasm_bindgen::prelude::*;

#[wasm_bindgen]
pub fn offset_trace(scenario: &str, seed: u32, duration_s: f64, max_points: u32) -> String {
    crate::offset_trace_json(scenario, seed as u64, duration_s, max_points as usize)
}

#[wasm_bindgen]
pub fn scheme_comparison(seed: u32, duration_s: f64) -> String {
    crate::scheme_comparison_json(seed as u64, duration_s)
}

#[wasm_bindgen]
pub fn carriage_gap(
    start_skew_us: f64,
    v_max_m_s: f64,
    a_max_m_s2: f64,
    stroke_m: f64,
    grid_us: f64,
) -> String {
    crate::carriage_gap_json(start_skew_us, v_max_m_s, a_max_m_s2, stroke_m, grid_us)
}
