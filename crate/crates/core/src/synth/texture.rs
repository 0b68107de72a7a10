//! Procedural surface texture from integer hashing: value noise at two
//! octaves plus a faint grid, tinted per texture identity.

const FINE_CELL: f64 = 0.025;
const COARSE_CELL: f64 = 0.1;
const GRID_PITCH: f64 = 0.25;
const GRID_HALF_WIDTH: f64 = 0.006;

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn hash(seed: u64, texture: u32, face: u8, octave: u8, i: i64, j: i64) -> f64 {
    let mut h = splitmix(seed ^ 0x5151);
    for v in [texture as u64, face as u64, octave as u64, i as u64, j as u64] {
        h = splitmix(h ^ v);
    }
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn value_noise(seed: u64, texture: u32, face: u8, octave: u8, s: f64, t: f64) -> f64 {
    let (i, j) = (s.floor(), t.floor());
    let (fx, fy) = (s - i, t - j);
    let (i, j) = (i as i64, j as i64);
    let smooth = |f: f64| f * f * (3.0 - 2.0 * f);
    let (wx, wy) = (smooth(fx), smooth(fy));
    let v = |di: i64, dj: i64| hash(seed, texture, face, octave, i + di, j + dj);
    let top = v(0, 0) * (1.0 - wx) + v(1, 0) * wx;
    let bottom = v(0, 1) * (1.0 - wx) + v(1, 1) * wx;
    top * (1.0 - wy) + bottom * wy
}

/// Intensity in `[0, 1]` at metric surface coordinates `(s, t)`.
pub fn intensity(seed: u64, texture: u32, face: u8, s: f64, t: f64) -> f64 {
    let fine = value_noise(seed, texture, face, 0, s / FINE_CELL, t / FINE_CELL);
    let coarse = value_noise(seed, texture, face, 1, s / COARSE_CELL, t / COARSE_CELL);
    let mut v = 0.6 * fine + 0.4 * coarse;
    let on_grid = |x: f64| {
        let r = x.rem_euclid(GRID_PITCH);
        r < GRID_HALF_WIDTH || GRID_PITCH - r < GRID_HALF_WIDTH
    };
    if on_grid(s) || on_grid(t) {
        v *= 0.35;
    }
    v
}

/// Base color of a texture identity.
pub fn tint(seed: u64, texture: u32) -> [f64; 3] {
    let h = splitmix(splitmix(seed ^ 0x7107) ^ texture as u64);
    std::array::from_fn(|k| 0.35 + 0.65 * ((h >> (16 * k)) & 0xFFFF) as f64 / 65535.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_bounded() {
        for k in 0..500 {
            let (s, t) = (k as f64 * 0.0137 - 2.0, k as f64 * 0.0071);
            let a = intensity(3, 7, 2, s, t);
            assert_eq!(a, intensity(3, 7, 2, s, t));
            assert!((0.0..=1.0).contains(&a));
        }
    }

    #[test]
    fn textures_differ() {
        let diff: f64 = (0..200)
            .map(|k| (intensity(0, 1, 0, k as f64 * 0.01, 0.3) - intensity(0, 2, 0, k as f64 * 0.01, 0.3)).abs())
            .sum();
        assert!(diff > 5.0);
    }
}
