//! PNG rendering of cost maps.
//!
//! Row `i` of the map becomes image row `i` and column `j` image column `j`,
//! so the robot's forward direction points up and its left points left.
//! Value 0 is black and 1 is white.

use crate::costmap::CostMap;

const ROBOT: [u8; 3] = [220, 40, 40];
const TRACK: [u8; 3] = [40, 110, 230];

/// Image pixel of a map cell value.
pub fn gray_level(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// RGB raster of `map`, each cell drawn as a `scale × scale` block, with the
/// robot marked at the centre and `track` (map cells) overlaid.
pub fn render_rgb(map: &CostMap, scale: usize, track: &[(usize, usize)]) -> (usize, Vec<u8>) {
    let n = map.side();
    let scale = scale.max(1);
    let w = n * scale;
    let mut px = vec![0u8; w * w * 3];
    let mut paint = |i: usize, j: usize, rgb: [u8; 3]| {
        for di in 0..scale {
            for dj in 0..scale {
                let k = ((i * scale + di) * w + j * scale + dj) * 3;
                px[k..k + 3].copy_from_slice(&rgb);
            }
        }
    };
    for i in 0..n {
        for j in 0..n {
            let g = gray_level(map.get(i, j));
            paint(i, j, [g; 3]);
        }
    }
    for &(i, j) in track {
        if i < n && j < n {
            paint(i, j, TRACK);
        }
    }
    let (ci, cj) = map.centre();
    for (di, dj) in [(0, 0), (-1, 0), (1, 0), (0, -1), (0, 1)] {
        let (i, j) = (ci as isize + di, cj as isize + dj);
        if i >= 0 && j >= 0 && (i as usize) < n && (j as usize) < n {
            paint(i as usize, j as usize, ROBOT);
        }
    }
    (w, px)
}

/// PNG bytes of [`render_rgb`]. Contains no timestamps.
pub fn render_png(map: &CostMap, scale: usize, track: &[(usize, usize)]) -> Vec<u8> {
    let (w, px) = render_rgb(map, scale, track);
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, w as u32, w as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().expect("in-memory PNG header");
        writer.write_image_data(&px).expect("in-memory PNG data");
    }
    out
}
